//! Segmentation models and their training: the U-Net family, imbalance-aware
//! losses, supervised training, Mean Teacher adaptation and ensembling.

pub mod adapt;
pub mod checkpoint;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod gradcheck;
pub mod losses;
pub mod network;
pub mod training;

pub use config::{AttentionKind, AugmentationSpec, BlockKind, LossConfig, LossKind, MTConfig, NetworkConfig, TrainConfig};
pub use error::{CoreError, Result};
pub use network::{build_network, extract_attention_maps, forward, ForwardOutput, Mode, NetworkWeights};
