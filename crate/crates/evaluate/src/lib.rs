//! Lesion segmentation evaluation: overlap, volume, lesion-count and
//! distance metrics, case-level model ranking, lesion-size strata and
//! voxel-wise error maps.

pub mod annotations;
pub mod components;
pub mod edt;
pub mod error;
pub mod maps;
pub mod metrics;
pub mod ranking;
pub mod report;
pub mod strata;

pub use components::{connected_components, connected_components_with, Connectivity, LesionComponents};
pub use error::{EvalError, Result};
pub use maps::{fwhm_to_sigma, gaussian_smooth, raw_maps, voxelwise_maps, VoxelwiseMaps};
pub use metrics::{ald, avd, dice, evaluate_case, hd95, hd95_with, lesion_f1, precision_recall, EmptyDistance, Metric, MetricOptions, MetricRecord};
pub use ranking::{case_level_ranking, RankingTable};
pub use report::{metrics_csv, ranking_report};
pub use strata::{stratify, Stratum};
