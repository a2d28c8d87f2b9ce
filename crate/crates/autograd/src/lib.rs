//! A deliberately small reverse-mode differentiation engine for volumetric
//! convolutional networks.
//!
//! Every tensor is five-dimensional, `[batch, channels, x, y, z]`, and within
//! one channel the `x` axis varies fastest (NIfTI order). Parameters use the
//! same layout: a convolution kernel is `[out, in, kx, ky, kz]`, a per-channel
//! vector is `[1, c, 1, 1, 1]`.
//!
//! Network code is written once against [`Backend`]. [`Tape`] records every
//! operation for a later [`Tape::backward`]; [`Eval`] runs the same code
//! without recording anything.

mod backend;
mod error;
mod gemm;
pub mod kernels;
mod tape;
mod tensor;

pub use backend::{Backend, Eval, ParamSource, PoolKind};
pub use error::{AutogradError, Result};
pub use kernels::conv::ConvGeom;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{Dims, Tensor};
