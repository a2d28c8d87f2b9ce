//! Forward and backward kernels. Each backward takes the saved forward
//! inputs plus the output gradient and returns input gradients.

pub mod conv;
pub mod elementwise;
pub mod norm;
pub mod pool;
pub mod resize;
