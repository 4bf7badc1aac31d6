//! Shared numeric foundations: dense real tensors backed by a BLAS-style
//! multiply, a unitary DFT plan, a reverse-mode gradient tape, Adam, and
//! finite-difference checking.

pub mod adam;
pub mod dft;
pub mod fd;
pub mod streams;
pub mod tape;
pub mod tensor;

pub use adam::{OptimizerState, ParamBlock};
pub use dft::{Cx, DftPlan};
pub use fd::{finite_diff_grad, max_relative_error};
pub use streams::{derive_rng, derive_seed};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;
