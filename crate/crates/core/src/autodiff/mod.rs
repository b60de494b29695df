//! A small dense reverse-mode autodiff engine.

pub mod gradcheck;
mod tape;
mod tensor;

pub use tape::{Gradients, Index, Tape, Var, GROUP_NORM_EPS};
pub use tensor::Tensor;
