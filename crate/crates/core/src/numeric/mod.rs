//! Dense tensors, reverse-mode gradients and the Adam optimizer.

mod adam;
pub mod gradcheck;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig, Param};
pub use tape::{softmax_values, Gradients, Tape, Var};
pub use tensor::{Scalar, Tensor};
