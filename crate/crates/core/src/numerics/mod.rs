//! Dense tensors, reverse-mode differentiation and the RMSProp optimizer.

mod params;
mod rmsprop;
mod tape;
mod tensor;

pub use params::{BoundParams, ParamId, ParamStore, Parameter};
pub use rmsprop::{RmsPropConfig, RmsPropState};
pub use tape::{ElementwiseOp, Gradients, Tape, Var};
pub use tensor::Tensor;
