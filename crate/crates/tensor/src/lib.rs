//! A small, deterministic f32 tensor library with reverse-mode automatic
//! differentiation.
//!
//! Tensors are immutable and cheaply clonable. Any operation whose inputs
//! require gradients records a node; [`Tensor::backward`] replays the
//! recorded graph in reverse topological order ([`Tape`]).

mod backprop;
mod error;
pub mod gradcheck;
mod ops;
mod optim;
pub mod rng;
pub mod shape;
mod tensor;
mod var;

pub use backprop::Tape;
pub use error::{Result, TensorError};
pub use optim::{adam_step, AdamConfig, OptimState};
pub use rng::Rng;
pub use tensor::{debug_checks, set_debug_checks, BackwardFn, Init, Tensor};
pub use var::{Var, VarMap};
