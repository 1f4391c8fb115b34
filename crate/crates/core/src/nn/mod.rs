//! Minimal dense-network core.
//!
//! Training and inference run in `f32`; every structure is generic over
//! [`Scalar`] so the same code can be instantiated in `f64` for gradient
//! checking against the finite-difference oracle in [`gradcheck`].

mod adamax;
mod array;
pub mod gradcheck;
mod layer;
mod stack;

pub use adamax::{AdamaxHyper, AdamaxState};
pub use array::{Array, Scalar};
pub use gradcheck::finite_difference_grad;
pub use layer::{Activation, DenseLayer};
pub use stack::{DenseStack, StackGradients, Tape};

use thiserror::Error;

/// Errors from the dense-network core.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("tape does not belong to this stack (layer geometry differs)")]
    TapeMismatch,
    #[error("finite-difference step must be positive, got {0}")]
    BadEpsilon(f64),
}

pub type Result<T> = std::result::Result<T, NnError>;
