//! A small dense float64 tensor engine.
//!
//! Forward computations are recorded on a [`Graph`] and differentiated in
//! reverse. Parameters live in a [`ParamStore`] that outlives individual
//! graphs; [`Adam`] updates the store from accumulated gradients and
//! [`grad_check`] compares reverse-mode gradients with central differences.
//!
//! Only rank-2 values are used internally; a vector of length `n` is a
//! `[1, n]` row.

mod adam;
mod error;
mod gradcheck;
mod graph;
mod layers;
mod store;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use error::NnError;
pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{Gradients, Graph, Var};
pub use layers::{linear, mha, mha_with_weights, Linear, MhaParams};
pub use store::{ParamId, ParamStore};
pub use tensor::Tensor;

pub type Result<T, E = NnError> = std::result::Result<T, E>;
