//! Isometric tensor-network Born machines for sequences of discrete symbols.
//!
//! A model is a directed acyclic tensor network whose vertices carry
//! isometries. Evaluated on `1`, it produces a normalized state `Psi` over
//! length-`n` sequences, and the probability of a sequence `s` is
//! `|<s|Psi>|^2`. The crate covers construction and evaluation of such
//! networks ([`graph`], [`network`]), the statistical objectives ([`model`]),
//! geometry of the parameter space ([`manifold`]), maximum-likelihood training
//! ([`training`]), exact sampling ([`sampling`]), mutual-information decay
//! diagnostics ([`diagnostics`]) and text ingestion ([`corpus`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod manifold;
mod marginals;
pub mod model;
pub mod network;
pub mod rng;
pub mod sampling;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use graph::{GraphKind, Quiver};
pub use network::{SequenceState, TensorNetwork};
pub use num_complex::Complex64 as C64;
pub use tensor::{DenseTensor, IndexSplit};
