//! Loss-landscape tooling for sparse (masked) feed-forward networks.
//!
//! The crate builds masked networks, differentiates their squared loss
//! exactly or by finite differences, constructs non-increasing paths to
//! global minima, checks rank and overparameterization conditions, and
//! reproduces a handful of explicit bad-landscape instances together with a
//! deterministic gradient-descent harness for probing them empirically.
//!
//! Matrices are `nalgebra::DMatrix<f64>`; data is stored column-per-sample,
//! so `X` is `d_x × n` and a layer maps `p × d` weights onto it.

pub mod activation;
pub mod calculus;
pub mod cli;
pub mod conv;
pub mod counterexamples;
pub mod error;
pub mod io;
pub mod landscape;
pub mod linalg;
pub mod net;
pub mod trainer;

pub use activation::Activation;
pub use error::{Error, Result};
pub use net::{Mask, PatternDecomposition, SparseLayer, SparseNet};
