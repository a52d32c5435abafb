//! Spectral limits of sample covariance matrices built from random vectors
//! with graph-dependent entries.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: dependency graphs, balls, dominating-set certificates, the
//!   auxiliary graph on a dominating set and greedy colouring;
//! - [`models`]: m-dependent, block-independent and graph moving-average
//!   samplers with closed-form covariance and fourth moments;
//! - [`spectra`]: sample covariance, eigenvalues, empirical spectral
//!   distributions and Kolmogorov distances;
//! - [`stieltjes`]: the Marchenko–Pastur law and the fixed-point equation
//!   for the Stieltjes transform of the general limit;
//! - [`bounds`]: variance bounds for quadratic forms `x^T A x` and the
//!   ring-masked matrix constructions behind them.

pub mod bounds;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod models;
pub mod quad;
pub mod spectra;
pub mod stats;
pub mod stieltjes;

pub use error::{Error, Result};
