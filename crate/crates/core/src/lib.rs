//! Unilateral autoregressive random fields on the quarter-plane lattice.
//!
//! The field obeys `X[k][l] = alpha X[k-1][l] + beta X[k][l-1] + gamma X[k-1][l-1] + eps[k][l]`
//! with zero boundary row and column. The crate simulates such fields,
//! computes their exact covariances, fits the least-squares estimator, and
//! evaluates and checks by Monte Carlo the limit laws of the estimator when
//! the parameters sit on the boundary of the stability tetrahedron.

pub mod asymptotics;
pub mod cli;
pub mod coeffs;
pub mod covariance;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod montecarlo;
pub mod params;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
