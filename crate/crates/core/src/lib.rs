//! Estimators of Sobol' main-effect sensitivity indices and a benchmark
//! harness comparing their convergence on analytically solvable models.
//!
//! - [`sampling`]: Sobol' and pseudo-random unit point sets, inverse-CDF and
//!   correlated-normal transforms.
//! - [`models`]: the model abstraction and the seven reference test cases.
//! - [`estimators`]: evaluation plans and the five main-effect estimators.
//! - [`harness`]: replicated RMSE runs, rate fits and cost accounting.
//! - [`cli`]: config parsing, CSV and plot-data output used by the `gsa` binary.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod models;
pub mod sampling;

pub use error::{Error, Result};
