//! Nonparametric kernel regression and classification with several
//! functional and categorical covariates.
//!
//! Each covariate gets its own distance (L² for curves, 0/1 or ordinal for
//! categories) and a nonnegative weight. Weights are chosen by minimizing a
//! leave-one-out cross-validation criterion; covariates that carry no
//! information tend to receive weight zero, which removes them from the
//! estimator.
//!
//! Modules, bottom-up:
//!
//! - [`curves`]: sampled curves, trapezoid integration, standardization
//! - [`metrics`]: per-covariate distances
//! - [`kernels`]: Picard and boxcar kernels, the weighted product kernel
//! - [`estimator`]: Nadaraya–Watson predictions and leave-one-out variants
//! - [`selection`]: the cross-validation objective and weight search
//! - [`simgen`]: seeded simulation model
//! - [`harness`]: replicated experiments, reports and the command line

pub mod curves;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod numeric;
pub mod selection;
pub mod simgen;
pub mod simplex;

pub use error::{Error, Result};
