//! Minimum-error-entropy regression at desk scale.
//!
//! The crate fits predictors by minimizing the empirical quadratic Renyi
//! entropy of their residuals under Parzen windowing, and ships a
//! Monte-Carlo "theory oracle" plus reproducible experiment runners that
//! probe the identities, decay rates, and consistency behavior of that
//! training rule numerically.
//!
//! Modules:
//! - [`windowing`]: windowing functions `G` and their validation.
//! - [`entropy`]: Parzen density and empirical entropy functionals.
//! - [`hypothesis`]: feature dictionaries with coefficient-ball compactness.
//! - [`learner`]: the entropy minimizer, least-squares baseline, and the
//!   constant-adjusted estimator.
//! - [`oracle`]: synthetic data models and population-functional estimates.
//! - [`experiments`]: seeded sweep runners emitting CSV records.
//! - [`cli`]: the command-line dispatcher behind the `mee` binary.

// validation predicates are written `!(x > 0.0)` so NaN fails the check too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod entropy;
pub mod error;
pub mod experiments;
pub mod hypothesis;
pub mod learner;
pub mod optim;
pub mod oracle;
pub mod seed;
pub mod stats;
pub mod windowing;

pub use error::MeeError;
