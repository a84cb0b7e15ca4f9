//! Random forest regression with out-of-bag estimation of the residual
//! variance `sigma^2` of `Y = m(X) + eps`.
//!
//! The crate is organised bottom-up:
//!
//! * [`forest`]: CART regression trees grown on subsamples and averaged.
//! * [`oob`]: out-of-bag predictions, coverage counts and the OOB weight matrix.
//! * [`variance`]: the plain, bootstrap-corrected and fast variance estimators.
//! * [`sim`]: synthetic additive models and the simulation studies that check
//!   the estimators' large-sample behaviour.

pub mod data;
pub mod error;
pub mod forest;
pub mod json;
pub mod oob;
pub mod rng;
pub mod sim;
pub mod variance;

pub use data::Dataset;
pub use error::{Error, Result};
pub use forest::{build_forest, Forest, ForestConfig, ForestParams, Resampling};
pub use variance::{estimate_all, BootstrapConfig, VarianceReport};
