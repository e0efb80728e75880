//! Exact posterior moments and CDF of heteroscedastic Gaussian process
//! regression, computed by autonormalized importance sampling over the
//! latent log noise variance, and a chance-constrained sparse tracking
//! controller built on that posterior.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod dataset;
pub mod error;
pub mod hgp;
pub mod kernels;
pub mod par;
pub mod specfun;

pub use dataset::ReplicatedDataset;
pub use error::{Error, Result};
pub use hgp::{HgpModel, ImportanceEnsemble, PointPosterior, PosteriorSummary};
pub use kernels::{chol_jitter, GramFactor, Points, SeKernel};
