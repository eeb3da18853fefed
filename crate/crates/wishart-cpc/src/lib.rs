//! Exact moment identities and a martingale central limit theorem for
//! traces of products of independent Wishart matrices, applied to a
//! high-dimensional test of the common-principal-components hypothesis.
//!
//! The crate is organized bottom-up:
//!
//! - [`covmodel`]: covariance families (commuting pairs, Givens-rotated
//!   pairs, AR(1) Toeplitz) and finite-p trace-word diagnostics;
//! - [`gauss_moments`]: closed-form moments of Gaussian quadratic forms and
//!   their Monte Carlo cross-checks;
//! - [`wishart_sampling`]: deterministic sampling of Wishart matrices as
//!   sums of outer products, with prefix scatters for martingale work;
//! - [`trace_moments`]: mean, exact variance, and martingale decomposition
//!   of the normalized trace statistic over four independent Wisharts;
//! - [`estimators`]: unbiased estimators of the CPC discrepancy and of the
//!   variance components entering the test statistic;
//! - [`cpc_test`]: the end-to-end common-principal-components test;
//! - [`mc_harness`]: Monte Carlo experiments validating the distributional
//!   claims (CLT checks, size and power, moment validation).
//!
//! All randomness flows through explicit 64-bit seeds and counter-derived
//! streams, so every result in the crate is reproducible bit for bit
//! regardless of thread count.

pub mod covmodel;
pub mod cpc_test;
pub mod error;
pub mod estimators;
pub mod gauss_moments;
pub mod mc_harness;
pub mod trace_moments;
pub mod wishart_sampling;

mod linalg;

pub use error::{Error, Result};
