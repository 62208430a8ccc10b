//! Random Fourier feature (RFF) approximations of shift-invariant kernels,
//! together with a column-resampling bootstrap that estimates how far the
//! approximation is from the exact kernel.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`] evaluates kernels and samples their spectral distributions.
//! * [`features`] builds feature maps, feature matrices and `ZZᵀ`.
//! * [`errnorms`] computes `ℓ∞` and operator-norm errors, including
//!   matrix-free power iteration and the thin-QR shortcut.
//! * [`bootstrap`] runs the resampling loop, quantiles and extrapolation.
//! * [`ridge`] and [`mmd`] provide downstream functionals.
//! * [`datasets`], [`oracle`] and [`experiment`] drive validation runs.
//!
//! Bootstrap iterations and Monte Carlo trials run on rayon when the
//! `parallel` feature is enabled (the default). Every iteration draws from
//! its own seeded stream, so results do not depend on scheduling.

pub mod bootstrap;
pub mod datasets;
pub mod errnorms;
mod error;
pub mod exec;
pub mod experiment;
pub mod features;
pub mod kernels;
pub mod mmd;
pub mod oracle;
pub mod ridge;
pub mod rng;

pub use bootstrap::{
    empirical_quantile, extrapolate, run_bootstrap, select_feature_count, BootstrapConfig,
    BootstrapResult, ErrorFunctional, ErrorMode, Resample,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use features::{FeatureMap, FeatureMatrix};
pub use kernels::{Kernel, KernelFamily, SpectralSample};
