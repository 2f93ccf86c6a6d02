//! Equilibrium-response forecasting for slow sensors.
//!
//! The crate covers the full pipeline from raw reflectance spectra to a
//! dynamic "return the result now" decision:
//!
//! - [`spectra`] calibrates reflectance, extracts effective optical thickness
//!   from Fabry-Pérot fringes, and builds normalized response curves.
//! - [`simkit`] manufactures physics-based synthetic corpora with a 1D
//!   adsorption-diffusion pore solver, isotherm and parameter fitting,
//!   Gaussian parameter sampling, and noise injection.
//! - [`neural`] is a from-scratch stacked LSTM with a probabilistic
//!   (mean, variance) head, trained by full backpropagation through time
//!   under a Gaussian negative-log-likelihood loss.
//! - [`ensemble`] trains and aggregates deep ensembles of those networks and
//!   serves streaming forecasts on growing prefixes.
//! - [`metrics`] scores forecasts: modified t90 settling time, factor of
//!   improvement, normalized variance, and the dynamic stopping policy.
//! - [`datahub`] handles corpora on disk, stratified splits, and leakage-free
//!   min-max normalization.
//!
//! Heavy loops (member training, per-curve evaluation, corpus simulation)
//! run on rayon under the default `parallel` feature and fall back to
//! sequential execution without it; results are identical either way.

pub mod curve;
pub mod datahub;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod neural;
pub mod simkit;
pub mod spectra;

pub use curve::{CurveMeta, ResponseCurve, Source};
pub use error::{Error, Result};
