//! Circadian structure in timestamped embedding corpora.
//!
//! The crate is organized by analysis stage:
//!
//! * [`ingest`]: record and embedding interchange formats, content filters, hour binning.
//! * [`geo`]: location attribution, DST-aware local time, sunrise/sunset.
//! * [`entropy`]: local kNN entropy, Gaussian global entropy, heatmap aggregation.
//! * [`rhythm`]: cosinor fits, likelihood-ratio tests, FDR, correlations.
//! * [`scaling`]: marginal entropy gain, density clustering, power-law fits, PCA.
//! * [`synth`]: seeded generators with analytic ground truth.

pub mod entropy;
pub mod error;
pub mod geo;
pub mod ingest;
pub mod rhythm;
pub mod rng;
pub mod scaling;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};

/// Angular frequency of the 24-hour cycle in radians per hour.
pub const OMEGA_24H: f64 = std::f64::consts::TAU / 24.0;
