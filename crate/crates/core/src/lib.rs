//! Simulator for squeezed vacuum generated by polarization self-rotation in a
//! rubidium vapor cell and read out with balanced homodyne detection.
//!
//! Layers, bottom to top:
//!
//! * [`gaussian`]: covariance-matrix algebra for the single squeezed mode.
//! * [`vapor`]: vapor density, Doppler-broadened saturated line sums, and the
//!   calibrated map from pump/cell settings to squeezing, added noise and loss.
//! * [`detection`]: homodyne efficiency, phase scans, spectra, sampling.
//! * [`pulsed`]: pulse-train comb spectrum and peak-power squeezing.
//! * [`sweep`]: parameter sweeps and the grid + golden-section optimizer.
//! * [`cli`]: config parsing and the command-line front end.
//!
//! Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod detection;
pub mod gaussian;
pub mod model;
pub mod pulsed;
pub mod sweep;
pub mod vapor;

pub use detection::{HomodyneConfig, NoiseSpectrum, NoiseTrace, PztRamp, SpectralEnvelope};
pub use gaussian::{add_thermal, apply_loss, apply_squeeze, quadrature_variance, vacuum, variance_db, GaussianState};
pub use model::{Calibration, Scenario, Squeezer};
pub use pulsed::{PulseShape, PulseSpectrum, PulseTrain};
pub use vapor::{AtomicTable, InteractionResult, Line, PumpConfig, VaporCell};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("outside validity window: {0}")]
    OutOfRange(String),
    #[error("atomic data: {0}")]
    AtomicData(String),
    #[error("contaminated measurement: {0}")]
    Contaminated(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
}
