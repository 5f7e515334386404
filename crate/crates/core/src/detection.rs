//! Balanced homodyne readout: efficiency budget, shot-noise reference, LO phase
//! scans, detection-frequency spectra and Monte-Carlo samples.

use std::f64::consts::PI;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::gaussian::{quadrature_variance, variance_db, GaussianState};
use crate::model::Squeezer;
use crate::vapor::{PumpConfig, VaporCell};
use crate::Error;

/// Total efficiency that maps the loss-corrected −2.0 dB onto the measured −1.4 dB.
pub const DEFAULT_ETA_TOTAL: f64 = 0.7469;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneConfig {
    pub lo_power_w: f64,
    pub path_efficiency: f64,
    pub detector_quantum_efficiency: f64,
    pub fringe_visibility: f64,
    pub cmrr_db: f64,
    /// Electronic noise in shot-noise units at the reference LO power.
    pub electronic_noise_floor: f64,
}

impl Default for HomodyneConfig {
    fn default() -> Self {
        let qe = 0.90;
        let vis = 0.98;
        HomodyneConfig {
            lo_power_w: 1e-3,
            path_efficiency: DEFAULT_ETA_TOTAL / (qe * vis * vis),
            detector_quantum_efficiency: qe,
            fringe_visibility: vis,
            cmrr_db: 30.0,
            electronic_noise_floor: 0.0,
        }
    }
}

impl HomodyneConfig {
    /// Ideal detector: unit efficiency, no electronic noise.
    pub fn ideal() -> Self {
        HomodyneConfig {
            path_efficiency: 1.0,
            detector_quantum_efficiency: 1.0,
            fringe_visibility: 1.0,
            ..Self::default()
        }
    }

    /// Same floor and CMRR, but with the efficiency budget collapsed into the path term.
    pub fn with_total_efficiency(&self, eta: f64) -> Self {
        HomodyneConfig {
            path_efficiency: eta,
            detector_quantum_efficiency: 1.0,
            fringe_visibility: 1.0,
            ..*self
        }
    }

    pub fn eta_total(&self) -> f64 {
        self.path_efficiency * self.detector_quantum_efficiency * self.fringe_visibility.powi(2)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must lie in (0, 1], got {v}")))
            }
        };
        unit("path_efficiency", self.path_efficiency)?;
        unit("detector_quantum_efficiency", self.detector_quantum_efficiency)?;
        unit("fringe_visibility", self.fringe_visibility)?;
        if !(self.lo_power_w > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "LO power must be > 0, got {}",
                self.lo_power_w
            )));
        }
        if !(self.cmrr_db >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cmrr_db must be >= 0, got {}",
                self.cmrr_db
            )));
        }
        if !(self.electronic_noise_floor >= 0.0) || !self.electronic_noise_floor.is_finite() {
            return Err(Error::InvalidParameter("electronic_noise_floor must be >= 0".into()));
        }
        Ok(())
    }
}

/// Phenomenological frequency dependence of the squeezing.
///
/// `low(f) = f²/(f² + f_c²)` scales r only; `high(f) = 1/(1 + (f/B)²)` scales
/// both r and the added noise so the output returns to vacuum far above B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEnvelope {
    pub low_corner_mhz: f64,
    pub bandwidth_mhz: f64,
}

impl Default for SpectralEnvelope {
    fn default() -> Self {
        SpectralEnvelope {
            low_corner_mhz: 0.5,
            bandwidth_mhz: 20.0,
        }
    }
}

impl SpectralEnvelope {
    /// No frequency dependence at all.
    pub fn flat() -> Self {
        SpectralEnvelope {
            low_corner_mhz: 0.0,
            bandwidth_mhz: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.low_corner_mhz >= 0.0) || !(self.bandwidth_mhz > 0.0) {
            return Err(Error::InvalidParameter(
                "envelope needs low_corner_MHz >= 0 and bandwidth_MHz > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn low(&self, f_mhz: f64) -> f64 {
        let f2 = f_mhz * f_mhz;
        if self.low_corner_mhz == 0.0 {
            1.0
        } else {
            f2 / (f2 + self.low_corner_mhz * self.low_corner_mhz)
        }
    }

    pub fn high(&self, f_mhz: f64) -> f64 {
        1.0 / (1.0 + (f_mhz / self.bandwidth_mhz).powi(2))
    }
}

pub fn shot_noise_level(lo_power_w: f64, ref_power_w: f64, electronic_floor: f64) -> Result<f64, Error> {
    if !(lo_power_w > 0.0) || !(ref_power_w > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "LO and reference powers must be > 0, got {lo_power_w} and {ref_power_w}"
        )));
    }
    if !(electronic_floor >= 0.0) {
        return Err(Error::InvalidParameter("electronic floor must be >= 0".into()));
    }
    Ok(lo_power_w / ref_power_w + electronic_floor)
}

/// Detected variance normalized to the shot noise of the same LO.
pub fn detect(state: &GaussianState, theta: f64, cfg: &HomodyneConfig) -> f64 {
    detect_variance(quadrature_variance(state, theta), cfg)
}

pub fn detect_variance(v: f64, cfg: &HomodyneConfig) -> f64 {
    let eta = cfg.eta_total();
    eta * v + (1.0 - eta) + cfg.electronic_noise_floor
}

/// Linear PZT ramp: `phase = a·V + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PztRamp {
    pub v_start: f64,
    pub v_stop: f64,
    pub points: usize,
    pub a_rad_per_v: f64,
    pub b_rad: f64,
}

impl Default for PztRamp {
    fn default() -> Self {
        PztRamp {
            v_start: 0.0,
            v_stop: 400.0,
            points: 801,
            a_rad_per_v: PI / 100.0,
            b_rad: 0.0,
        }
    }
}

impl PztRamp {
    pub fn phase(&self, v: f64) -> f64 {
        self.a_rad_per_v * v + self.b_rad
    }

    pub fn voltages(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| self.v_start + (self.v_stop - self.v_start) * i as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<(), Error> {
        let span = (self.phase(self.v_stop) - self.phase(self.v_start)).abs();
        if !span.is_finite() || span == 0.0 {
            return Err(Error::InvalidParameter("degenerate PZT ramp: zero phase span".into()));
        }
        if span < 2.0 * PI - 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "PZT ramp covers {span:.3} rad of LO phase, need at least 2π"
            )));
        }
        if self.points < 8 {
            return Err(Error::InvalidParameter("PZT ramp needs at least 8 points".into()));
        }
        Ok(())
    }
}

/// Declared analyzer settings; the source measurements do not state them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub detection_frequency_mhz: f64,
    pub rbw_khz: f64,
    pub vbw_khz: f64,
}

impl Default for TraceMeta {
    fn default() -> Self {
        TraceMeta {
            detection_frequency_mhz: 3.0,
            rbw_khz: 300.0,
            vbw_khz: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseTrace {
    pub voltage: Vec<f64>,
    pub noise_db: Vec<f64>,
    pub ramp: PztRamp,
    pub meta: TraceMeta,
}

impl NoiseTrace {
    pub fn min_db(&self) -> f64 {
        self.noise_db.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max_db(&self) -> f64 {
        self.noise_db.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        write_xy_csv(w, &self.voltage, &self.noise_db)
    }
}

pub fn phase_scan(
    state: &GaussianState,
    ramp: &PztRamp,
    cfg: &HomodyneConfig,
    meta: TraceMeta,
) -> Result<NoiseTrace, Error> {
    ramp.validate()?;
    cfg.validate()?;
    let voltage = ramp.voltages();
    let noise_db = voltage
        .iter()
        .map(|&v| variance_db(detect(state, ramp.phase(v), cfg)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NoiseTrace {
        voltage,
        noise_db,
        ramp: *ramp,
        meta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseSpectrum {
    pub frequencies_mhz: Vec<f64>,
    pub squeezing_db: Vec<f64>,
}

impl NoiseSpectrum {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        write_xy_csv(w, &self.frequencies_mhz, &self.squeezing_db)
    }
}

/// Detected squeezed-quadrature noise at each detection frequency.
pub fn noise_spectrum(
    model: &Squeezer,
    pump: &PumpConfig,
    cell: &VaporCell,
    cfg: &HomodyneConfig,
    envelope: &SpectralEnvelope,
    f_list_mhz: &[f64],
) -> Result<NoiseSpectrum, Error> {
    if let Some(f) = f_list_mhz.iter().find(|f| !(**f > 0.0) || !f.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "detection frequency must be > 0, got {f}"
        )));
    }
    let ir = model.interact(pump, cell)?;
    let squeezing_db = f_list_mhz
        .iter()
        .map(|&f| {
            let state = model.output_state(&ir, envelope, f)?;
            let (vmin, _) = state.variance_extrema();
            variance_db(detect_variance(vmin, cfg))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NoiseSpectrum {
        frequencies_mhz: f_list_mhz.to_vec(),
        squeezing_db,
    })
}

pub fn sample_homodyne(state: &GaussianState, theta: f64, n: usize, seed: u64) -> Result<Vec<f64>, Error> {
    sample_homodyne_stream(state, theta, n, seed, 0)
}

/// As [`sample_homodyne`], drawing from an independent ChaCha stream so
/// parallel workers can share one seed without overlapping.
pub fn sample_homodyne_stream(
    state: &GaussianState,
    theta: f64,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<f64>, Error> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples, got {n}")));
    }
    let sd = quadrature_variance(state, theta).sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Ok((0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect())
}

pub(crate) fn write_xy_csv<W: Write>(w: W, x: &[f64], y: &[f64]) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["voltage_or_MHz", "noise_db"])?;
    for (a, b) in x.iter().zip(y) {
        wr.write_record([format!("{a:.6}"), format!("{b:.6}")])?;
    }
    wr.flush()?;
    Ok(())
}
