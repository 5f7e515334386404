//! Pulsed pump: the intensity comb seen by the balanced detector and squeezing
//! driven by the peak power of the train.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::detection::{write_xy_csv, HomodyneConfig, SpectralEnvelope};
use crate::model::{Scenario, Squeezer};
use crate::vapor::{PumpConfig, VaporCell};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseShape {
    Rectangular,
    RaisedCosine,
}

impl std::str::FromStr for PulseShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "rectangular" => Ok(PulseShape::Rectangular),
            "raised-cosine" => Ok(PulseShape::RaisedCosine),
            other => Err(Error::InvalidParameter(format!(
                "unknown pulse shape `{other}` (expected rectangular or raised-cosine)"
            ))),
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTrain {
    pub width_s: f64,
    pub rep_rate_hz: f64,
    pub peak_power_w: f64,
    pub shape: PulseShape,
}

impl Default for PulseTrain {
    fn default() -> Self {
        PulseTrain {
            width_s: 200e-9,
            rep_rate_hz: 1e6,
            peak_power_w: 0.040,
            shape: PulseShape::Rectangular,
        }
    }
}

impl PulseTrain {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.width_s > 0.0 && self.rep_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(
                "pulse width and repetition rate must be > 0".into(),
            ));
        }
        if !(self.duty_cycle() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "duty cycle width·rep_rate = {} must be < 1",
                self.duty_cycle()
            )));
        }
        if !(self.peak_power_w > 0.0) {
            return Err(Error::InvalidParameter("peak power must be > 0".into()));
        }
        Ok(())
    }

    pub fn duty_cycle(&self) -> f64 {
        self.width_s * self.rep_rate_hz
    }

    pub fn rep_rate_mhz(&self) -> f64 {
        self.rep_rate_hz * 1e-6
    }

    /// Magnitude of the k-th Fourier-series coefficient of the intensity,
    /// in units of peak power.
    pub fn fourier_coefficient(&self, k: i64) -> f64 {
        let d = self.duty_cycle();
        let x = k as f64 * d;
        match self.shape {
            PulseShape::Rectangular => (d * sinc(x)).abs(),
            PulseShape::RaisedCosine => {
                if (x.abs() - 1.0).abs() < 1e-9 {
                    d / 4.0
                } else {
                    (0.5 * d * sinc(x) / (1.0 - x * x)).abs()
                }
            }
        }
    }

    /// Time average of the squared normalized intensity.
    pub fn mean_square(&self) -> f64 {
        let d = self.duty_cycle();
        match self.shape {
            PulseShape::Rectangular => d,
            PulseShape::RaisedCosine => 0.375 * d,
        }
    }

    /// Normalized intensity at time `t` (seconds), one pulse per period
    /// starting at t = 0.
    pub fn intensity(&self, t: f64) -> f64 {
        let period = 1.0 / self.rep_rate_hz;
        let tau = t.rem_euclid(period);
        if tau >= self.width_s {
            return 0.0;
        }
        match self.shape {
            PulseShape::Rectangular => 1.0,
            PulseShape::RaisedCosine => 0.5 * (1.0 - (2.0 * PI * tau / self.width_s).cos()),
        }
    }

    /// One-sided comb: (frequency MHz, power) for k = 0..=k_max, with the
    /// negative-frequency partner folded in for k ≥ 1.
    pub fn comb_lines(&self, k_max: usize) -> Vec<(f64, f64)> {
        (0..=k_max as i64)
            .map(|k| {
                let c = self.fourier_coefficient(k);
                let p = if k == 0 { c * c } else { 2.0 * c * c };
                (k as f64 * self.rep_rate_mhz(), p)
            })
            .collect()
    }
}

/// Classical comb power seen by the detector before common-mode rejection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombCoupling {
    /// Fundamental comb line power per bin relative to shot noise, dB.
    pub line_excess_db: f64,
}

impl Default for CombCoupling {
    fn default() -> Self {
        CombCoupling { line_excess_db: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseSpectrum {
    pub frequencies_mhz: Vec<f64>,
    /// dB relative to the between-peak shot level.
    pub psd_db: Vec<f64>,
    pub bin_width_mhz: f64,
    /// Bin index of each comb line k = 1, 2, ... inside the band.
    pub line_bins: Vec<usize>,
    /// Uniform leakage added to every bin, shot-noise units.
    pub leakage: f64,
}

impl PulseSpectrum {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        write_xy_csv(w, &self.frequencies_mhz, &self.psd_db)
    }
}

/// Minimum number of bins between adjacent comb lines.
pub const MIN_BINS_PER_LINE: f64 = 6.0;

pub fn pulse_spectrum(train: &PulseTrain, cmrr_db: f64, f_max_mhz: f64, bins: usize) -> Result<PulseSpectrum, Error> {
    pulse_spectrum_with(train, cmrr_db, f_max_mhz, bins, &CombCoupling::default())
}

/// Spectrum on the grid `f_i = i·f_max/bins`, i = 1..=bins.
pub fn pulse_spectrum_with(
    train: &PulseTrain,
    cmrr_db: f64,
    f_max_mhz: f64,
    bins: usize,
    coupling: &CombCoupling,
) -> Result<PulseSpectrum, Error> {
    train.validate()?;
    if !(cmrr_db >= 0.0) {
        return Err(Error::InvalidParameter(format!("cmrr_db must be >= 0, got {cmrr_db}")));
    }
    let rep = train.rep_rate_mhz();
    if !(f_max_mhz >= 3.0 * rep) {
        return Err(Error::InvalidParameter(format!(
            "f_max = {f_max_mhz} MHz covers fewer than 3 comb lines at {rep} MHz spacing"
        )));
    }
    let bin_width = f_max_mhz / bins.max(1) as f64;
    if bins == 0 || rep / bin_width < MIN_BINS_PER_LINE {
        return Err(Error::InvalidParameter(format!(
            "{bins} bins over {f_max_mhz} MHz cannot separate comb lines {rep} MHz apart"
        )));
    }
    let k_max = (f_max_mhz / rep + 1e-9).floor() as usize;
    let fundamental = train.fourier_coefficient(1).powi(2);
    let rejected = 10f64.powf((coupling.line_excess_db - cmrr_db) / 10.0);
    let line_power: Vec<f64> = (1..=k_max as i64)
        .map(|k| rejected * train.fourier_coefficient(k).powi(2) / fundamental)
        .collect();
    let leakage = line_power.iter().sum::<f64>() / bins as f64;

    let frequencies_mhz: Vec<f64> = (1..=bins).map(|i| i as f64 * bin_width).collect();
    let mut psd = vec![1.0 + leakage; bins];
    let mut line_bins = Vec::with_capacity(k_max);
    for (k, p) in (1..=k_max).zip(&line_power) {
        let idx = ((k as f64 * rep / bin_width).round() as usize).clamp(1, bins) - 1;
        psd[idx] += p;
        line_bins.push(idx);
    }
    Ok(PulseSpectrum {
        frequencies_mhz,
        psd_db: psd.iter().map(|p| 10.0 * p.log10()).collect(),
        bin_width_mhz: bin_width,
        line_bins,
        leakage,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulsedOptions {
    /// Added to the CW result; positive values reduce squeezing.
    pub delta_pulsed_db: f64,
    /// Analyzer bin width used by the comb-line guard.
    pub bin_width_mhz: f64,
}

impl Default for PulsedOptions {
    fn default() -> Self {
        PulsedOptions {
            delta_pulsed_db: 0.2,
            bin_width_mhz: 0.01,
        }
    }
}

/// Between-line squeezing for a pump train, using the train's peak power.
#[allow(clippy::too_many_arguments)]
pub fn pulsed_squeezing(
    model: &Squeezer,
    train: &PulseTrain,
    pump_template: &PumpConfig,
    cell: &VaporCell,
    cfg: &HomodyneConfig,
    envelope: &SpectralEnvelope,
    f_detect_mhz: f64,
    opts: &PulsedOptions,
) -> Result<f64, Error> {
    train.validate()?;
    if !(opts.bin_width_mhz > 0.0) {
        return Err(Error::InvalidParameter("guard bin width must be > 0".into()));
    }
    let rep = train.rep_rate_mhz();
    let nearest = (f_detect_mhz / rep).round() * rep;
    if (f_detect_mhz - nearest).abs() <= 2.0 * opts.bin_width_mhz + 1e-9 {
        return Err(Error::Contaminated(format!(
            "{f_detect_mhz} MHz is within 2 bins of the comb line at {nearest} MHz"
        )));
    }
    let sc = Scenario {
        pump: PumpConfig {
            power_w: train.peak_power_w,
            ..*pump_template
        },
        cell: *cell,
        homodyne: *cfg,
        envelope: *envelope,
        detection_frequency_mhz: f_detect_mhz,
    };
    Ok(model.squeezing_db(&sc)? + opts.delta_pulsed_db)
}
