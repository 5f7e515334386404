//! One-parameter sweeps and a grid + golden-section optimizer over the chain.
//!
//! Coordinates use the config units: detuning MHz, power mW, temperature °C,
//! detection frequency MHz.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{Scenario, Squeezer};
use crate::vapor::{T_MAX_K, T_MIN_K};
use crate::Error;

pub const KELVIN_OFFSET: f64 = 273.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Detuning,
    Power,
    Temperature,
    DetectionFrequency,
}

impl std::str::FromStr for SweepVariable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "detuning" => Ok(SweepVariable::Detuning),
            "power" => Ok(SweepVariable::Power),
            "temperature" => Ok(SweepVariable::Temperature),
            "detection_frequency" | "frequency" => Ok(SweepVariable::DetectionFrequency),
            other => Err(Error::InvalidParameter(format!(
                "unknown variable `{other}` (detuning, power, temperature, detection_frequency)"
            ))),
        }
    }
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Detuning => "detuning_MHz",
            SweepVariable::Power => "power_mW",
            SweepVariable::Temperature => "temperature_C",
            SweepVariable::DetectionFrequency => "detection_frequency_MHz",
        }
    }

    /// Open interval of values the model accepts.
    fn validity(self) -> (f64, f64) {
        match self {
            SweepVariable::Detuning => (f64::NEG_INFINITY, f64::INFINITY),
            SweepVariable::Power | SweepVariable::DetectionFrequency => (0.0, f64::INFINITY),
            SweepVariable::Temperature => (T_MIN_K - KELVIN_OFFSET, T_MAX_K - KELVIN_OFFSET),
        }
    }

    pub fn get(self, sc: &Scenario) -> f64 {
        match self {
            SweepVariable::Detuning => sc.pump.detuning_mhz,
            SweepVariable::Power => sc.pump.power_w * 1e3,
            SweepVariable::Temperature => sc.cell.temperature_k() - KELVIN_OFFSET,
            SweepVariable::DetectionFrequency => sc.detection_frequency_mhz,
        }
    }

    pub fn set(self, sc: &Scenario, x: f64) -> Result<Scenario, Error> {
        let mut out = *sc;
        match self {
            SweepVariable::Detuning => out.pump.detuning_mhz = x,
            SweepVariable::Power => out.pump.power_w = x * 1e-3,
            SweepVariable::Temperature => out.cell = sc.cell.with_temperature(x + KELVIN_OFFSET)?,
            SweepVariable::DetectionFrequency => out.detection_frequency_mhz = x,
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub fixed: Scenario,
}

impl SweepSpec {
    pub fn points(&self) -> Result<Vec<f64>, Error> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidParameter(format!(
                "sweep range needs lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sweep step must be > 0, got {}",
                self.step
            )));
        }
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        if n < 3 {
            return Err(Error::InvalidParameter(format!(
                "sweep has {n} points, need at least 3"
            )));
        }
        Ok((0..n).map(|i| self.lo + i as f64 * self.step).collect())
    }
}

pub fn run_sweep(model: &Squeezer, spec: &SweepSpec) -> Result<Vec<(f64, f64)>, Error> {
    let xs = spec.points()?;
    xs.par_iter()
        .map(|&x| {
            let sc = spec.variable.set(&spec.fixed, x)?;
            Ok((x, model.squeezing_db(&sc)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub variable: SweepVariable,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub grid_points: usize,
    /// Golden-section stops when the bracket is below this fraction of a grid step.
    pub relative_tolerance: f64,
    pub max_rounds: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            grid_points: 25,
            relative_tolerance: 1e-3,
            max_rounds: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub point: Vec<f64>,
    pub squeezing_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Convergence {
    pub grid_points_per_dim: usize,
    pub evaluations: usize,
    pub rounds: usize,
    pub final_bracket: Vec<f64>,
    pub grid_step: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimumReport {
    pub variables: Vec<SweepVariable>,
    pub best_point: Vec<f64>,
    pub best_db: f64,
    pub scenario: Scenario,
    /// Coarse-grid evaluations followed by refinement evaluations.
    pub samples: Vec<Sample>,
    pub convergence: Convergence,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if lo == hi || n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn optimize(
    model: &Squeezer,
    free: &[Bound],
    fixed: &Scenario,
    opts: &OptimizeOptions,
) -> Result<OptimumReport, Error> {
    if free.is_empty() {
        return Err(Error::InvalidParameter("no free variables to optimize".into()));
    }
    if opts.grid_points < 2 {
        return Err(Error::InvalidParameter(
            "grid needs at least 2 points per dimension".into(),
        ));
    }
    let mut bounds = Vec::with_capacity(free.len());
    for (i, b) in free.iter().enumerate() {
        if b.variable == SweepVariable::DetectionFrequency {
            return Err(Error::InvalidParameter(
                "detection frequency is not an optimization variable".into(),
            ));
        }
        if free[..i].iter().any(|o| o.variable == b.variable) {
            return Err(Error::InvalidParameter(format!("{} listed twice", b.variable.name())));
        }
        if !(b.lo.is_finite() && b.hi.is_finite()) || b.lo > b.hi {
            return Err(Error::InvalidParameter(format!(
                "{} bounds [{}, {}] are not a finite interval",
                b.variable.name(),
                b.lo,
                b.hi
            )));
        }
        let (vlo, vhi) = b.variable.validity();
        // Clip to the open validity interval, nudging off its edges.
        let eps = 1e-9 * (1.0 + b.lo.abs().max(b.hi.abs()));
        let lo = if b.lo <= vlo { vlo + eps } else { b.lo };
        let hi = if b.hi >= vhi { vhi - eps } else { b.hi };
        if lo > hi {
            return Err(Error::OutOfRange(format!(
                "empty feasible region for {}: [{}, {}] does not meet the valid range",
                b.variable.name(),
                b.lo,
                b.hi
            )));
        }
        bounds.push((b.variable, lo, hi));
    }

    let eval = |pt: &[f64]| -> Result<f64, Error> {
        let mut sc = *fixed;
        for (&(v, _, _), &x) in bounds.iter().zip(pt) {
            sc = v.set(&sc, x)?;
        }
        model.squeezing_db(&sc)
    };

    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(_, lo, hi)| linspace(lo, hi, opts.grid_points))
        .collect();
    let grid_step: Vec<f64> = axes
        .iter()
        .map(|a| if a.len() > 1 { a[1] - a[0] } else { 0.0 })
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let points: Vec<Vec<f64>> = (0..total)
        .map(|mut idx| {
            axes.iter()
                .map(|a| {
                    let x = a[idx % a.len()];
                    idx /= a.len();
                    x
                })
                .collect()
        })
        .collect();
    let mut samples: Vec<Sample> = points
        .into_par_iter()
        .map(|p| {
            let y = eval(&p)?;
            Ok(Sample {
                point: p,
                squeezing_db: y,
            })
        })
        .collect::<Result<_, Error>>()?;

    let first = samples
        .iter()
        .min_by(|a, b| a.squeezing_db.total_cmp(&b.squeezing_db))
        .expect("grid is non-empty");
    let mut best = first.point.clone();
    let mut best_y = first.squeezing_db;
    let mut rounds = 0;
    let mut final_bracket = vec![0.0; bounds.len()];
    let mut converged = true;

    for _ in 0..opts.max_rounds {
        rounds += 1;
        let start_y = best_y;
        for d in 0..bounds.len() {
            if grid_step[d] == 0.0 {
                continue;
            }
            let (_, lo, hi) = bounds[d];
            let mut a = (best[d] - grid_step[d]).max(lo);
            let mut b = (best[d] + grid_step[d]).min(hi);
            let tol = opts.relative_tolerance * grid_step[d];
            let mut probe = best.clone();
            let mut f_at = |x: f64, samples: &mut Vec<Sample>| -> Result<f64, Error> {
                probe[d] = x;
                let y = eval(&probe)?;
                samples.push(Sample {
                    point: probe.clone(),
                    squeezing_db: y,
                });
                Ok(y)
            };
            let mut c = b - INV_PHI * (b - a);
            let mut e = a + INV_PHI * (b - a);
            let mut fc = f_at(c, &mut samples)?;
            let mut fe = f_at(e, &mut samples)?;
            while b - a > tol {
                if fc < fe {
                    b = e;
                    e = c;
                    fe = fc;
                    c = b - INV_PHI * (b - a);
                    fc = f_at(c, &mut samples)?;
                } else {
                    a = c;
                    c = e;
                    fc = fe;
                    e = a + INV_PHI * (b - a);
                    fe = f_at(e, &mut samples)?;
                }
            }
            final_bracket[d] = b - a;
            let (x, y) = if fc < fe { (c, fc) } else { (e, fe) };
            if y < best_y {
                best[d] = x;
                best_y = y;
            }
        }
        converged = start_y - best_y <= 1e-9;
        if converged {
            break;
        }
    }

    let mut scenario = *fixed;
    for (&(v, _, _), &x) in bounds.iter().zip(&best) {
        scenario = v.set(&scenario, x)?;
    }
    let evaluations = samples.len();
    Ok(OptimumReport {
        variables: bounds.iter().map(|b| b.0).collect(),
        best_point: best,
        best_db: best_y,
        scenario,
        samples,
        convergence: Convergence {
            grid_points_per_dim: opts.grid_points,
            evaluations,
            rounds,
            final_bracket,
            grid_step,
            converged,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_points_validation() {
        let sc = Scenario::reference();
        let mk = |lo, hi, step| SweepSpec {
            variable: SweepVariable::Detuning,
            lo,
            hi,
            step,
            fixed: sc,
        };
        assert_eq!(mk(0.0, 10.0, 5.0).points().unwrap(), vec![0.0, 5.0, 10.0]);
        assert!(mk(10.0, 0.0, 1.0).points().is_err());
        assert!(mk(0.0, 10.0, 0.0).points().is_err());
        assert!(mk(0.0, 1.0, 0.6).points().is_err());
    }
}
