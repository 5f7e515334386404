//! Command-line front end: config parsing, subcommands and artifact output.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::detection::{self, HomodyneConfig, PztRamp, SpectralEnvelope, TraceMeta};
use crate::gaussian::variance_db;
use crate::model::{AntiSqueezeAnchor, Calibration, CalibrationAnchor, Scenario, Squeezer};
use crate::pulsed::{self, CombCoupling, PulseShape, PulseTrain, PulsedOptions};
use crate::sweep::{self, Bound, OptimizeOptions, SweepSpec, SweepVariable, KELVIN_OFFSET};
use crate::vapor::{AtomicTable, Line, PumpConfig, VaporCell};
use crate::{Error, VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Flat run configuration. Every key is optional; defaults reproduce the
/// 140 mW / +600 MHz / 108 °C operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(rename = "power_mW")]
    pub power_mw: f64,
    #[serde(rename = "detuning_MHz")]
    pub detuning_mhz: f64,
    pub line: Line,
    #[serde(rename = "waist_um")]
    pub waist_um: f64,
    #[serde(rename = "temperature_C")]
    pub temperature_c: f64,
    #[serde(rename = "cell_length_cm")]
    pub cell_length_cm: f64,
    pub isotope_fraction_87: f64,
    #[serde(rename = "detection_frequency_MHz")]
    pub detection_frequency_mhz: f64,

    #[serde(rename = "lo_power_mW")]
    pub lo_power_mw: f64,
    pub path_efficiency: f64,
    pub detector_quantum_efficiency: f64,
    pub fringe_visibility: f64,
    #[serde(rename = "cmrr_dB")]
    pub cmrr_db: f64,
    pub electronic_noise_floor: f64,
    #[serde(rename = "low_corner_MHz")]
    pub low_corner_mhz: f64,
    #[serde(rename = "bandwidth_MHz")]
    pub bandwidth_mhz: f64,

    pub anti_squeeze_anchor: AntiSqueezeAnchor,
    pub calibration_c_r: Option<f64>,
    pub calibration_c_n: Option<f64>,
    pub kappa_rad: f64,
    pub atomic_table: Option<PathBuf>,

    #[serde(rename = "pzt_start_V")]
    pub pzt_start_v: f64,
    #[serde(rename = "pzt_stop_V")]
    pub pzt_stop_v: f64,
    pub pzt_points: usize,
    #[serde(rename = "pzt_a_rad_per_V")]
    pub pzt_a_rad_per_v: f64,
    pub pzt_b_rad: f64,
    #[serde(rename = "rbw_kHz")]
    pub rbw_khz: f64,
    #[serde(rename = "vbw_kHz")]
    pub vbw_khz: f64,

    #[serde(rename = "pulse_width_ns")]
    pub pulse_width_ns: f64,
    #[serde(rename = "rep_rate_MHz")]
    pub rep_rate_mhz: f64,
    #[serde(rename = "peak_power_mW")]
    pub peak_power_mw: f64,
    pub pulse_shape: PulseShape,
    #[serde(rename = "delta_pulsed_dB")]
    pub delta_pulsed_db: f64,
    #[serde(rename = "guard_bin_MHz")]
    pub guard_bin_mhz: f64,
    #[serde(rename = "comb_line_excess_dB")]
    pub comb_line_excess_db: f64,

    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let h = HomodyneConfig::default();
        let env = SpectralEnvelope::default();
        let ramp = PztRamp::default();
        let meta = TraceMeta::default();
        let train = PulseTrain::default();
        let popts = PulsedOptions::default();
        RunConfig {
            power_mw: 140.0,
            detuning_mhz: 600.0,
            line: Line::D1,
            waist_um: 400.0,
            temperature_c: 108.0,
            cell_length_cm: 7.5,
            isotope_fraction_87: VaporCell::DEFAULT_FRACTION_87,
            detection_frequency_mhz: 3.0,
            lo_power_mw: h.lo_power_w * 1e3,
            path_efficiency: h.path_efficiency,
            detector_quantum_efficiency: h.detector_quantum_efficiency,
            fringe_visibility: h.fringe_visibility,
            cmrr_db: h.cmrr_db,
            electronic_noise_floor: h.electronic_noise_floor,
            low_corner_mhz: env.low_corner_mhz,
            bandwidth_mhz: env.bandwidth_mhz,
            anti_squeeze_anchor: AntiSqueezeAnchor::Text,
            calibration_c_r: None,
            calibration_c_n: None,
            kappa_rad: crate::vapor::MapConstants::DEFAULT_KAPPA_RAD,
            atomic_table: None,
            pzt_start_v: ramp.v_start,
            pzt_stop_v: ramp.v_stop,
            pzt_points: ramp.points,
            pzt_a_rad_per_v: ramp.a_rad_per_v,
            pzt_b_rad: ramp.b_rad,
            rbw_khz: meta.rbw_khz,
            vbw_khz: meta.vbw_khz,
            pulse_width_ns: train.width_s * 1e9,
            rep_rate_mhz: train.rep_rate_hz * 1e-6,
            peak_power_mw: train.peak_power_w * 1e3,
            pulse_shape: train.shape,
            delta_pulsed_db: popts.delta_pulsed_db,
            guard_bin_mhz: popts.bin_width_mhz,
            comb_line_excess_db: CombCoupling::default().line_excess_db,
            seed: 1,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn scenario(&self) -> Result<Scenario, Error> {
        let sc = Scenario {
            pump: PumpConfig {
                power_w: self.power_mw * 1e-3,
                waist_m: self.waist_um * 1e-6,
                detuning_mhz: self.detuning_mhz,
                line: self.line,
            },
            cell: VaporCell::new(
                self.cell_length_cm * 1e-2,
                self.temperature_c + KELVIN_OFFSET,
                self.isotope_fraction_87,
            )?,
            homodyne: HomodyneConfig {
                lo_power_w: self.lo_power_mw * 1e-3,
                path_efficiency: self.path_efficiency,
                detector_quantum_efficiency: self.detector_quantum_efficiency,
                fringe_visibility: self.fringe_visibility,
                cmrr_db: self.cmrr_db,
                electronic_noise_floor: self.electronic_noise_floor,
            },
            envelope: SpectralEnvelope {
                low_corner_mhz: self.low_corner_mhz,
                bandwidth_mhz: self.bandwidth_mhz,
            },
            detection_frequency_mhz: self.detection_frequency_mhz,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn ramp(&self) -> PztRamp {
        PztRamp {
            v_start: self.pzt_start_v,
            v_stop: self.pzt_stop_v,
            points: self.pzt_points,
            a_rad_per_v: self.pzt_a_rad_per_v,
            b_rad: self.pzt_b_rad,
        }
    }

    pub fn train(&self) -> PulseTrain {
        PulseTrain {
            width_s: self.pulse_width_ns * 1e-9,
            rep_rate_hz: self.rep_rate_mhz * 1e6,
            peak_power_w: self.peak_power_mw * 1e-3,
            shape: self.pulse_shape,
        }
    }

    /// Model calibrated at the reference operating point (with this config's
    /// envelope), unless both constants are overridden.
    pub fn model(&self) -> Result<Squeezer, Error> {
        let table = match &self.atomic_table {
            Some(p) => AtomicTable::from_path(p)?,
            None => AtomicTable::builtin().clone(),
        };
        let table = Arc::new(table);
        let mut cal = match (self.calibration_c_r, self.calibration_c_n) {
            (Some(c_r), Some(c_n)) => {
                if !(c_r >= 0.0 && c_n >= 0.0) {
                    return Err(Error::InvalidParameter("calibration constants must be >= 0".into()));
                }
                Calibration::fixed(c_r, c_n)
            }
            (None, None) => {
                let mut anchor = CalibrationAnchor::reference(self.anti_squeeze_anchor);
                anchor.scenario.envelope = SpectralEnvelope {
                    low_corner_mhz: self.low_corner_mhz,
                    bandwidth_mhz: self.bandwidth_mhz,
                };
                Calibration::fit(&table, &anchor)?
            }
            _ => {
                return Err(Error::InvalidParameter(
                    "set both calibration_c_r and calibration_c_n, or neither".into(),
                ))
            }
        };
        cal.constants.kappa_rad = self.kappa_rad;
        Ok(Squeezer::new(table, cal))
    }
}

const ABOUT: &str = "Squeezed-vacuum generation by polarization self-rotation in Rb vapor.\n\n\
All noise levels are dB relative to shot noise: negative values are squeezing, positive values are excess noise.";

#[derive(Debug, Parser)]
#[command(name = "psr-squeeze", version, about = ABOUT, long_about = ABOUT)]
pub struct Cli {
    /// Flat TOML config file (unit-suffixed keys such as power_mW, detuning_MHz, temperature_C)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for CSV and JSON artifacts
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Noise vs LO phase (PZT voltage) at the configured operating point
    Trace(TraceArgs),
    /// Squeezing vs one parameter
    Sweep(SweepArgs),
    /// Squeezing vs detection frequency
    Spectrum(SpectrumArgs),
    /// Pulse-train comb spectrum and between-line squeezing
    Pulsed(PulsedArgs),
    /// Best operating point over detuning, power and/or temperature
    Optimize(OptimizeArgs),
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Also write this many Monte-Carlo homodyne samples at the squeezed quadrature
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// detuning | power | temperature | detection_frequency
    #[arg(long = "var")]
    pub variable: String,
    /// lo:hi in config units (MHz, mW, °C, MHz)
    #[arg(long, allow_hyphen_values = true)]
    pub range: String,
    #[arg(long)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// lo:hi detection band, MHz
    #[arg(long, default_value = "0.9:20", allow_hyphen_values = true)]
    pub band: String,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct PulsedArgs {
    /// Upper edge of the comb spectrum, MHz
    #[arg(long = "f-max", default_value_t = 10.0)]
    pub f_max: f64,
    #[arg(long, default_value_t = 1000)]
    pub bins: usize,
    /// Between-line detection frequency, MHz
    #[arg(long = "f-detect", default_value_t = 2.7)]
    pub f_detect: f64,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Free variable bound as name=lo:hi (repeatable), e.g. detuning=300:1200
    #[arg(long = "bound", required = true, allow_hyphen_values = true)]
    pub bounds: Vec<String>,
    #[arg(long, default_value_t = 25)]
    pub grid: usize,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }
    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

/// Validation problems are the caller's fault; everything else is runtime.
fn classify(e: Error) -> Failure {
    match e {
        Error::InvalidParameter(_) | Error::OutOfRange(_) | Error::Contaminated(_) => {
            Failure::Usage(format!("invalid configuration: {e}"))
        }
        other => Failure::Runtime(other.to_string()),
    }
}

fn parse_range(s: &str, what: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::Usage(format!("{what}: expected lo:hi, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = a.trim().parse().map_err(|_| bad())?;
    let hi: f64 = b.trim().parse().map_err(|_| bad())?;
    Ok((lo, hi))
}

/// Files to write, assembled fully before anything touches the disk.
struct Artifacts(Vec<(String, Vec<u8>)>);

impl Artifacts {
    fn csv<F>(&mut self, name: &str, write: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), csv::Error>,
    {
        let mut buf = Vec::new();
        write(&mut buf).map_err(|e| Failure::Runtime(format!("CSV encoding failed: {e}")))?;
        self.0.push((name.to_string(), buf));
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), Failure> {
        let mut buf = serde_json::to_vec_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
        buf.push(b'\n');
        self.0.push((name.to_string(), buf));
        Ok(())
    }

    fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>, Failure> {
        let unwritable =
            |e: std::io::Error| Failure::Runtime(format!("cannot write output directory {}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(unwritable)?;
        let mut written = Vec::new();
        for (name, data) in &self.0 {
            let p = dir.join(name);
            fs::write(&p, data).map_err(unwritable)?;
            written.push(p);
        }
        Ok(written)
    }
}

fn document(command: &str, cfg: &RunConfig, model: &Squeezer, result: serde_json::Value) -> serde_json::Value {
    json!({
        "artifact": "psr-squeeze",
        "version": VERSION,
        "command": command,
        "config": cfg,
        "calibration": model.calibration(),
        "atomic_table_schema": model.table().schema_version,
        "conventions": {
            "noise": "dB relative to shot noise; negative = squeezed",
            "detuning": "MHz relative to 87Rb F=2 -> F'=2 of the selected line, positive = blue",
        },
        "assumptions": {
            "rbw_kHz": cfg.rbw_khz,
            "vbw_kHz": cfg.vbw_khz,
            "isotope_fraction_87": cfg.isotope_fraction_87,
        },
        "result": result,
    })
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, Failure> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Runtime(format!("cannot read config file {}: {e}", path.display())))?;
            RunConfig::parse(&text)
                .map_err(|e| Failure::Usage(format!("malformed config file {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    let sc = cfg.scenario().map_err(classify)?;
    let model = cfg.model().map_err(classify)?;
    let mut out = Artifacts(Vec::new());

    match cli.command {
        Command::Trace(args) => {
            let ir = model.interact(&sc.pump, &sc.cell).map_err(classify)?;
            let state = model
                .output_state(&ir, &sc.envelope, sc.detection_frequency_mhz)
                .map_err(classify)?;
            let meta = TraceMeta {
                detection_frequency_mhz: sc.detection_frequency_mhz,
                rbw_khz: cfg.rbw_khz,
                vbw_khz: cfg.vbw_khz,
            };
            let trace = detection::phase_scan(&state, &cfg.ramp(), &sc.homodyne, meta).map_err(classify)?;
            out.csv("trace.csv", |b| trace.write_csv(b))?;
            let mut result = json!({
                "interaction": ir,
                "min_dB": trace.min_db(),
                "max_dB": trace.max_db(),
                "meta": trace.meta,
                "ramp": trace.ramp,
            });
            if let Some(n) = args.samples {
                let theta = ir.theta0;
                let xs = detection::sample_homodyne(&state, theta, n, cfg.seed).map_err(classify)?;
                // Samples are taken before detection loss, at the squeezed quadrature.
                out.csv("samples.csv", |b| {
                    let mut w = csv::Writer::from_writer(b);
                    w.write_record(["index", "quadrature"])?;
                    for (i, x) in xs.iter().enumerate() {
                        w.write_record([i.to_string(), format!("{x:.9}")])?;
                    }
                    w.flush()?;
                    Ok(())
                })?;
                result["samples"] = json!({ "n": n, "seed": cfg.seed, "theta_rad": theta });
            }
            out.json("trace.json", &document("trace", &cfg, &model, result))?;
        }
        Command::Sweep(args) => {
            let variable: SweepVariable = args.variable.parse().map_err(classify)?;
            let (lo, hi) = parse_range(&args.range, "--range")?;
            let spec = SweepSpec {
                variable,
                lo,
                hi,
                step: args.step,
                fixed: sc,
            };
            let curve = sweep::run_sweep(&model, &spec).map_err(classify)?;
            let (xs, ys): (Vec<f64>, Vec<f64>) = curve.iter().copied().unzip();
            out.csv("sweep.csv", |b| detection::write_xy_csv(b, &xs, &ys))?;
            let result = json!({
                "variable": variable.name(),
                "range": [lo, hi],
                "step": args.step,
                "curve": curve,
            });
            out.json("sweep.json", &document("sweep", &cfg, &model, result))?;
        }
        Command::Spectrum(args) => {
            let (lo, hi) = parse_range(&args.band, "--band")?;
            if !(lo > 0.0 && hi > lo) || args.points < 2 {
                return Err(Failure::Usage("--band needs 0 < lo < hi and --points >= 2".into()));
            }
            let n = args.points;
            let fs_: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
            let spec = detection::noise_spectrum(&model, &sc.pump, &sc.cell, &sc.homodyne, &sc.envelope, &fs_)
                .map_err(classify)?;
            out.csv("spectrum.csv", |b| spec.write_csv(b))?;
            out.json(
                "spectrum.json",
                &document("spectrum", &cfg, &model, json!({ "spectrum": spec })),
            )?;
        }
        Command::Pulsed(args) => {
            let train = cfg.train();
            let coupling = CombCoupling {
                line_excess_db: cfg.comb_line_excess_db,
            };
            let spec = pulsed::pulse_spectrum_with(&train, sc.homodyne.cmrr_db, args.f_max, args.bins, &coupling)
                .map_err(classify)?;
            let opts = PulsedOptions {
                delta_pulsed_db: cfg.delta_pulsed_db,
                bin_width_mhz: cfg.guard_bin_mhz,
            };
            let sq = pulsed::pulsed_squeezing(
                &model,
                &train,
                &sc.pump,
                &sc.cell,
                &sc.homodyne,
                &sc.envelope,
                args.f_detect,
                &opts,
            )
            .map_err(classify)?;
            out.csv("pulse_spectrum.csv", |b| spec.write_csv(b))?;
            let result = json!({
                "train": train,
                "pulsed_squeezing_dB": sq,
                "detection_frequency_MHz": args.f_detect,
                "options": opts,
                "comb_coupling": coupling,
                "bin_width_MHz": spec.bin_width_mhz,
                "leakage_snu": spec.leakage,
                "between_peak_dB": variance_db(1.0 + spec.leakage).unwrap_or(f64::NAN),
                "note": "reported pulsed added quantum noise of about 6 dB is recorded, not modeled",
            });
            out.json("pulsed.json", &document("pulsed", &cfg, &model, result))?;
        }
        Command::Optimize(args) => {
            let mut free = Vec::new();
            for b in &args.bounds {
                let (name, range) = b
                    .split_once('=')
                    .ok_or_else(|| Failure::Usage(format!("--bound: expected name=lo:hi, got `{b}`")))?;
                let variable: SweepVariable = name.trim().parse().map_err(classify)?;
                let (lo, hi) = parse_range(range, "--bound")?;
                free.push(Bound { variable, lo, hi });
            }
            let opts = OptimizeOptions {
                grid_points: args.grid,
                ..OptimizeOptions::default()
            };
            let report = sweep::optimize(&model, &free, &sc, &opts).map_err(classify)?;
            let names: Vec<&str> = report.variables.iter().map(|v| v.name()).collect();
            out.csv("optimize_samples.csv", |b| {
                let mut w = csv::Writer::from_writer(b);
                let mut header: Vec<&str> = names.clone();
                header.push("noise_db");
                w.write_record(&header)?;
                for s in &report.samples {
                    let mut row: Vec<String> = s.point.iter().map(|x| format!("{x:.6}")).collect();
                    row.push(format!("{:.6}", s.squeezing_db));
                    w.write_record(&row)?;
                }
                w.flush()?;
                Ok(())
            })?;
            let best: serde_json::Map<String, serde_json::Value> = names
                .iter()
                .zip(&report.best_point)
                .map(|(n, x)| (n.to_string(), json!(x)))
                .collect();
            let result = json!({
                "best_point": best,
                "best_dB": report.best_db,
                "convergence": report.convergence,
            });
            out.json("optimize.json", &document("optimize", &cfg, &model, result))?;
        }
    }
    out.write_all(&cli.out)
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            EXIT_OK
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}
