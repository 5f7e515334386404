//! The rubidium vapor: density, Doppler widths, saturated line sums and the
//! calibrated map from pump and cell settings to squeezing parameters.

use std::f64::consts::{LN_2, PI};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::Error;

pub const K_B: f64 = 1.380_649e-23;
pub const AMU: f64 = 1.660_539_066_60e-27;
pub const C_LIGHT: f64 = 299_792_458.0;
const TORR_TO_PA: f64 = 133.322_368;

pub const T_MIN_K: f64 = 250.0;
pub const T_MAX_K: f64 = 500.0;
/// Rb melting point; the vapor-pressure correlation switches branch here.
const T_MELT_K: f64 = 312.46;

/// Center of the 87Rb D1 F=2 -> F'=1 component relative to F=2 -> F'=2.
pub const D1_F2_TO_F1_MHZ: f64 = -816.656;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Line {
    D1,
    D2,
}

impl std::str::FromStr for Line {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_uppercase().as_str() {
            "D1" => Ok(Line::D1),
            "D2" => Ok(Line::D2),
            other => Err(Error::InvalidParameter(format!(
                "unknown line `{other}` (expected D1 or D2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Isotope {
    Rb85,
    Rb87,
}

impl Isotope {
    pub fn mass_kg(self) -> f64 {
        match self {
            Isotope::Rb85 => 84.911_789_738 * AMU,
            Isotope::Rb87 => 86.909_180_520 * AMU,
        }
    }

    fn from_mass_number(a: u32) -> Result<Self, Error> {
        match a {
            85 => Ok(Isotope::Rb85),
            87 => Ok(Isotope::Rb87),
            other => Err(Error::AtomicData(format!("unsupported isotope {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub isotope: Isotope,
    pub f: u32,
    pub f_prime: u32,
    pub offset_mhz: f64,
    pub strength: f64,
    pub gamma_mhz: f64,
    pub isat_w_per_m2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicLine {
    pub line_id: Line,
    pub frequency_hz: f64,
    pub reference: String,
    /// Sorted by offset.
    pub components: Vec<Component>,
}

impl AtomicLine {
    pub fn wavelength_m(&self) -> f64 {
        C_LIGHT / self.frequency_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicTable {
    pub schema_version: u32,
    pub lines: Vec<AtomicLine>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    schema_version: u32,
    line: Vec<RawLine>,
    component: Vec<RawComponent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    line_id: Line,
    #[serde(rename = "frequency_THz")]
    frequency_thz: f64,
    reference: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    line_id: Line,
    isotope: u32,
    #[serde(rename = "F")]
    f: u32,
    #[serde(rename = "F_prime")]
    f_prime: u32,
    #[serde(rename = "offset_MHz")]
    offset_mhz: f64,
    strength: f64,
    #[serde(rename = "gamma_MHz")]
    gamma_mhz: f64,
    #[serde(rename = "Isat_W_per_m2")]
    isat: f64,
}

const BUILTIN_TABLE: &str = include_str!("../data/rubidium_lines.toml");
const SUPPORTED_SCHEMA: u32 = 1;

impl AtomicTable {
    pub fn from_toml_str(text: &str) -> Result<Self, Error> {
        let raw: RawTable = toml::from_str(text).map_err(|e| Error::AtomicData(e.to_string()))?;
        if raw.schema_version != SUPPORTED_SCHEMA {
            return Err(Error::AtomicData(format!(
                "schema_version {} not supported (expected {SUPPORTED_SCHEMA})",
                raw.schema_version
            )));
        }
        let mut lines = Vec::new();
        for l in raw.line {
            if !(l.frequency_thz > 0.0) {
                return Err(Error::AtomicData(format!(
                    "{:?}: frequency must be positive",
                    l.line_id
                )));
            }
            if lines.iter().any(|x: &AtomicLine| x.line_id == l.line_id) {
                return Err(Error::AtomicData(format!("{:?} listed twice", l.line_id)));
            }
            let mut components = Vec::new();
            for c in raw.component.iter().filter(|c| c.line_id == l.line_id) {
                if !(c.strength > 0.0 && c.gamma_mhz > 0.0 && c.isat > 0.0) {
                    return Err(Error::AtomicData(format!(
                        "{:?} F={} -> F'={}: strength, gamma and Isat must be positive",
                        l.line_id, c.f, c.f_prime
                    )));
                }
                components.push(Component {
                    isotope: Isotope::from_mass_number(c.isotope)?,
                    f: c.f,
                    f_prime: c.f_prime,
                    offset_mhz: c.offset_mhz,
                    strength: c.strength,
                    gamma_mhz: c.gamma_mhz,
                    isat_w_per_m2: c.isat,
                });
            }
            components.sort_by(|a, b| a.offset_mhz.total_cmp(&b.offset_mhz));
            if components.windows(2).any(|w| w[1].offset_mhz <= w[0].offset_mhz) {
                return Err(Error::AtomicData(format!(
                    "{:?}: component offsets not strictly ordered",
                    l.line_id
                )));
            }
            if components.is_empty() {
                return Err(Error::AtomicData(format!("{:?} has no components", l.line_id)));
            }
            lines.push(AtomicLine {
                line_id: l.line_id,
                frequency_hz: l.frequency_thz * 1e12,
                reference: l.reference,
                components,
            });
        }
        if raw
            .component
            .iter()
            .any(|c| !lines.iter().any(|l| l.line_id == c.line_id))
        {
            return Err(Error::AtomicData("component refers to an undeclared line".into()));
        }
        Ok(AtomicTable {
            schema_version: raw.schema_version,
            lines,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::AtomicData(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// The table shipped with the crate.
    pub fn builtin() -> &'static AtomicTable {
        static TABLE: OnceLock<AtomicTable> = OnceLock::new();
        TABLE.get_or_init(|| AtomicTable::from_toml_str(BUILTIN_TABLE).expect("builtin atomic table is valid"))
    }

    pub fn line(&self, id: Line) -> Result<&AtomicLine, Error> {
        self.lines
            .iter()
            .find(|l| l.line_id == id)
            .ok_or_else(|| Error::AtomicData(format!("{id:?} missing from table")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VaporCell {
    length_m: f64,
    temperature_k: f64,
    isotope_fraction_87: f64,
    density_m3: f64,
}

impl VaporCell {
    pub const DEFAULT_LENGTH_M: f64 = 0.075;
    pub const DEFAULT_FRACTION_87: f64 = 0.98;

    pub fn new(length_m: f64, temperature_k: f64, isotope_fraction_87: f64) -> Result<Self, Error> {
        if !(length_m > 0.0) || !length_m.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cell length must be > 0, got {length_m}"
            )));
        }
        if !(isotope_fraction_87 > 0.0 && isotope_fraction_87 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "isotope_fraction_87 must lie in (0, 1], got {isotope_fraction_87}"
            )));
        }
        let density_m3 = density_from_temperature(temperature_k)?;
        Ok(VaporCell {
            length_m,
            temperature_k,
            isotope_fraction_87,
            density_m3,
        })
    }

    /// 7.5 cm enriched cell at the given temperature.
    pub fn enriched(temperature_k: f64) -> Result<Self, Error> {
        Self::new(Self::DEFAULT_LENGTH_M, temperature_k, Self::DEFAULT_FRACTION_87)
    }

    pub fn length_m(&self) -> f64 {
        self.length_m
    }
    pub fn temperature_k(&self) -> f64 {
        self.temperature_k
    }
    pub fn isotope_fraction_87(&self) -> f64 {
        self.isotope_fraction_87
    }
    pub fn density_m3(&self) -> f64 {
        self.density_m3
    }

    pub fn with_temperature(&self, temperature_k: f64) -> Result<Self, Error> {
        Self::new(self.length_m, temperature_k, self.isotope_fraction_87)
    }

    pub fn with_isotope_fraction(&self, f87: f64) -> Result<Self, Error> {
        Self::new(self.length_m, self.temperature_k, f87)
    }

    fn isotope_density(&self, iso: Isotope) -> f64 {
        match iso {
            Isotope::Rb87 => self.density_m3 * self.isotope_fraction_87,
            Isotope::Rb85 => self.density_m3 * (1.0 - self.isotope_fraction_87),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpConfig {
    pub power_w: f64,
    pub waist_m: f64,
    /// Relative to 87Rb F=2 -> F'=2 of the selected line; positive is blue.
    pub detuning_mhz: f64,
    pub line: Line,
}

impl PumpConfig {
    pub const DEFAULT_WAIST_M: f64 = 400e-6;

    pub fn d1(power_w: f64, detuning_mhz: f64) -> Self {
        PumpConfig {
            power_w,
            waist_m: Self::DEFAULT_WAIST_M,
            detuning_mhz,
            line: Line::D1,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.power_w > 0.0) || !self.power_w.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "pump power must be > 0, got {} W",
                self.power_w
            )));
        }
        if !(self.waist_m > 0.0) || !self.waist_m.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beam waist must be > 0, got {} m",
                self.waist_m
            )));
        }
        if !self.detuning_mhz.is_finite() {
            return Err(Error::InvalidParameter("detuning must be finite".into()));
        }
        Ok(())
    }

    /// Peak intensity of the Gaussian beam, W/m².
    pub fn peak_intensity(&self) -> f64 {
        2.0 * self.power_w / (PI * self.waist_m * self.waist_m)
    }
}

/// Saturated Rb number density from the Nesmeyanov vapor-pressure
/// correlation (as tabulated in Steck's Rb D-line data), atoms/m³.
pub fn density_from_temperature(t: f64) -> Result<f64, Error> {
    if !(t > T_MIN_K && t < T_MAX_K) {
        return Err(Error::OutOfRange(format!(
            "temperature {t} K outside ({T_MIN_K}, {T_MAX_K}) K"
        )));
    }
    let log_p_torr = if t < T_MELT_K {
        -94.048_26 - 1961.258 / t - 0.037_716_87 * t + 42.575_26 * t.log10()
    } else {
        15.882_53 - 4529.635 / t + 0.000_586_63 * t - 2.991_38 * t.log10()
    };
    Ok(10f64.powf(log_p_torr) * TORR_TO_PA / (K_B * t))
}

fn doppler_sigma_mhz(t: f64, frequency_hz: f64, iso: Isotope) -> f64 {
    frequency_hz * (K_B * t / (iso.mass_kg() * C_LIGHT * C_LIGHT)).sqrt() * 1e-6
}

/// Gaussian FWHM of the Doppler profile for 87Rb on `line`, MHz.
///
/// A closed form, so it accepts any positive temperature, not only the
/// vapor-pressure validity window.
pub fn doppler_width(t: f64, line: &AtomicLine) -> Result<f64, Error> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("temperature must be > 0 K, got {t}")));
    }
    Ok(doppler_sigma_mhz(t, line.frequency_hz, Isotope::Rb87) * (8.0 * LN_2).sqrt())
}

/// Absorption and self-rotation summed over the components of one line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineResponse {
    /// Intensity absorption coefficient, 1/m.
    pub alpha: f64,
    /// Signed self-rotation parameter from the 87Rb components, rad/(m·ellipticity).
    pub g: f64,
    /// Part of `alpha` contributed by 85Rb.
    pub alpha_85: f64,
}

/// Doppler averages of the power-broadened Lorentzian absorption shape and of
/// the dispersive self-rotation shape for one component.
///
/// Returns `(⟨h²/(x² + a²)⟩, ⟨s·h³·x/(x² + a²)²⟩)` with `x = delta − u`,
/// `u ~ N(0, sigma²)`, `h = gamma/2`, `a² = h²(1 + s)`.
fn doppler_averaged_shapes(delta: f64, sigma: f64, h: f64, s: f64) -> (f64, f64) {
    let a2 = h * h * (1.0 + s);
    let a = a2.sqrt();
    let span = 8.0 * sigma;
    let step_target = (a / 4.0).min(sigma / 8.0);
    let n = (2.0 * span / step_target).ceil() as usize;
    let du = 2.0 * span / n as f64;
    let norm = du / (sigma * (2.0 * PI).sqrt());
    let inv_2s2 = 0.5 / (sigma * sigma);
    let (mut abs_acc, mut rot_acc) = (0.0, 0.0);
    for i in 0..=n {
        let u = -span + i as f64 * du;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 } * (-u * u * inv_2s2).exp();
        let x = delta - u;
        let den = x * x + a2;
        abs_acc += w / den;
        rot_acc += w * x / (den * den);
    }
    (norm * abs_acc * h * h, norm * rot_acc * s * h * h * h)
}

pub fn line_response(pump: &PumpConfig, cell: &VaporCell, table: &AtomicTable) -> Result<LineResponse, Error> {
    pump.validate()?;
    let line = table.line(pump.line)?;
    let lambda = line.wavelength_m();
    let cross_section = lambda * lambda / (2.0 * PI);
    let intensity = pump.peak_intensity();
    let t = cell.temperature_k();
    let mut out = LineResponse {
        alpha: 0.0,
        g: 0.0,
        alpha_85: 0.0,
    };
    for c in &line.components {
        let n_iso = cell.isotope_density(c.isotope);
        if n_iso == 0.0 {
            continue;
        }
        let sigma = doppler_sigma_mhz(t, line.frequency_hz, c.isotope);
        let s = intensity / c.isat_w_per_m2;
        let (abs_shape, rot_shape) =
            doppler_averaged_shapes(pump.detuning_mhz - c.offset_mhz, sigma, 0.5 * c.gamma_mhz, s);
        let pre = n_iso * c.strength * cross_section;
        out.alpha += pre * abs_shape;
        // The residual 85Rb is treated as a loss and noise channel only.
        match c.isotope {
            Isotope::Rb87 => out.g += pre * rot_shape,
            Isotope::Rb85 => out.alpha_85 += pre * abs_shape,
        }
    }
    Ok(out)
}

pub fn absorption_coefficient(pump: &PumpConfig, cell: &VaporCell) -> Result<f64, Error> {
    Ok(line_response(pump, cell, AtomicTable::builtin())?.alpha)
}

pub fn self_rotation_g(pump: &PumpConfig, cell: &VaporCell) -> Result<f64, Error> {
    Ok(line_response(pump, cell, AtomicTable::builtin())?.g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionResult {
    pub r: f64,
    pub theta0: f64,
    pub n_add: f64,
    pub eta_med: f64,
}

/// Constants of the phenomenological map from line response to squeezing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapConstants {
    /// r per unit |g|·L.
    pub c_r: f64,
    /// n_add per unit optical depth α·L.
    pub c_n: f64,
    /// Cross-phase rotation of the squeezing ellipse per unit optical depth, rad.
    pub kappa_rad: f64,
}

impl MapConstants {
    pub const DEFAULT_KAPPA_RAD: f64 = 0.05;
}

pub fn interact_with(
    pump: &PumpConfig,
    cell: &VaporCell,
    table: &AtomicTable,
    k: &MapConstants,
) -> Result<InteractionResult, Error> {
    let resp = line_response(pump, cell, table)?;
    let depth = resp.alpha * cell.length_m();
    let (r, base) = match pump.line {
        Line::D1 => (
            k.c_r * resp.g.abs() * cell.length_m(),
            if resp.g < 0.0 { PI / 2.0 } else { 0.0 },
        ),
        Line::D2 => (0.0, 0.0),
    };
    Ok(InteractionResult {
        r,
        theta0: (base + k.kappa_rad * depth).rem_euclid(PI),
        n_add: k.c_n * depth,
        eta_med: (-depth).exp(),
    })
}
