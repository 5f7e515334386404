use std::f64::consts::PI;

use psr_squeeze::detection::HomodyneConfig;
use psr_squeeze::model::{Scenario, Squeezer};
use psr_squeeze::sweep::{self, Bound, OptimizeOptions, SweepVariable};
use psr_squeeze::vapor::{
    absorption_coefficient, density_from_temperature, doppler_width, line_response, self_rotation_g, AtomicTable, Line,
    PumpConfig, VaporCell,
};

fn d1() -> &'static psr_squeeze::vapor::AtomicLine {
    AtomicTable::builtin().line(Line::D1).unwrap()
}

fn cell(f87: f64) -> VaporCell {
    VaporCell::new(0.075, 381.15, f87).unwrap()
}

#[test]
fn density_at_operating_temperature_in_sanity_band() {
    let n = density_from_temperature(381.15).unwrap();
    assert!((1e17..=1e19).contains(&n), "{n:e}");
}

#[test]
fn density_monotone_in_temperature() {
    let mut prev = 0.0;
    for t in 251..500 {
        let n = density_from_temperature(t as f64).unwrap();
        assert!(n > prev);
        prev = n;
    }
}

#[test]
fn heated_density_exceeds_room_temperature() {
    let room = density_from_temperature(293.15).unwrap();
    let heated = density_from_temperature(323.15).unwrap();
    assert!(heated >= 10.0 * room, "{}", heated / room);
}

#[test]
fn doppler_width_closed_form() {
    // FWHM = ν·sqrt(8 ln2 kT / m c²) with CODATA constants and m(87Rb).
    let (k, c, m) = (1.380649e-23, 299792458.0, 86.909180520 * 1.66053906660e-27);
    let nu = 377.107463380e12;
    let want = nu * (8.0 * 2f64.ln() * k * 381.0 / (m * c * c)).sqrt() / 1e6;
    let got = doppler_width(381.0, d1()).unwrap();
    assert!((got - want).abs() < 1e-9 * want);
    assert!((got - 540.0).abs() <= 54.0, "{got}");
}

#[test]
fn doppler_width_scaling() {
    let w = doppler_width(120.0, d1()).unwrap();
    assert!((doppler_width(480.0, d1()).unwrap() / w - 2.0).abs() < 1e-6);
    assert!(doppler_width(0.0, d1()).is_err());
    let d2 = AtomicTable::builtin().line(Line::D2).unwrap();
    let r = doppler_width(381.0, d2).unwrap() / doppler_width(381.0, d1()).unwrap();
    assert!((r - d2.frequency_hz / d1().frequency_hz).abs() < 1e-12);
}

#[test]
fn off_resonant_absorption_vanishes() {
    let pure = cell(1.0);
    let near = absorption_coefficient(&PumpConfig::d1(1e-6, 600.0), &pure).unwrap();
    let far = absorption_coefficient(&PumpConfig::d1(1e-6, 2e6), &pure).unwrap();
    assert!(far < 1e-6 * near);
}

#[test]
fn far_detuned_absorption_falls_as_inverse_square() {
    let c = cell(0.98);
    let ratio = |d: f64| {
        absorption_coefficient(&PumpConfig::d1(1e-6, 2.0 * d), &c).unwrap()
            / absorption_coefficient(&PumpConfig::d1(1e-6, d), &c).unwrap()
    };
    let errs: Vec<f64> = [1e5, 1e6, 1e7].iter().map(|&d| (ratio(d) - 0.25).abs()).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(errs[2] < 1e-3);
}

#[test]
fn rb85_dominates_at_its_doppler_center() {
    let table = AtomicTable::builtin();
    let (center, _) = (600..=1100)
        .map(|d| {
            let a = line_response(&PumpConfig::d1(1e-5, d as f64), &cell(0.98), table)
                .unwrap()
                .alpha_85;
            (d as f64, a)
        })
        .fold((0.0, 0.0), |b, x| if x.1 > b.1 { x } else { b });
    assert!(center > 703.0 && center < 1065.0);
    let p = PumpConfig::d1(1e-5, center);
    let enriched = absorption_coefficient(&p, &cell(0.98)).unwrap();
    let pure = absorption_coefficient(&p, &cell(1.0)).unwrap();
    assert!(enriched >= 5.0 * pure, "{}", enriched / pure);
}

#[test]
fn self_rotation_vanishes_far_detuned() {
    let c = cell(0.98);
    let g = |d: f64| self_rotation_g(&PumpConfig::d1(0.14, d), &c).unwrap().abs();
    assert!(g(1e5) < 1e-3 * g(600.0));
    assert!(g(1e7) < g(1e6) && g(1e6) < g(1e5));
}

#[test]
fn self_rotation_linear_in_power_when_unsaturated() {
    let c = cell(0.98);
    for d in [2e4, 5e4] {
        let g1 = self_rotation_g(&PumpConfig::d1(1e-6, d), &c).unwrap();
        let g2 = self_rotation_g(&PumpConfig::d1(2e-6, d), &c).unwrap();
        assert!((g2 / g1 - 2.0).abs() < 1e-4, "{}", g2 / g1);
    }
}

/// Far from every component and Doppler width, each component contributes
/// n·S·λ²/(2π)·s·(γ/2)³/δ³, so the sum follows the single-component law.
#[test]
fn self_rotation_far_detuned_power_law() {
    let c = cell(0.98);
    let pump = |d: f64| PumpConfig::d1(1e-4, d);
    let line = d1();
    let lambda = line.wavelength_m();
    let oracle = |delta: f64| -> f64 {
        let intensity = pump(delta).peak_intensity();
        line.components
            .iter()
            .filter(|k| k.isotope == psr_squeeze::vapor::Isotope::Rb87)
            .map(|k| {
                let frac = 0.98;
                let h = k.gamma_mhz / 2.0;
                let s = intensity / k.isat_w_per_m2;
                c.density_m3() * frac * k.strength * lambda * lambda / (2.0 * PI) * s * h.powi(3)
                    / (delta - k.offset_mhz).powi(3)
            })
            .sum()
    };
    for d in [2e5, 1e6] {
        let g = self_rotation_g(&pump(d), &c).unwrap();
        assert!((g / oracle(d) - 1.0).abs() < 1e-3, "{}", g / oracle(d));
    }
    let ratio = self_rotation_g(&pump(2e6), &c).unwrap() / self_rotation_g(&pump(1e6), &c).unwrap();
    assert!((ratio - 0.125).abs() < 1e-3);
}

#[test]
fn self_rotation_sign_follows_detuning_side() {
    let c = cell(1.0);
    assert!(self_rotation_g(&PumpConfig::d1(0.05, 600.0), &c).unwrap() > 0.0);
    assert!(self_rotation_g(&PumpConfig::d1(0.05, -1500.0), &c).unwrap() < 0.0);
}

#[test]
fn interaction_vanishes_far_detuned() {
    let m = Squeezer::reference();
    let ir = m.interact(&PumpConfig::d1(0.14, 1e7), &cell(0.98)).unwrap();
    assert!(ir.r < 1e-6 && ir.n_add < 1e-6 && ir.eta_med > 1.0 - 1e-6);
    assert!(ir.theta0 >= 0.0 && ir.theta0 < PI);
}

#[test]
fn calibration_point_through_the_chain() {
    let (lo, hi) = Squeezer::reference()
        .detected_extrema_db(&Scenario::reference())
        .unwrap();
    assert!((lo + 1.4).abs() < 0.02);
    assert!((hi - 5.2).abs() < 0.05);
}

#[test]
fn d2_never_squeezes() {
    let m = Squeezer::reference();
    for p in [0.01, 0.05, 0.14, 0.2] {
        for d in (-3000..=3000).step_by(250) {
            let mut sc = Scenario::reference();
            sc.pump = PumpConfig {
                line: Line::D2,
                ..PumpConfig::d1(p, d as f64)
            };
            let ir = m.interact(&sc.pump, &sc.cell).unwrap();
            assert_eq!(ir.r, 0.0);
            assert!(ir.n_add > 0.0);
            let (lo, _) = m.detected_extrema_db(&sc).unwrap();
            assert!(lo >= 0.0, "{p} W, {d} MHz: {lo}");
        }
    }
}

#[test]
fn interaction_result_invariants() {
    let m = Squeezer::reference();
    for p in [0.005, 0.05, 0.2] {
        for d in (-2500..=2500).step_by(100) {
            let ir = m.interact(&PumpConfig::d1(p, d as f64), &cell(0.98)).unwrap();
            assert!(ir.r >= 0.0 && ir.n_add >= 0.0);
            assert!(ir.eta_med > 0.0 && ir.eta_med <= 1.0);
            assert!((0.0..PI).contains(&ir.theta0));
        }
    }
}

fn best_detuning(power_mw: f64) -> f64 {
    let mut sc = Scenario::reference();
    sc.pump.power_w = power_mw * 1e-3;
    sweep::optimize(
        Squeezer::reference(),
        &[Bound {
            variable: SweepVariable::Detuning,
            lo: 0.0,
            hi: 1800.0,
        }],
        &sc,
        &OptimizeOptions::default(),
    )
    .unwrap()
    .best_point[0]
}

#[test]
fn optimal_detuning_moves_out_with_power() {
    let ds: Vec<f64> = [20.0, 60.0, 100.0, 140.0, 180.0]
        .iter()
        .map(|&p| best_detuning(p))
        .collect();
    assert!(ds.windows(2).all(|w| w[1] > w[0]), "{ds:?}");
}

#[test]
fn temperature_has_interior_optimum() {
    let m = Squeezer::reference();
    let ys: Vec<f64> = (50..=170)
        .step_by(5)
        .map(|tc| {
            let mut sc = Scenario::reference();
            sc.cell = sc.cell.with_temperature(tc as f64 + 273.15).unwrap();
            m.squeezing_db(&sc).unwrap()
        })
        .collect();
    let i = ys.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(i > 0 && i < ys.len() - 1, "{ys:?}");
}

/// First detuning beyond the optimum where squeezing has lost half its depth.
fn degradation_point(f87: f64) -> f64 {
    let m = Squeezer::reference();
    let mut sc = Scenario::reference();
    sc.cell = sc.cell.with_isotope_fraction(f87).unwrap();
    let curve: Vec<(f64, f64)> = (100..=4000)
        .step_by(10)
        .map(|d| {
            sc.pump.detuning_mhz = d as f64;
            (d as f64, m.squeezing_db(&sc).unwrap())
        })
        .collect();
    let (i_best, best) = curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, p)| (i, p.1))
        .unwrap();
    curve[i_best..]
        .iter()
        .find(|p| p.1 > 0.5 * best)
        .map(|p| p.0)
        .unwrap_or(f64::INFINITY)
}

#[test]
fn rb85_pulls_in_the_degradation_point() {
    let enriched = degradation_point(0.98);
    let pure = degradation_point(1.0);
    assert!(enriched.is_finite());
    assert!(pure > enriched, "{enriched} vs {pure}");
}

#[test]
fn calibration_uses_the_default_efficiency() {
    let cal = Squeezer::reference().calibration();
    let anchor = cal.anchor.unwrap();
    assert_eq!(anchor.scenario.homodyne, HomodyneConfig::default());
    let fit = cal.fit.unwrap();
    assert!(fit.r > 0.0 && fit.n_add > 0.0);
}
