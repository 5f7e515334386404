use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use psr_squeeze::gaussian::{
    add_thermal, apply_loss, apply_rotation, apply_squeeze, quadrature_variance, vacuum, variance_db, GaussianState,
};

/// Congruence written out longhand with the squeeze built from explicit
/// `R(θ)·diag·R(θ)ᵀ` entries.
fn brute_force_squeeze(cov: [[f64; 2]; 2], r: f64, th: f64) -> [[f64; 2]; 2] {
    let (c, s) = (th.cos(), th.sin());
    let (em, ep) = ((-r).exp(), r.exp());
    let m = [
        [c * c * em + s * s * ep, c * s * (em - ep)],
        [c * s * (em - ep), s * s * em + c * c * ep],
    ];
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[i][j] += m[i][k] * cov[k][l] * m[j][l];
                }
            }
        }
    }
    out
}

/// Variance along θ from rotating the matrix and reading the (0,0) entry.
fn brute_force_variance(cov: [[f64; 2]; 2], th: f64) -> f64 {
    let (c, s) = (th.cos(), th.sin());
    let rt = [[c, s], [-s, c]];
    let mut acc = 0.0;
    for k in 0..2 {
        for l in 0..2 {
            acc += rt[0][k] * cov[k][l] * rt[0][l];
        }
    }
    acc
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn vacuum_is_identity() {
    assert_eq!(vacuum().cov(), [[1.0, 0.0], [0.0, 1.0]]);
    for i in 0..16 {
        assert!((quadrature_variance(&vacuum(), i as f64 * 0.41) - 1.0).abs() < 1e-15);
    }
    assert_eq!(variance_db(1.0).unwrap(), 0.0);
}

#[test]
fn quoted_levels_in_db() {
    assert!((variance_db(0.7244).unwrap() + 1.4).abs() < 5e-4);
    assert!((variance_db(3.3113).unwrap() - 5.2).abs() < 5e-5);
}

#[test]
fn squeezed_reference_variances() {
    let r = -(0.6310f64).ln() / 2.0;
    assert!((r - 0.2303).abs() < 1e-4);
    let s = apply_squeeze(vacuum(), r, 0.0).unwrap();
    let b = brute_force_squeeze([[1.0, 0.0], [0.0, 1.0]], r, 0.0);
    assert!((quadrature_variance(&s, 0.0) - brute_force_variance(b, 0.0)).abs() < 1e-14);
    assert!((quadrature_variance(&s, 0.0) - 0.6310).abs() < 1e-12);
    assert!((quadrature_variance(&s, FRAC_PI_2) - 1.5848).abs() < 1e-4);
}

#[test]
fn loss_inversion_matches_root_solve() {
    let (v_meas, v_corr) = (0.7244f64, 0.6310f64);
    let eta = bisect(0.0, 1.0, |e| e * v_corr + 1.0 - e - v_meas);
    assert!((eta - 0.7469).abs() < 5e-5);
    let r = -v_corr.ln() / 2.0;
    let out = apply_loss(apply_squeeze(vacuum(), r, 0.0).unwrap(), 0.7469).unwrap();
    assert!((quadrature_variance(&out, 0.0) - 0.7244).abs() < 1e-4);
}

#[test]
fn loss_endpoints() {
    let s = apply_squeeze(vacuum(), 0.7, 0.4).unwrap();
    assert_eq!(apply_loss(s, 1.0).unwrap().cov(), s.cov());
    assert_eq!(apply_loss(s, 0.0).unwrap().cov(), vacuum().cov());
}

#[test]
fn zero_squeeze_and_zero_thermal_are_identity() {
    let s = add_thermal(apply_squeeze(vacuum(), 0.3, 1.0).unwrap(), 0.2).unwrap();
    let same = apply_squeeze(s, 0.0, 0.8).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!((same.cov()[i][j] - s.cov()[i][j]).abs() < 1e-15);
        }
    }
    assert_eq!(add_thermal(s, 0.0).unwrap().cov(), s.cov());
}

#[test]
fn anti_squeezing_excess_requires_added_noise() {
    let (vmin, vmax) = (0.7244f64, 3.3113f64);
    let det = vmin * vmax;
    assert!((det - 2.399).abs() < 1e-3);
    let impure = GaussianState::from_cov([[vmin, 0.0], [0.0, vmax]]).unwrap();
    assert!(impure.det() > 1.0);
    // A pure squeezed state with the same V_min has det 1 and far lower V_max.
    let pure = apply_squeeze(vacuum(), -vmin.ln() / 2.0, 0.0).unwrap();
    assert!((pure.det() - 1.0).abs() < 1e-12);
    assert!(quadrature_variance(&pure, FRAC_PI_2) < vmax);
}

#[test]
fn monotone_degradation_under_loss() {
    let s = apply_squeeze(vacuum(), 0.6, 0.2).unwrap();
    let v = |eta: f64| quadrature_variance(&apply_loss(s, eta).unwrap(), 0.2);
    let etas: Vec<f64> = (0..=100).map(|i| 1.0 - i as f64 / 100.0).collect();
    for w in etas.windows(2) {
        assert!(v(w[1]) > v(w[0]));
        assert!(v(w[1]) <= 1.0);
    }
}

fn chain_strategy() -> impl Strategy<Value = Vec<(u8, f64, f64)>> {
    prop::collection::vec((0u8..4, 0.0f64..1.5, 0.0f64..PI), 1..10)
}

fn apply_chain(ops: &[(u8, f64, f64)]) -> GaussianState {
    ops.iter().fold(vacuum(), |s, &(kind, a, b)| match kind {
        0 => apply_squeeze(s, a, b).unwrap(),
        1 => apply_loss(s, (a / 1.5).min(1.0)).unwrap(),
        2 => add_thermal(s, a).unwrap(),
        _ => apply_rotation(s, b),
    })
}

proptest! {
    #[test]
    fn squeeze_matches_brute_force_congruence(ops in chain_strategy(), r in 0.0f64..1.5, th in 0.0f64..PI) {
        let s = apply_chain(&ops);
        let got = apply_squeeze(s, r, th).unwrap().cov();
        let want = brute_force_squeeze(s.cov(), r, th);
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((got[i][j] - want[i][j]).abs() <= 1e-10 * want[i][j].abs().max(1.0));
            }
        }
    }

    #[test]
    fn squeeze_preserves_determinant(ops in chain_strategy(), r in 0.0f64..1.5, th in 0.0f64..PI) {
        let s = apply_chain(&ops);
        let after = apply_squeeze(s, r, th).unwrap();
        // det = ad − b² loses digits when a·d ≫ det; scale the tolerance accordingly.
        let c = after.cov();
        let scale = c[0][0] * c[1][1] + c[0][1] * c[0][1];
        prop_assert!((after.det() - s.det()).abs() <= 1e-13 * scale);
    }

    #[test]
    fn every_chain_stays_physical(ops in chain_strategy()) {
        let s = apply_chain(&ops);
        prop_assert!(s.is_physical());
        let c = s.cov();
        prop_assert!((c[0][1] - c[1][0]).abs() <= 1e-12);
    }

    #[test]
    fn loss_interpolates_variance(ops in chain_strategy(), eta in 0.0f64..=1.0, th in -PI..PI) {
        let s = apply_chain(&ops);
        let v = quadrature_variance(&s, th);
        let got = quadrature_variance(&apply_loss(s, eta).unwrap(), th);
        prop_assert!((got - (eta * v + 1.0 - eta)).abs() <= 1e-12 * v.max(1.0));
    }

    #[test]
    fn variance_is_pi_periodic_and_matches_rotation(ops in chain_strategy(), th in -PI..PI) {
        let s = apply_chain(&ops);
        let v = quadrature_variance(&s, th);
        prop_assert!((v - quadrature_variance(&s, th + PI)).abs() <= 1e-12 * v.max(1.0));
        prop_assert!((v - brute_force_variance(s.cov(), th)).abs() <= 1e-12 * v.max(1.0));
    }

    #[test]
    fn conjugate_quadratures_obey_uncertainty(ops in chain_strategy(), th in -PI..PI) {
        let s = apply_chain(&ops);
        let prod = quadrature_variance(&s, th) * quadrature_variance(&s, th + FRAC_PI_2);
        prop_assert!(prod >= s.det() * (1.0 - 1e-12));
        prop_assert!(s.det() >= 1.0 - 1e-9);
    }

    #[test]
    fn thermal_raises_min_eigenvalue(ops in chain_strategy(), n in 1e-6f64..3.0) {
        let s = apply_chain(&ops);
        let after = add_thermal(s, n).unwrap();
        prop_assert!(after.eigenvalues().0 > s.eigenvalues().0);
    }
}
