//! Single-mode Gaussian states in shot-noise units.
//!
//! The vacuum has unit variance on every quadrature and all states carry zero
//! mean, so a state is just its 2x2 covariance matrix.

use serde::{Deserialize, Serialize};

use crate::Error;

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const PHYSICALITY_TOL: f64 = 1e-9;

pub type Mat2 = [[f64; 2]; 2];

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

/// Symplectic matrix that squeezes the quadrature at angle `theta0` by `e^{-r}`.
pub fn squeeze_matrix(r: f64, theta0: f64) -> Mat2 {
    let rot = rotation(theta0);
    let diag = [[(-r).exp(), 0.0], [0.0, r.exp()]];
    mat_mul(&mat_mul(&rot, &diag), &transpose(&rot))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    cov: Mat2,
}

impl GaussianState {
    /// Builds a state from a covariance matrix, rejecting asymmetric or
    /// unphysical input.
    pub fn from_cov(cov: Mat2) -> Result<Self, Error> {
        if (cov[0][1] - cov[1][0]).abs() > SYMMETRY_TOL {
            return Err(Error::InvalidState("covariance is not symmetric".into()));
        }
        let s = GaussianState { cov };
        if !s.is_physical() {
            return Err(Error::InvalidState(format!(
                "covariance violates the uncertainty bound (det = {})",
                det(&cov)
            )));
        }
        Ok(s)
    }

    pub fn cov(&self) -> Mat2 {
        self.cov
    }

    pub fn det(&self) -> f64 {
        det(&self.cov)
    }

    /// Eigenvalues of the covariance, ascending.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let [[a, b], [_, d]] = self.cov;
        let mean = 0.5 * (a + d);
        let half = (0.25 * (a - d).powi(2) + b * b).sqrt();
        (mean - half, mean + half)
    }

    pub fn is_physical(&self) -> bool {
        let (lo, _) = self.eigenvalues();
        lo > 0.0 && self.det() >= 1.0 - PHYSICALITY_TOL
    }

    /// Congruence `m · cov · mᵀ`. No physicality check; `m` must be symplectic
    /// for the result to stay physical.
    pub fn transform(&self, m: &Mat2) -> Self {
        let mut cov = mat_mul(&mat_mul(m, &self.cov), &transpose(m));
        let off = 0.5 * (cov[0][1] + cov[1][0]);
        cov[0][1] = off;
        cov[1][0] = off;
        GaussianState { cov }
    }

    /// Extremal quadrature variances over all angles.
    pub fn variance_extrema(&self) -> (f64, f64) {
        self.eigenvalues()
    }
}

pub fn vacuum() -> GaussianState {
    GaussianState {
        cov: [[1.0, 0.0], [0.0, 1.0]],
    }
}

pub fn apply_squeeze(state: GaussianState, r: f64, theta0: f64) -> Result<GaussianState, Error> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "squeeze parameter must be >= 0, got {r}"
        )));
    }
    if !theta0.is_finite() {
        return Err(Error::InvalidParameter("squeeze angle must be finite".into()));
    }
    Ok(state.transform(&squeeze_matrix(r, theta0)))
}

pub fn apply_rotation(state: GaussianState, theta: f64) -> GaussianState {
    state.transform(&rotation(theta))
}

pub fn apply_loss(state: GaussianState, eta: f64) -> Result<GaussianState, Error> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "transmission must lie in [0, 1], got {eta}"
        )));
    }
    let c = state.cov;
    let keep = 1.0 - eta;
    Ok(GaussianState {
        cov: [
            [eta * c[0][0] + keep, eta * c[0][1]],
            [eta * c[1][0], eta * c[1][1] + keep],
        ],
    })
}

pub fn add_thermal(state: GaussianState, n_add: f64) -> Result<GaussianState, Error> {
    if !(n_add >= 0.0) || !n_add.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "added thermal quanta must be >= 0, got {n_add}"
        )));
    }
    let mut cov = state.cov;
    cov[0][0] += 2.0 * n_add;
    cov[1][1] += 2.0 * n_add;
    Ok(GaussianState { cov })
}

pub fn quadrature_variance(state: &GaussianState, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let m = state.cov;
    c * c * m[0][0] + 2.0 * s * c * m[0][1] + s * s * m[1][1]
}

pub fn variance_db(v: f64) -> Result<f64, Error> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("variance must be > 0, got {v}")));
    }
    Ok(10.0 * v.log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squeeze_reference_state() {
        let r = -(0.6310f64).ln() / 2.0;
        let s = apply_squeeze(vacuum(), r, 0.0).unwrap();
        assert!((quadrature_variance(&s, 0.0) - 0.6310).abs() < 1e-12);
        assert!((quadrature_variance(&s, std::f64::consts::FRAC_PI_2) - 1.0 / 0.6310).abs() < 1e-9);
        assert!((variance_db(0.6310).unwrap() + 2.0).abs() < 0.001);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(apply_squeeze(vacuum(), -0.1, 0.0).is_err());
        assert!(apply_loss(vacuum(), 1.01).is_err());
        assert!(apply_loss(vacuum(), -0.01).is_err());
        assert!(add_thermal(vacuum(), -1.0).is_err());
        assert!(variance_db(0.0).is_err());
        assert!(variance_db(-2.0).is_err());
        assert!(GaussianState::from_cov([[0.5, 0.0], [0.0, 0.5]]).is_err());
        assert!(GaussianState::from_cov([[1.0, 0.1], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn thermal_doubles_vacuum() {
        let s = add_thermal(vacuum(), 0.5).unwrap();
        assert_eq!(s.cov(), [[2.0, 0.0], [0.0, 2.0]]);
        assert!((variance_db(quadrature_variance(&s, 1.234)).unwrap() - 3.0103).abs() < 1e-4);
    }
}
