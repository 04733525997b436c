//! Global-phase-invariant error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{relative_misfit, IntensityData, MeasurementEnsemble};
use crate::noise::SNR_CAP_DB;
use crate::signal::ComplexSignal;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub relative_mse: f64,
    pub mse_db: f64,
    pub residual: f64,
    pub rank_gap: f64,
}

impl Report {
    pub fn new(relative_mse: f64, residual: f64, rank_gap: f64) -> Self {
        Self {
            relative_mse,
            mse_db: to_db(relative_mse),
            residual,
            rank_gap,
        }
    }
}

/// `10·log₁₀(value)` clamped to ±300 dB.
pub fn to_db(value: f64) -> f64 {
    if value <= 0.0 {
        return -SNR_CAP_DB;
    }
    (10.0 * value.log10()).clamp(-SNR_CAP_DB, SNR_CAP_DB)
}

fn check_pair(x0: &ComplexSignal, x_hat: &ComplexSignal) -> Result<f64> {
    if x0.shape() != x_hat.shape() {
        return Err(Error::ShapeMismatch {
            expected: x0.shape().to_string(),
            actual: x_hat.shape().to_string(),
        });
    }
    let n0 = x0.norm_sqr();
    if n0 == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok(n0)
}

/// `min_{|c|=1} ‖c·x₀ − x̂‖²/‖x₀‖²`. The minimizing `c` aligns `x₀` with
/// `x̂`, i.e. `c = ⟨x₀, x̂⟩/|⟨x₀, x̂⟩|`, which gives the closed form
/// `(‖x₀‖² + ‖x̂‖² − 2|⟨x₀, x̂⟩|)/‖x₀‖²`.
pub fn relative_mse(x0: &ComplexSignal, x_hat: &ComplexSignal) -> Result<f64> {
    let n0 = check_pair(x0, x_hat)?;
    let cross = x0.inner(x_hat).norm();
    Ok(((n0 + x_hat.norm_sqr() - 2.0 * cross) / n0).max(0.0))
}

/// `‖x₀x₀* − x̂x̂*‖_F/‖x₀x₀*‖_F` without forming either matrix, using
/// `‖xx* − yy*‖_F² = (‖x‖² − ‖y‖²)² + 2‖x‖²‖y_⊥‖²` where `y_⊥` is the part
/// of `y` orthogonal to `x` (stable when `y ≈ c·x`).
pub fn matrix_relative_error(x0: &ComplexSignal, x_hat: &ComplexSignal) -> Result<f64> {
    let n0 = check_pair(x0, x_hat)?;
    let nh = x_hat.norm_sqr();
    let c = x0.inner(x_hat) / n0;
    let perp: f64 = x0
        .data()
        .iter()
        .zip(x_hat.data())
        .map(|(a, b)| (b - c * a).norm_sqr())
        .sum();
    Ok(((n0 - nh).powi(2) + 2.0 * n0 * perp).sqrt() / n0)
}

/// `‖sense(x̂) − b‖₂/‖b‖₂`.
pub fn residual(ensemble: &MeasurementEnsemble, x_hat: &ComplexSignal, b: &IntensityData) -> Result<f64> {
    if b.len() != ensemble.m() {
        return Err(Error::LengthMismatch {
            expected: ensemble.m(),
            actual: b.len(),
        });
    }
    if b.norm() == 0.0 {
        return Err(Error::InvalidParameter("residual undefined for zero data".into()));
    }
    let mu = ensemble.sense(x_hat)?;
    Ok(relative_misfit(&mu.values, &b.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{Shape, C64};

    fn sig(v: &[(f64, f64)]) -> ComplexSignal {
        ComplexSignal::new(
            Shape::D1(v.len()),
            v.iter().map(|&(a, b)| C64::new(a, b)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn relative_mse_cases() {
        let x0 = sig(&[(1.0, 2.0), (-0.5, 0.3), (0.0, 1.0)]);
        let rotated = x0.scale(C64::new(0.0, 1.0));
        assert!(relative_mse(&x0, &rotated).unwrap() < 1e-15);
        let zero = ComplexSignal::zeros(x0.shape());
        assert_eq!(relative_mse(&x0, &zero).unwrap(), 1.0);
        let a = sig(&[(1.0, 0.0), (0.0, 0.0)]);
        let b = sig(&[(0.0, 0.0), (0.0, 1.0)]);
        assert_eq!(relative_mse(&a, &b).unwrap(), 2.0);
        assert!(relative_mse(&zero, &a).is_err());
        assert!(matches!(relative_mse(&zero, &zero), Err(Error::ZeroSignal)));
    }

    #[test]
    fn matrix_error_cases() {
        let x0 = sig(&[(1.0, 2.0), (-0.5, 0.3)]);
        let c = C64::from_polar(1.0, 0.7);
        assert!(matrix_relative_error(&x0, &x0.scale(c)).unwrap() < 1e-15);
        let zero = ComplexSignal::zeros(x0.shape());
        assert_eq!(matrix_relative_error(&x0, &zero).unwrap(), 1.0);
    }

    #[test]
    fn db_conversion_is_capped() {
        assert_eq!(to_db(0.0), -300.0);
        assert!((to_db(1e-3) + 30.0).abs() < 1e-12);
        assert_eq!(Report::new(1e-2, 0.0, 0.0).mse_db, -20.0);
    }
}
