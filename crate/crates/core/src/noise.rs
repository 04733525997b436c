//! Noise synthesis and the Gaussian / Poisson negative log-likelihoods.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::measurement::{IntensityData, NoiseTag};
use crate::rng::{stream_rng, Domain};

/// SNR reported for noiseless data.
pub const SNR_CAP_DB: f64 = 300.0;

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    /// Additive `N(0, σ_k²)` per entry.
    Gaussian { sigma: Vec<f64> },
    /// `Poi(scale·μ)/scale`: `scale` is the photon count per unit intensity.
    Poisson { scale: f64 },
}

/// Photon scale whose expected SNR on `b_clean` is `snr_db`.
pub fn poisson_scale_for_snr(b_clean: &[f64], snr_db: f64) -> Result<f64> {
    let sum: f64 = b_clean.iter().sum();
    let sum_sq: f64 = b_clean.iter().map(|v| v * v).sum();
    if !(sum > 0.0) {
        return Err(Error::InvalidParameter("clean intensities are all zero".into()));
    }
    Ok(10f64.powf(snr_db / 10.0) * sum / sum_sq)
}

/// Constant noise std whose expected SNR on `b_clean` is `snr_db`.
pub fn gaussian_sigma_for_snr(b_clean: &[f64], snr_db: f64) -> Result<f64> {
    let sum_sq: f64 = b_clean.iter().map(|v| v * v).sum();
    if !(sum_sq > 0.0) {
        return Err(Error::InvalidParameter("clean intensities are all zero".into()));
    }
    Ok((sum_sq / b_clean.len() as f64 / 10f64.powf(snr_db / 10.0)).sqrt())
}

/// Draws noisy data around clean intensities `b_clean`.
pub fn corrupt(b_clean: &IntensityData, model: &NoiseModel, seed: u64) -> Result<IntensityData> {
    if b_clean.noise != NoiseTag::Clean {
        return Err(Error::InvalidParameter("input data is already noisy".into()));
    }
    let mut rng = stream_rng(seed, Domain::Noise, 0);
    match model {
        NoiseModel::Gaussian { sigma } => {
            if sigma.len() != b_clean.len() {
                return Err(Error::LengthMismatch {
                    expected: b_clean.len(),
                    actual: sigma.len(),
                });
            }
            if sigma.iter().any(|&s| !(s > 0.0)) {
                return Err(Error::InvalidParameter("noise std must be positive".into()));
            }
            let values = b_clean
                .values
                .iter()
                .zip(sigma)
                .map(|(&mu, &s)| {
                    let z: f64 = rng.sample(StandardNormal);
                    mu + s * z
                })
                .collect();
            Ok(IntensityData {
                values,
                noise: NoiseTag::Gaussian {
                    sigma: sigma.clone(),
                },
            })
        }
        NoiseModel::Poisson { scale } => {
            let scale = *scale;
            if !(scale > 0.0) || !scale.is_finite() {
                return Err(Error::InvalidParameter("photon scale must be positive".into()));
            }
            let mut values = Vec::with_capacity(b_clean.len());
            for &mu in &b_clean.values {
                if mu < 0.0 {
                    return Err(Error::InvalidParameter("Poisson means must be nonnegative".into()));
                }
                let rate = scale * mu;
                let count = if rate > 0.0 {
                    Poisson::new(rate)
                        .map_err(|e| Error::InvalidParameter(format!("Poisson rate {rate}: {e}")))?
                        .sample(&mut rng)
                } else {
                    0.0
                };
                values.push(count / scale);
            }
            Ok(IntensityData {
                values,
                noise: NoiseTag::Poisson { scale },
            })
        }
    }
}

/// `10·log₁₀(‖clean‖²/‖noisy − clean‖²)`, capped at ±[`SNR_CAP_DB`].
pub fn snr_db(clean: &IntensityData, noisy: &IntensityData) -> Result<f64> {
    if clean.len() != noisy.len() {
        return Err(Error::LengthMismatch {
            expected: clean.len(),
            actual: noisy.len(),
        });
    }
    let signal: f64 = clean.values.iter().map(|v| v * v).sum();
    let noise: f64 = clean
        .values
        .iter()
        .zip(&noisy.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(ratio_db(signal, noise))
}

pub(crate) fn ratio_db(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { SNR_CAP_DB };
    }
    (10.0 * (num / den).log10()).clamp(-SNR_CAP_DB, SNR_CAP_DB)
}

/// `Σ (b_k − μ_k)²/(2σ_k²)` and its gradient `(μ_k − b_k)/σ_k²`.
pub fn nll_gaussian(b: &[f64], mu: &[f64], sigma: &[f64]) -> Result<(f64, Vec<f64>)> {
    if b.len() != mu.len() || b.len() != sigma.len() {
        return Err(Error::LengthMismatch {
            expected: b.len(),
            actual: if mu.len() != b.len() { mu.len() } else { sigma.len() },
        });
    }
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidParameter("noise std must be positive".into()));
    }
    let mut value = 0.0;
    let grad = b
        .iter()
        .zip(mu)
        .zip(sigma)
        .map(|((&bk, &mk), &s)| {
            let inv = 1.0 / (s * s);
            value += 0.5 * (bk - mk) * (bk - mk) * inv;
            (mk - bk) * inv
        })
        .collect();
    Ok((value, grad))
}

/// Floor applied to Poisson means before taking logs.
pub fn poisson_floor(b: &[f64]) -> f64 {
    1e-12 * b.iter().copied().fold(1.0, f64::max)
}

/// `Σ (μ_k − b_k·log μ_k)` and gradient `1 − b_k/μ_k`, with `μ` clamped
/// below at [`poisson_floor`].
pub fn nll_poisson(b: &[f64], mu: &[f64]) -> Result<(f64, Vec<f64>)> {
    if b.len() != mu.len() {
        return Err(Error::LengthMismatch {
            expected: b.len(),
            actual: mu.len(),
        });
    }
    if b.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidParameter("Poisson data must be nonnegative".into()));
    }
    let floor = poisson_floor(b);
    let mut value = 0.0;
    let grad = b
        .iter()
        .zip(mu)
        .map(|(&bk, &mk)| {
            let m = mk.max(floor);
            value += m - if bk > 0.0 { bk * m.ln() } else { 0.0 };
            1.0 - bk / m
        })
        .collect();
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_nll_direct() {
        let (v, g) = nll_gaussian(&[1.0], &[3.0], &[1.0]).unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(g, vec![2.0]);
        let (v, g) = nll_gaussian(&[1.0, 2.0], &[1.0, 2.0], &[0.5, 2.0]).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
        assert!(nll_gaussian(&[1.0], &[1.0], &[0.0]).is_err());
        assert!(nll_gaussian(&[1.0], &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn poisson_nll_direct() {
        let (v, g) = nll_poisson(&[2.0], &[1.0]).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g, vec![-1.0]);
        let (_, g) = nll_poisson(&[0.5, 3.0], &[0.5, 3.0]).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-15));
        assert!(nll_poisson(&[-1.0], &[1.0]).is_err());
        let (v, _) = nll_poisson(&[1.0], &[0.0]).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn snr_conventions() {
        let clean = IntensityData::clean(vec![3.0, 4.0]);
        assert_eq!(snr_db(&clean, &clean).unwrap(), SNR_CAP_DB);
        let noisy = IntensityData::clean(vec![3.0, 9.0]);
        assert!(snr_db(&clean, &noisy).unwrap().abs() < 1e-12);
        let noisy = IntensityData::clean(vec![3.0, 4.5]);
        assert!((snr_db(&clean, &noisy).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn snr_targets() {
        // b = (3, 4): Σb = 7, Σb² = 25.
        assert!((poisson_scale_for_snr(&[3.0, 4.0], 10.0).unwrap() - 2.8).abs() < 1e-12);
        assert!((gaussian_sigma_for_snr(&[3.0, 4.0], 10.0).unwrap() - 1.25f64.sqrt()).abs() < 1e-12);
        assert!(poisson_scale_for_snr(&[0.0, 0.0], 10.0).is_err());
    }

    #[test]
    fn poisson_vanishing_noise_and_zero_mean() {
        let clean = IntensityData::clean(vec![0.0, 1.5, 2.0, 10.0]);
        let noisy = corrupt(&clean, &NoiseModel::Poisson { scale: 1e12 }, 3).unwrap();
        assert_eq!(noisy.values[0], 0.0);
        for (a, b) in clean.values.iter().zip(&noisy.values).skip(1) {
            assert!((a - b).abs() <= 1e-4 * a);
        }
        assert!(corrupt(&clean, &NoiseModel::Poisson { scale: 0.0 }, 3).is_err());
        assert!(corrupt(&noisy, &NoiseModel::Poisson { scale: 1.0 }, 3).is_err());
    }

    #[test]
    fn gaussian_noise_moments_and_determinism() {
        let n = 10_000;
        let clean = IntensityData::clean(vec![1.0; n]);
        let model = NoiseModel::Gaussian { sigma: vec![0.1; n] };
        let a = corrupt(&clean, &model, 9).unwrap();
        let b = corrupt(&clean, &model, 9).unwrap();
        assert_eq!(a, b);
        let mean = a.values.iter().sum::<f64>() / n as f64;
        let var = a.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        assert!((var.sqrt() - 0.1).abs() < 0.005);
        let bad = NoiseModel::Gaussian { sigma: vec![-0.1; n] };
        assert!(corrupt(&clean, &bad, 9).is_err());
    }

    #[test]
    fn poisson_mean_is_unbiased() {
        let mu = 3.7;
        let scale = 2.0;
        let n = 20_000;
        let clean = IntensityData::clean(vec![mu; n]);
        let noisy = corrupt(&clean, &NoiseModel::Poisson { scale }, 4).unwrap();
        let mean = noisy.values.iter().sum::<f64>() / n as f64;
        let se = (mu / scale / n as f64).sqrt();
        assert!((mean - mu).abs() < 3.0 * se, "mean {mean}");
    }
}
