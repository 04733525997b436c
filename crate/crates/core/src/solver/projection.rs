use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{top_eigenpairs, EigenOptions};
use crate::psd::FactoredPsd;
use crate::signal::{ComplexSignal, Shape, C64};

/// Rank-capped PSD projection `Σ_{i≤k} max(λ_i, 0) u_i u_i*` of the
/// Hermitian operator `apply` on `C^dim`. Only the `k` algebraically
/// largest eigenpairs are computed.
///
/// On eigensolver failure the solve is retried once with a deeper Krylov
/// space and more restarts before the error is returned.
pub fn psd_project_rank_k<F, R>(
    dim: usize,
    k: usize,
    mut apply: F,
    warm: &[Vec<C64>],
    eig: &EigenOptions,
    rng: &mut R,
) -> Result<FactoredPsd>
where
    F: FnMut(&[C64], &mut [C64]),
    R: Rng,
{
    if k == 0 {
        return Err(Error::InvalidParameter("rank cap must be at least 1".into()));
    }
    let opts = EigenOptions {
        positive_only: true,
        ..eig.clone()
    };
    let pairs = match top_eigenpairs(dim, k, &mut apply, warm, &opts, rng) {
        Ok(p) => p,
        Err(Error::EigenNonConvergence { .. }) => {
            let retry = EigenOptions {
                depth: opts.depth + 2,
                max_restarts: opts.max_restarts * 4,
                ..opts
            };
            top_eigenpairs(dim, k, &mut apply, warm, &retry, rng)?
        }
        Err(e) => return Err(e),
    };
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for (v, u) in pairs.values.into_iter().zip(pairs.vectors) {
        if v > 0.0 {
            values.push(v);
            vectors.push(u);
        }
    }
    Ok(FactoredPsd::from_sorted_parts(dim, values, vectors))
}

/// Leading eigenvector of `X`, rescaled to norm `target_norm`; the zero
/// vector when `X` has no positive eigenvalue.
pub fn extract_rank_one(x: &FactoredPsd, target_norm: f64) -> Vec<C64> {
    match (x.values().first(), x.vectors().first()) {
        (Some(&l), Some(v)) if l > 0.0 => {
            let nv = crate::linalg::norm(v);
            v.iter().map(|z| z * (target_norm / nv)).collect()
        }
        _ => vec![C64::new(0.0, 0.0); x.dim()],
    }
}

/// [`extract_rank_one`] reshaped into a signal.
pub fn extract_rank_one_signal(x: &FactoredPsd, target_norm: f64, shape: Shape) -> Result<ComplexSignal> {
    ComplexSignal::new(shape, extract_rank_one(x, target_norm))
}

/// `log det(X + εI) = Σ_j log(ε + λ_j) + (N − r)·log ε` for ambient
/// dimension `N`.
pub fn logdet_objective(x: &FactoredPsd, epsilon: f64, ambient_dim: usize) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    if x.rank() > ambient_dim {
        return Err(Error::InvalidParameter("rank exceeds ambient dimension".into()));
    }
    let head: f64 = x.values().iter().map(|l| (epsilon + l).ln()).sum();
    Ok(head + (ambient_dim - x.rank()) as f64 * epsilon.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag_op(d: &[f64]) -> impl Fn(&[C64], &mut [C64]) + '_ {
        move |v, out| {
            for i in 0..d.len() {
                out[i] = v[i] * d[i];
            }
        }
    }

    #[test]
    fn clips_negative_and_caps_rank() {
        let d = [3.0, 1.0, -2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = psd_project_rank_k(3, 3, diag_op(&d), &[], &EigenOptions::default(), &mut rng).unwrap();
        assert_eq!(p.rank(), 2);
        assert!((p.values()[0] - 3.0).abs() < 1e-12 && (p.values()[1] - 1.0).abs() < 1e-12);
        let dense = p.to_dense();
        assert!((dense[(0, 0)].re - 3.0).abs() < 1e-12);
        assert!((dense[(1, 1)].re - 1.0).abs() < 1e-12);
        assert!(dense[(2, 2)].norm() < 1e-12);

        let p = psd_project_rank_k(3, 1, diag_op(&d), &[], &EigenOptions::default(), &mut rng).unwrap();
        assert_eq!(p.rank(), 1);
        let dense = p.to_dense();
        assert!((dense[(0, 0)].re - 3.0).abs() < 1e-12);
        assert!(dense[(1, 1)].norm() < 1e-12);
    }

    #[test]
    fn rank_one_extraction() {
        let e0 = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let e1 = vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let x = FactoredPsd::new(2, vec![2.0, 1.0], vec![e0, e1]).unwrap();
        let v = extract_rank_one(&x, 5.0);
        assert!((v[0].norm() - 5.0).abs() < 1e-12 && v[1].norm() < 1e-12);
        let zero = extract_rank_one(&FactoredPsd::zero(3), 5.0);
        assert!(zero.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn logdet_closed_forms() {
        let eps = 0.1;
        let zero = FactoredPsd::zero(3);
        assert!((logdet_objective(&zero, eps, 3).unwrap() - 3.0 * eps.ln()).abs() < 1e-14);
        let e0 = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let e1 = vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let half = FactoredPsd::new(2, vec![0.5, 0.5], vec![e0.clone(), e1]).unwrap();
        assert!((logdet_objective(&half, eps, 2).unwrap() - 2.0 * 0.6f64.ln()).abs() < 1e-14);
        let n = 7;
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[2] = C64::new(0.0, 1.0);
        let rank_one = FactoredPsd::new(n, vec![1.0], vec![v]).unwrap();
        let expected = (eps + 1.0).ln() + (n as f64 - 1.0) * eps.ln();
        assert!((logdet_objective(&rank_one, eps, n).unwrap() - expected).abs() < 1e-13);
        assert!(logdet_objective(&zero, 0.0, 3).is_err());
    }
}
