//! Complex vector kernels and a block Krylov eigensolver for the top
//! eigenpairs of a Hermitian operator given only through its action.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::signal::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// `Σ conj(a[i])·b[i]`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = ZERO;
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// `y += alpha·x`.
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale_in_place(alpha: C64, x: &mut [C64]) {
    x.iter_mut().for_each(|z| *z *= alpha);
}

/// Removes the components of `v` along the orthonormal vectors `basis`,
/// two passes of classical Gram-Schmidt.
pub fn orthogonalize_against(basis: &[Vec<C64>], v: &mut [C64]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            axpy(-c, q, v);
        }
    }
}

/// Eigen-decomposition of a dense Hermitian matrix, eigenvalues descending.
/// Set `real` when the matrix is real symmetric to keep eigenvectors real.
pub fn hermitian_eig(matrix: &DMatrix<C64>, real: bool) -> (Vec<f64>, DMatrix<C64>) {
    let n = matrix.nrows();
    let (values, vectors) = if real {
        let re = DMatrix::from_fn(n, n, |i, j| 0.5 * (matrix[(i, j)].re + matrix[(j, i)].re));
        let eig = SymmetricEigen::new(re);
        (
            eig.eigenvalues.iter().copied().collect::<Vec<_>>(),
            eig.eigenvectors.map(|x| C64::new(x, 0.0)),
        )
    } else {
        let herm = DMatrix::from_fn(n, n, |i, j| 0.5 * (matrix[(i, j)] + matrix[(j, i)].conj()));
        let eig = SymmetricEigen::new(herm);
        (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let sorted_values = order.iter().map(|&i| values[i]).collect();
    let sorted_vectors = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    (sorted_values, sorted_vectors)
}

#[derive(Clone, Debug)]
pub struct EigenOptions {
    /// Block size beyond the number of wanted pairs.
    pub block_extra: usize,
    /// Krylov blocks per restart (including the starting block).
    pub depth: usize,
    pub max_restarts: usize,
    /// Residual tolerance relative to the largest Ritz value magnitude.
    pub tol: f64,
    /// Operator is real symmetric; keep all vectors real.
    pub real: bool,
    /// Pairs with Ritz value below `-tol·scale` need not converge.
    pub positive_only: bool,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            block_extra: 4,
            depth: 3,
            max_restarts: 60,
            tol: 1e-10,
            real: false,
            positive_only: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenPairs {
    /// Descending.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    pub restarts: usize,
}

fn random_vector<R: Rng>(dim: usize, real: bool, rng: &mut R) -> Vec<C64> {
    (0..dim)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = if real { 0.0 } else { rng.sample(StandardNormal) };
            C64::new(re, im)
        })
        .collect()
}

/// Appends `v` to `basis` after orthonormalization, unless it is (numerically)
/// inside the span already.
fn push_orthonormal(basis: &mut Vec<Vec<C64>>, mut v: Vec<C64>, real: bool) -> bool {
    if real {
        v.iter_mut().for_each(|z| z.im = 0.0);
    }
    let before = norm(&v);
    if before == 0.0 || !before.is_finite() {
        return false;
    }
    orthogonalize_against(basis, &mut v);
    let after = norm(&v);
    if after <= 1e-10 * before {
        return false;
    }
    scale_in_place(C64::new(1.0 / after, 0.0), &mut v);
    basis.push(v);
    true
}

/// The `k` algebraically largest eigenpairs of the Hermitian operator
/// `apply` on `C^dim`.
///
/// Block Krylov iteration with Rayleigh-Ritz extraction and thick restarts:
/// each cycle spans `[Q, HQ, …, H^{depth-1}Q]`, keeps the leading Ritz
/// vectors as the next `Q`, and stops once the wanted residuals fall below
/// tolerance. `warm` seeds the first block. When the Krylov space fills
/// `C^dim` the decomposition is exact.
pub fn top_eigenpairs<F, R>(
    dim: usize,
    k: usize,
    mut apply: F,
    warm: &[Vec<C64>],
    opts: &EigenOptions,
    rng: &mut R,
) -> Result<EigenPairs>
where
    F: FnMut(&[C64], &mut [C64]),
    R: Rng,
{
    if k == 0 || dim == 0 {
        return Ok(EigenPairs {
            values: vec![],
            vectors: vec![],
            restarts: 0,
        });
    }
    let k = k.min(dim);
    let block = (k + opts.block_extra).min(dim);
    let real = opts.real;

    let mut start: Vec<Vec<C64>> = Vec::with_capacity(block);
    for w in warm.iter().take(block) {
        push_orthonormal(&mut start, w.clone(), real);
    }
    let mut attempts = 0;
    while start.len() < block && attempts < 4 * block {
        push_orthonormal(&mut start, random_vector(dim, real, rng), real);
        attempts += 1;
    }

    let mut last_residual = f64::INFINITY;
    for restart in 0..opts.max_restarts.max(1) {
        let mut basis = start.clone();
        let mut images: Vec<Vec<C64>> = Vec::with_capacity(block * opts.depth);
        for q in &basis {
            let mut out = vec![ZERO; dim];
            apply(q, &mut out);
            if real {
                out.iter_mut().for_each(|z| z.im = 0.0);
            }
            images.push(out);
        }
        let mut block_start = 0;
        for _ in 1..opts.depth.max(1) {
            if basis.len() >= dim {
                break;
            }
            let block_end = basis.len();
            let candidates: Vec<Vec<C64>> = images[block_start..block_end].to_vec();
            let mut added = 0;
            for cand in candidates {
                if basis.len() >= dim {
                    break;
                }
                if push_orthonormal(&mut basis, cand, real) {
                    let mut out = vec![ZERO; dim];
                    apply(basis.last().unwrap(), &mut out);
                    if real {
                        out.iter_mut().for_each(|z| z.im = 0.0);
                    }
                    images.push(out);
                    added += 1;
                }
            }
            if added == 0 {
                break;
            }
            block_start = block_end;
        }
        // Pad a deficient Krylov space with random directions so the
        // restart block stays full.
        let mut pad_attempts = 0;
        while basis.len() < block && pad_attempts < 4 * block {
            if push_orthonormal(&mut basis, random_vector(dim, real, rng), real) {
                let mut out = vec![ZERO; dim];
                apply(basis.last().unwrap(), &mut out);
                if real {
                    out.iter_mut().for_each(|z| z.im = 0.0);
                }
                images.push(out);
            }
            pad_attempts += 1;
        }

        let size = basis.len();
        let projected = DMatrix::from_fn(size, size, |i, j| dot(&basis[i], &images[j]));
        let (theta, coeffs) = hermitian_eig(&projected, real);

        let keep = block.min(size);
        let mut ritz = Vec::with_capacity(keep);
        let mut ritz_images = Vec::with_capacity(keep);
        for i in 0..keep {
            let mut u = vec![ZERO; dim];
            let mut w = vec![ZERO; dim];
            for j in 0..size {
                let c = coeffs[(j, i)];
                if c != ZERO {
                    axpy(c, &basis[j], &mut u);
                    axpy(c, &images[j], &mut w);
                }
            }
            ritz.push(u);
            ritz_images.push(w);
        }

        let scale = theta.iter().fold(0.0_f64, |m, t| m.max(t.abs())).max(f64::MIN_POSITIVE);
        let exact = size >= dim;
        let mut worst = 0.0_f64;
        for i in 0..k.min(keep) {
            if opts.positive_only && theta[i] <= -opts.tol * scale {
                continue;
            }
            let mut r = ritz_images[i].clone();
            axpy(C64::new(-theta[i], 0.0), &ritz[i], &mut r);
            worst = worst.max(norm(&r) / scale);
        }
        last_residual = worst;
        if exact || worst <= opts.tol {
            let take = k.min(keep);
            let mut vectors = ritz;
            vectors.truncate(take);
            if real {
                for v in &mut vectors {
                    v.iter_mut().for_each(|z| z.im = 0.0);
                }
            }
            return Ok(EigenPairs {
                values: theta[..take].to_vec(),
                vectors,
                restarts: restart,
            });
        }
        start = Vec::with_capacity(block);
        for u in ritz {
            push_orthonormal(&mut start, u, real);
        }
        while start.len() < block {
            push_orthonormal(&mut start, random_vector(dim, real, rng), real);
        }
    }
    Err(Error::EigenNonConvergence {
        restarts: opts.max_restarts,
        residual: last_residual,
    })
}
