//! Low-rank Hermitian matrices kept in factored form.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::signal::{ComplexSignal, C64};

/// Hermitian PSD matrix `V·diag(λ)·V*` with orthonormal `V` and
/// `λ` nonnegative, sorted descending.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredPsd {
    dim: usize,
    values: Vec<f64>,
    vectors: Vec<Vec<C64>>,
}

impl FactoredPsd {
    pub fn new(dim: usize, values: Vec<f64>, vectors: Vec<Vec<C64>>) -> Result<Self> {
        if values.len() != vectors.len() {
            return Err(Error::LengthMismatch {
                expected: values.len(),
                actual: vectors.len(),
            });
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::LengthMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        if values.iter().any(|&l| !(l >= 0.0)) {
            return Err(Error::InvalidParameter("eigenvalues must be nonnegative".into()));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter("eigenvalues must be sorted descending".into()));
        }
        for i in 0..vectors.len() {
            for j in 0..=i {
                let g = dot(&vectors[i], &vectors[j]);
                let expected = if i == j { 1.0 } else { 0.0 };
                if (g - C64::new(expected, 0.0)).norm() > 1e-8 {
                    return Err(Error::InvalidParameter("eigenvectors must be orthonormal".into()));
                }
            }
        }
        Ok(Self {
            dim,
            values,
            vectors,
        })
    }

    pub(crate) fn from_sorted_parts(dim: usize, values: Vec<f64>, vectors: Vec<Vec<C64>>) -> Self {
        debug_assert!(values.iter().all(|&l| l >= 0.0));
        Self {
            dim,
            values,
            vectors,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            values: vec![],
            vectors: vec![],
        }
    }

    /// `x·x*`.
    pub fn rank_one(x: &ComplexSignal) -> Self {
        let n2 = x.norm_sqr();
        if n2 == 0.0 {
            return Self::zero(x.len());
        }
        let inv = 1.0 / n2.sqrt();
        Self {
            dim: x.len(),
            values: vec![n2],
            vectors: vec![x.data().iter().map(|z| z * inv).collect()],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &[Vec<C64>] {
        &self.vectors
    }

    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    /// `λ₂/λ₁`, zero when the rank is below two.
    pub fn rank_gap(&self) -> f64 {
        match self.values.as_slice() {
            [first, second, ..] if *first > 0.0 => second / first,
            _ => 0.0,
        }
    }

    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for (l, u) in self.values.iter().zip(&self.vectors) {
            let c = dot(u, v) * *l;
            axpy(c, u, out);
        }
    }

    pub fn to_terms(&self) -> LowRankHermitian {
        LowRankHermitian {
            dim: self.dim,
            coeffs: self.values.clone(),
            vectors: self.vectors.clone(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.to_terms().to_dense()
    }

    /// Maps every factor through `f`, used to embed reduced-support factors
    /// back into the full signal space.
    pub(crate) fn map_vectors(&self, dim: usize, f: impl Fn(&[C64]) -> Vec<C64>) -> Self {
        Self {
            dim,
            values: self.values.clone(),
            vectors: self.vectors.iter().map(|v| f(v)).collect(),
        }
    }
}

/// `Σ_j c_j u_j u_j*` with real, possibly negative, coefficients and
/// arbitrary (not necessarily orthogonal) vectors. Represents FISTA
/// extrapolations such as `(1+β)X_k − βX_{k−1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankHermitian {
    pub dim: usize,
    pub coeffs: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
}

impl LowRankHermitian {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            coeffs: vec![],
            vectors: vec![],
        }
    }

    /// `a·X + b·Y`.
    pub fn combination(a: f64, x: &FactoredPsd, b: f64, y: &FactoredPsd) -> Self {
        let mut out = Self::zero(x.dim);
        if a != 0.0 {
            out.coeffs.extend(x.values.iter().map(|l| a * l));
            out.vectors.extend(x.vectors.iter().cloned());
        }
        if b != 0.0 {
            out.coeffs.extend(y.values.iter().map(|l| b * l));
            out.vectors.extend(y.vectors.iter().cloned());
        }
        out
    }

    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        self.apply_add(v, out);
    }

    /// `out += self·v`.
    pub fn apply_add(&self, v: &[C64], out: &mut [C64]) {
        for (c, u) in self.coeffs.iter().zip(&self.vectors) {
            let s = dot(u, v) * *c;
            axpy(s, u, out);
        }
    }

    pub fn trace(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.vectors)
            .map(|(c, u)| c * norm(u).powi(2))
            .sum()
    }

    /// `‖Σ c_j u_j u_j*‖_F² = Σ_ij c_i c_j |⟨u_i, u_j⟩|²`.
    pub fn frobenius_norm_sqr(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.vectors.len() {
            for j in 0..self.vectors.len() {
                acc += self.coeffs[i] * self.coeffs[j] * dot(&self.vectors[i], &self.vectors[j]).norm_sqr();
            }
        }
        acc.max(0.0)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (c, u) in self.coeffs.iter().zip(&self.vectors) {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    m[(i, j)] += u[i] * u[j].conj() * *c;
                }
            }
        }
        m
    }
}

/// Frobenius distance between two factored PSD matrices.
pub fn frobenius_distance(a: &FactoredPsd, b: &FactoredPsd) -> f64 {
    LowRankHermitian::combination(1.0, a, -1.0, b)
        .frobenius_norm_sqr()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Shape;

    #[test]
    fn validation() {
        let e0 = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let e1 = vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        assert!(FactoredPsd::new(2, vec![2.0, 1.0], vec![e0.clone(), e1.clone()]).is_ok());
        assert!(FactoredPsd::new(2, vec![1.0, 2.0], vec![e0.clone(), e1.clone()]).is_err());
        assert!(FactoredPsd::new(2, vec![1.0, -1.0], vec![e0.clone(), e1.clone()]).is_err());
        assert!(FactoredPsd::new(2, vec![1.0, 1.0], vec![e0.clone(), e0.clone()]).is_err());
    }

    #[test]
    fn frobenius_of_difference_matches_dense() {
        let x = ComplexSignal::new(
            Shape::D1(3),
            vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.1), C64::new(0.3, -1.0)],
        )
        .unwrap();
        let y = ComplexSignal::new(
            Shape::D1(3),
            vec![C64::new(0.2, 0.0), C64::new(1.5, 0.4), C64::new(0.0, 0.7)],
        )
        .unwrap();
        let a = FactoredPsd::rank_one(&x);
        let b = FactoredPsd::rank_one(&y);
        let dense = a.to_dense() - b.to_dense();
        assert!((frobenius_distance(&a, &b) - dense.norm()).abs() < 1e-12);
        let terms = LowRankHermitian::combination(1.7, &a, -0.7, &b);
        let dense = terms.to_dense();
        assert!((terms.frobenius_norm_sqr().sqrt() - dense.norm()).abs() < 1e-12);
        assert!((terms.trace() - dense.trace().re).abs() < 1e-12);
    }
}
