//! Dense reference implementations shared by the integration tests. They
//! are deliberately naive: explicit sums and explicit sensing vectors.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use phaselift::constructive::ModulationTriple;
use phaselift::{ComplexSignal, MeasurementEnsemble, Shape, Shift, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut impl Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_signal(shape: Shape, rng: &mut impl Rng) -> ComplexSignal {
    ComplexSignal::new(shape, (0..shape.len()).map(|_| cgauss(rng)).collect()).unwrap()
}

/// `X = Σ_j G_j G_j*` with `rank` complex Gaussian columns.
pub fn random_psd(n: usize, rank: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    let g = DMatrix::from_fn(n, rank, |_, _| cgauss(rng));
    &g * g.adjoint()
}

/// `Σ_t x[t] e^{-2πi(k1 t1/P1 + k2 t2/P2)} / √(P1 P2)` on a `(P1, P2)`
/// grid, evaluated term by term.
pub fn naive_dft(x: &ComplexSignal, grid: (usize, usize)) -> Vec<C64> {
    let (n1, n2) = x.shape().rows_cols();
    let (p1, p2) = grid;
    let norm = ((p1 * p2) as f64).sqrt();
    let mut out = vec![C64::new(0.0, 0.0); p1 * p2];
    for k1 in 0..p1 {
        for k2 in 0..p2 {
            let mut acc = C64::new(0.0, 0.0);
            for t1 in 0..n1 {
                for t2 in 0..n2 {
                    let arg = -2.0 * PI * ((k1 * t1) as f64 / p1 as f64 + (k2 * t2) as f64 / p2 as f64);
                    acc += x.data()[t1 * n2 + t2] * C64::from_polar(1.0, arg);
                }
            }
            out[k1 * p2 + k2] = acc / norm;
        }
    }
    out
}

/// Row vectors `r_k` with `⟨a_k, x⟩ = Σ_t r_k[t] x[t]`, built one
/// illumination and one frequency at a time.
pub fn sensing_rows(ensemble: &MeasurementEnsemble) -> Vec<Vec<C64>> {
    let shape = ensemble.signal_shape();
    let (n1, n2) = shape.rows_cols();
    let mut rows = Vec::new();
    for ill in ensemble.illuminations() {
        let r = ill.oversample;
        let (p1, p2) = if matches!(shape, Shape::D1(_)) { (1, r * n2) } else { (r * n1, r * n2) };
        let norm = ((p1 * p2) as f64).sqrt();
        for k1 in 0..p1 {
            for k2 in 0..p2 {
                let row = (0..shape.len())
                    .map(|idx| {
                        let (t1, t2) = (idx / n2, idx % n2);
                        let arg = -2.0 * PI * ((k1 * t1) as f64 / p1 as f64 + (k2 * t2) as f64 / p2 as f64);
                        ill.mask.weights()[idx] * C64::from_polar(1.0 / norm, arg)
                    })
                    .collect();
                rows.push(row);
            }
        }
    }
    rows
}

/// `A_k = r_k^* r_k`, so that `Tr(A_k X) = r_k X r_k^*`.
pub fn dense_a(row: &[C64]) -> DMatrix<C64> {
    let n = row.len();
    DMatrix::from_fn(n, n, |s, t| row[s].conj() * row[t])
}

pub fn dense_lifted(rows: &[Vec<C64>], x: &DMatrix<C64>) -> Vec<f64> {
    rows.iter().map(|r| (dense_a(r) * x).trace().re).collect()
}

pub fn dense_adjoint(rows: &[Vec<C64>], y: &[f64]) -> DMatrix<C64> {
    let n = rows[0].len();
    let mut out = DMatrix::zeros(n, n);
    for (r, &yk) in rows.iter().zip(y) {
        out += dense_a(r) * C64::new(yk, 0.0);
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `min_c ‖c x0 − x‖²/‖x0‖²` over unimodular `c`: a coarse scan over the
/// phase of `c`, then ternary refinement around the best grid point.
pub fn oracle_relative_mse(x0: &[C64], x: &[C64]) -> f64 {
    let n0: f64 = x0.iter().map(|a| a.norm_sqr()).sum();
    let err = |theta: f64| {
        let c = C64::from_polar(1.0, theta);
        x0.iter().zip(x).map(|(a, b)| (c * a - b).norm_sqr()).sum::<f64>() / n0
    };
    let steps = 720;
    let h = 2.0 * PI / steps as f64;
    let best = (0..steps).min_by(|&i, &j| err(i as f64 * h).total_cmp(&err(j as f64 * h))).unwrap();
    let (mut lo, mut hi) = ((best as f64 - 1.0) * h, (best as f64 + 1.0) * h);
    for _ in 0..200 {
        let (a, b) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if err(a) < err(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    err(0.5 * (lo + hi)).max(0.0)
}

/// Triple data built from explicit DFT sums and an explicit modulation.
pub fn oracle_triple(x: &ComplexSignal, shift: Shift) -> ModulationTriple {
    let (n1, n2) = x.shape().rows_cols();
    let (s1, s2) = shift.rows_cols();
    let xs: Vec<C64> = x
        .data()
        .iter()
        .enumerate()
        .map(|(idx, z)| {
            let (t1, t2) = (idx / n2, idx % n2);
            z * C64::from_polar(1.0, 2.0 * PI * ((s1 * t1) as f64 / n1 as f64 + (s2 * t2) as f64 / n2 as f64))
        })
        .collect();
    let combine = |c: C64| {
        let y: Vec<C64> = x.data().iter().zip(&xs).map(|(a, b)| a + c * b).collect();
        let y = ComplexSignal::new(x.shape(), y).unwrap();
        naive_dft(&y, (n1, n2)).iter().map(|z| z.norm_sqr()).collect::<Vec<_>>()
    };
    ModulationTriple {
        shape: x.shape(),
        shift,
        i0: naive_dft(x, (n1, n2)).iter().map(|z| z.norm_sqr()).collect(),
        i_plus: combine(C64::new(1.0, 0.0)),
        i_minus_i: combine(C64::new(0.0, -1.0)),
    }
}
