//! The coded-diffraction measurement map and its lifted linear operator.
//!
//! Measurement `k = (l, ω)` is `|⟨a_k, x⟩|²` with sensing vector
//! `a_k[t] = conj(w_l[t])·e^{i2π⟨ω,t⟩/P}/√P`, so that `⟨a_k, x⟩` is the
//! unitary DFT of the masked, zero-padded signal on the `P`-point grid of
//! illumination `l`. Blocks are concatenated in illumination order, each
//! block in row-major grid order. Nothing here ever forms an `m × N²`
//! matrix: the lifted map and its adjoint run through masked FFTs.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::psd::{FactoredPsd, LowRankHermitian};
use crate::signal::{crop_from, pad_into, ComplexSignal, FourierGrid, Mask, Shape, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct Illumination {
    pub mask: Mask,
    pub oversample: usize,
}

impl Illumination {
    pub fn new(mask: Mask, oversample: usize) -> Self {
        Self { mask, oversample }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseTag {
    Clean,
    Poisson { scale: f64 },
    Gaussian { sigma: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntensityData {
    pub values: Vec<f64>,
    pub noise: NoiseTag,
}

impl IntensityData {
    pub fn clean(values: Vec<f64>) -> Self {
        Self {
            values,
            noise: NoiseTag::Clean,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct MeasurementEnsemble {
    signal_shape: Shape,
    illuminations: Vec<Illumination>,
    grids: Vec<Arc<FourierGrid>>,
    offsets: Vec<usize>,
    m: usize,
}

impl MeasurementEnsemble {
    pub fn new(signal_shape: Shape, illuminations: Vec<Illumination>) -> Result<Self> {
        Shape::new(&signal_shape.dims())?;
        if illuminations.is_empty() {
            return Err(Error::InvalidParameter("ensemble needs at least one illumination".into()));
        }
        let mut grids: Vec<Arc<FourierGrid>> = Vec::with_capacity(illuminations.len());
        let mut offsets = Vec::with_capacity(illuminations.len() + 1);
        let mut m = 0;
        for ill in &illuminations {
            if ill.mask.shape() != signal_shape {
                return Err(Error::ShapeMismatch {
                    expected: signal_shape.to_string(),
                    actual: ill.mask.shape().to_string(),
                });
            }
            if ill.oversample == 0 {
                return Err(Error::InvalidParameter("oversampling factor must be at least 1".into()));
            }
            let grid_shape = signal_shape.scaled(ill.oversample);
            let grid = grids
                .iter()
                .find(|g| g.grid() == grid_shape)
                .cloned()
                .unwrap_or_else(|| Arc::new(FourierGrid::new(grid_shape)));
            offsets.push(m);
            m += grid_shape.len();
            grids.push(grid);
        }
        offsets.push(m);
        Ok(Self {
            signal_shape,
            illuminations,
            grids,
            offsets,
            m,
        })
    }

    /// One illumination per mask, all at the same oversampling factor.
    pub fn from_masks(signal_shape: Shape, masks: Vec<Mask>, oversample: usize) -> Result<Self> {
        Self::new(
            signal_shape,
            masks.into_iter().map(|m| Illumination::new(m, oversample)).collect(),
        )
    }

    pub fn signal_shape(&self) -> Shape {
        self.signal_shape
    }

    /// Signal length `N`.
    pub fn n(&self) -> usize {
        self.signal_shape.len()
    }

    /// Total number of measurements.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn illuminations(&self) -> &[Illumination] {
        &self.illuminations
    }

    pub fn block(&self, l: usize) -> Range<usize> {
        self.offsets[l]..self.offsets[l + 1]
    }

    pub fn grid_shape(&self, l: usize) -> Shape {
        self.grids[l].grid()
    }

    /// Same ensemble with every mask multiplied by `c`.
    pub fn scaled(&self, c: C64) -> Self {
        Self {
            signal_shape: self.signal_shape,
            illuminations: self
                .illuminations
                .iter()
                .map(|ill| Illumination::new(ill.mask.scaled(c), ill.oversample))
                .collect(),
            grids: self.grids.clone(),
            offsets: self.offsets.clone(),
            m: self.m,
        }
    }

    /// `buf ← F_P pad(w_l ⊙ v)`, i.e. `⟨a_k, v⟩` for all `k` in block `l`.
    pub(crate) fn forward_block(&self, l: usize, v: &[C64], buf: &mut Vec<C64>) {
        let grid = &self.grids[l];
        let weights = self.illuminations[l].mask.weights();
        buf.resize(grid.len(), ZERO);
        let masked: Vec<C64> = v.iter().zip(weights).map(|(x, w)| w * x).collect();
        pad_into(self.signal_shape, grid.grid(), &masked, buf);
        grid.forward_unitary(buf);
    }

    /// `out += conj(w_l) ⊙ crop(F_P^{-1} buf)`; consumes `buf` as scratch.
    pub(crate) fn adjoint_block_add(&self, l: usize, buf: &mut [C64], out: &mut [C64]) {
        let grid = &self.grids[l];
        let weights = self.illuminations[l].mask.weights();
        grid.inverse_unitary(buf);
        let mut cropped = vec![ZERO; self.n()];
        crop_from(self.signal_shape, grid.grid(), buf, &mut cropped);
        for ((o, c), w) in out.iter_mut().zip(&cropped).zip(weights) {
            *o += w.conj() * c;
        }
    }

    fn check_signal(&self, x: &ComplexSignal) -> Result<()> {
        if x.shape() != self.signal_shape {
            return Err(Error::ShapeMismatch {
                expected: self.signal_shape.to_string(),
                actual: x.shape().to_string(),
            });
        }
        Ok(())
    }

    /// `|⟨a_k, x⟩|²` for every measurement.
    pub fn sense(&self, x: &ComplexSignal) -> Result<IntensityData> {
        self.check_signal(x)?;
        Ok(IntensityData::clean(self.sense_raw(x.data())))
    }

    pub(crate) fn sense_raw(&self, v: &[C64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        self.accumulate_lifted(1.0, v, &mut out);
        out
    }

    fn accumulate_lifted(&self, coeff: f64, v: &[C64], out: &mut [f64]) {
        let mut buf = Vec::new();
        for l in 0..self.illuminations.len() {
            self.forward_block(l, v, &mut buf);
            for (o, z) in out[self.block(l)].iter_mut().zip(&buf) {
                *o += coeff * z.norm_sqr();
            }
        }
    }

    /// `𝒜(X)_k = Tr(a_k a_k* X) = Σ_j λ_j |⟨a_k, v_j⟩|²`.
    pub fn apply_lifted(&self, x: &FactoredPsd) -> Result<Vec<f64>> {
        if x.dim() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                actual: x.dim(),
            });
        }
        Ok(self.apply_lifted_terms(&x.to_terms()))
    }

    pub fn apply_lifted_terms(&self, x: &LowRankHermitian) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (c, v) in x.coeffs.iter().zip(&x.vectors) {
            self.accumulate_lifted(*c, v, &mut out);
        }
        out
    }

    /// `(Σ_k y_k a_k a_k*)·v`.
    pub fn apply_adjoint_action(&self, y: &[f64], v: &ComplexSignal) -> Result<ComplexSignal> {
        self.check_signal(v)?;
        if y.len() != self.m {
            return Err(Error::LengthMismatch {
                expected: self.m,
                actual: y.len(),
            });
        }
        let mut out = vec![ZERO; self.n()];
        self.adjoint_action_add(y, v.data(), &mut out);
        ComplexSignal::new(self.signal_shape, out)
    }

    /// `out += 𝒜*(y)·v`.
    pub(crate) fn adjoint_action_add(&self, y: &[f64], v: &[C64], out: &mut [C64]) {
        let mut buf = Vec::new();
        for l in 0..self.illuminations.len() {
            self.forward_block(l, v, &mut buf);
            for (z, &yk) in buf.iter_mut().zip(&y[self.block(l)]) {
                *z *= yk;
            }
            self.adjoint_block_add(l, &mut buf, out);
        }
    }

    /// Applies the Gram operator `𝒜𝒜*` on `R^m`, whose entries are
    /// `|⟨a_k, a_j⟩|²`. It shares its nonzero spectrum with `𝒜*𝒜` on
    /// Hermitian matrices.
    pub fn gram_apply(&self, y: &[f64]) -> Vec<f64> {
        GramOperator::new(self).apply(y)
    }

    /// Power-iteration estimate of `‖𝒜‖² = λ_max(𝒜*𝒜)`, the Lipschitz
    /// constant of the least-squares gradient. Deterministic.
    pub fn lipschitz_estimate(&self, iterations: usize) -> Result<f64> {
        if iterations == 0 {
            return Err(Error::InvalidParameter("power iteration needs at least one step".into()));
        }
        let gram = GramOperator::new(self);
        let mut y = vec![1.0 / (self.m as f64).sqrt(); self.m];
        let mut estimate = 0.0;
        for _ in 0..iterations {
            let z = gram.apply(&y);
            let yy: f64 = y.iter().map(|v| v * v).sum();
            estimate = y.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / yy;
            let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nz == 0.0 {
                return Ok(0.0);
            }
            y = z.into_iter().map(|v| v / nz).collect();
        }
        Ok(estimate)
    }

    /// `‖x‖` read off the data, available when the ensemble observes the
    /// unmasked diffraction pattern (Parseval).
    pub fn norm_from_data(&self, b: &IntensityData) -> Option<f64> {
        let l = self.illuminations.iter().position(|ill| ill.mask.is_constant())?;
        let total: f64 = b.values[self.block(l)].iter().sum();
        Some(total.max(0.0).sqrt())
    }

    /// `‖sense(x) − b‖₂ / ‖b‖₂`; absolute when `b = 0`.
    pub(crate) fn relative_residual_raw(&self, v: &[C64], b: &[f64]) -> f64 {
        let mu = self.sense_raw(v);
        relative_misfit(&mu, b)
    }
}

pub(crate) fn relative_misfit(mu: &[f64], b: &[f64]) -> f64 {
    let err: f64 = mu.iter().zip(b).map(|(m, v)| (m - v) * (m - v)).sum();
    let nb: f64 = b.iter().map(|v| v * v).sum();
    if nb > 0.0 {
        (err / nb).sqrt()
    } else {
        err.sqrt()
    }
}

/// Matrix-free `𝒜𝒜*`. Pairs of illuminations on a common grid couple
/// through a circular convolution with kernel `|DFT(w_l·conj(w_l'))|²/P²`;
/// pairs on different grids fall back to explicit cross blocks.
struct GramOperator<'a> {
    ensemble: &'a MeasurementEnsemble,
    /// `kernels[l][l']`: FFT of the convolution kernel, `None` for mixed grids.
    kernels: Vec<Vec<Option<Vec<C64>>>>,
}

impl<'a> GramOperator<'a> {
    fn new(ensemble: &'a MeasurementEnsemble) -> Self {
        let count = ensemble.illuminations.len();
        let n_shape = ensemble.signal_shape;
        let mut kernels = vec![vec![None; count]; count];
        for l in 0..count {
            for lp in 0..count {
                let grid = &ensemble.grids[l];
                if grid.grid() != ensemble.grids[lp].grid() {
                    continue;
                }
                let p = grid.len() as f64;
                let wl = ensemble.illuminations[l].mask.weights();
                let wlp = ensemble.illuminations[lp].mask.weights();
                let product: Vec<C64> = wl.iter().zip(wlp).map(|(a, b)| a * b.conj()).collect();
                let mut buf = vec![ZERO; grid.len()];
                pad_into(n_shape, grid.grid(), &product, &mut buf);
                grid.forward(&mut buf);
                let mut kernel: Vec<C64> = buf
                    .iter()
                    .map(|z| C64::new(z.norm_sqr() / (p * p), 0.0))
                    .collect();
                grid.forward(&mut kernel);
                kernels[l][lp] = Some(kernel);
            }
        }
        Self { ensemble, kernels }
    }

    fn apply(&self, y: &[f64]) -> Vec<f64> {
        let ens = self.ensemble;
        let count = ens.illuminations.len();
        let mut out = vec![0.0; ens.m];
        let spectra: Vec<Vec<C64>> = (0..count)
            .map(|l| {
                let grid = &ens.grids[l];
                let mut buf: Vec<C64> = y[ens.block(l)].iter().map(|&v| C64::new(v, 0.0)).collect();
                grid.forward(&mut buf);
                buf
            })
            .collect();
        for l in 0..count {
            let grid = &ens.grids[l];
            let p = grid.len() as f64;
            let mut acc = vec![ZERO; grid.len()];
            let mut has_conv = false;
            for lp in 0..count {
                match &self.kernels[l][lp] {
                    Some(kernel) => {
                        has_conv = true;
                        for ((a, k), s) in acc.iter_mut().zip(kernel).zip(&spectra[lp]) {
                            *a += k * s;
                        }
                    }
                    None => {
                        let cross = self.cross_block_apply(l, lp, &y[ens.block(lp)]);
                        for (o, c) in out[ens.block(l)].iter_mut().zip(cross) {
                            *o += c;
                        }
                    }
                }
            }
            if has_conv {
                grid.inverse(&mut acc);
                for (o, a) in out[ens.block(l)].iter_mut().zip(&acc) {
                    *o += a.re / p;
                }
            }
        }
        out
    }

    /// `Σ_ω' |⟨a_{l,ω}, a_{l',ω'}⟩|² y[ω']` for illuminations on different grids.
    fn cross_block_apply(&self, l: usize, lp: usize, y: &[f64]) -> Vec<f64> {
        let ens = self.ensemble;
        let (gl, glp) = (&ens.grids[l], &ens.grids[lp]);
        let (pr, pc) = gl.grid().rows_cols();
        let (nr, nc) = ens.signal_shape.rows_cols();
        let norm = 1.0 / (gl.len() as f64 * glp.len() as f64);
        let wl = ens.illuminations[l].mask.weights();
        let wlp = ens.illuminations[lp].mask.weights();
        let mut out = vec![0.0; gl.len()];
        let mut g = vec![ZERO; ens.n()];
        let mut buf = vec![ZERO; glp.len()];
        for w1 in 0..pr {
            for w2 in 0..pc {
                for t1 in 0..nr {
                    for t2 in 0..nc {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * ((w1 * t1) as f64 / pr as f64 + (w2 * t2) as f64 / pc as f64);
                        let t = t1 * nc + t2;
                        g[t] = wl[t] * wlp[t].conj() * C64::from_polar(1.0, phase);
                    }
                }
                pad_into(ens.signal_shape, glp.grid(), &g, &mut buf);
                glp.inverse(&mut buf);
                out[w1 * pc + w2] = buf
                    .iter()
                    .zip(y)
                    .map(|(c, v)| c.norm_sqr() * norm * v)
                    .sum();
            }
        }
        out
    }
}
