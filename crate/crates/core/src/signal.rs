//! Signal containers, unitary DFTs on plain and zero-padded grids, and
//! illumination masks.
//!
//! Storage is row-major. A 1D signal of length `n` is treated internally as a
//! single row, i.e. grid `(1, n)`, so every transform runs through the same
//! 2D code path with the row axis being trivial.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Domain};

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    D1(usize),
    D2(usize, usize),
}

impl Shape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        let shape = match *dims {
            [n] => Shape::D1(n),
            [n1, n2] => Shape::D2(n1, n2),
            _ => {
                return Err(Error::InvalidShape(format!(
                    "dimensionality must be 1 or 2, got {}",
                    dims.len()
                )))
            }
        };
        if dims.contains(&0) {
            return Err(Error::InvalidShape(format!("zero extent in {dims:?}")));
        }
        Ok(shape)
    }

    pub fn len(&self) -> usize {
        let (r, c) = self.rows_cols();
        r * c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ndim(&self) -> usize {
        match self {
            Shape::D1(_) => 1,
            Shape::D2(..) => 2,
        }
    }

    /// `(rows, cols)`, with 1D signals mapped to a single row.
    pub fn rows_cols(&self) -> (usize, usize) {
        match *self {
            Shape::D1(n) => (1, n),
            Shape::D2(n1, n2) => (n1, n2),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match *self {
            Shape::D1(n) => vec![n],
            Shape::D2(n1, n2) => vec![n1, n2],
        }
    }

    /// Grid obtained by oversampling every axis by `factor`.
    pub fn scaled(&self, factor: usize) -> Shape {
        match *self {
            Shape::D1(n) => Shape::D1(n * factor),
            Shape::D2(n1, n2) => Shape::D2(n1 * factor, n2 * factor),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::D1(n) => write!(f, "({n})"),
            Shape::D2(n1, n2) => write!(f, "({n1}, {n2})"),
        }
    }
}

/// Spectral shift of a modulation, one entry per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shift {
    D1(usize),
    D2(usize, usize),
}

impl Shift {
    /// `(row shift, column shift)`; 1D shifts act on the column axis.
    pub fn rows_cols(&self) -> (usize, usize) {
        match *self {
            Shift::D1(s) => (0, s),
            Shift::D2(s1, s2) => (s1, s2),
        }
    }

    pub fn from_rows_cols(shape: Shape, s: (usize, usize)) -> Shift {
        match shape {
            Shape::D1(_) => Shift::D1(s.1),
            Shape::D2(..) => Shift::D2(s.0, s.1),
        }
    }

    pub fn validate(&self, shape: Shape) -> Result<()> {
        match (*self, shape) {
            (Shift::D1(s), Shape::D1(n)) => check_shift(s, n),
            (Shift::D2(s1, s2), Shape::D2(n1, n2)) => {
                check_shift(s1, n1)?;
                check_shift(s2, n2)
            }
            _ => Err(Error::ShapeMismatch {
                expected: format!("shift of dimensionality {}", shape.ndim()),
                actual: format!("{self:?}"),
            }),
        }
    }
}

fn check_shift(shift: usize, n: usize) -> Result<()> {
    if shift >= n {
        Err(Error::ShiftOutOfRange { shift, n })
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSignal {
    shape: Shape,
    data: Vec<C64>,
}

impl ComplexSignal {
    pub fn new(shape: Shape, data: Vec<C64>) -> Result<Self> {
        Shape::new(&shape.dims())?;
        if data.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            data: vec![C64::new(0.0, 0.0); shape.len()],
        }
    }

    pub fn from_real(shape: Shape, values: &[f64]) -> Result<Self> {
        Self::new(shape, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `Σ conj(self[t]) · other[t]`.
    pub fn inner(&self, other: &ComplexSignal) -> C64 {
        crate::linalg::dot(&self.data, &other.data)
    }

    pub fn scale(&self, c: C64) -> ComplexSignal {
        ComplexSignal {
            shape: self.shape,
            data: self.data.iter().map(|&z| z * c).collect(),
        }
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    fn require_shape(&self, shape: Shape) -> Result<()> {
        if self.shape != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_string(),
                actual: self.shape.to_string(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: Shape,
    data: Vec<C64>,
}

impl Spectrum {
    pub fn new(grid: Shape, data: Vec<C64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: data.len(),
            });
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> Shape {
        self.grid
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }
}

/// Cached FFT plans for one grid. Transforms act in place on a row-major
/// buffer of `grid.len()` entries.
#[derive(Clone)]
pub struct FourierGrid {
    grid: Shape,
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for FourierGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierGrid").field("grid", &self.grid).finish()
    }
}

impl FourierGrid {
    pub fn new(grid: Shape) -> Self {
        let (rows, cols) = grid.rows_cols();
        let mut planner = FftPlanner::new();
        Self {
            grid,
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
            scale: 1.0 / (grid.len() as f64).sqrt(),
        }
    }

    pub fn grid(&self) -> Shape {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn transform(&self, buf: &mut [C64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(buf.len(), self.len());
        row.process(buf);
        if self.rows > 1 {
            let mut column = vec![C64::new(0.0, 0.0); self.rows];
            for c in 0..self.cols {
                for r in 0..self.rows {
                    column[r] = buf[r * self.cols + c];
                }
                col.process(&mut column);
                for r in 0..self.rows {
                    buf[r * self.cols + c] = column[r];
                }
            }
        }
    }

    /// Unnormalized forward transform (`e^{-i2π…}` kernel).
    pub fn forward(&self, buf: &mut [C64]) {
        self.transform(buf, &self.row_fwd, &self.col_fwd);
    }

    /// Unnormalized inverse transform (`e^{+i2π…}` kernel).
    pub fn inverse(&self, buf: &mut [C64]) {
        self.transform(buf, &self.row_inv, &self.col_inv);
    }

    pub fn forward_unitary(&self, buf: &mut [C64]) {
        self.forward(buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
    }

    pub fn inverse_unitary(&self, buf: &mut [C64]) {
        self.inverse(buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
    }
}

/// Copies a signal of shape `inner` into the top-left corner of a zeroed
/// buffer laid out on `grid`.
pub(crate) fn pad_into(inner: Shape, grid: Shape, src: &[C64], dst: &mut [C64]) {
    let (r, c) = inner.rows_cols();
    let (_, gc) = grid.rows_cols();
    dst.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    for i in 0..r {
        dst[i * gc..i * gc + c].copy_from_slice(&src[i * c..(i + 1) * c]);
    }
}

/// Inverse of [`pad_into`]: copies the top-left `inner` block out of `src`.
pub(crate) fn crop_from(inner: Shape, grid: Shape, src: &[C64], dst: &mut [C64]) {
    let (r, c) = inner.rows_cols();
    let (_, gc) = grid.rows_cols();
    for i in 0..r {
        dst[i * c..(i + 1) * c].copy_from_slice(&src[i * gc..i * gc + c]);
    }
}

pub fn dft_unitary(signal: &ComplexSignal) -> Spectrum {
    let grid = FourierGrid::new(signal.shape);
    let mut data = signal.data.clone();
    grid.forward_unitary(&mut data);
    Spectrum {
        grid: signal.shape,
        data,
    }
}

/// Unitary inverse DFT on the spectrum's own grid.
pub fn idft_unitary(spectrum: &Spectrum) -> ComplexSignal {
    let grid = FourierGrid::new(spectrum.grid);
    let mut data = spectrum.data.clone();
    grid.inverse_unitary(&mut data);
    ComplexSignal {
        shape: spectrum.grid,
        data,
    }
}

/// Inverse DFT of an (oversampled) spectrum followed by truncation to the
/// signal support `shape`. The grid must be an integer multiple of `shape`
/// on every axis.
pub fn idft_cropped(spectrum: &Spectrum, shape: Shape) -> Result<ComplexSignal> {
    let factor = oversample_factor(shape, spectrum.grid)?;
    let full = idft_unitary(spectrum);
    if factor == 1 {
        return Ok(full);
    }
    let mut data = vec![C64::new(0.0, 0.0); shape.len()];
    crop_from(shape, spectrum.grid, &full.data, &mut data);
    ComplexSignal::new(shape, data)
}

fn oversample_factor(shape: Shape, grid: Shape) -> Result<usize> {
    let mismatch = || Error::ShapeMismatch {
        expected: format!("integer multiple of {shape}"),
        actual: grid.to_string(),
    };
    if shape.ndim() != grid.ndim() {
        return Err(mismatch());
    }
    let (r, c) = shape.rows_cols();
    let (gr, gc) = grid.rows_cols();
    if gc % c != 0 || gr % r != 0 {
        return Err(mismatch());
    }
    let factor = gc / c;
    if shape.ndim() == 2 && gr / r != factor {
        return Err(mismatch());
    }
    Ok(factor)
}

/// Zero-pads to `factor × shape` per axis, then applies the unitary DFT of
/// the padded grid.
pub fn oversampled_dft(signal: &ComplexSignal, factor: usize) -> Result<Spectrum> {
    if factor == 0 {
        return Err(Error::InvalidParameter(
            "oversampling factor must be at least 1".into(),
        ));
    }
    let grid_shape = signal.shape.scaled(factor);
    let grid = FourierGrid::new(grid_shape);
    let mut data = vec![C64::new(0.0, 0.0); grid_shape.len()];
    pad_into(signal.shape, grid_shape, &signal.data, &mut data);
    grid.forward_unitary(&mut data);
    Ok(Spectrum {
        grid: grid_shape,
        data,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskKind {
    Constant,
    Binary,
    GaussianReal,
    GaussianComplex,
    Modulation(Shift),
    /// User supplied weights.
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    shape: Shape,
    kind: MaskKind,
    weights: Vec<C64>,
}

impl Mask {
    pub fn from_weights(shape: Shape, weights: Vec<C64>) -> Result<Self> {
        if weights.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                actual: weights.len(),
            });
        }
        Ok(Self {
            shape,
            kind: MaskKind::Custom,
            weights,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    pub fn is_constant(&self) -> bool {
        self.weights.iter().all(|&w| w == C64::new(1.0, 0.0))
    }

    /// Same pattern with every weight multiplied by `c`.
    pub fn scaled(&self, c: C64) -> Mask {
        Mask {
            shape: self.shape,
            kind: MaskKind::Custom,
            weights: self.weights.iter().map(|&w| w * c).collect(),
        }
    }
}

/// Builds a mask deterministically from `(shape, kind, seed)`.
pub fn make_mask(shape: Shape, kind: MaskKind, seed: u64) -> Result<Mask> {
    make_mask_indexed(shape, kind, seed, 0)
}

/// Builds `count` masks of one kind; mask `i` draws from stream `i` of the
/// mask domain so masks are independent and individually reproducible.
pub fn make_masks(shape: Shape, kind: MaskKind, count: usize, seed: u64) -> Result<Vec<Mask>> {
    (0..count)
        .map(|i| make_mask_indexed(shape, kind, seed, i as u64))
        .collect()
}

fn make_mask_indexed(shape: Shape, kind: MaskKind, seed: u64, index: u64) -> Result<Mask> {
    Shape::new(&shape.dims())?;
    let n = shape.len();
    let mut rng = stream_rng(seed, Domain::Mask, index);
    let weights: Vec<C64> = match kind {
        MaskKind::Constant => vec![C64::new(1.0, 0.0); n],
        MaskKind::Binary => (0..n)
            .map(|_| C64::new(if rng.random_bool(0.5) { 1.0 } else { 0.0 }, 0.0))
            .collect(),
        MaskKind::GaussianReal => (0..n)
            .map(|_| C64::new(rng.sample(StandardNormal), 0.0))
            .collect(),
        MaskKind::GaussianComplex => (0..n)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect(),
        MaskKind::Modulation(shift) => {
            shift.validate(shape)?;
            modulation_weights(shape, shift)
        }
        MaskKind::Custom => {
            return Err(Error::InvalidParameter(
                "custom masks are built with Mask::from_weights".into(),
            ))
        }
    };
    Ok(Mask {
        shape,
        kind,
        weights,
    })
}

fn modulation_weights(shape: Shape, shift: Shift) -> Vec<C64> {
    let (rows, cols) = shape.rows_cols();
    let (s1, s2) = shift.rows_cols();
    let mut out = Vec::with_capacity(rows * cols);
    for t1 in 0..rows {
        // Reduce the integer product first so large t·s stays exact.
        let a = ((s1 * t1) % rows) as f64 / rows as f64;
        for t2 in 0..cols {
            let b = ((s2 * t2) % cols) as f64 / cols as f64;
            out.push(C64::from_polar(1.0, 2.0 * PI * a) * C64::from_polar(1.0, 2.0 * PI * b));
        }
    }
    out
}

/// Pointwise product `w[t]·x[t]`.
pub fn apply_mask(signal: &ComplexSignal, mask: &Mask) -> Result<ComplexSignal> {
    signal.require_shape(mask.shape)?;
    Ok(ComplexSignal {
        shape: signal.shape,
        data: signal
            .data
            .iter()
            .zip(&mask.weights)
            .map(|(&x, &w)| w * x)
            .collect(),
    })
}
