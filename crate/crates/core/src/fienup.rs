//! Error-reduction alternating projections against oversampled Fourier
//! magnitudes.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Domain};
use crate::signal::{crop_from, pad_into, ComplexSignal, FourierGrid, Shape, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialConstraint {
    Complex,
    Real,
    RealNonnegative,
}

#[derive(Clone, Debug)]
pub struct FienupConfig {
    pub signal_shape: Shape,
    /// Flat indices allowed to be nonzero; `None` means the whole signal.
    pub support: Option<Vec<usize>>,
    pub oversample: usize,
    pub max_iters: usize,
    /// Stop once `‖|F x| − y‖/‖y‖` is at most this.
    pub tol_residual: f64,
    /// Stop once `‖x_{k+1} − x_k‖/‖x_{k+1}‖` is below this.
    pub tol_stagnation: f64,
    pub constraint: SpatialConstraint,
    pub seed: u64,
}

impl FienupConfig {
    pub fn new(signal_shape: Shape, oversample: usize) -> Self {
        Self {
            signal_shape,
            support: None,
            oversample,
            max_iters: 5000,
            tol_residual: 1e-3,
            tol_stagnation: 1e-6,
            constraint: SpatialConstraint::Complex,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FienupStatus {
    Converged,
    Stagnated,
    MaxIters,
}

#[derive(Clone, Debug)]
pub struct FienupResult {
    /// Iterate with the smallest residual.
    pub x: ComplexSignal,
    pub residual: f64,
    pub status: FienupStatus,
    pub iterations: usize,
    /// Residual of every iterate, starting with the initial guess.
    pub residual_trace: Vec<f64>,
}

struct Projector {
    shape: Shape,
    grid: FourierGrid,
    mask: Vec<bool>,
    constraint: SpatialConstraint,
}

impl Projector {
    fn spatial(&self, x: &mut [C64]) {
        for (z, &keep) in x.iter_mut().zip(&self.mask) {
            if !keep {
                *z = C64::new(0.0, 0.0);
                continue;
            }
            match self.constraint {
                SpatialConstraint::Complex => {}
                SpatialConstraint::Real => z.im = 0.0,
                SpatialConstraint::RealNonnegative => *z = C64::new(z.re.max(0.0), 0.0),
            }
        }
    }

    fn forward(&self, x: &[C64]) -> Vec<C64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.grid.len()];
        pad_into(self.shape, self.grid.grid(), x, &mut buf);
        self.grid.forward_unitary(&mut buf);
        buf
    }

    fn inverse(&self, mut buf: Vec<C64>) -> Vec<C64> {
        self.grid.inverse_unitary(&mut buf);
        let mut out = vec![C64::new(0.0, 0.0); self.shape.len()];
        crop_from(self.shape, self.grid.grid(), &buf, &mut out);
        out
    }
}

fn misfit(spectrum: &[C64], y: &[f64], y_norm: f64) -> f64 {
    let err: f64 = spectrum.iter().zip(y).map(|(z, v)| (z.norm() - v).powi(2)).sum();
    if y_norm > 0.0 {
        err.sqrt() / y_norm
    } else {
        err.sqrt()
    }
}

fn build_projector(y: &[f64], config: &FienupConfig) -> Result<Projector> {
    if config.oversample == 0 {
        return Err(Error::InvalidParameter("oversampling factor must be at least 1".into()));
    }
    let grid_shape = config.signal_shape.scaled(config.oversample);
    if y.len() != grid_shape.len() {
        return Err(Error::LengthMismatch {
            expected: grid_shape.len(),
            actual: y.len(),
        });
    }
    if y.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidParameter("Fourier magnitudes must be nonnegative".into()));
    }
    let n = config.signal_shape.len();
    let mask = match &config.support {
        None => vec![true; n],
        Some(idx) => {
            if idx.is_empty() {
                return Err(Error::InvalidParameter("support must be nonempty".into()));
            }
            let mut mask = vec![false; n];
            for &i in idx {
                if i >= n {
                    return Err(Error::InvalidParameter(format!("support index {i} out of range")));
                }
                mask[i] = true;
            }
            mask
        }
    };
    Ok(Projector {
        shape: config.signal_shape,
        grid: FourierGrid::new(grid_shape),
        mask,
        constraint: config.constraint,
    })
}

/// Error reduction from a complex Gaussian initial guess on the support.
pub fn error_reduction(y: &[f64], config: &FienupConfig) -> Result<FienupResult> {
    let projector = build_projector(y, config)?;
    let mut rng = stream_rng(config.seed, Domain::Fienup, 0);
    let data: Vec<C64> = (0..config.signal_shape.len())
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let init = ComplexSignal::new(config.signal_shape, data)?;
    run(&projector, y, config, init)
}

/// Error reduction from a caller-supplied initial guess.
pub fn error_reduction_from(y: &[f64], config: &FienupConfig, init: &ComplexSignal) -> Result<FienupResult> {
    if init.shape() != config.signal_shape {
        return Err(Error::ShapeMismatch {
            expected: config.signal_shape.to_string(),
            actual: init.shape().to_string(),
        });
    }
    let projector = build_projector(y, config)?;
    run(&projector, y, config, init.clone())
}

fn run(projector: &Projector, y: &[f64], config: &FienupConfig, init: ComplexSignal) -> Result<FienupResult> {
    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = init.into_data();
    projector.spatial(&mut x);
    // Phase used where the current spectrum vanishes.
    let mut phase = vec![C64::new(1.0, 0.0); y.len()];
    let mut trace = Vec::new();
    let mut best = (f64::INFINITY, x.clone());
    let mut status = FienupStatus::MaxIters;
    let mut iterations = 0;

    loop {
        let spectrum = projector.forward(&x);
        let residual = misfit(&spectrum, y, y_norm);
        trace.push(residual);
        if residual < best.0 {
            best = (residual, x.clone());
        }
        if residual <= config.tol_residual {
            status = FienupStatus::Converged;
            break;
        }
        if iterations >= config.max_iters {
            break;
        }
        let z: Vec<C64> = spectrum
            .iter()
            .zip(y)
            .zip(phase.iter_mut())
            .map(|((s, &v), p)| {
                let r = s.norm();
                if r > 0.0 {
                    *p = s / r;
                }
                *p * v
            })
            .collect();
        let mut next = projector.inverse(z);
        projector.spatial(&mut next);
        iterations += 1;
        let diff: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let scale: f64 = next.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        x = next;
        let change = if scale > 0.0 { diff / scale } else { diff };
        if change < config.tol_stagnation {
            let spectrum = projector.forward(&x);
            let residual = misfit(&spectrum, y, y_norm);
            trace.push(residual);
            if residual < best.0 {
                best = (residual, x.clone());
            }
            status = if residual <= config.tol_residual {
                FienupStatus::Converged
            } else {
                FienupStatus::Stagnated
            };
            break;
        }
    }

    Ok(FienupResult {
        x: ComplexSignal::new(config.signal_shape, best.1)?,
        residual: best.0,
        status,
        iterations,
        residual_trace: trace,
    })
}
