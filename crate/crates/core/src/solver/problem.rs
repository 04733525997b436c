use crate::error::{Error, Result};
use crate::linalg::EigenOptions;
use crate::measurement::{IntensityData, MeasurementEnsemble, NoiseTag};
use crate::noise::{nll_gaussian, nll_poisson};
use crate::psd::{FactoredPsd, LowRankHermitian};
use crate::signal::C64;

use super::{Objective, SolverConfig};

/// Smooth data-fidelity term on the (optionally support-reduced) lifted
/// variable.
pub(crate) struct PhaseLiftProblem<'a> {
    ensemble: &'a MeasurementEnsemble,
    b: &'a [f64],
    objective: Objective,
    sigma: Vec<f64>,
    /// Reduced coordinates → full signal indices; `None` for no support.
    support: Option<Vec<usize>>,
    rank_cap: usize,
    eig: EigenOptions,
    seed: u64,
}

impl<'a> PhaseLiftProblem<'a> {
    pub fn new(ensemble: &'a MeasurementEnsemble, b: &'a IntensityData, config: &SolverConfig) -> Result<Self> {
        if b.len() != ensemble.m() {
            return Err(Error::LengthMismatch {
                expected: ensemble.m(),
                actual: b.len(),
            });
        }
        let n = ensemble.n();
        let support = match &config.support {
            None => None,
            Some(idx) => {
                let mut idx = idx.clone();
                idx.sort_unstable();
                idx.dedup();
                if idx.is_empty() || idx.iter().any(|&i| i >= n) {
                    return Err(Error::InvalidParameter("support indices out of range".into()));
                }
                Some(idx)
            }
        };
        let sigma = match (&config.objective, &b.noise) {
            (Objective::Gaussian, NoiseTag::Gaussian { sigma }) if sigma.len() == b.len() => sigma.clone(),
            _ => vec![1.0; b.len()],
        };
        Ok(Self {
            ensemble,
            b: &b.values,
            objective: config.objective,
            sigma,
            support,
            rank_cap: config.rank_cap,
            eig: EigenOptions {
                real: config.real_valued,
                ..config.eig.clone()
            },
            seed: config.seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.support.as_ref().map_or(self.ensemble.n(), Vec::len)
    }

    pub fn rank_cap(&self) -> usize {
        self.rank_cap
    }

    pub fn eig(&self) -> &EigenOptions {
        &self.eig
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn data(&self) -> &[f64] {
        self.b
    }

    pub fn inverse_variance_max(&self) -> f64 {
        self.sigma.iter().map(|s| 1.0 / (s * s)).fold(0.0, f64::max)
    }

    pub fn diverged(&self, iteration: usize) -> Error {
        Error::Diverged {
            iteration,
            objective_log: vec![],
        }
    }

    pub fn embed(&self, v: &[C64]) -> Vec<C64> {
        match &self.support {
            None => v.to_vec(),
            Some(idx) => {
                let mut out = vec![C64::new(0.0, 0.0); self.ensemble.n()];
                for (&i, z) in idx.iter().zip(v) {
                    out[i] = *z;
                }
                out
            }
        }
    }

    fn restrict_add(&self, full: &[C64], out: &mut [C64]) {
        match &self.support {
            None => out.iter_mut().zip(full).for_each(|(o, z)| *o += z),
            Some(idx) => {
                for (o, &i) in out.iter_mut().zip(idx) {
                    *o += full[i];
                }
            }
        }
    }

    pub fn embed_psd(&self, x: &FactoredPsd) -> FactoredPsd {
        if self.support.is_none() {
            return x.clone();
        }
        x.map_vectors(self.ensemble.n(), |v| self.embed(v))
    }

    /// `𝒜(X)` for a reduced-coordinate Hermitian `X`.
    pub fn lifted(&self, x: &LowRankHermitian) -> Vec<f64> {
        if self.support.is_none() {
            return self.ensemble.apply_lifted_terms(x);
        }
        let full = LowRankHermitian {
            dim: self.ensemble.n(),
            coeffs: x.coeffs.clone(),
            vectors: x.vectors.iter().map(|v| self.embed(v)).collect(),
        };
        self.ensemble.apply_lifted_terms(&full)
    }

    /// `out += P_T 𝒜*(y) P_T* v`.
    pub fn adjoint_action_add(&self, y: &[f64], v: &[C64], out: &mut [C64]) {
        if self.support.is_none() {
            self.ensemble.adjoint_action_add(y, v, out);
            return;
        }
        let mut full = vec![C64::new(0.0, 0.0); self.ensemble.n()];
        self.ensemble.adjoint_action_add(y, &self.embed(v), &mut full);
        self.restrict_add(&full, out);
    }

    /// Negative log-likelihood and its gradient with respect to `μ`.
    pub fn nll(&self, mu: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self.objective {
            Objective::Gaussian => nll_gaussian(self.b, mu, &self.sigma),
            Objective::Poisson => nll_poisson(self.b, mu),
        }
    }
}
