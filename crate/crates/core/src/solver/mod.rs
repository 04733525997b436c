//! Trace-penalized maximum-likelihood recovery over the PSD cone.
//!
//! Minimizes `−ℓ(b; 𝒜(X)) + λ·Tr(W X)` over Hermitian PSD `X` with an
//! accelerated proximal gradient method whose proximal map is replaced by
//! a rank-capped PSD projection. Optional outer rounds reweight the trace
//! (`W ← (X + εI)^{-1}`) and/or halve `λ`.

mod fista;
mod golden;
mod problem;
mod projection;

use std::io::Write;

use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{top_eigenpairs, EigenOptions};
use crate::measurement::{relative_misfit, IntensityData, MeasurementEnsemble};
use crate::psd::FactoredPsd;
use crate::rng::{stream_rng, Domain};
use crate::signal::{ComplexSignal, C64};

pub use fista::{FistaState, Momentum, TraceWeight};
pub use golden::{golden_section_lambda, golden_section_search, GoldenOutcome, GoldenSearch, INV_GOLDEN};
pub use projection::{extract_rank_one, extract_rank_one_signal, logdet_objective, psd_project_rank_k};

use fista::{fista_step, relative_change, StepPolicy};
use problem::PhaseLiftProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Weighted least squares; weights come from the data's Gaussian noise
    /// tag when present.
    Gaussian,
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `1/L` from a power-iteration estimate of `‖𝒜‖²`. Not available for
    /// the Poisson objective, which always backtracks.
    Fixed,
    Backtracking { shrink: f64 },
}

/// Which residual `tol_residual` applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualTest {
    /// `‖sense(x̂) − b‖/‖b‖` for the extracted signal.
    Signal,
    /// `‖𝒜(X) − b‖/‖b‖` for the lifted iterate.
    Lifted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reweight {
    Off,
    On { epsilon: f64, max_rounds: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuation {
    Off,
    /// Halve `λ` at every outer round. Without reweighting, `rounds` extra
    /// rounds are run.
    Halve { rounds: usize },
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub objective: Objective,
    pub lambda: f64,
    pub rank_cap: usize,
    /// Iteration budget per outer round.
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Stop once `‖𝒜(x̂x̂*) − b‖/‖b‖` falls below this.
    pub tol_residual: f64,
    pub residual_test: ResidualTest,
    /// End a round once `‖X_{k+1} − X_k‖_F/‖X_{k+1}‖_F` falls below this.
    pub tol_change: f64,
    pub reweight: Reweight,
    pub continuation: Continuation,
    pub seed: u64,
    /// Restrict iterates to real symmetric PSD matrices.
    pub real_valued: bool,
    /// Known support; entries outside are fixed at zero.
    pub support: Option<Vec<usize>>,
    pub eig: EigenOptions,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Gaussian,
            lambda: 0.05,
            rank_cap: 10,
            max_iters: 1000,
            step_rule: StepRule::Fixed,
            tol_residual: 1e-6,
            residual_test: ResidualTest::Signal,
            tol_change: 1e-10,
            reweight: Reweight::Off,
            continuation: Continuation::Off,
            seed: 0,
            real_valued: false,
            support: None,
            eig: EigenOptions::default(),
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter("lambda must be nonnegative".into()));
        }
        if self.rank_cap == 0 {
            return Err(Error::InvalidParameter("rank cap must be at least 1".into()));
        }
        if let Reweight::On { epsilon, .. } = self.reweight {
            if !(epsilon > 0.0) {
                return Err(Error::InvalidParameter("reweighting epsilon must be positive".into()));
            }
        }
        if let StepRule::Backtracking { shrink } = self.step_rule {
            if !(shrink > 0.0 && shrink < 1.0) {
                return Err(Error::InvalidParameter("backtracking shrink must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }

    /// Outer rounds after the initial solve.
    fn rounds(&self) -> usize {
        match (self.reweight, self.continuation) {
            (Reweight::On { max_rounds, .. }, _) => max_rounds,
            (Reweight::Off, Continuation::Halve { rounds }) => rounds,
            (Reweight::Off, Continuation::Off) => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    /// Residual tolerance reached.
    Converged,
    /// Iterates stopped moving before the residual tolerance was met.
    Stalled,
    MaxIters,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub round: usize,
    pub lambda: f64,
    pub step: f64,
    pub objective: f64,
    pub residual: f64,
    pub eig1: f64,
    pub eig2: f64,
    pub eig3: f64,
}

/// Summary of one outer round (plain solve or reweighted solve).
#[derive(Clone, Debug, Serialize)]
pub struct RoundSummary {
    pub lambda: f64,
    pub iterations: usize,
    pub objective: f64,
    pub residual: f64,
    /// `log det(X + εI)` at the end of the round; only with reweighting.
    pub logdet: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub x: FactoredPsd,
    pub x_hat: ComplexSignal,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    /// `‖𝒜(x̂x̂*) − b‖/‖b‖`.
    pub residual: f64,
    /// `‖𝒜(X) − b‖/‖b‖`.
    pub lifted_residual: f64,
    pub reweight_rounds: usize,
    pub rounds: Vec<RoundSummary>,
    pub status: SolverStatus,
    pub momentum_restarts: usize,
    pub trace: Vec<TraceRecord>,
}

impl SolverResult {
    pub fn write_trace_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for record in &self.trace {
            w.serialize(record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Leading eigenvector of `𝒜*(b)` scaled to the least-squares fit of `b`.
fn spectral_init(problem: &PhaseLiftProblem<'_>) -> Result<FactoredPsd> {
    let dim = problem.dim();
    let b = problem.data();
    let mut rng: ChaCha20Rng = stream_rng(problem.seed(), Domain::Solver, u64::MAX >> 16);
    let pairs = top_eigenpairs(
        dim,
        1,
        |v: &[C64], out: &mut [C64]| {
            out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            problem.adjoint_action_add(b, v, out);
        },
        &[],
        problem.eig(),
        &mut rng,
    )?;
    let Some(u) = pairs.vectors.into_iter().next() else {
        return Ok(FactoredPsd::zero(dim));
    };
    let unit = FactoredPsd::new(dim, vec![1.0], vec![u.clone()])?;
    let mu = problem.lifted(&unit.to_terms());
    let num: f64 = mu.iter().zip(b).map(|(m, v)| m * v).sum();
    let den: f64 = mu.iter().map(|m| m * m).sum();
    let c = if den > 0.0 { num / den } else { 0.0 };
    if !(c > 0.0) {
        return Ok(FactoredPsd::zero(dim));
    }
    FactoredPsd::new(dim, vec![c], vec![u])
}

/// Consecutive quiet iterations before a round is declared stalled.
const STALL_PATIENCE: usize = 3;

fn step_policy(config: &SolverConfig, problem: &PhaseLiftProblem<'_>, lipschitz: f64) -> (f64, StepPolicy) {
    let l = lipschitz.max(f64::MIN_POSITIVE);
    match (config.objective, config.step_rule) {
        (Objective::Gaussian, StepRule::Fixed) => (
            1.0 / (1.01 * l * problem.inverse_variance_max()),
            StepPolicy {
                backtrack: None,
                growth: 1.0,
            },
        ),
        (Objective::Gaussian, StepRule::Backtracking { shrink }) => (
            1.0 / (l * problem.inverse_variance_max()),
            StepPolicy {
                backtrack: Some(shrink),
                growth: 1.0,
            },
        ),
        (Objective::Poisson, rule) => {
            let b = problem.data();
            let mean = b.iter().sum::<f64>() / b.len().max(1) as f64;
            let shrink = match rule {
                StepRule::Backtracking { shrink } => shrink,
                StepRule::Fixed => 0.5,
            };
            (
                mean.max(1e-12) / l,
                StepPolicy {
                    backtrack: Some(shrink),
                    growth: 1.25,
                },
            )
        }
    }
}

/// Runs the trace-penalized solver and extracts `x̂` with `‖x̂‖ = target_norm`.
pub fn solve(
    ensemble: &MeasurementEnsemble,
    b: &IntensityData,
    config: &SolverConfig,
    target_norm: f64,
) -> Result<SolverResult> {
    config.validate()?;
    if !(target_norm >= 0.0) || !target_norm.is_finite() {
        return Err(Error::InvalidParameter("target norm must be finite and nonnegative".into()));
    }
    let problem = PhaseLiftProblem::new(ensemble, b, config)?;
    let shape = ensemble.signal_shape();
    let lipschitz = ensemble.lipschitz_estimate(30)?;
    let (step, policy) = step_policy(config, &problem, lipschitz);

    let x0 = spectral_init(&problem)?;
    let (f0, _) = problem.nll(&problem.lifted(&x0.to_terms()))?;
    let mut lambda = config.lambda;
    let mut weight = TraceWeight::Identity;
    let mut state = FistaState::new(x0.clone(), f0 + lambda * x0.trace(), step);

    let x_hat_of = |x: &FactoredPsd| -> Result<ComplexSignal> {
        ComplexSignal::new(shape, problem.embed(&extract_rank_one(x, target_norm)))
    };
    let residual_of = |x_hat: &ComplexSignal| ensemble.relative_residual_raw(x_hat.data(), &b.values);

    let mut objective_trace = Vec::new();
    let mut trace = Vec::new();
    let mut rounds = Vec::new();
    let mut status = SolverStatus::MaxIters;
    let mut reweight_rounds = 0;
    let mut total_iters = 0;
    let mut x_hat = x_hat_of(&state.x)?;
    let mut residual = residual_of(&x_hat);

    'outer: for round in 0..=config.rounds() {
        if round > 0 {
            if let Continuation::Halve { .. } = config.continuation {
                lambda *= 0.5;
            }
            if let Reweight::On { epsilon, .. } = config.reweight {
                weight = TraceWeight::from_iterate(&state.x, epsilon);
                reweight_rounds += 1;
            }
            state.reset_momentum();
            let (f, _) = problem.nll(&problem.lifted(&state.x.to_terms()))?;
            state.objective = f + lambda * weight.trace_with(&state.x);
        }
        let round_start = state.x.clone();
        let mut iters = 0;
        let mut quiet = 0;
        while iters < config.max_iters {
            let next = match fista_step(&problem, &state, lambda, &weight, policy) {
                Ok(next) => next,
                Err(Error::Diverged { iteration, .. }) => {
                    return Err(Error::Diverged {
                        iteration,
                        objective_log: objective_trace,
                    })
                }
                Err(e) => return Err(e),
            };
            iters += 1;
            total_iters += 1;
            let change = relative_change(&next.x, &state.x);
            // A step cut by the line search also makes the change small;
            // only unforced quiet iterations count towards a stall.
            let shrunk = next.step < state.step;
            state = next;
            x_hat = x_hat_of(&state.x)?;
            residual = residual_of(&x_hat);
            objective_trace.push(state.objective);
            if config.record_trace {
                let ev = |i: usize| state.x.values().get(i).copied().unwrap_or(0.0);
                trace.push(TraceRecord {
                    iteration: total_iters,
                    round,
                    lambda,
                    step: state.step,
                    objective: state.objective,
                    residual,
                    eig1: ev(0),
                    eig2: ev(1),
                    eig3: ev(2),
                });
            }
            let test_residual = match config.residual_test {
                ResidualTest::Signal => residual,
                ResidualTest::Lifted => relative_misfit(&problem.lifted(&state.x.to_terms()), &b.values),
            };
            if test_residual <= config.tol_residual {
                status = SolverStatus::Converged;
                rounds.push(round_summary(config, &state, lambda, iters, residual, problem.dim())?);
                break 'outer;
            }
            if change <= config.tol_change && !shrunk {
                quiet += 1;
            } else {
                quiet = 0;
            }
            if quiet >= STALL_PATIENCE {
                status = SolverStatus::Stalled;
                break;
            }
            status = SolverStatus::MaxIters;
        }
        rounds.push(round_summary(config, &state, lambda, iters, residual, problem.dim())?);
        if round > 0 {
            if let Reweight::On { .. } = config.reweight {
                if relative_change(&state.x, &round_start) <= 1e-6 {
                    break;
                }
            }
        }
    }

    let lifted = problem.lifted(&state.x.to_terms());
    Ok(SolverResult {
        lifted_residual: relative_misfit(&lifted, &b.values),
        x: problem.embed_psd(&state.x),
        x_hat,
        iterations: total_iters,
        objective_trace,
        residual,
        reweight_rounds,
        rounds,
        status,
        momentum_restarts: state.restarts,
        trace,
    })
}

fn round_summary(
    config: &SolverConfig,
    state: &FistaState,
    lambda: f64,
    iterations: usize,
    residual: f64,
    dim: usize,
) -> Result<RoundSummary> {
    let logdet = match config.reweight {
        Reweight::On { epsilon, .. } => Some(logdet_objective(&state.x, epsilon, dim)?),
        Reweight::Off => None,
    };
    Ok(RoundSummary {
        lambda,
        iterations,
        objective: state.objective,
        residual,
        logdet,
    })
}
