use crate::error::Result;
use crate::linalg::{axpy, dot};
use crate::psd::{frobenius_distance, FactoredPsd, LowRankHermitian};
use crate::rng::{stream_rng, Domain};
use crate::signal::C64;

use super::problem::PhaseLiftProblem;
use super::projection::psd_project_rank_k;

/// Momentum parameter of the accelerated scheme. Starts at `θ₀ = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Momentum {
    pub theta: f64,
}

impl Default for Momentum {
    fn default() -> Self {
        Self { theta: 1.0 }
    }
}

impl Momentum {
    /// Advances `θ_{k−1} → θ_k = 2/(1 + √(1 + 4/θ_{k−1}²))` and returns
    /// `(θ_k, β_k)` with `β_k = θ_k(1/θ_{k−1} − 1)`.
    pub fn advance(&mut self) -> (f64, f64) {
        let prev = self.theta;
        let theta = 2.0 / (1.0 + (1.0 + 4.0 / (prev * prev)).sqrt());
        self.theta = theta;
        (theta, theta * (1.0 / prev - 1.0))
    }
}

/// Trace weighting `W` in the penalty `λ·Tr(W X)`.
#[derive(Clone, Debug)]
pub enum TraceWeight {
    Identity,
    /// `(X + εI)^{-1} = V diag(1/(λ_j+ε)) V* + (1/ε)(I − VV*)`.
    Reweighted {
        epsilon: f64,
        values: Vec<f64>,
        vectors: Vec<Vec<C64>>,
    },
}

impl TraceWeight {
    pub fn from_iterate(x: &FactoredPsd, epsilon: f64) -> Self {
        Self::Reweighted {
            epsilon,
            values: x.values().to_vec(),
            vectors: x.vectors().to_vec(),
        }
    }

    /// `out += scale·W·v`.
    pub fn apply_add(&self, scale: f64, v: &[C64], out: &mut [C64]) {
        match self {
            Self::Identity => axpy(C64::new(scale, 0.0), v, out),
            Self::Reweighted {
                epsilon,
                values,
                vectors,
            } => {
                axpy(C64::new(scale / epsilon, 0.0), v, out);
                for (l, u) in values.iter().zip(vectors) {
                    let c = dot(u, v) * (scale * (1.0 / (l + epsilon) - 1.0 / epsilon));
                    axpy(c, u, out);
                }
            }
        }
    }

    /// `Tr(W X) = Σ_j λ_j ⟨v_j, W v_j⟩`.
    pub fn trace_with(&self, x: &FactoredPsd) -> f64 {
        match self {
            Self::Identity => x.trace(),
            Self::Reweighted { .. } => {
                let mut wv = vec![C64::new(0.0, 0.0); x.dim()];
                x.values()
                    .iter()
                    .zip(x.vectors())
                    .map(|(l, v)| {
                        wv.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                        self.apply_add(1.0, v, &mut wv);
                        l * dot(v, &wv).re
                    })
                    .sum()
            }
        }
    }
}

/// Iterate state of the accelerated proximal gradient method.
#[derive(Clone, Debug)]
pub struct FistaState {
    /// `X_k`.
    pub x: FactoredPsd,
    /// `X_{k−1}`.
    pub x_prev: FactoredPsd,
    /// `θ_k`.
    pub momentum: Momentum,
    /// `β_k`, the extrapolation weight forming `Y_k`.
    pub beta: f64,
    pub step: f64,
    /// `g(X_k)` including the penalty.
    pub objective: f64,
    pub iteration: usize,
    /// Momentum resets triggered by the monotone safeguard so far.
    pub restarts: usize,
}

impl FistaState {
    pub fn new(x: FactoredPsd, objective: f64, step: f64) -> Self {
        Self {
            x_prev: x.clone(),
            x,
            momentum: Momentum::default(),
            beta: 0.0,
            step,
            objective,
            iteration: 0,
            restarts: 0,
        }
    }

    /// Drops momentum, keeping `X_k` and the step size.
    pub fn reset_momentum(&mut self) {
        self.x_prev = self.x.clone();
        self.momentum = Momentum::default();
        self.beta = 0.0;
    }
}

/// Step-size policy applied inside [`fista_step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct StepPolicy {
    /// Shrink factor for sufficient-decrease backtracking; `None` keeps the
    /// step fixed except for the monotone safeguard.
    pub backtrack: Option<f64>,
    /// Growth applied after each accepted backtracking step.
    pub growth: f64,
}

const MAX_STEP_HALVINGS: usize = 60;
/// Backtracking cuts tolerated before momentum is dropped.
const MOMENTUM_BACKTRACKS: usize = 3;
/// Safeguard cuts allowed before the update is abandoned for this iteration.
const MAX_SAFEGUARD_HALVINGS: usize = 12;

/// One accelerated proximal-gradient update
/// `X_{k+1} = 𝒫_k(Y_k − t ∇g(Y_k))`, `Y_k = X_k + β_k(X_k − X_{k−1})`.
///
/// A monotone safeguard rejects updates that increase the composite
/// objective: momentum is dropped first, then the step is halved a bounded
/// number of times before the iterate is held for one iteration.
pub(crate) fn fista_step(
    problem: &PhaseLiftProblem<'_>,
    state: &FistaState,
    lambda: f64,
    weight: &TraceWeight,
    policy: StepPolicy,
) -> Result<FistaState> {
    let dim = problem.dim();
    let mut beta = state.beta;
    let mut x_prev = state.x_prev.clone();
    let mut momentum = state.momentum;
    let mut step = state.step;
    let mut restarted = false;
    let mut halvings = 0;
    let mut safeguard = 0;
    let mut rng = stream_rng(problem.seed(), Domain::Solver, state.iteration as u64);
    let slack = 1e-10 * state.objective.abs().max(1e-300);

    loop {
        let y = LowRankHermitian::combination(1.0 + beta, &state.x, -beta, &x_prev);
        let mu_y = problem.lifted(&y);
        let (f_y, grad) = problem.nll(&mu_y)?;
        if !f_y.is_finite() {
            return Err(problem.diverged(state.iteration));
        }
        let mut scratch = vec![C64::new(0.0, 0.0); dim];
        let apply = |v: &[C64], out: &mut [C64]| {
            y.apply(v, out);
            scratch.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            problem.adjoint_action_add(&grad, v, &mut scratch);
            weight.apply_add(lambda, v, &mut scratch);
            axpy(C64::new(-step, 0.0), &scratch, out);
        };
        let x_new = psd_project_rank_k(dim, problem.rank_cap(), apply, state.x.vectors(), problem.eig(), &mut rng)?;
        let mu_new = problem.lifted(&x_new.to_terms());
        let (f_new, _) = problem.nll(&mu_new)?;
        if !f_new.is_finite() {
            return Err(problem.diverged(state.iteration));
        }

        if let Some(shrink) = policy.backtrack {
            // Quadratic upper model of the smooth part around Y.
            let mut d = LowRankHermitian::combination(1.0, &x_new, 0.0, &x_new);
            d.coeffs.extend(y.coeffs.iter().map(|c| -c));
            d.vectors.extend(y.vectors.iter().cloned());
            let lin: f64 = grad.iter().zip(mu_new.iter().zip(&mu_y)).map(|(g, (a, b))| g * (a - b)).sum();
            let model = f_y + lin + d.frobenius_norm_sqr() / (2.0 * step);
            if f_new > model + 1e-12 * f_y.abs().max(1e-300) {
                if beta != 0.0 && halvings >= MOMENTUM_BACKTRACKS {
                    // Extrapolation can leave the likelihood's domain
                    // (μ ≤ 0 under Poisson noise); restart from X_k rather
                    // than collapsing the step.
                    beta = 0.0;
                    x_prev = state.x.clone();
                    restarted = true;
                    step = state.step;
                    halvings = 0;
                    continue;
                }
                step *= shrink;
                halvings += 1;
                if halvings > MAX_STEP_HALVINGS {
                    return Err(problem.diverged(state.iteration));
                }
                continue;
            }
        }

        let g_new = f_new + lambda * weight.trace_with(&x_new);
        if !g_new.is_finite() {
            return Err(problem.diverged(state.iteration));
        }
        if g_new > state.objective + slack {
            if beta != 0.0 {
                beta = 0.0;
                x_prev = state.x.clone();
                restarted = true;
                continue;
            }
            if g_new > state.objective + 1e-9 * state.objective.abs() {
                if safeguard >= MAX_SAFEGUARD_HALVINGS {
                    // Smaller steps only chase projection round-off; hold
                    // X_k and retry next iteration from a halved step.
                    let mut held = state.clone();
                    held.reset_momentum();
                    held.step = 0.5 * state.step;
                    held.iteration += 1;
                    held.restarts += 1;
                    return Ok(held);
                }
                step *= 0.5;
                halvings += 1;
                safeguard += 1;
                continue;
            }
        }

        if restarted {
            momentum = Momentum::default();
        }
        let (_, next_beta) = momentum.advance();
        if policy.backtrack.is_some() && halvings == 0 {
            step *= policy.growth;
        }
        return Ok(FistaState {
            x_prev: state.x.clone(),
            x: x_new,
            momentum,
            beta: next_beta,
            step,
            objective: g_new,
            iteration: state.iteration + 1,
            restarts: state.restarts + usize::from(restarted),
        });
    }
}

/// `‖X_new − X_old‖_F / ‖X_new‖_F`, or the absolute change when
/// `X_new = 0`.
pub(crate) fn relative_change(new: &FactoredPsd, old: &FactoredPsd) -> f64 {
    let d = frobenius_distance(new, old);
    let n = new.frobenius_norm();
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn momentum_recursion() {
        let mut m = Momentum::default();
        let (t1, b1) = m.advance();
        assert!((t1 - 2.0 / (1.0 + 5f64.sqrt())).abs() < 1e-15);
        assert_eq!(b1, 0.0);
        let (t2, b2) = m.advance();
        // Evaluated independently in closed form.
        let t2_ref = 2.0 / (1.0 + (1.0 + 4.0 / (t1 * t1)).sqrt());
        assert!((t2 - t2_ref).abs() < 1e-15);
        assert!((t2 - 0.455_886_780_102_866_6).abs() < 1e-12);
        assert!((b2 - 0.281_753_525_125_320_9).abs() < 1e-12);
    }

    #[test]
    fn reweighted_trace_closed_form() {
        let e0 = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let x = FactoredPsd::new(3, vec![2.0], vec![e0]).unwrap();
        let w = TraceWeight::from_iterate(&x, 0.5);
        // (X + εI)^{-1} = diag(1/2.5, 2, 2); Tr(W X) = 2/2.5.
        assert!((w.trace_with(&x) - 0.8).abs() < 1e-14);
        let mut out = vec![C64::new(0.0, 0.0); 3];
        w.apply_add(1.0, &[C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0)], &mut out);
        assert!((out[0] - C64::new(0.4, 0.0)).norm() < 1e-14);
        assert!((out[1] - C64::new(2.0, 0.0)).norm() < 1e-14);
        assert!((out[2] - C64::new(0.0, 2.0)).norm() < 1e-14);
    }
}
