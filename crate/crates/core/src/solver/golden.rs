use crate::error::{Error, Result};
use crate::measurement::{IntensityData, MeasurementEnsemble};
use crate::metrics::relative_mse;
use crate::signal::ComplexSignal;

use super::{solve, SolverConfig};

/// `1/φ`, the bracket shrink factor per golden-section step.
pub const INV_GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Debug)]
pub struct GoldenSearch {
    /// Stop once the bracket is at most this wide (in the search variable).
    pub tol: f64,
    pub max_evals: usize,
    /// Search over `ln λ` instead of `λ`.
    pub log_scale: bool,
    /// Also probe both ends of the range.
    pub probe_endpoints: bool,
}

impl Default for GoldenSearch {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_evals: 60,
            log_scale: false,
            probe_endpoints: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GoldenOutcome {
    pub argmin: f64,
    pub value: f64,
    /// Every `(point, value)` evaluated, in order.
    pub probes: Vec<(f64, f64)>,
    /// Final bracket, in the original (not log) variable.
    pub bracket: (f64, f64),
    /// Number of bracket reductions performed.
    pub shrinks: usize,
}

/// Golden-section minimization of a unimodal `f` on `[lo, hi]`. Returns
/// the best point probed.
pub fn golden_section_search<F>(lo: f64, hi: f64, search: &GoldenSearch, mut f: F) -> Result<GoldenOutcome>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) || (search.log_scale && lo <= 0.0) {
        return Err(Error::InvalidParameter(format!("invalid search range [{lo}, {hi}]")));
    }
    let (to, from): (fn(f64) -> f64, fn(f64) -> f64) = if search.log_scale {
        (f64::ln, f64::exp)
    } else {
        (|x| x, |x| x)
    };
    let mut probes = Vec::new();
    let mut eval_at = |x: f64, probes: &mut Vec<(f64, f64)>| -> Result<f64> {
        let v = f(x)?;
        probes.push((x, v));
        Ok(v)
    };

    let (mut a, mut b) = (to(lo), to(hi));
    if search.probe_endpoints {
        eval_at(lo, &mut probes)?;
        eval_at(hi, &mut probes)?;
    }
    let mut c = b - INV_GOLDEN * (b - a);
    let mut d = a + INV_GOLDEN * (b - a);
    let mut fc = eval_at(from(c), &mut probes)?;
    let mut fd = eval_at(from(d), &mut probes)?;
    let mut shrinks = 0;
    while b - a > search.tol && probes.len() < search.max_evals {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_GOLDEN * (b - a);
            fc = eval_at(from(c), &mut probes)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_GOLDEN * (b - a);
            fd = eval_at(from(d), &mut probes)?;
        }
        shrinks += 1;
    }
    let &(argmin, value) = probes
        .iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("at least two probes");
    Ok(GoldenOutcome {
        argmin,
        value,
        probes,
        bracket: (from(a), from(b)),
        shrinks,
    })
}

/// Chooses the trace-penalty weight minimizing the relative MSE against a
/// known ground truth. Both range endpoints are probed, so the returned
/// MSE never exceeds either endpoint's.
pub fn golden_section_lambda(
    ensemble: &MeasurementEnsemble,
    b: &IntensityData,
    x_true: &ComplexSignal,
    lambda_range: (f64, f64),
    config: &SolverConfig,
    search: &GoldenSearch,
) -> Result<(f64, f64)> {
    let (lo, hi) = lambda_range;
    if !(lo > 0.0) {
        return Err(Error::InvalidParameter("lambda range must be positive".into()));
    }
    let target = x_true.norm();
    let search = GoldenSearch {
        probe_endpoints: true,
        ..search.clone()
    };
    let outcome = golden_section_search(lo, hi, &search, |lambda| {
        let cfg = SolverConfig {
            lambda,
            ..config.clone()
        };
        match solve(ensemble, b, &cfg, target) {
            Ok(result) => relative_mse(x_true, &result.x_hat),
            Err(Error::Diverged { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    })?;
    Ok((outcome.argmin, outcome.value))
}
