use std::path::PathBuf;

use crate::constructive::{recover, scrambling_mask, sense_triples, uniqueness_check, ModulationTriple, Uniqueness};
use crate::error::{Error, Result};
use crate::fienup::{error_reduction, FienupConfig};
use crate::measurement::{relative_misfit, IntensityData, MeasurementEnsemble};
use crate::metrics::{relative_mse, to_db};
use crate::noise::{corrupt, gaussian_sigma_for_snr, poisson_scale_for_snr, snr_db, NoiseModel};
use crate::rng::{child_seed, Domain};
use crate::signal::{make_mask, make_masks, ComplexSignal, MaskKind, Shape, Shift};
use crate::solver::{
    golden_section_search, solve, Continuation, GoldenSearch, Objective, Reweight, SolverConfig, SolverResult,
    StepRule,
};

use super::pgm;
use super::{make_signal, Artifact, ExperimentConfig, ExperimentKind, NoiseSpec, StepSpec, TrialOutcome, TrialRecord};

pub(crate) fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialOutcome> {
    let seed = child_seed(config.seed, Domain::Trial, trial as u64);
    let x0 = make_signal(&config.signal_spec()?, child_seed(seed, Domain::Signal, 0))?;
    let mut trial_run = TrialRun {
        config,
        trial,
        seed,
        x0,
        out: TrialOutcome::default(),
    };
    if trial_run.wants_images() {
        trial_run.image(format!("trial{trial:03}_truth.pgm"), &trial_run.x0.clone());
    }
    match config.experiment {
        ExperimentKind::Recover1d | ExperimentKind::Recover2d | ExperimentKind::NoiseSweep => trial_run.masked()?,
        ExperimentKind::OversamplingStudy => trial_run.oversampling()?,
        ExperimentKind::ConstructiveDemo => trial_run.constructive()?,
    }
    Ok(trial_run.out)
}

/// `None` for noiseless runs, otherwise one entry per target SNR.
fn levels(config: &ExperimentConfig) -> Vec<Option<f64>> {
    match config.noise {
        NoiseSpec::None => vec![None],
        _ => config.snr_levels_db.iter().map(|&s| Some(s)).collect(),
    }
}

fn level_tag(level: Option<f64>) -> String {
    match level {
        None => "clean".into(),
        Some(s) => format!("snr{s}"),
    }
}

/// Noisy copy of `clean` at the target SNR plus the realized SNR.
fn add_noise(config: &ExperimentConfig, clean: &IntensityData, level: Option<f64>, seed: u64) -> Result<(IntensityData, Option<f64>)> {
    let Some(target) = level else {
        return Ok((clean.clone(), None));
    };
    let model = match config.noise {
        NoiseSpec::None => return Ok((clean.clone(), None)),
        NoiseSpec::Poisson => NoiseModel::Poisson {
            scale: poisson_scale_for_snr(&clean.values, target)?,
        },
        NoiseSpec::Gaussian => NoiseModel::Gaussian {
            sigma: vec![gaussian_sigma_for_snr(&clean.values, target)?; clean.len()],
        },
    };
    let noisy = corrupt(clean, &model, seed)?;
    let snr = snr_db(clean, &noisy)?;
    Ok((noisy, Some(snr)))
}

struct TrialRun<'a> {
    config: &'a ExperimentConfig,
    trial: usize,
    seed: u64,
    x0: ComplexSignal,
    out: TrialOutcome,
}

impl TrialRun<'_> {
    fn wants_images(&self) -> bool {
        self.config.save_images && matches!(self.x0.shape(), Shape::D2(..))
    }

    fn image(&mut self, name: String, x: &ComplexSignal) {
        self.out.artifacts.push(Artifact {
            path: PathBuf::from("images").join(name),
            bytes: pgm::encode(x),
        });
    }

    fn solver_config(&self, noisy: bool, lambda: f64) -> SolverConfig {
        let c = self.config;
        let objective = c.objective.unwrap_or(if c.noise == NoiseSpec::Poisson {
            Objective::Poisson
        } else {
            Objective::Gaussian
        });
        SolverConfig {
            objective,
            lambda,
            rank_cap: c.rank_cap,
            max_iters: c.max_iters,
            step_rule: match c.step {
                StepSpec::Fixed => StepRule::Fixed,
                StepSpec::Backtracking => StepRule::Backtracking {
                    shrink: c.backtrack_shrink,
                },
            },
            tol_residual: c.tol_residual,
            residual_test: c.residual_test,
            tol_change: c.tol_change,
            reweight: match c.reweight_epsilon {
                Some(epsilon) => Reweight::On {
                    epsilon,
                    max_rounds: c.reweight_rounds,
                },
                None => Reweight::Off,
            },
            continuation: if c.continuation.unwrap_or(!noisy) {
                Continuation::Halve {
                    rounds: c.continuation_rounds,
                }
            } else {
                Continuation::Off
            },
            seed: child_seed(self.seed, Domain::Solver, 0),
            real_valued: c.real_valued,
            record_trace: c.save_traces,
            ..SolverConfig::default()
        }
    }

    /// Solves with the configured `λ`, or with the best `λ` found by a
    /// golden-section search scored against the ground truth.
    fn phaselift(&self, ensemble: &MeasurementEnsemble, b: &IntensityData, noisy: bool) -> Result<(f64, SolverResult)> {
        let target_norm = ensemble.norm_from_data(b).unwrap_or_else(|| self.x0.norm());
        let Some([lo, hi]) = self.config.lambda_search else {
            let config = self.solver_config(noisy, self.config.lambda);
            return Ok((self.config.lambda, solve(ensemble, b, &config, target_norm)?));
        };
        let search = GoldenSearch {
            tol: self.config.golden_tol,
            max_evals: self.config.golden_max_evals,
            log_scale: true,
            probe_endpoints: true,
        };
        let mut best: Option<(f64, f64, SolverResult)> = None;
        golden_section_search(lo, hi, &search, |lambda| {
            let config = self.solver_config(noisy, lambda);
            let result = match solve(ensemble, b, &config, target_norm) {
                Ok(r) => r,
                Err(Error::Diverged { .. }) => return Ok(f64::INFINITY),
                Err(e) => return Err(e),
            };
            let mse = relative_mse(&self.x0, &result.x_hat)?;
            if best.as_ref().is_none_or(|(_, m, _)| mse < *m) {
                best = Some((lambda, mse, result));
            }
            Ok(mse)
        })?;
        let (lambda, _, result) = best.ok_or_else(|| Error::Diverged {
            iteration: 0,
            objective_log: vec![],
        })?;
        Ok((lambda, result))
    }

    fn masked(&mut self) -> Result<()> {
        let c = self.config;
        let shape = self.x0.shape();
        for &count in &c.mask_counts {
            let mut masks = make_masks(shape, c.mask_kind.kind(), count, child_seed(self.seed, Domain::Mask, count as u64))?;
            if c.include_plain {
                masks.insert(0, make_mask(shape, MaskKind::Constant, 0)?);
            }
            let total = masks.len();
            let ensemble = MeasurementEnsemble::from_masks(shape, masks, c.oversample)?;
            let clean = ensemble.sense(&self.x0)?;
            self.out.notes.push(if c.include_plain {
                "x-hat is scaled to the norm read off the unmasked pattern".into()
            } else {
                "x-hat is scaled to the true signal norm (no unmasked pattern observed)".into()
            });
            for (li, level) in levels(c).into_iter().enumerate() {
                let noise_seed = child_seed(self.seed, Domain::Noise, ((count as u64) << 16) | li as u64);
                let (b, snr) = add_noise(c, &clean, level, noise_seed)?;
                let (lambda, result) = self.phaselift(&ensemble, &b, level.is_some())?;
                let mse = relative_mse(&self.x0, &result.x_hat)?;
                let tag = format!("trial{:03}_m{total}_{}", self.trial, level_tag(level));
                self.out.records.push(TrialRecord {
                    trial: self.trial,
                    method: "phaselift".into(),
                    masks: total,
                    oversample: c.oversample,
                    snr_target_db: level,
                    snr_db: snr,
                    lambda: Some(lambda),
                    relative_mse: mse,
                    mse_db: to_db(mse),
                    residual: result.residual,
                    lifted_residual: Some(result.lifted_residual),
                    rank_gap: Some(result.x.rank_gap()),
                    iterations: result.iterations,
                    status: format!("{:?}", result.status).to_lowercase(),
                });
                self.save_run(&tag, &result)?;
            }
        }
        Ok(())
    }

    fn save_run(&mut self, tag: &str, result: &SolverResult) -> Result<()> {
        if self.config.save_traces {
            let mut bytes = Vec::new();
            result.write_trace_csv(&mut bytes)?;
            self.out.artifacts.push(Artifact {
                path: PathBuf::from("traces").join(format!("{tag}.csv")),
                bytes,
            });
        }
        if self.wants_images() {
            self.image(format!("{tag}_phaselift.pgm"), &result.x_hat.clone());
        }
        Ok(())
    }

    /// PhaseLift and error reduction on one unmasked pattern per
    /// oversampling factor.
    fn oversampling(&mut self) -> Result<()> {
        let c = self.config;
        let shape = self.x0.shape();
        self.out
            .notes
            .push("x-hat is scaled to the norm read off the unmasked pattern".into());
        for &r in &c.oversample_factors {
            let mask = make_mask(shape, MaskKind::Constant, 0)?;
            let ensemble = MeasurementEnsemble::from_masks(shape, vec![mask], r)?;
            let clean = ensemble.sense(&self.x0)?;
            for (li, level) in levels(c).into_iter().enumerate() {
                let noise_seed = child_seed(self.seed, Domain::Noise, ((r as u64) << 16) | li as u64);
                let (b, snr) = add_noise(c, &clean, level, noise_seed)?;
                let tag = format!("trial{:03}_r{r}_{}", self.trial, level_tag(level));

                let (lambda, result) = self.phaselift(&ensemble, &b, level.is_some())?;
                let mse = relative_mse(&self.x0, &result.x_hat)?;
                self.out.records.push(TrialRecord {
                    trial: self.trial,
                    method: "phaselift".into(),
                    masks: 1,
                    oversample: r,
                    snr_target_db: level,
                    snr_db: snr,
                    lambda: Some(lambda),
                    relative_mse: mse,
                    mse_db: to_db(mse),
                    residual: result.residual,
                    lifted_residual: Some(result.lifted_residual),
                    rank_gap: Some(result.x.rank_gap()),
                    iterations: result.iterations,
                    status: format!("{:?}", result.status).to_lowercase(),
                });
                self.save_run(&tag, &result)?;

                let y: Vec<f64> = b.values.iter().map(|v| v.max(0.0).sqrt()).collect();
                let fienup = FienupConfig {
                    max_iters: c.fienup_max_iters,
                    tol_residual: c.fienup_tol_residual,
                    tol_stagnation: c.fienup_tol_stagnation,
                    constraint: c.fienup_constraint,
                    seed: child_seed(self.seed, Domain::Fienup, ((r as u64) << 16) | li as u64),
                    ..FienupConfig::new(shape, r)
                };
                let er = error_reduction(&y, &fienup)?;
                let mse = relative_mse(&self.x0, &er.x)?;
                let intensity_residual = ensemble.relative_residual_raw(er.x.data(), &b.values);
                self.out.records.push(TrialRecord {
                    trial: self.trial,
                    method: "fienup".into(),
                    masks: 1,
                    oversample: r,
                    snr_target_db: level,
                    snr_db: snr,
                    lambda: None,
                    relative_mse: mse,
                    mse_db: to_db(mse),
                    residual: intensity_residual,
                    lifted_residual: None,
                    rank_gap: None,
                    iterations: er.iterations,
                    status: format!("{:?}", er.status).to_lowercase(),
                });
                if self.wants_images() {
                    self.image(format!("{tag}_fienup.pgm"), &er.x.clone());
                }
            }
        }
        Ok(())
    }

    /// Closed-form recovery from three patterns per modulation shift.
    fn constructive(&mut self) -> Result<()> {
        let c = self.config;
        let shape = self.x0.shape();
        let shifts = c
            .shifts
            .iter()
            .map(|s| match s.as_slice() {
                [a] => Ok(Shift::D1(*a)),
                [a, b] => Ok(Shift::D2(*a, *b)),
                _ => Err(Error::Config(format!("bad shift {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let verdict = uniqueness_check(shape, &shifts)?;
        self.out.notes.push(match &verdict {
            Uniqueness::Unique => "uniqueness: unique".to_string(),
            Uniqueness::NotUnique(why) => format!("uniqueness: not unique ({why})"),
        });
        let mask = if c.scramble {
            Some(scrambling_mask(shape, child_seed(self.seed, Domain::Mask, 0))?)
        } else {
            None
        };
        let clean = sense_triples(&self.x0, &shifts, mask.as_ref())?;
        let clean_flat = flatten(&clean);

        for (li, level) in levels(c).into_iter().enumerate() {
            let noise_seed = child_seed(self.seed, Domain::Noise, li as u64);
            let (noisy, snr) = add_noise(c, &IntensityData::clean(clean_flat.clone()), level, noise_seed)?;
            let triples = unflatten(&clean, &noisy.values);
            let tag = format!("trial{:03}_{}", self.trial, level_tag(level));
            let (mse, residual, status) = match recover(&triples, shape, mask.as_ref()) {
                Ok(x_hat) => {
                    let mse = relative_mse(&self.x0, &x_hat)?;
                    let resensed = flatten(&sense_triples(&x_hat, &shifts, mask.as_ref())?);
                    let residual = relative_misfit(&resensed, &noisy.values);
                    if self.wants_images() {
                        self.image(format!("{tag}_constructive.pgm"), &x_hat);
                    }
                    (mse, residual, "recovered".to_string())
                }
                Err(e @ (Error::NotCoprime(_) | Error::VanishingDft { .. })) => (f64::NAN, f64::NAN, e.to_string()),
                Err(e) => return Err(e),
            };
            self.out.records.push(TrialRecord {
                trial: self.trial,
                method: "constructive".into(),
                masks: 3 * shifts.len(),
                oversample: 1,
                snr_target_db: level,
                snr_db: snr,
                lambda: None,
                relative_mse: mse,
                mse_db: to_db(mse),
                residual,
                lifted_residual: None,
                rank_gap: None,
                iterations: 0,
                status,
            });
        }
        Ok(())
    }
}

fn flatten(triples: &[ModulationTriple]) -> Vec<f64> {
    triples
        .iter()
        .flat_map(|t| t.i0.iter().chain(&t.i_plus).chain(&t.i_minus_i).copied())
        .collect()
}

fn unflatten(template: &[ModulationTriple], values: &[f64]) -> Vec<ModulationTriple> {
    let n = template.first().map_or(0, |t| t.i0.len());
    template
        .iter()
        .zip(values.chunks(3 * n))
        .map(|(t, v)| ModulationTriple {
            i0: v[..n].to_vec(),
            i_plus: v[n..2 * n].to_vec(),
            i_minus_i: v[2 * n..].to_vec(),
            ..t.clone()
        })
        .collect()
}
