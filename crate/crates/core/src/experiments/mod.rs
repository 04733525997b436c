//! Config-driven experiment harness: builds signals, masks and noisy data,
//! runs the recovery methods over seeded trials, and emits a JSON report,
//! a per-trial CSV, and optional PGM images and solver traces.

pub mod pgm;
mod runners;
pub mod signals;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fienup::SpatialConstraint;
use crate::rng::RNG_IDENTIFICATION;
use crate::signal::{MaskKind, Shape};
use crate::solver::{Objective, ResidualTest};

pub use signals::{make_signal, SignalKind, SignalSpec, SINUSOIDS};

/// Largest signal (in entries) the PhaseLift experiments accept.
pub const MAX_SOLVER_ENTRIES: usize = 16384;

pub const SNR_DEFINITION: &str = "SNR_dB = 10 log10(||b_clean||^2 / ||b_noisy - b_clean||^2), capped at 300 dB";
pub const NORMALIZATION: &str = "unitary DFT (1/sqrt(P) on a zero-padded grid of P points); masks are not renormalized, so rows of 0/1 masks are not unit norm";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[serde(rename = "recover-1d")]
    Recover1d,
    #[serde(rename = "recover-2d")]
    Recover2d,
    NoiseSweep,
    OversamplingStudy,
    ConstructiveDemo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskSpec {
    Constant,
    Binary,
    GaussianReal,
    GaussianComplex,
}

impl MaskSpec {
    pub fn kind(self) -> MaskKind {
        match self {
            MaskSpec::Constant => MaskKind::Constant,
            MaskSpec::Binary => MaskKind::Binary,
            MaskSpec::GaussianReal => MaskKind::GaussianReal,
            MaskSpec::GaussianComplex => MaskKind::GaussianComplex,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseSpec {
    None,
    Poisson,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSpec {
    Fixed,
    Backtracking,
}

/// Flat experiment description; every field has a default so configs only
/// list what they change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub signal: SignalKind,
    /// `[n]` or `[rows, cols]`.
    pub shape: Vec<usize>,
    pub image: Option<PathBuf>,
    pub phase_image: Option<PathBuf>,

    pub mask_kind: MaskSpec,
    /// Number of masked illuminations; several values sweep the count.
    pub mask_counts: Vec<usize>,
    /// Also observe the unmasked pattern, which reveals `‖x‖`.
    pub include_plain: bool,
    pub oversample: usize,
    pub oversample_factors: Vec<usize>,

    pub noise: NoiseSpec,
    pub snr_levels_db: Vec<f64>,

    /// Defaults to Poisson for Poisson noise and Gaussian otherwise.
    pub objective: Option<Objective>,
    pub lambda: f64,
    /// Golden-section search range for `λ` (on a log scale), using the
    /// ground truth to score candidates.
    pub lambda_search: Option<[f64; 2]>,
    pub golden_tol: f64,
    pub golden_max_evals: usize,
    pub rank_cap: usize,
    pub max_iters: usize,
    pub tol_residual: f64,
    pub residual_test: ResidualTest,
    pub tol_change: f64,
    pub step: StepSpec,
    pub backtrack_shrink: f64,
    pub reweight_epsilon: Option<f64>,
    pub reweight_rounds: usize,
    /// Halve `λ` every outer round; defaults to on for noiseless data.
    pub continuation: Option<bool>,
    /// Extra halving rounds when reweighting is off.
    pub continuation_rounds: usize,
    pub real_valued: bool,

    /// Modulation shifts, each `[s]` or `[s1, s2]`.
    pub shifts: Vec<Vec<usize>>,
    /// Scramble with a complex Gaussian mask before modulating.
    pub scramble: bool,

    pub fienup_max_iters: usize,
    pub fienup_tol_residual: f64,
    pub fienup_tol_stagnation: f64,
    pub fienup_constraint: SpatialConstraint,

    /// Trials with relative MSE at most this count as successes.
    pub success_mse: f64,
    pub trials: usize,
    pub seed: u64,
    pub save_images: bool,
    pub save_traces: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Recover1d,
            signal: SignalKind::ComplexGaussian,
            shape: vec![32],
            image: None,
            phase_image: None,
            mask_kind: MaskSpec::GaussianComplex,
            mask_counts: vec![6],
            include_plain: false,
            oversample: 1,
            oversample_factors: vec![2, 3, 4, 5],
            noise: NoiseSpec::None,
            snr_levels_db: vec![],
            objective: None,
            lambda: 0.05,
            lambda_search: None,
            golden_tol: 0.1,
            golden_max_evals: 10,
            rank_cap: 10,
            max_iters: 300,
            tol_residual: 1e-6,
            residual_test: ResidualTest::Signal,
            tol_change: 1e-8,
            step: StepSpec::Fixed,
            backtrack_shrink: 0.5,
            reweight_epsilon: None,
            reweight_rounds: 10,
            continuation: None,
            continuation_rounds: 20,
            real_valued: false,
            shifts: vec![vec![1]],
            scramble: true,
            fienup_max_iters: 5000,
            fienup_tol_residual: 1e-3,
            fienup_tol_stagnation: 1e-6,
            fienup_constraint: SpatialConstraint::RealNonnegative,
            success_mse: 1e-3,
            trials: 10,
            seed: 1,
            save_images: false,
            save_traces: false,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn signal_shape(&self) -> Result<Shape> {
        Shape::new(&self.shape).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn signal_spec(&self) -> Result<SignalSpec> {
        Ok(SignalSpec {
            kind: self.signal,
            shape: self.signal_shape()?,
            image: self.image.clone(),
            phase_image: self.phase_image.clone(),
        })
    }

    /// Rejects infeasible configurations before any computation starts.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let shape = self.signal_shape()?;
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        match (self.experiment, shape) {
            (ExperimentKind::Recover1d, Shape::D2(..)) => return fail("recover-1d needs a 1D shape".into()),
            (ExperimentKind::Recover2d, Shape::D1(_)) => return fail("recover-2d needs a 2D shape".into()),
            _ => {}
        }
        let uses_solver = self.experiment != ExperimentKind::ConstructiveDemo;
        if uses_solver && shape.len() > MAX_SOLVER_ENTRIES {
            return fail(format!(
                "signal has {} entries; the PhaseLift experiments accept at most {MAX_SOLVER_ENTRIES}",
                shape.len()
            ));
        }
        if self.oversample == 0 || self.oversample_factors.contains(&0) {
            return fail("oversampling factors must be at least 1".into());
        }
        match self.experiment {
            ExperimentKind::Recover1d | ExperimentKind::Recover2d | ExperimentKind::NoiseSweep => {
                if self.mask_counts.is_empty() || self.mask_counts.contains(&0) && !self.include_plain {
                    return fail("mask_counts must list positive illumination counts".into());
                }
            }
            ExperimentKind::OversamplingStudy => {
                if self.oversample_factors.is_empty() {
                    return fail("oversample_factors must not be empty".into());
                }
            }
            ExperimentKind::ConstructiveDemo => {
                if self.shifts.is_empty() {
                    return fail("shifts must not be empty".into());
                }
                for s in &self.shifts {
                    if s.len() != shape.ndim() {
                        return fail(format!("shift {s:?} does not match a {}D shape", shape.ndim()));
                    }
                }
            }
        }
        if self.experiment == ExperimentKind::NoiseSweep && (self.noise == NoiseSpec::None || self.snr_levels_db.is_empty()) {
            return fail("noise-sweep needs a noise model and snr_levels_db".into());
        }
        if self.noise != NoiseSpec::None && self.snr_levels_db.is_empty() {
            return fail("noisy experiments need snr_levels_db".into());
        }
        if !(self.lambda >= 0.0) {
            return fail("lambda must be nonnegative".into());
        }
        if let Some([lo, hi]) = self.lambda_search {
            if !(lo > 0.0 && lo < hi) {
                return fail("lambda_search must satisfy 0 < lo < hi".into());
            }
        }
        if let Some(eps) = self.reweight_epsilon {
            if !(eps > 0.0) {
                return fail("reweight_epsilon must be positive".into());
            }
        }
        if self.rank_cap == 0 {
            return fail("rank_cap must be at least 1".into());
        }
        if !(self.backtrack_shrink > 0.0 && self.backtrack_shrink < 1.0) {
            return fail("backtrack_shrink must lie in (0, 1)".into());
        }
        if self.signal == SignalKind::ImageFile && self.image.is_none() {
            return fail("image-file signals need an image path".into());
        }
        Ok(())
    }
}

/// One row of `trials.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub method: String,
    pub masks: usize,
    pub oversample: usize,
    pub snr_target_db: Option<f64>,
    pub snr_db: Option<f64>,
    pub lambda: Option<f64>,
    pub relative_mse: f64,
    pub mse_db: f64,
    /// `‖sense(x̂) − b‖/‖b‖` for the returned signal.
    pub residual: f64,
    /// `‖𝒜(X) − b‖/‖b‖` for the lifted PhaseLift iterate.
    pub lifted_residual: Option<f64>,
    pub rank_gap: Option<f64>,
    pub iterations: usize,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub masks: usize,
    pub oversample: usize,
    pub snr_target_db: Option<f64>,
    pub count: usize,
    /// Trials that produced a finite MSE.
    pub completed: usize,
    pub mean_mse: f64,
    pub median_mse: f64,
    pub mean_mse_db: f64,
    pub mean_residual: f64,
    pub mean_lifted_residual: Option<f64>,
    pub mean_snr_db: Option<f64>,
    pub success_rate: f64,
}

/// Least-squares line through `(mean SNR dB, mean MSE dB)` of one curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub method: String,
    pub masks: usize,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub rng: String,
    pub snr_definition: String,
    pub normalization: String,
    pub config: ExperimentConfig,
    pub notes: Vec<String>,
    pub trials: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
    pub fits: Vec<SlopeFit>,
}

/// A file produced by a trial, relative to the output directory.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

#[derive(Default)]
pub(crate) struct TrialOutcome {
    pub records: Vec<TrialRecord>,
    pub artifacts: Vec<Artifact>,
    pub notes: Vec<String>,
}

pub struct RunOutput {
    pub report: ExperimentReport,
    pub artifacts: Vec<Artifact>,
}

/// Runs every trial (concurrently on `threads` workers, in trial order for
/// the results) and assembles the report.
pub fn run(config: &ExperimentConfig, threads: usize) -> Result<RunOutput> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|t| runners::run_trial(config, t))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut notes: Vec<String> = Vec::new();
    let mut trials = Vec::new();
    let mut artifacts = Vec::new();
    for outcome in outcomes {
        for note in outcome.notes {
            if !notes.contains(&note) {
                notes.push(note);
            }
        }
        trials.extend(outcome.records);
        artifacts.extend(outcome.artifacts);
    }
    let aggregates = aggregate(&trials, config.success_mse);
    let fits = if config.experiment == ExperimentKind::NoiseSweep {
        slope_fits(&aggregates)
    } else {
        vec![]
    };
    let report = ExperimentReport {
        version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
        rng: RNG_IDENTIFICATION.to_string(),
        snr_definition: SNR_DEFINITION.to_string(),
        normalization: NORMALIZATION.to_string(),
        config: config.clone(),
        notes,
        trials,
        aggregates,
        fits,
    };
    Ok(RunOutput { report, artifacts })
}

/// [`run`], then writes `report.json`, `trials.csv` and artifacts to `out_dir`.
pub fn run_to_dir(config: &ExperimentConfig, out_dir: &Path, threads: usize) -> Result<ExperimentReport> {
    let output = run(config, threads)?;
    write_outputs(&output, out_dir)?;
    Ok(output.report)
}

pub fn write_outputs(output: &RunOutput, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut json = serde_json::to_vec_pretty(&output.report)?;
    json.push(b'\n');
    fs::write(out_dir.join("report.json"), json)?;
    fs::write(out_dir.join("trials.csv"), trials_csv(&output.report.trials)?)?;
    for artifact in &output.artifacts {
        let path = out_dir.join(&artifact.path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, &artifact.bytes)?;
    }
    Ok(())
}

pub fn trials_csv(records: &[TrialRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn same_level(a: Option<f64>, b: Option<f64>) -> bool {
    a.map(f64::to_bits) == b.map(f64::to_bits)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Groups trials by method, mask count, oversampling and noise level, in
/// order of first appearance.
pub fn aggregate(records: &[TrialRecord], success_mse: f64) -> Vec<Aggregate> {
    let mut keys: Vec<(String, usize, usize, Option<f64>)> = Vec::new();
    for r in records {
        let key = (r.method.clone(), r.masks, r.oversample, r.snr_target_db);
        if !keys
            .iter()
            .any(|k| k.0 == key.0 && k.1 == key.1 && k.2 == key.2 && same_level(k.3, key.3))
        {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, masks, oversample, level)| {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.method == method && r.masks == masks && r.oversample == oversample && same_level(r.snr_target_db, level))
                .collect();
            let mut finite: Vec<f64> = group.iter().map(|r| r.relative_mse).filter(|v| v.is_finite()).collect();
            finite.sort_by(f64::total_cmp);
            let median = match finite.len() {
                0 => f64::NAN,
                l if l % 2 == 1 => finite[l / 2],
                l => 0.5 * (finite[l / 2 - 1] + finite[l / 2]),
            };
            let snrs: Vec<f64> = group.iter().filter_map(|r| r.snr_db).collect();
            let lifted: Vec<f64> = group.iter().filter_map(|r| r.lifted_residual).collect();
            Aggregate {
                count: group.len(),
                completed: finite.len(),
                mean_mse: mean(finite.iter().copied()),
                median_mse: median,
                mean_mse_db: mean(group.iter().map(|r| r.mse_db).filter(|v| v.is_finite())),
                mean_residual: mean(group.iter().map(|r| r.residual).filter(|v| v.is_finite())),
                mean_lifted_residual: if lifted.is_empty() { None } else { Some(mean(lifted.into_iter())) },
                mean_snr_db: if snrs.is_empty() { None } else { Some(mean(snrs.into_iter())) },
                success_rate: group.iter().filter(|r| r.relative_mse <= success_mse).count() as f64 / group.len() as f64,
                method,
                masks,
                oversample,
                snr_target_db: level,
            }
        })
        .collect()
}

/// Least-squares slope of mean MSE (dB) against mean SNR (dB) per curve.
pub fn slope_fits(aggregates: &[Aggregate]) -> Vec<SlopeFit> {
    let mut curves: Vec<(String, usize)> = Vec::new();
    for a in aggregates {
        if a.mean_snr_db.is_some() && !curves.iter().any(|c| c.0 == a.method && c.1 == a.masks) {
            curves.push((a.method.clone(), a.masks));
        }
    }
    curves
        .into_iter()
        .filter_map(|(method, masks)| {
            let pts: Vec<(f64, f64)> = aggregates
                .iter()
                .filter(|a| a.method == method && a.masks == masks)
                .filter_map(|a| a.mean_snr_db.map(|s| (s, a.mean_mse_db)))
                .collect();
            let (slope, intercept) = least_squares_line(&pts)?;
            Some(SlopeFit {
                method,
                masks,
                slope,
                intercept,
            })
        })
        .collect()
}

pub fn least_squares_line(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Configs shipped with the crate, runnable by name.
pub const DEMOS: &[(&str, &str)] = &[
    ("recover-1d", include_str!("../../configs/recover-1d.json")),
    ("recover-1d-binary", include_str!("../../configs/recover-1d-binary.json")),
    ("recover-2d", include_str!("../../configs/recover-2d.json")),
    ("noise-sweep", include_str!("../../configs/noise-sweep.json")),
    ("oversampling-1d", include_str!("../../configs/oversampling-1d.json")),
    ("oversampling-2d", include_str!("../../configs/oversampling-2d.json")),
    ("constructive", include_str!("../../configs/constructive.json")),
    ("constructive-2d", include_str!("../../configs/constructive-2d.json")),
    ("recover-1d-paper", include_str!("../../configs/paper/recover-1d.json")),
    ("recover-2d-paper", include_str!("../../configs/paper/recover-2d.json")),
    ("noise-sweep-paper", include_str!("../../configs/paper/noise-sweep.json")),
    ("oversampling-1d-paper", include_str!("../../configs/paper/oversampling-1d.json")),
    ("oversampling-2d-paper", include_str!("../../configs/paper/oversampling-2d.json")),
];

pub fn demo_config(name: &str) -> Result<ExperimentConfig> {
    let (_, text) = DEMOS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("unknown demo '{name}'")))?;
    ExperimentConfig::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_configs_parse() {
        for (name, _) in DEMOS {
            demo_config(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn rejects_oversized_and_unknown() {
        let big = r#"{"experiment": "recover-2d", "shape": [256, 256]}"#;
        assert!(matches!(ExperimentConfig::from_json(big), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"trials": 0}"#).is_err());
        let ok = r#"{"experiment": "constructive-demo", "shape": [256, 256], "shifts": [[1, 0], [0, 1]]}"#;
        assert!(ExperimentConfig::from_json(ok).is_ok());
    }

    #[test]
    fn line_fit() {
        let (s, i) = least_squares_line(&[(0.0, 1.0), (1.0, 0.0), (2.0, -1.0)]).unwrap();
        assert!((s + 1.0).abs() < 1e-15 && (i - 1.0).abs() < 1e-15);
        assert!(least_squares_line(&[(1.0, 1.0)]).is_none());
    }
}
