//! Replicated simulation experiments.
//!
//! An [`ExperimentPlan`] names a scenario, a list of sample sizes, a number
//! of replications and the selection modes to compare. Replication `r` uses
//! the same random streams at every sample size, so results are paired
//! across `n`. Work is spread over a bounded thread pool, but every result
//! is computed by a fixed sequence of floating-point operations and
//! gathered in plan order, so reports do not depend on the thread count.

pub mod cli;
pub mod diagnostics;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{predict_from_distances, DistanceTable, Estimate};
use crate::kernels::{FunctionalKernel, KernelSpec, LogKernel, WeightVector};
use crate::numeric::CompensatedSum;
use crate::selection::{minimize_prepared, CvConfig, CvProblem, FitResult, OptimizerConfig, SelectionMode, DEFAULT_WEIGHT_CAP};
use crate::simgen::{draw_scenario, Preset, ScenarioConfig, SimDraw, DEFAULT_TEST_SIZE};

pub use diagnostics::{log_log_slope, rate_diagnostics, CovariateRates, RateSummary};
pub use report::{AggregateRow, ExperimentReport, FitOutcome, ReportRow};

/// Failure share above which an experiment as a whole fails.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Free,
    EqualWeights,
    Oracle,
}

impl ModeName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModeName::Free => "free",
            ModeName::EqualWeights => "equal_weights",
            ModeName::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for ModeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(ModeName::Free),
            "equal_weights" | "equal" => Ok(ModeName::EqualWeights),
            "oracle" => Ok(ModeName::Oracle),
            other => Err(Error::InvalidValue(format!("unknown mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for ModeName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Optional changes to a preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOverrides {
    pub p_fun: Option<usize>,
    pub q_fun: Option<usize>,
    pub p_cat: Option<usize>,
    pub q_cat: Option<usize>,
    pub grid_len: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub preset: Preset,
    #[serde(default)]
    pub overrides: ScenarioOverrides,
}

impl ScenarioSpec {
    pub fn config(&self, n: usize, seed: u64, test_size: usize) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::preset(self.preset, n, seed);
        let o = &self.overrides;
        cfg.p_fun = o.p_fun.unwrap_or(cfg.p_fun);
        cfg.q_fun = o.q_fun.unwrap_or(cfg.q_fun);
        cfg.p_cat = o.p_cat.unwrap_or(cfg.p_cat);
        cfg.q_cat = o.q_cat.unwrap_or(cfg.q_cat);
        cfg.grid_len = o.grid_len.unwrap_or(cfg.grid_len);
        cfg.test_size = test_size;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerPlan {
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub max_evals: Option<usize>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_starts() -> usize {
    OptimizerConfig::default().starts
}

fn default_rel_tol() -> f64 {
    OptimizerConfig::default().rel_tol
}

fn default_parallelism() -> usize {
    1
}

fn default_test_size() -> usize {
    DEFAULT_TEST_SIZE
}

fn default_weight_cap() -> f64 {
    DEFAULT_WEIGHT_CAP
}

fn default_modes() -> Vec<ModeName> {
    vec![ModeName::Free, ModeName::EqualWeights, ModeName::Oracle]
}

impl Default for OptimizerPlan {
    fn default() -> Self {
        Self {
            starts: default_starts(),
            max_evals: None,
            rel_tol: default_rel_tol(),
        }
    }
}

/// Everything needed to run (and rerun) an experiment. Read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub scenario: ScenarioSpec,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    #[serde(default = "default_modes")]
    pub modes: Vec<ModeName>,
    pub base_seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    #[serde(default)]
    pub kernel: FunctionalKernel,
    #[serde(default)]
    pub optimizer: OptimizerPlan,
    #[serde(default = "default_weight_cap")]
    pub weight_cap: f64,
}

impl ExperimentPlan {
    pub fn new(preset: Preset, sample_sizes: Vec<usize>, replications: usize, base_seed: u64) -> Self {
        Self {
            scenario: ScenarioSpec {
                preset,
                overrides: ScenarioOverrides::default(),
            },
            sample_sizes,
            replications,
            modes: default_modes(),
            base_seed,
            parallelism: 1,
            output_dir: None,
            test_size: DEFAULT_TEST_SIZE,
            kernel: FunctionalKernel::Picard,
            optimizer: OptimizerPlan::default(),
            weight_cap: DEFAULT_WEIGHT_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::InvalidValue("replications must be at least 1".into()));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::InvalidValue("sample_sizes must not be empty".into()));
        }
        if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidValue("sample_sizes must be strictly increasing".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::InvalidValue("modes must not be empty".into()));
        }
        if self.parallelism < 1 {
            return Err(Error::InvalidValue("parallelism must be at least 1".into()));
        }
        if self.test_size < 1 {
            return Err(Error::InvalidValue("test_size must be at least 1".into()));
        }
        for n in &self.sample_sizes {
            self.scenario.config(*n, self.base_seed, self.test_size).validate()?;
        }
        self.cv_config(SelectionMode::Free, 0).validate()
    }

    /// Scenario at the first sample size; the covariate layout is the
    /// same at every size.
    pub fn scenario_config(&self) -> ScenarioConfig {
        self.scenario
            .config(self.sample_sizes[0], self.base_seed, self.test_size)
    }

    fn cv_config(&self, mode: SelectionMode, p_cat: usize) -> CvConfig {
        let mut cfg = CvConfig::new(KernelSpec::new(self.kernel, p_cat)).with_mode(mode);
        cfg.optimizer = OptimizerConfig {
            starts: self.optimizer.starts,
            max_evals: self.optimizer.max_evals,
            rel_tol: self.optimizer.rel_tol,
        };
        cfg.weight_cap = self.weight_cap;
        cfg
    }

    fn sorted_modes(&self) -> Vec<ModeName> {
        let mut modes = self.modes.clone();
        modes.sort();
        modes.dedup();
        modes
    }
}

/// Mean squared test error of the fitted weights, against the noiseless
/// truth and against the noisy responses.
pub fn test_errors(draw: &SimDraw, kernel: &KernelSpec, weights: &WeightVector) -> Result<(f64, f64)> {
    let ds = &draw.dataset;
    let log_kernel = LogKernel::new(kernel, weights, ds.schema().p_fun())?;
    let table = DistanceTable::cross(ds, &draw.test.samples)?;
    let mut to_truth = CompensatedSum::new();
    let mut to_noisy = CompensatedSum::new();
    for q in 0..table.rows() {
        let pred = predict_from_distances(ds.responses(), &log_kernel, table.row(q), None);
        let Estimate::Value(v) = pred.estimate else {
            return Err(Error::WrongResponseKind {
                expected: "continuous",
            });
        };
        to_truth.add((v - draw.test.truth[q]).powi(2));
        to_noisy.add((v - draw.test.noisy[q]).powi(2));
    }
    let m = table.rows() as f64;
    Ok((to_truth.total() / m, to_noisy.total() / m))
}

struct Fitted {
    mode: ModeName,
    fit: FitResult,
    seconds: f64,
}

fn fit_modes(plan: &ExperimentPlan, draw: &SimDraw, cfg: &ScenarioConfig) -> Result<Vec<Fitted>> {
    let ds = &draw.dataset;
    let p_cat = ds.schema().p_cat();
    let base = plan.cv_config(SelectionMode::Free, p_cat);
    let problem = CvProblem::new(ds, &base.kernel, &base.trimming)?;
    let modes = plan.sorted_modes();
    let wants = |m: ModeName| modes.contains(&m);

    let mut out = Vec::new();
    // The free search always starts from the tied solution as well, so
    // the free objective is never worse than the tied one.
    let mut equal: Option<(FitResult, f64)> = None;
    if wants(ModeName::EqualWeights) || wants(ModeName::Free) {
        let t = Instant::now();
        let fit = minimize_prepared(&problem, &plan.cv_config(SelectionMode::EqualWeights, p_cat))?;
        equal = Some((fit, t.elapsed().as_secs_f64()));
    }
    for mode in modes {
        let t = Instant::now();
        let fit = match mode {
            ModeName::EqualWeights => {
                let (fit, seconds) = equal.clone().expect("fitted above");
                out.push(Fitted { mode, fit, seconds });
                continue;
            }
            ModeName::Free => {
                let mut cv = plan.cv_config(SelectionMode::Free, p_cat);
                cv.extra_starts
                    .push(equal.as_ref().expect("fitted above").0.weights.clone());
                minimize_prepared(&problem, &cv)?
            }
            ModeName::Oracle => minimize_prepared(
                &problem,
                &plan.cv_config(SelectionMode::Oracle(cfg.relevant_indices()), p_cat),
            )?,
        };
        out.push(Fitted {
            mode,
            fit,
            seconds: t.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}

fn run_job(plan: &ExperimentPlan, n: usize, replication: usize) -> Result<Vec<(ModeName, FitOutcome, f64)>> {
    let cfg = plan.scenario.config(n, plan.base_seed, plan.test_size);
    let draw = draw_scenario(&cfg, replication as u64)?;
    let kernel = KernelSpec::new(plan.kernel, cfg.p_cat);
    fit_modes(plan, &draw, &cfg)?
        .into_iter()
        .map(|f| {
            let (test_mse, test_mse_noisy) = test_errors(&draw, &kernel, &f.fit.weights)?;
            let (normalized, uniform) = f.fit.weights.normalized();
            Ok((
                f.mode,
                FitOutcome {
                    test_mse,
                    test_mse_noisy,
                    q_value: f.fit.q_value,
                    evaluations: f.fit.evaluations,
                    fallback_count: f.fit.fallback_count,
                    start_index: f.fit.start_index,
                    weights: f.fit.weights.as_slice().to_vec(),
                    normalized_weights: normalized,
                    uniform_normalization: uniform,
                },
                f.seconds,
            ))
        })
        .collect()
}

/// Runs every (sample size, replication) job and assembles the report.
/// Writes the report files when the plan names an output directory.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let jobs: Vec<(usize, usize)> = plan
        .sample_sizes
        .iter()
        .flat_map(|n| (0..plan.replications).map(move |r| (*n, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.parallelism)
        .build()
        .map_err(|e| Error::InvalidValue(format!("cannot build thread pool: {e}")))?;
    let results: Vec<Result<Vec<(ModeName, FitOutcome, f64)>>> =
        pool.install(|| jobs.par_iter().map(|(n, r)| run_job(plan, *n, *r)).collect());

    let modes = plan.sorted_modes();
    let mut rows = Vec::new();
    let mut failures = 0usize;
    for ((n, replication), result) in jobs.iter().zip(results) {
        match result {
            Ok(fits) => rows.extend(fits.into_iter().map(|(mode, outcome, seconds)| ReportRow {
                n: *n,
                mode,
                replication: *replication,
                outcome: Ok(outcome),
                wall_time_secs: seconds,
            })),
            Err(e) => {
                failures += 1;
                rows.extend(modes.iter().map(|mode| ReportRow {
                    n: *n,
                    mode: *mode,
                    replication: *replication,
                    outcome: Err(e.to_string()),
                    wall_time_secs: 0.0,
                }));
            }
        }
    }
    if failures as f64 > MAX_FAILURE_FRACTION * jobs.len() as f64 {
        let first = rows
            .iter()
            .find_map(|r| r.outcome.as_ref().err().cloned())
            .unwrap_or_default();
        return Err(Error::InvalidValue(format!(
            "{failures} of {} replications failed; first error: {first}",
            jobs.len()
        )));
    }

    let cfg = plan.scenario_config();
    let report = ExperimentReport::new(&cfg, plan.kernel, rows);
    if let Some(dir) = &plan.output_dir {
        report.write(dir)?;
    }
    Ok(report)
}
