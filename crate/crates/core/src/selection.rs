//! Leave-one-out cross-validation of the covariate weights.
//!
//! The objective is the mean squared leave-one-out error (regression) or
//! the mean Brier-type score over classes (classification), optionally
//! restricted to samples accepted by a trimming predicate. Weights are
//! chosen by a multi-start projected simplex search, either freely, with
//! all weights tied together, or with weights outside a given relevant set
//! pinned at zero.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{predict_from_distances, Dataset, DistanceTable, Estimate, MixedSample, Responses};
use crate::kernels::{KernelSpec, LogKernel, WeightVector};
use crate::numeric::{median, CompensatedSum};
use crate::simplex::{minimize_in_box, SimplexOptions};

pub const DEFAULT_WEIGHT_CAP: f64 = 1e6;

/// Which samples enter the objective.
#[derive(Clone, Default)]
pub enum Trimming {
    #[default]
    None,
    /// Keeps sample `i` when the predicate returns true.
    Explicit(Arc<dyn Fn(usize, &MixedSample) -> bool + Send + Sync>),
}

impl fmt::Debug for Trimming {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trimming::None => f.write_str("None"),
            Trimming::Explicit(_) => f.write_str("Explicit(..)"),
        }
    }
}

impl Trimming {
    fn mask(&self, ds: &Dataset) -> Vec<bool> {
        match self {
            Trimming::None => vec![true; ds.len()],
            Trimming::Explicit(keep) => ds
                .samples()
                .iter()
                .enumerate()
                .map(|(i, x)| keep(i, x))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub starts: usize,
    /// Evaluation budget per start; `None` means 400 times the number of
    /// free coordinates.
    pub max_evals: Option<usize>,
    pub rel_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: 3,
            max_evals: None,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SelectionMode {
    #[default]
    Free,
    /// One common weight for every covariate.
    EqualWeights,
    /// Only the listed covariates (0-based) get a weight; all others are 0.
    Oracle(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct CvConfig {
    pub kernel: KernelSpec,
    pub trimming: Trimming,
    pub optimizer: OptimizerConfig,
    pub weight_cap: f64,
    pub mode: SelectionMode,
    /// Additional starting weight vectors, tried after the built-in starts.
    pub extra_starts: Vec<WeightVector>,
}

impl CvConfig {
    pub fn new(kernel: KernelSpec) -> Self {
        Self {
            kernel,
            trimming: Trimming::None,
            optimizer: OptimizerConfig::default(),
            weight_cap: DEFAULT_WEIGHT_CAP,
            mode: SelectionMode::Free,
            extra_starts: Vec::new(),
        }
    }

    pub fn with_mode(mut self, mode: SelectionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let o = &self.optimizer;
        if o.starts < 1 {
            return Err(Error::InvalidValue("optimizer needs at least one start".into()));
        }
        if o.max_evals == Some(0) {
            return Err(Error::InvalidValue("max_evals must be at least 1".into()));
        }
        if !(o.rel_tol.is_finite() && o.rel_tol > 0.0) {
            return Err(Error::InvalidValue(format!("rel_tol must be positive, got {}", o.rel_tol)));
        }
        if !(self.weight_cap.is_finite() && self.weight_cap > 0.0) {
            return Err(Error::InvalidValue(format!(
                "weight_cap must be positive, got {}",
                self.weight_cap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub weights: WeightVector,
    pub q_value: f64,
    pub evaluations: usize,
    /// Leave-one-out predictions that needed the fallback at `weights`.
    pub fallback_count: usize,
    pub start_index: usize,
}

/// Value of the objective plus the number of fallback predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvValue {
    pub q: f64,
    pub fallbacks: usize,
}

/// A dataset prepared for repeated objective evaluations.
pub struct CvProblem<'a> {
    ds: &'a Dataset,
    table: DistanceTable,
    kernel: KernelSpec,
    keep: Vec<bool>,
}

impl<'a> CvProblem<'a> {
    pub fn new(ds: &'a Dataset, kernel: &KernelSpec, trimming: &Trimming) -> Result<Self> {
        if ds.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: ds.len(),
            });
        }
        kernel.validate()?;
        if kernel.categorical_base.len() != ds.schema().p_cat() {
            return Err(Error::LengthMismatch {
                what: "categorical kernel bases",
                expected: ds.schema().p_cat(),
                got: kernel.categorical_base.len(),
            });
        }
        Ok(Self {
            ds,
            table: DistanceTable::pairwise(ds),
            kernel: kernel.clone(),
            keep: trimming.mask(ds),
        })
    }

    pub fn dataset(&self) -> &Dataset {
        self.ds
    }

    pub fn distances(&self) -> &DistanceTable {
        &self.table
    }

    /// Evaluates the objective; leave-one-out terms are computed in
    /// parallel and summed in sample order.
    pub fn evaluate(&self, w: &WeightVector) -> Result<CvValue> {
        let p = self.ds.schema().p();
        if w.len() != p {
            return Err(Error::LengthMismatch {
                what: "weights",
                expected: p,
                got: w.len(),
            });
        }
        let log_kernel = LogKernel::new(&self.kernel, w, self.ds.schema().p_fun())?;
        let responses = self.ds.responses();
        let terms: Vec<(f64, bool)> = (0..self.ds.len())
            .into_par_iter()
            .map(|i| {
                if !self.keep[i] {
                    return (0.0, false);
                }
                let pred = predict_from_distances(responses, &log_kernel, self.table.row(i), Some(i));
                (squared_error(responses, i, &pred.estimate), pred.fallback_used)
            })
            .collect();
        let total: CompensatedSum = terms.iter().map(|t| t.0).collect();
        Ok(CvValue {
            q: total.total() / self.ds.len() as f64,
            fallbacks: terms.iter().filter(|t| t.1).count(),
        })
    }
}

fn squared_error(responses: &Responses, i: usize, estimate: &Estimate) -> f64 {
    match (responses, estimate) {
        (Responses::Continuous(y), Estimate::Value(v)) => {
            let e = y[i] - v;
            e * e
        }
        (Responses::Class { labels, .. }, Estimate::Posterior(post)) => post
            .iter()
            .enumerate()
            .map(|(g, p)| {
                let indicator = if labels[i] as usize == g + 1 { 1.0 } else { 0.0 };
                (indicator - p) * (indicator - p)
            })
            .collect::<CompensatedSum>()
            .total(),
        _ => unreachable!("estimate kind follows the response kind"),
    }
}

pub fn cv_objective_regression(ds: &Dataset, w: &WeightVector, cfg: &CvConfig) -> Result<f64> {
    ds.continuous()?;
    Ok(CvProblem::new(ds, &cfg.kernel, &cfg.trimming)?.evaluate(w)?.q)
}

pub fn cv_objective_classification(ds: &Dataset, w: &WeightVector, cfg: &CvConfig) -> Result<f64> {
    ds.class_labels()?;
    Ok(CvProblem::new(ds, &cfg.kernel, &cfg.trimming)?.evaluate(w)?.q)
}

/// Maps the optimizer's scaled coordinates onto a full weight vector.
struct Parametrization {
    p: usize,
    /// Covariates controlled by each coordinate.
    groups: Vec<Vec<usize>>,
    /// Weight per unit of each coordinate.
    scale: Vec<f64>,
    cap: f64,
}

impl Parametrization {
    fn new(ds: &Dataset, table: &DistanceTable, mode: &SelectionMode, cap: f64) -> Result<Self> {
        let p = ds.schema().p();
        let p_fun = ds.schema().p_fun();
        let per_covariate: Vec<f64> = (0..p)
            .map(|j| {
                if j < p_fun {
                    inverse_median_distance(table, &[j])
                } else {
                    1.0
                }
            })
            .collect();
        let (groups, scale) = match mode {
            SelectionMode::Free => ((0..p).map(|j| vec![j]).collect(), per_covariate),
            SelectionMode::EqualWeights => {
                let fun: Vec<usize> = (0..p_fun).collect();
                let s = if fun.is_empty() {
                    1.0
                } else {
                    inverse_median_distance(table, &fun)
                };
                (vec![(0..p).collect()], vec![s])
            }
            SelectionMode::Oracle(relevant) => {
                let mut set = relevant.clone();
                set.sort_unstable();
                set.dedup();
                if let Some(bad) = set.iter().find(|j| **j >= p) {
                    return Err(Error::InvalidMode(format!(
                        "oracle index {bad} out of range for {p} covariates"
                    )));
                }
                let scale = set.iter().map(|j| per_covariate[*j]).collect();
                (set.into_iter().map(|j| vec![j]).collect(), scale)
            }
        };
        Ok(Self {
            p,
            groups,
            scale,
            cap,
        })
    }

    fn dim(&self) -> usize {
        self.groups.len()
    }

    fn upper(&self) -> Vec<f64> {
        self.scale.iter().map(|s| self.cap / s).collect()
    }

    fn weights(&self, u: &[f64]) -> WeightVector {
        let mut omega = vec![0.0; self.p];
        for ((group, s), v) in self.groups.iter().zip(&self.scale).zip(u) {
            let w = (s * v).clamp(0.0, self.cap);
            for j in group {
                omega[*j] = w;
            }
        }
        WeightVector::new(omega).expect("clamped weights are valid")
    }

    /// Coordinates for a full weight vector; tied groups take the mean.
    fn coordinates(&self, w: &WeightVector) -> Vec<f64> {
        self.groups
            .iter()
            .zip(&self.scale)
            .map(|(group, s)| {
                let mean = group.iter().map(|j| w.as_slice()[*j]).sum::<f64>() / group.len() as f64;
                mean / s
            })
            .collect()
    }
}

/// `1 / median` of the pairwise distances of the given covariates, pooled;
/// 1 when the median is zero.
fn inverse_median_distance(table: &DistanceTable, covariates: &[usize]) -> f64 {
    let n = table.n();
    let mut pooled = Vec::with_capacity(n * (n - 1) / 2 * covariates.len());
    for i in 0..n {
        for s in i + 1..n {
            for j in covariates {
                pooled.push(table.get(i, s, *j));
            }
        }
    }
    match median(&pooled) {
        Some(m) if m > 0.0 && m.is_finite() => 1.0 / m,
        _ => 1.0,
    }
}

/// Multiplier of the `k`-th of `starts` built-in starting points:
/// `10^(k − (starts − 1)/2)`, i.e. 0.1, 1, 10 for three starts.
fn start_multiplier(k: usize, starts: usize) -> f64 {
    10f64.powf(k as f64 - (starts as f64 - 1.0) / 2.0)
}

/// Selects the weights minimizing the cross-validation objective.
pub fn minimize_weights(ds: &Dataset, cfg: &CvConfig) -> Result<FitResult> {
    cfg.validate()?;
    let problem = CvProblem::new(ds, &cfg.kernel, &cfg.trimming)?;
    minimize_prepared(&problem, cfg)
}

/// [`minimize_weights`] on an already prepared problem.
pub fn minimize_prepared(problem: &CvProblem<'_>, cfg: &CvConfig) -> Result<FitResult> {
    cfg.validate()?;
    let ds = problem.dataset();
    let param = Parametrization::new(ds, problem.distances(), &cfg.mode, cfg.weight_cap)?;
    for w in &cfg.extra_starts {
        if w.len() != ds.schema().p() {
            return Err(Error::LengthMismatch {
                what: "extra start weights",
                expected: ds.schema().p(),
                got: w.len(),
            });
        }
    }
    let dim = param.dim();
    let mut starts: Vec<Vec<f64>> = (0..cfg.optimizer.starts)
        .map(|k| vec![start_multiplier(k, cfg.optimizer.starts); dim])
        .collect();
    starts.extend(cfg.extra_starts.iter().map(|w| param.coordinates(w)));

    let options = SimplexOptions {
        max_evals: cfg.optimizer.max_evals.unwrap_or(400 * dim.max(1)),
        rel_tol: cfg.optimizer.rel_tol,
    };
    let lower = vec![0.0; dim];
    let upper = param.upper();

    let mut failure = None;
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut evaluations = 0;
    for (index, x0) in starts.iter().enumerate() {
        let steps: Vec<f64> = x0.iter().map(|v| if *v > 0.0 { 0.5 * v } else { 0.05 }).collect();
        let objective = |u: &[f64]| match problem.evaluate(&param.weights(u)) {
            Ok(v) => v.q,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        };
        let found = minimize_in_box(objective, x0, &steps, &lower, &upper, &options);
        evaluations += found.evaluations;
        if best.as_ref().is_none_or(|(q, _, _)| found.value < *q) {
            best = Some((found.value, index, found.x));
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let (_, start_index, u) = best.expect("at least one start");
    let weights = param.weights(&u);
    let value = problem.evaluate(&weights)?;
    Ok(FitResult {
        weights,
        q_value: value.q,
        evaluations,
        fallback_count: value.fallbacks,
        start_index,
    })
}
