//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 on invalid input (flags, plans, data),
//! 2 on I/O errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use super::report::write_csv;
use super::{rate_diagnostics, run_experiment, ExperimentPlan, ExperimentReport, ModeName};
use crate::error::{Error, Result};
use crate::estimator::{argmax_label, predict_from_distances, Dataset, DistanceTable, Estimate};
use crate::io::{create_dir, fmt_f64, read_dataset, read_json, read_samples, write_column, write_dataset, write_json, write_samples, TRUTH_FILE};
use crate::kernels::{FunctionalKernel, KernelSpec, LogKernel, WeightVector};
use crate::selection::{minimize_prepared, CvConfig, CvProblem, FitResult, SelectionMode};
use crate::simgen::{draw_scenario, Preset, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

pub const RATES_FILE: &str = "rates.json";

#[derive(Parser, Debug)]
#[command(name = "mixkern", version, about = "Kernel regression with mixed functional and categorical covariates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a training and a test sample from a simulation preset.
    Simulate {
        #[arg(long)]
        preset: Preset,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Output directory; receives `train/` and `test/`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        replication: u64,
        #[arg(long)]
        grid_len: Option<usize>,
        #[arg(long)]
        test_size: Option<usize>,
        /// Two-class responses, split at the median of the truth.
        #[arg(long)]
        classify: bool,
    },
    /// Select weights by leave-one-out cross-validation.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Output JSON file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "free")]
        mode: ModeName,
        /// Comma-separated 1-based covariate indices for oracle mode.
        #[arg(long, value_delimiter = ',')]
        relevant: Vec<usize>,
        #[arg(long, default_value = "picard")]
        kernel: FunctionalKernel,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Predict query samples with fitted weights.
    Predict {
        /// JSON written by `fit`.
        #[arg(long)]
        fit: PathBuf,
        /// Training dataset used for the fit.
        #[arg(long)]
        data: PathBuf,
        /// Dataset directory of query samples; responses are ignored.
        #[arg(long)]
        query: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a replicated experiment from a JSON plan.
    Experiment {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        /// Report directory, overriding the plan's.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize weight growth in a report directory.
    Diagnose {
        #[arg(long)]
        report: PathBuf,
        /// Output JSON file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Fitted weights as written by `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub mode: ModeName,
    pub kernel: KernelSpec,
    pub weights: WeightVector,
    pub normalized_weights: Vec<f64>,
    pub uniform_normalization: bool,
    pub q_value: f64,
    pub evaluations: usize,
    pub fallback_count: usize,
    pub start_index: usize,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_INVALID
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            preset,
            n,
            seed,
            out,
            replication,
            grid_len,
            test_size,
            classify,
        } => {
            let mut cfg = ScenarioConfig::preset(preset, n, seed);
            cfg.grid_len = grid_len.unwrap_or(cfg.grid_len);
            cfg.test_size = test_size.unwrap_or(cfg.test_size);
            simulate(&cfg, replication, classify, &out)
        }
        Command::Fit {
            data,
            out,
            mode,
            relevant,
            kernel,
            starts,
            threads,
        } => {
            let ds = read_dataset(&data)?;
            let fit = with_threads(threads, || fit(&ds, mode, &relevant, kernel, starts))??;
            write_json(&out, &fit)
        }
        Command::Predict { fit, data, query, out } => {
            let fit: FitFile = read_json(&fit)?;
            let ds = read_dataset(&data)?;
            let queries = read_samples(&query)?;
            write_csv(&out, predict(&fit, &ds, &queries.samples)?)
        }
        Command::Experiment {
            plan,
            threads,
            out,
            seed,
        } => {
            let mut plan: ExperimentPlan = read_json(&plan)?;
            if let Some(t) = threads {
                plan.parallelism = t;
            }
            if let Some(s) = seed {
                plan.base_seed = s;
            }
            if out.is_some() {
                plan.output_dir = out;
            }
            let Some(dir) = plan.output_dir.clone() else {
                return Err(Error::InvalidValue(
                    "no output directory: set output_dir in the plan or pass --out".into(),
                ));
            };
            let report = run_experiment(&plan)?;
            if report.sample_sizes().len() >= 3 && plan.modes.contains(&ModeName::Free) {
                write_json(&dir.join(RATES_FILE), &rate_diagnostics(&report)?)?;
            }
            Ok(())
        }
        Command::Diagnose { report, out } => {
            let summary = rate_diagnostics(&ExperimentReport::load(&report)?)?;
            match out {
                Some(path) => write_json(&path, &summary),
                None => {
                    let text = serde_json::to_string_pretty(&summary)
                        .map_err(|e| Error::InvalidValue(e.to_string()))?;
                    println!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidValue("--threads must be at least 1".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidValue(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Writes `out/train` and `out/test`, each with its noiseless truth.
pub fn simulate(cfg: &ScenarioConfig, replication: u64, classify: bool, out: &Path) -> Result<()> {
    let draw = draw_scenario(cfg, replication)?;
    let (train_dir, test_dir) = (out.join("train"), out.join("test"));
    create_dir(out)?;
    let test_responses = if classify {
        let (ds, test_labels) = draw.thresholded()?;
        write_dataset(&train_dir, &ds)?;
        crate::estimator::Responses::Class {
            labels: test_labels,
            classes: 2,
        }
    } else {
        write_dataset(&train_dir, &draw.dataset)?;
        crate::estimator::Responses::Continuous(draw.test.noisy.clone())
    };
    write_column(&train_dir.join(TRUTH_FILE), &draw.truth)?;
    write_samples(
        &test_dir,
        draw.dataset.schema(),
        &draw.test.samples,
        Some(&test_responses),
    )?;
    write_column(&test_dir.join(TRUTH_FILE), &draw.test.truth)
}

/// Fits weights in the given mode. `relevant` holds 1-based indices and
/// is only used in oracle mode. Free mode also starts from the tied
/// solution, as in experiments.
pub fn fit(
    ds: &Dataset,
    mode: ModeName,
    relevant: &[usize],
    kernel: FunctionalKernel,
    starts: Option<usize>,
) -> Result<FitFile> {
    let spec = KernelSpec::new(kernel, ds.schema().p_cat());
    let config = |m: SelectionMode| {
        let mut cfg = CvConfig::new(spec.clone()).with_mode(m);
        if let Some(s) = starts {
            cfg.optimizer.starts = s;
        }
        cfg
    };
    let problem = CvProblem::new(ds, &spec, &config(SelectionMode::Free).trimming)?;
    let result: FitResult = match mode {
        ModeName::EqualWeights => minimize_prepared(&problem, &config(SelectionMode::EqualWeights))?,
        ModeName::Free => {
            let equal = minimize_prepared(&problem, &config(SelectionMode::EqualWeights))?;
            let mut cfg = config(SelectionMode::Free);
            cfg.extra_starts.push(equal.weights);
            minimize_prepared(&problem, &cfg)?
        }
        ModeName::Oracle => {
            if relevant.iter().any(|j| *j == 0) {
                return Err(Error::InvalidValue("--relevant indices are 1-based".into()));
            }
            let idx = relevant.iter().map(|j| j - 1).collect();
            minimize_prepared(&problem, &config(SelectionMode::Oracle(idx)))?
        }
    };
    let (normalized_weights, uniform_normalization) = result.weights.normalized();
    Ok(FitFile {
        mode,
        kernel: spec,
        weights: result.weights,
        normalized_weights,
        uniform_normalization,
        q_value: result.q_value,
        evaluations: result.evaluations,
        fallback_count: result.fallback_count,
        start_index: result.start_index,
    })
}

/// Prediction table: a header row, then one row per query. Regression
/// rows are `prediction,fallback_used`; classification rows are
/// `label,fallback_used,posterior_1,…,posterior_G`.
pub fn predict(fit: &FitFile, ds: &Dataset, queries: &[crate::estimator::MixedSample]) -> Result<Vec<Vec<String>>> {
    let log_kernel = LogKernel::new(&fit.kernel, &fit.weights, ds.schema().p_fun())?;
    if fit.weights.len() != ds.schema().p() {
        return Err(Error::LengthMismatch {
            what: "weights",
            expected: ds.schema().p(),
            got: fit.weights.len(),
        });
    }
    let table = DistanceTable::cross(ds, queries)?;
    let mut rows = Vec::with_capacity(queries.len() + 1);
    let mut header = match ds.responses() {
        crate::estimator::Responses::Continuous(_) => vec!["prediction".to_string()],
        crate::estimator::Responses::Class { .. } => vec!["label".to_string()],
    };
    header.push("fallback_used".into());
    if let crate::estimator::Responses::Class { classes, .. } = ds.responses() {
        header.extend((1..=*classes).map(|g| format!("posterior_{g}")));
    }
    rows.push(header);
    for q in 0..table.rows() {
        let pred = predict_from_distances(ds.responses(), &log_kernel, table.row(q), None);
        let fallback = pred.fallback_used.to_string();
        rows.push(match pred.estimate {
            Estimate::Value(v) => vec![fmt_f64(v), fallback],
            Estimate::Posterior(post) => {
                let mut row = vec![argmax_label(&post).to_string(), fallback];
                row.extend(post.iter().map(|p| fmt_f64(*p)));
                row
            }
        });
    }
    Ok(rows)
}
