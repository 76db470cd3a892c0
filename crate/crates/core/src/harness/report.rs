//! Experiment reports and their on-disk form.
//!
//! A report directory holds:
//!
//! - `report.json`: covariate layout, relevant mask and kernel
//! - `rows.csv`: one row per (n, mode, replication)
//! - `aggregate.csv`: summaries of `rows.csv` per (n, mode, quantity)
//! - `timings.csv`: wall-clock time per row
//!
//! Everything except `timings.csv` is a deterministic function of the plan.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModeName;
use crate::error::{Error, Result};
use crate::io::{create_dir, fmt_f64, read_json, write_json};
use crate::kernels::FunctionalKernel;
use crate::numeric::{mean, median, quantile};
use crate::simgen::ScenarioConfig;

pub const REPORT_FILE: &str = "report.json";
pub const ROWS_FILE: &str = "rows.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const TIMINGS_FILE: &str = "timings.csv";

const STATUS_OK: &str = "ok";
const STATUS_FAILED: &str = "failed";

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub test_mse: f64,
    pub test_mse_noisy: f64,
    pub q_value: f64,
    pub evaluations: usize,
    pub fallback_count: usize,
    pub start_index: usize,
    pub weights: Vec<f64>,
    pub normalized_weights: Vec<f64>,
    pub uniform_normalization: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub n: usize,
    pub mode: ModeName,
    pub replication: usize,
    /// Fit results, or the error message of a failed replication.
    pub outcome: std::result::Result<FitOutcome, String>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub p_fun: usize,
    pub p_cat: usize,
    pub q_fun: usize,
    pub q_cat: usize,
    pub relevant_mask: Vec<bool>,
    pub kernel: FunctionalKernel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub n: usize,
    pub mode: ModeName,
    pub quantity: String,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub meta: ReportMeta,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn new(cfg: &ScenarioConfig, kernel: FunctionalKernel, rows: Vec<ReportRow>) -> Self {
        Self {
            meta: ReportMeta {
                p_fun: cfg.p_fun,
                p_cat: cfg.p_cat,
                q_fun: cfg.q_fun,
                q_cat: cfg.q_cat,
                relevant_mask: cfg.relevant_mask(),
                kernel,
            },
            rows,
        }
    }

    pub fn p(&self) -> usize {
        self.meta.p_fun + self.meta.p_cat
    }

    /// Sample sizes in increasing order.
    pub fn sample_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        sizes.sort_unstable();
        sizes.dedup();
        sizes
    }

    /// Successful outcomes for one sample size and mode, by replication.
    pub fn outcomes(&self, n: usize, mode: ModeName) -> Vec<(usize, &FitOutcome)> {
        self.rows
            .iter()
            .filter(|r| r.n == n && r.mode == mode)
            .filter_map(|r| r.outcome.as_ref().ok().map(|o| (r.replication, o)))
            .collect()
    }

    /// Per-quantity summaries over successful rows, grouped by (n, mode).
    pub fn aggregates(&self) -> Vec<AggregateRow> {
        let mut groups: Vec<(usize, ModeName)> = self.rows.iter().map(|r| (r.n, r.mode)).collect();
        groups.sort();
        groups.dedup();
        let mut out = Vec::new();
        for (n, mode) in groups {
            let outcomes: Vec<&FitOutcome> = self.outcomes(n, mode).into_iter().map(|(_, o)| o).collect();
            let mut push = |quantity: String, values: Vec<f64>| {
                if let (Some(m), Some(med), Some(lo), Some(hi)) =
                    (mean(&values), median(&values), quantile(&values, 0.1), quantile(&values, 0.9))
                {
                    out.push(AggregateRow {
                        n,
                        mode,
                        quantity,
                        count: values.len(),
                        mean: m,
                        median: med,
                        q10: lo,
                        q90: hi,
                    });
                }
            };
            push("test_mse".into(), outcomes.iter().map(|o| o.test_mse).collect());
            push("test_mse_noisy".into(), outcomes.iter().map(|o| o.test_mse_noisy).collect());
            push("q_value".into(), outcomes.iter().map(|o| o.q_value).collect());
            push(
                "fallback_count".into(),
                outcomes.iter().map(|o| o.fallback_count as f64).collect(),
            );
            for j in 0..self.p() {
                push(format!("w_{}", j + 1), outcomes.iter().map(|o| o.weights[j]).collect());
            }
            for j in 0..self.p() {
                push(
                    format!("nw_{}", j + 1),
                    outcomes.iter().map(|o| o.normalized_weights[j]).collect(),
                );
            }
        }
        out
    }

    fn rows_header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "n",
            "mode",
            "replication",
            "status",
            "test_mse",
            "test_mse_noisy",
            "q_value",
            "evaluations",
            "fallback_count",
            "start_index",
            "uniform_normalization",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend((1..=self.p()).map(|j| format!("w_{j}")));
        h.extend((1..=self.p()).map(|j| format!("nw_{j}")));
        h.push("message".into());
        h
    }

    /// Writes all report files to `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        write_json(&dir.join(REPORT_FILE), &self.meta)?;

        let p = self.p();
        let mut rows = vec![self.rows_header()];
        for r in &self.rows {
            let mut cells = vec![r.n.to_string(), r.mode.to_string(), r.replication.to_string()];
            match &r.outcome {
                Ok(o) => {
                    cells.push(STATUS_OK.into());
                    cells.extend([o.test_mse, o.test_mse_noisy, o.q_value].map(fmt_f64));
                    cells.push(o.evaluations.to_string());
                    cells.push(o.fallback_count.to_string());
                    cells.push(o.start_index.to_string());
                    cells.push(o.uniform_normalization.to_string());
                    cells.extend(o.weights.iter().map(|v| fmt_f64(*v)));
                    cells.extend(o.normalized_weights.iter().map(|v| fmt_f64(*v)));
                    cells.push(String::new());
                }
                Err(message) => {
                    cells.push(STATUS_FAILED.into());
                    cells.extend(std::iter::repeat_n(String::new(), 7 + 2 * p));
                    cells.push(message.clone());
                }
            }
            rows.push(cells);
        }
        write_csv(&dir.join(ROWS_FILE), rows)?;

        let mut agg = vec![["n", "mode", "quantity", "count", "mean", "median", "q10", "q90"]
            .map(String::from)
            .to_vec()];
        for a in self.aggregates() {
            agg.push(vec![
                a.n.to_string(),
                a.mode.to_string(),
                a.quantity,
                a.count.to_string(),
                fmt_f64(a.mean),
                fmt_f64(a.median),
                fmt_f64(a.q10),
                fmt_f64(a.q90),
            ]);
        }
        write_csv(&dir.join(AGGREGATE_FILE), agg)?;

        let mut timings = vec![["n", "mode", "replication", "wall_time_secs"].map(String::from).to_vec()];
        for r in &self.rows {
            timings.push(vec![
                r.n.to_string(),
                r.mode.to_string(),
                r.replication.to_string(),
                fmt_f64(r.wall_time_secs),
            ]);
        }
        write_csv(&dir.join(TIMINGS_FILE), timings)
    }

    /// Reads `report.json` and `rows.csv` from `dir`. Timings are not read
    /// back and are left at zero.
    pub fn load(dir: &Path) -> Result<Self> {
        let meta: ReportMeta = read_json(&dir.join(REPORT_FILE))?;
        let p = meta.p_fun + meta.p_cat;
        if meta.relevant_mask.len() != p {
            return Err(Error::parse(
                dir.join(REPORT_FILE),
                "relevant_mask length does not match the covariate count",
            ));
        }
        let path = dir.join(ROWS_FILE);
        let records = read_csv(&path)?;
        let width = 12 + 2 * p;
        let mut rows = Vec::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            let line = i + 2;
            if rec.len() != width {
                return Err(Error::parse(
                    &path,
                    format!("line {line}: expected {width} columns, found {}", rec.len()),
                ));
            }
            let bad = |what: &str| Error::parse(&path, format!("line {line}: cannot parse {what}"));
            let num = |k: usize| -> Result<f64> { rec[k].parse().map_err(|_| bad(&rec[k])) };
            let int = |k: usize| -> Result<usize> { rec[k].parse().map_err(|_| bad(&rec[k])) };
            let mode: ModeName = rec[1].parse().map_err(|_| bad(&rec[1]))?;
            let outcome = match rec[3].as_str() {
                STATUS_OK => Ok(FitOutcome {
                    test_mse: num(4)?,
                    test_mse_noisy: num(5)?,
                    q_value: num(6)?,
                    evaluations: int(7)?,
                    fallback_count: int(8)?,
                    start_index: int(9)?,
                    uniform_normalization: rec[10].parse().map_err(|_| bad(&rec[10]))?,
                    weights: (0..p).map(|j| num(11 + j)).collect::<Result<_>>()?,
                    normalized_weights: (0..p).map(|j| num(11 + p + j)).collect::<Result<_>>()?,
                }),
                STATUS_FAILED => Err(rec[width - 1].clone()),
                other => return Err(bad(other)),
            };
            rows.push(ReportRow {
                n: int(0)?,
                mode,
                replication: int(2)?,
                outcome,
                wall_time_secs: 0.0,
            });
        }
        Ok(Self { meta, rows })
    }
}

pub(crate) fn write_csv(path: &Path, rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Records after the header line.
fn read_csv(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    r.records()
        .map(|rec| {
            rec.map(|rec| rec.iter().map(String::from).collect())
                .map_err(|e| csv_error(path, e))
        })
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::Preset;

    fn outcome(w: f64) -> FitOutcome {
        FitOutcome {
            test_mse: 0.1 + w,
            test_mse_noisy: 1.1,
            q_value: 0.7,
            evaluations: 12,
            fallback_count: 0,
            start_index: 1,
            weights: vec![w, 0.0, 1.0 / 3.0, 0.0],
            normalized_weights: vec![0.25; 4],
            uniform_normalization: false,
        }
    }

    fn report() -> ExperimentReport {
        let cfg = ScenarioConfig::preset(Preset::Minimal, 10, 1);
        let rows = vec![
            ReportRow {
                n: 10,
                mode: ModeName::Free,
                replication: 0,
                outcome: Ok(outcome(0.5)),
                wall_time_secs: 0.25,
            },
            ReportRow {
                n: 10,
                mode: ModeName::Free,
                replication: 1,
                outcome: Err("no luck, sorry".into()),
                wall_time_secs: 0.0,
            },
            ReportRow {
                n: 10,
                mode: ModeName::Free,
                replication: 2,
                outcome: Ok(outcome(1e-17)),
                wall_time_secs: 0.5,
            },
        ];
        ExperimentReport::new(&cfg, FunctionalKernel::Picard, rows)
    }

    #[test]
    fn write_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = report();
        r.write(dir.path()).unwrap();
        let back = ExperimentReport::load(dir.path()).unwrap();
        for row in &mut r.rows {
            row.wall_time_secs = 0.0;
        }
        assert_eq!(back, r);
    }

    #[test]
    fn aggregates_skip_failures() {
        let agg = report().aggregates();
        let w1 = agg.iter().find(|a| a.quantity == "w_1").unwrap();
        assert_eq!(w1.count, 2);
        assert_eq!(w1.median, (0.5 + 1e-17) / 2.0);
        assert_eq!(w1.q90, 1e-17 + 0.9 * (0.5 - 1e-17));
    }

    #[test]
    fn load_reports_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let err = ExperimentReport::load(&dir.path().join("nope")).unwrap_err();
        assert!(err.is_io());
    }
}
