//! On-disk dataset format.
//!
//! A dataset is a directory:
//!
//! ```text
//! meta.json           grids, categorical cardinalities/distances, response kind
//! functional_<j>.csv  one row per sample, one column per grid point (j = 1..p_fun)
//! categorical.csv     one row per sample, one label column per categorical covariate
//! response.csv        one value per line (optional for query sets)
//! truth.csv           noiseless regression value per line (simulated data only)
//! ```
//!
//! CSV files have no header row. Floats are written in Rust's shortest
//! round-trip form, so reading a file back reproduces every value bit for
//! bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curves::{Curve, Grid};
use crate::error::{Error, Result};
use crate::estimator::{Dataset, MixedSample, Responses, Schema};
use crate::metrics::{CategoryValue, DistanceKind};

pub const META_FILE: &str = "meta.json";
pub const CATEGORICAL_FILE: &str = "categorical.csv";
pub const RESPONSE_FILE: &str = "response.csv";
pub const TRUTH_FILE: &str = "truth.csv";

pub fn functional_file(j: usize) -> String {
    format!("functional_{}.csv", j + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalMeta {
    pub cardinality: u32,
    pub distance: DistanceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseMeta {
    Continuous,
    Class { classes: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub functional: Vec<Grid>,
    pub categorical: Vec<CategoricalMeta>,
    pub response: Option<ResponseMeta>,
}

/// Covariates read from disk, with responses when present.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSamples {
    pub schema: Schema,
    pub samples: Vec<MixedSample>,
    pub responses: Option<Responses>,
}

impl LoadedSamples {
    pub fn into_dataset(self, dir: &Path) -> Result<Dataset> {
        let responses = self
            .responses
            .ok_or_else(|| Error::parse(dir.join(RESPONSE_FILE), "dataset has no responses"))?;
        Dataset::new(self.schema, self.samples, responses)
    }
}

/// Formats a float so that parsing it returns the identical value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

pub(crate) fn write_rows<I, R>(path: &Path, rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut text = String::new();
    for row in rows {
        let cells: Vec<String> = row.into_iter().collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    write_text(path, &text)
}

pub(crate) fn read_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, format!("{other:?}")),
        })?;
    reader
        .records()
        .map(|r| {
            r.map(|rec| rec.iter().map(|c| c.trim().to_string()).collect())
                .map_err(|e| Error::parse(path, e))
        })
        .collect()
}

pub(crate) fn parse_cell<T: std::str::FromStr>(path: &Path, row: usize, cell: &str) -> Result<T> {
    cell.parse()
        .map_err(|_| Error::parse(path, format!("row {}: cannot parse '{cell}'", row + 1)))
}

/// Writes a single-column CSV.
pub fn write_column(path: &Path, values: &[f64]) -> Result<()> {
    write_rows(path, values.iter().map(|v| [fmt_f64(*v)]))
}

pub fn read_column(path: &Path) -> Result<Vec<f64>> {
    read_rows(path)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != 1 {
                return Err(Error::parse(path, format!("row {}: expected one column", i + 1)));
            }
            parse_cell(path, i, &row[0])
        })
        .collect()
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes covariates (and responses, if given) to `dir`.
pub fn write_samples(
    dir: &Path,
    schema: &Schema,
    samples: &[MixedSample],
    responses: Option<&Responses>,
) -> Result<()> {
    create_dir(dir)?;
    let p_fun = schema.p_fun();
    let meta = DatasetMeta {
        n: samples.len(),
        functional: schema.grids().to_vec(),
        categorical: schema
            .cardinalities()
            .iter()
            .zip(&schema.distances()[p_fun..])
            .map(|(c, d)| CategoricalMeta {
                cardinality: *c,
                distance: *d,
            })
            .collect(),
        response: responses.map(|r| match r {
            Responses::Continuous(_) => ResponseMeta::Continuous,
            Responses::Class { classes, .. } => ResponseMeta::Class { classes: *classes },
        }),
    };
    write_json(&dir.join(META_FILE), &meta)?;
    for j in 0..p_fun {
        write_rows(
            &dir.join(functional_file(j)),
            samples
                .iter()
                .map(|s| s.functional[j].values().iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>()),
        )?;
    }
    if schema.p_cat() > 0 {
        write_rows(
            &dir.join(CATEGORICAL_FILE),
            samples
                .iter()
                .map(|s| s.categorical.iter().map(|c| c.label().to_string()).collect::<Vec<_>>()),
        )?;
    }
    match responses {
        Some(Responses::Continuous(y)) => write_column(&dir.join(RESPONSE_FILE), y)?,
        Some(Responses::Class { labels, .. }) => write_rows(
            &dir.join(RESPONSE_FILE),
            labels.iter().map(|l| [l.to_string()]),
        )?,
        None => {}
    }
    Ok(())
}

pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    write_samples(dir, ds.schema(), ds.samples(), Some(ds.responses()))
}

fn expect_rows(path: &Path, rows: &[Vec<String>], n: usize, width: usize) -> Result<()> {
    if rows.len() != n {
        return Err(Error::parse(path, format!("expected {n} rows, found {}", rows.len())));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(Error::parse(
            path,
            format!("row {}: expected {width} columns, found {}", i + 1, r.len()),
        ));
    }
    Ok(())
}

/// Reads covariates and, if `response.csv` exists, responses.
pub fn read_samples(dir: &Path) -> Result<LoadedSamples> {
    let meta_path = dir.join(META_FILE);
    let meta: DatasetMeta = read_json(&meta_path)?;
    let schema = Schema::new(
        meta.functional.clone(),
        meta.categorical.iter().map(|c| c.cardinality).collect(),
        meta.categorical.iter().map(|c| c.distance).collect(),
    )
    .map_err(|e| Error::parse(&meta_path, e))?;
    let n = meta.n;
    let mut samples: Vec<MixedSample> = (0..n).map(|_| MixedSample::new(vec![], vec![])).collect();

    for (j, grid) in meta.functional.iter().enumerate() {
        let path = dir.join(functional_file(j));
        let rows = read_rows(&path)?;
        expect_rows(&path, &rows, n, grid.count())?;
        for (i, (row, s)) in rows.iter().zip(samples.iter_mut()).enumerate() {
            let values = row
                .iter()
                .map(|c| parse_cell::<f64>(&path, i, c))
                .collect::<Result<Vec<_>>>()?;
            s.functional
                .push(Curve::new(*grid, values).map_err(|e| Error::parse(&path, e))?);
        }
    }
    if !meta.categorical.is_empty() {
        let path = dir.join(CATEGORICAL_FILE);
        let rows = read_rows(&path)?;
        expect_rows(&path, &rows, n, meta.categorical.len())?;
        for (i, (row, s)) in rows.iter().zip(samples.iter_mut()).enumerate() {
            for (cell, cm) in row.iter().zip(&meta.categorical) {
                let label: u32 = parse_cell(&path, i, cell)?;
                s.categorical.push(
                    CategoryValue::new(label, cm.cardinality).map_err(|e| Error::parse(&path, e))?,
                );
            }
        }
    }

    let response_path = dir.join(RESPONSE_FILE);
    let responses = match (&meta.response, response_path.exists()) {
        (Some(kind), true) => {
            let rows = read_rows(&response_path)?;
            expect_rows(&response_path, &rows, n, 1)?;
            Some(match kind {
                ResponseMeta::Continuous => Responses::Continuous(
                    rows.iter()
                        .enumerate()
                        .map(|(i, r)| parse_cell(&response_path, i, &r[0]))
                        .collect::<Result<_>>()?,
                ),
                ResponseMeta::Class { classes } => Responses::Class {
                    labels: rows
                        .iter()
                        .enumerate()
                        .map(|(i, r)| parse_cell(&response_path, i, &r[0]))
                        .collect::<Result<_>>()?,
                    classes: *classes,
                },
            })
        }
        (Some(_), false) => return Err(Error::io(&response_path, std::io::ErrorKind::NotFound.into())),
        (None, _) => None,
    };
    Ok(LoadedSamples {
        schema,
        samples,
        responses,
    })
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let loaded = read_samples(dir)?;
    let dir: PathBuf = dir.to_path_buf();
    loaded.into_dataset(&dir)
}
