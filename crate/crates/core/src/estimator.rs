//! Nadaraya–Watson regression and posterior estimation over mixed
//! functional and categorical covariates.
//!
//! Predictions are ratios of kernel-weighted sums, so they are invariant to
//! a common rescaling of the kernel row. The implementation uses that to
//! evaluate kernels in the log domain and shift by the largest log-weight
//! before exponentiating; a Picard row therefore never underflows to an
//! all-zero denominator. The fallback (training mean or class frequencies)
//! is taken only when no sample carries positive kernel weight, which
//! happens with the boxcar kernel and large weights.

use rayon::prelude::*;

use crate::curves::{Curve, Grid};
use crate::error::{Error, Result};
use crate::kernels::{product_kernel, KernelSpec, LogKernel, WeightVector};
use crate::metrics::{categorical_distance, l2_distance_raw, CategoryValue, DistanceKind};
use crate::numeric::CompensatedSum;

/// Denominators at or below this trigger the fallback estimate.
pub const DENOMINATOR_FLOOR: f64 = 1e-300;

/// Covariate layout shared by every sample of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    grids: Vec<Grid>,
    cardinalities: Vec<u32>,
    distances: Vec<DistanceKind>,
}

impl Schema {
    /// `categorical_distances` gives the distance used by each categorical
    /// covariate; functional covariates always use L².
    pub fn new(
        grids: Vec<Grid>,
        cardinalities: Vec<u32>,
        categorical_distances: Vec<DistanceKind>,
    ) -> Result<Self> {
        if categorical_distances.len() != cardinalities.len() {
            return Err(Error::LengthMismatch {
                what: "categorical distance kinds",
                expected: cardinalities.len(),
                got: categorical_distances.len(),
            });
        }
        if let Some(kind) = categorical_distances.iter().find(|k| k.is_functional()) {
            return Err(Error::SchemaMismatch(format!(
                "{kind:?} is not a categorical distance"
            )));
        }
        if let Some(c) = cardinalities.iter().find(|c| **c < 2) {
            return Err(Error::SchemaMismatch(format!(
                "categorical cardinality must be at least 2, got {c}"
            )));
        }
        for g in &grids {
            g.validate()?;
        }
        if grids.is_empty() && cardinalities.is_empty() {
            return Err(Error::SchemaMismatch("schema has no covariates".into()));
        }
        let mut distances = vec![DistanceKind::L2; grids.len()];
        distances.extend(categorical_distances);
        Ok(Self {
            grids,
            cardinalities,
            distances,
        })
    }

    /// All categorical covariates use the discrete 0/1 distance.
    pub fn discrete(grids: Vec<Grid>, cardinalities: Vec<u32>) -> Result<Self> {
        let kinds = vec![DistanceKind::Discrete; cardinalities.len()];
        Schema::new(grids, cardinalities, kinds)
    }

    pub fn p_fun(&self) -> usize {
        self.grids.len()
    }

    pub fn p_cat(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn p(&self) -> usize {
        self.distances.len()
    }

    pub fn grids(&self) -> &[Grid] {
        &self.grids
    }

    pub fn cardinalities(&self) -> &[u32] {
        &self.cardinalities
    }

    pub fn distances(&self) -> &[DistanceKind] {
        &self.distances
    }

    pub fn check_sample(&self, x: &MixedSample) -> Result<()> {
        if x.functional.len() != self.p_fun() || x.categorical.len() != self.p_cat() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} functional and {} categorical covariates, got {} and {}",
                self.p_fun(),
                self.p_cat(),
                x.functional.len(),
                x.categorical.len()
            )));
        }
        for (j, (c, g)) in x.functional.iter().zip(&self.grids).enumerate() {
            if c.grid() != g {
                return Err(Error::SchemaMismatch(format!(
                    "functional covariate {j} has grid {:?}, expected {g:?}",
                    c.grid()
                )));
            }
        }
        for (j, (v, card)) in x.categorical.iter().zip(&self.cardinalities).enumerate() {
            if v.cardinality() != *card {
                return Err(Error::SchemaMismatch(format!(
                    "categorical covariate {j} has cardinality {}, expected {card}",
                    v.cardinality()
                )));
            }
        }
        Ok(())
    }

    /// Writes the `p` distances between two conforming samples into `out`.
    pub(crate) fn distances_into(&self, a: &MixedSample, b: &MixedSample, out: &mut [f64]) {
        let p_fun = self.p_fun();
        for j in 0..p_fun {
            out[j] = l2_distance_raw(
                a.functional[j].values(),
                b.functional[j].values(),
                self.grids[j].step(),
            );
        }
        for j in 0..self.p_cat() {
            out[p_fun + j] = categorical_distance(
                self.distances[p_fun + j],
                &a.categorical[j],
                &b.categorical[j],
            )
            .expect("schema-checked samples share cardinalities");
        }
    }

    /// Per-covariate distances between two samples.
    pub fn sample_distances(&self, a: &MixedSample, b: &MixedSample) -> Result<Vec<f64>> {
        self.check_sample(a)?;
        self.check_sample(b)?;
        let mut out = vec![0.0; self.p()];
        self.distances_into(a, b, &mut out);
        Ok(out)
    }
}

/// One observation's covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSample {
    pub functional: Vec<Curve>,
    pub categorical: Vec<CategoryValue>,
}

impl MixedSample {
    pub fn new(functional: Vec<Curve>, categorical: Vec<CategoryValue>) -> Self {
        Self {
            functional,
            categorical,
        }
    }
}

/// A single response value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Response {
    Continuous(f64),
    Class { label: u32, classes: u32 },
}

/// The response column of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum Responses {
    Continuous(Vec<f64>),
    Class { labels: Vec<u32>, classes: u32 },
}

impl Responses {
    pub fn len(&self) -> usize {
        match self {
            Responses::Continuous(y) => y.len(),
            Responses::Class { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Response {
        match self {
            Responses::Continuous(y) => Response::Continuous(y[i]),
            Responses::Class { labels, classes } => Response::Class {
                label: labels[i],
                classes: *classes,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Responses::Continuous(y) => {
                if let Some(v) = y.iter().find(|v| !v.is_finite()) {
                    return Err(Error::InvalidValue(format!("response {v} is not finite")));
                }
            }
            Responses::Class { labels, classes } => {
                if *classes < 2 {
                    return Err(Error::InvalidValue(format!(
                        "need at least 2 classes, got {classes}"
                    )));
                }
                if let Some(l) = labels.iter().find(|l| **l == 0 || **l > *classes) {
                    return Err(Error::InvalidValue(format!(
                        "class label {l} outside 1..={classes}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn select(&self, keep: impl Fn(usize) -> bool) -> Responses {
        match self {
            Responses::Continuous(y) => Responses::Continuous(
                y.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, v)| *v).collect(),
            ),
            Responses::Class { labels, classes } => Responses::Class {
                labels: labels
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| keep(*i))
                    .map(|(_, v)| *v)
                    .collect(),
                classes: *classes,
            },
        }
    }
}

/// Training data: schema, covariates and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    samples: Vec<MixedSample>,
    responses: Responses,
}

impl Dataset {
    pub fn new(schema: Schema, samples: Vec<MixedSample>, responses: Responses) -> Result<Self> {
        if samples.len() != responses.len() {
            return Err(Error::LengthMismatch {
                what: "responses",
                expected: samples.len(),
                got: responses.len(),
            });
        }
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, s) in samples.iter().enumerate() {
            schema
                .check_sample(s)
                .map_err(|e| Error::SchemaMismatch(format!("sample {i}: {e}")))?;
        }
        responses.validate()?;
        Ok(Self {
            schema,
            samples,
            responses,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn samples(&self) -> &[MixedSample] {
        &self.samples
    }

    pub fn responses(&self) -> &Responses {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn continuous(&self) -> Result<&[f64]> {
        match &self.responses {
            Responses::Continuous(y) => Ok(y),
            _ => Err(Error::WrongResponseKind {
                expected: "continuous",
            }),
        }
    }

    pub fn class_labels(&self) -> Result<(&[u32], u32)> {
        match &self.responses {
            Responses::Class { labels, classes } => Ok((labels, *classes)),
            _ => Err(Error::WrongResponseKind { expected: "class" }),
        }
    }

    /// Copy of the dataset with sample `i` deleted.
    pub fn without(&self, i: usize) -> Result<Dataset> {
        if i >= self.len() {
            return Err(Error::InvalidValue(format!(
                "sample index {i} out of range for {} samples",
                self.len()
            )));
        }
        let samples = self
            .samples
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != i)
            .map(|(_, x)| x.clone())
            .collect();
        Dataset::new(self.schema.clone(), samples, self.responses.select(|s| s != i))
    }

    pub fn with_responses(&self, responses: Responses) -> Result<Dataset> {
        Dataset::new(self.schema.clone(), self.samples.clone(), responses)
    }

    fn check_weights(&self, w: &WeightVector) -> Result<()> {
        if w.len() != self.schema.p() {
            return Err(Error::LengthMismatch {
                what: "weights",
                expected: self.schema.p(),
                got: w.len(),
            });
        }
        Ok(())
    }
}

/// Dense table of per-covariate distances between query rows and the
/// training samples. Row `q`, sample `s`, covariate `j` lives at
/// `(q * n + s) * p + j`.
#[derive(Debug, Clone)]
pub struct DistanceTable {
    rows: usize,
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl DistanceTable {
    /// Pairwise distances among the training samples.
    pub fn pairwise(ds: &Dataset) -> Self {
        let n = ds.len();
        let p = ds.schema.p();
        let schema = &ds.schema;
        let samples = &ds.samples;
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; (n - i - 1) * p];
                for (k, s) in (i + 1..n).enumerate() {
                    schema.distances_into(&samples[i], &samples[s], &mut row[k * p..(k + 1) * p]);
                }
                row
            })
            .collect();
        let mut data = vec![0.0; n * n * p];
        for (i, row) in upper.iter().enumerate() {
            for (k, s) in (i + 1..n).enumerate() {
                let d = &row[k * p..(k + 1) * p];
                data[(i * n + s) * p..(i * n + s + 1) * p].copy_from_slice(d);
                data[(s * n + i) * p..(s * n + i + 1) * p].copy_from_slice(d);
            }
        }
        Self {
            rows: n,
            n,
            p,
            data,
        }
    }

    /// Distances from each query sample to every training sample.
    pub fn cross(ds: &Dataset, queries: &[MixedSample]) -> Result<Self> {
        for q in queries {
            ds.schema.check_sample(q)?;
        }
        let n = ds.len();
        let p = ds.schema.p();
        let rows: Vec<Vec<f64>> = queries
            .par_iter()
            .map(|q| {
                let mut row = vec![0.0; n * p];
                for (s, x) in ds.samples.iter().enumerate() {
                    ds.schema.distances_into(x, q, &mut row[s * p..(s + 1) * p]);
                }
                row
            })
            .collect();
        Ok(Self {
            rows: queries.len(),
            n,
            p,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Distances of query row `q` to all samples, `n * p` values.
    pub fn row(&self, q: usize) -> &[f64] {
        &self.data[q * self.n * self.p..(q + 1) * self.n * self.p]
    }

    pub fn get(&self, q: usize, s: usize, j: usize) -> f64 {
        self.data[(q * self.n + s) * self.p + j]
    }

    /// Per-covariate distances, `p` values, between query `q` and sample `s`.
    pub fn pair(&self, q: usize, s: usize) -> &[f64] {
        &self.data[(q * self.n + s) * self.p..(q * self.n + s + 1) * self.p]
    }
}

/// Estimate value of a [`Prediction`].
#[derive(Debug, Clone, PartialEq)]
pub enum Estimate {
    Value(f64),
    Posterior(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub estimate: Estimate,
    pub fallback_used: bool,
}

impl Prediction {
    pub fn value(&self) -> Option<f64> {
        match self.estimate {
            Estimate::Value(v) => Some(v),
            Estimate::Posterior(_) => None,
        }
    }

    pub fn posterior(&self) -> Option<&[f64]> {
        match &self.estimate {
            Estimate::Posterior(p) => Some(p),
            Estimate::Value(_) => None,
        }
    }
}

/// Nadaraya–Watson mean from an explicit kernel row.
///
/// Entries at `exclude` are ignored. When the kernel mass is at most
/// [`DENOMINATOR_FLOOR`], returns the mean of the non-excluded responses.
pub fn weighted_mean(row: &[f64], y: &[f64], exclude: Option<usize>) -> Prediction {
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for (s, (k, v)) in row.iter().zip(y).enumerate() {
        if Some(s) == exclude {
            continue;
        }
        num.add(k * v);
        den.add(*k);
    }
    let den = den.total();
    if den > DENOMINATOR_FLOOR {
        Prediction {
            estimate: Estimate::Value(num.total() / den),
            fallback_used: false,
        }
    } else {
        let mut acc = CompensatedSum::new();
        let mut count = 0usize;
        for (s, v) in y.iter().enumerate() {
            if Some(s) != exclude {
                acc.add(*v);
                count += 1;
            }
        }
        Prediction {
            estimate: Estimate::Value(acc.total() / count as f64),
            fallback_used: true,
        }
    }
}

/// Kernel-weighted class frequencies from an explicit kernel row, with the
/// same exclusion and fallback rules as [`weighted_mean`].
pub fn weighted_frequencies(
    row: &[f64],
    labels: &[u32],
    classes: u32,
    exclude: Option<usize>,
) -> Prediction {
    let g = classes as usize;
    let mut per_class = vec![CompensatedSum::new(); g];
    let mut den = CompensatedSum::new();
    for (s, (k, l)) in row.iter().zip(labels).enumerate() {
        if Some(s) == exclude {
            continue;
        }
        per_class[(*l - 1) as usize].add(*k);
        den.add(*k);
    }
    let den = den.total();
    if den > DENOMINATOR_FLOOR {
        return Prediction {
            estimate: Estimate::Posterior(per_class.iter().map(|c| c.total() / den).collect()),
            fallback_used: false,
        };
    }
    let mut counts = vec![0usize; g];
    let mut total = 0usize;
    for (s, l) in labels.iter().enumerate() {
        if Some(s) != exclude {
            counts[(*l - 1) as usize] += 1;
            total += 1;
        }
    }
    Prediction {
        estimate: Estimate::Posterior(
            counts.iter().map(|c| *c as f64 / total as f64).collect(),
        ),
        fallback_used: true,
    }
}

/// Kernel row rescaled so its largest non-excluded entry is 1 (or all
/// zeros if every entry vanishes). `dist(s, j)` supplies distances.
pub(crate) fn shifted_kernel_row(
    log_kernel: &LogKernel,
    n: usize,
    exclude: Option<usize>,
    dist: impl Fn(usize, usize) -> f64,
) -> Vec<f64> {
    let mut logs: Vec<f64> = (0..n)
        .map(|s| {
            if Some(s) == exclude {
                f64::NEG_INFINITY
            } else {
                log_kernel.log_kernel_with(|j| dist(s, j))
            }
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        logs.iter_mut().for_each(|l| *l = 0.0);
    } else {
        logs.iter_mut().for_each(|l| *l = (*l - max).exp());
    }
    logs
}

/// Prediction for one query given its distances to every training sample.
pub(crate) fn predict_from_distances(
    responses: &Responses,
    log_kernel: &LogKernel,
    dists: &[f64],
    exclude: Option<usize>,
) -> Prediction {
    let n = responses.len();
    let p = log_kernel.p();
    let row = shifted_kernel_row(log_kernel, n, exclude, |s, j| dists[s * p + j]);
    match responses {
        Responses::Continuous(y) => weighted_mean(&row, y, exclude),
        Responses::Class { labels, classes } => {
            weighted_frequencies(&row, labels, *classes, exclude)
        }
    }
}

fn query_distances(ds: &Dataset, x: &MixedSample) -> Result<Vec<f64>> {
    ds.schema.check_sample(x)?;
    let p = ds.schema.p();
    let mut dists = vec![0.0; ds.len() * p];
    for (s, xs) in ds.samples.iter().enumerate() {
        ds.schema.distances_into(xs, x, &mut dists[s * p..(s + 1) * p]);
    }
    Ok(dists)
}

/// Product-kernel weights `K_ω(X_s, x)` for every training sample; the
/// excluded index gets 0.
pub fn kernel_row(
    ds: &Dataset,
    kernel: &KernelSpec,
    w: &WeightVector,
    x: &MixedSample,
    exclude: Option<usize>,
) -> Result<Vec<f64>> {
    ds.check_weights(w)?;
    let dists = query_distances(ds, x)?;
    let p = ds.schema.p();
    let p_fun = ds.schema.p_fun();
    (0..ds.len())
        .map(|s| {
            if Some(s) == exclude {
                Ok(0.0)
            } else {
                product_kernel(kernel, w, &dists[s * p..(s + 1) * p], p_fun)
            }
        })
        .collect()
}

fn predict_any(
    ds: &Dataset,
    kernel: &KernelSpec,
    w: &WeightVector,
    x: &MixedSample,
) -> Result<Prediction> {
    ds.check_weights(w)?;
    let log_kernel = LogKernel::new(kernel, w, ds.schema.p_fun())?;
    let dists = query_distances(ds, x)?;
    Ok(predict_from_distances(&ds.responses, &log_kernel, &dists, None))
}

pub fn predict_regression(
    ds: &Dataset,
    kernel: &KernelSpec,
    w: &WeightVector,
    x: &MixedSample,
) -> Result<Prediction> {
    ds.continuous()?;
    predict_any(ds, kernel, w, x)
}

pub fn predict_posterior(
    ds: &Dataset,
    kernel: &KernelSpec,
    w: &WeightVector,
    x: &MixedSample,
) -> Result<Prediction> {
    ds.class_labels()?;
    predict_any(ds, kernel, w, x)
}

/// Label with the largest posterior; ties go to the lowest label.
pub fn argmax_label(posterior: &[f64]) -> u32 {
    let mut best = 0;
    for (g, p) in posterior.iter().enumerate() {
        if *p > posterior[best] {
            best = g;
        }
    }
    best as u32 + 1
}

pub fn classify(
    ds: &Dataset,
    kernel: &KernelSpec,
    w: &WeightVector,
    x: &MixedSample,
) -> Result<u32> {
    let pred = predict_posterior(ds, kernel, w, x)?;
    Ok(argmax_label(pred.posterior().expect("class responses")))
}

/// Leave-one-out prediction at training sample `i`.
pub fn loo_predict(ds: &Dataset, kernel: &KernelSpec, w: &WeightVector, i: usize) -> Result<Prediction> {
    if ds.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: ds.len(),
        });
    }
    if i >= ds.len() {
        return Err(Error::InvalidValue(format!(
            "sample index {i} out of range for {} samples",
            ds.len()
        )));
    }
    ds.check_weights(w)?;
    let log_kernel = LogKernel::new(kernel, w, ds.schema.p_fun())?;
    let dists = query_distances(ds, &ds.samples[i])?;
    Ok(predict_from_distances(&ds.responses, &log_kernel, &dists, Some(i)))
}
