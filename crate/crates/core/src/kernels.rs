//! Scalar kernels and the weighted product kernel over mixed covariates.
//!
//! For `p_fun` functional and `p_cat` categorical covariates with distances
//! `d_j` and weights `ω_j`, the product kernel is
//!
//! ```text
//! K_ω = Π_{j ≤ p_fun} K(ω_j d_j) · Π_{j > p_fun} k_j^(-ω_j d_j)
//! ```
//!
//! With the Picard kernel and every `k_j = e` this collapses to
//! `exp(-Σ ω_j d_j)`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel applied to the weighted functional distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKernel {
    /// One-sided exponential `exp(-u)·1{u ≥ 0}`.
    #[default]
    Picard,
    /// Indicator of the closed interval `[0, 1]`.
    Boxcar,
}

impl FunctionalKernel {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            FunctionalKernel::Picard => picard(u),
            FunctionalKernel::Boxcar => boxcar(u),
        }
    }
}

impl std::str::FromStr for FunctionalKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "picard" => Ok(FunctionalKernel::Picard),
            "boxcar" => Ok(FunctionalKernel::Boxcar),
            other => Err(Error::InvalidValue(format!("unknown kernel '{other}'"))),
        }
    }
}

pub fn picard(u: f64) -> f64 {
    if u >= 0.0 {
        (-u).exp()
    } else {
        0.0
    }
}

pub fn boxcar(u: f64) -> f64 {
    if (0.0..=1.0).contains(&u) {
        1.0
    } else {
        0.0
    }
}

/// Functional kernel plus one base `k_j > 1` per categorical covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub functional_kernel: FunctionalKernel,
    pub categorical_base: Vec<f64>,
}

impl KernelSpec {
    /// All categorical bases set to `e`.
    pub fn new(functional_kernel: FunctionalKernel, p_cat: usize) -> Self {
        Self {
            functional_kernel,
            categorical_base: vec![E; p_cat],
        }
    }

    pub fn with_bases(functional_kernel: FunctionalKernel, categorical_base: Vec<f64>) -> Result<Self> {
        let spec = Self {
            functional_kernel,
            categorical_base,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self
            .categorical_base
            .iter()
            .find(|k| !(k.is_finite() && **k > 1.0))
        {
            Some(k) => Err(Error::InvalidValue(format!(
                "categorical kernel base must be finite and > 1, got {k}"
            ))),
            None => Ok(()),
        }
    }
}

/// Nonnegative per-covariate weights, functional covariates first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if let Some(w) = omega.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidValue(format!(
                "weights must be finite and nonnegative, got {w}"
            )));
        }
        Ok(Self(omega))
    }

    pub fn zeros(p: usize) -> Self {
        Self(vec![0.0; p])
    }

    pub fn filled(p: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; p])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `ω_j / Σ ω_k`, or the uniform vector when every weight is zero.
    /// The flag reports whether the uniform fallback was used.
    pub fn normalized(&self) -> (Vec<f64>, bool) {
        let p = self.0.len();
        let total: f64 = crate::numeric::compensated_sum(&self.0);
        if total > 0.0 {
            (self.0.iter().map(|w| w / total).collect(), false)
        } else {
            (vec![1.0 / p as f64; p], true)
        }
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        WeightVector::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

fn check_lengths(spec: &KernelSpec, w: &WeightVector, dists: &[f64], p_fun: usize) -> Result<()> {
    let p = w.len();
    if dists.len() != p {
        return Err(Error::LengthMismatch {
            what: "distances",
            expected: p,
            got: dists.len(),
        });
    }
    if p_fun > p || spec.categorical_base.len() != p - p_fun {
        return Err(Error::LengthMismatch {
            what: "categorical kernel bases",
            expected: p.saturating_sub(p_fun),
            got: spec.categorical_base.len(),
        });
    }
    Ok(())
}

/// Explicit product of the per-covariate kernel factors.
pub fn product_kernel(spec: &KernelSpec, w: &WeightVector, dists: &[f64], p_fun: usize) -> Result<f64> {
    check_lengths(spec, w, dists, p_fun)?;
    let omega = w.as_slice();
    let mut k = 1.0;
    for j in 0..p_fun {
        k *= spec.functional_kernel.eval(omega[j] * dists[j]);
    }
    for (j, base) in (p_fun..omega.len()).zip(&spec.categorical_base) {
        k *= base.powf(-omega[j] * dists[j]);
    }
    Ok(k)
}

/// Precomputed form of the product kernel for a fixed weight vector,
/// evaluated in the log domain.
///
/// `log_kernel` returns `-inf` where the kernel vanishes (outside the
/// boxcar support).
#[derive(Debug, Clone)]
pub struct LogKernel {
    kind: FunctionalKernel,
    fun_weights: Vec<f64>,
    cat_rates: Vec<f64>,
}

impl LogKernel {
    pub fn new(spec: &KernelSpec, w: &WeightVector, p_fun: usize) -> Result<Self> {
        let p = w.len();
        if p_fun > p || spec.categorical_base.len() != p - p_fun {
            return Err(Error::LengthMismatch {
                what: "categorical kernel bases",
                expected: p.saturating_sub(p_fun),
                got: spec.categorical_base.len(),
            });
        }
        let omega = w.as_slice();
        Ok(Self {
            kind: spec.functional_kernel,
            fun_weights: omega[..p_fun].to_vec(),
            cat_rates: omega[p_fun..]
                .iter()
                .zip(&spec.categorical_base)
                .map(|(w, k)| w * k.ln())
                .collect(),
        })
    }

    pub fn p(&self) -> usize {
        self.fun_weights.len() + self.cat_rates.len()
    }

    /// Log of the product kernel, reading distance `j` from `dist(j)`.
    #[inline]
    pub fn log_kernel_with(&self, dist: impl Fn(usize) -> f64) -> f64 {
        let p_fun = self.fun_weights.len();
        let mut exponent = 0.0;
        match self.kind {
            FunctionalKernel::Picard => {
                for (j, w) in self.fun_weights.iter().enumerate() {
                    exponent += w * dist(j);
                }
            }
            FunctionalKernel::Boxcar => {
                for (j, w) in self.fun_weights.iter().enumerate() {
                    let u = w * dist(j);
                    if !(0.0..=1.0).contains(&u) {
                        return f64::NEG_INFINITY;
                    }
                }
            }
        }
        for (j, rate) in self.cat_rates.iter().enumerate() {
            exponent += rate * dist(p_fun + j);
        }
        -exponent
    }

    pub fn log_kernel(&self, dists: &[f64]) -> f64 {
        self.log_kernel_with(|j| dists[j])
    }
}
