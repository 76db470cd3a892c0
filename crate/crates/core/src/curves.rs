//! Functional observations sampled on a uniform grid.
//!
//! A [`Curve`] is a vector of finite values attached to a [`Grid`]. All
//! curves of one covariate share a grid; operations combining two curves
//! fail with [`Error::GridMismatch`] otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Standard deviations below this are treated as zero when standardizing.
pub const SD_FLOOR: f64 = 1e-12;

/// Uniform sampling grid `start, start + step, ..., start + step * (count - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    start: f64,
    step: f64,
    count: usize,
}

impl Grid {
    pub fn new(start: f64, step: f64, count: usize) -> Result<Self> {
        if !start.is_finite() {
            return Err(Error::InvalidValue(format!("grid start {start} is not finite")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidValue(format!("grid step {step} must be positive")));
        }
        if count < 2 {
            return Err(Error::InvalidValue(format!(
                "grid needs at least 2 points, got {count}"
            )));
        }
        Ok(Self { start, step, count })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * (self.count - 1) as f64
    }

    /// Coordinate of the `k`-th grid point.
    pub fn point(&self, k: usize) -> f64 {
        self.start + self.step * k as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |k| self.point(k))
    }

    /// Re-checks the invariants, for grids obtained through deserialization.
    pub fn validate(&self) -> Result<()> {
        Grid::new(self.start, self.step, self.count).map(|_| ())
    }
}

/// A functional observation: finite values on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Grid,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::LengthMismatch {
                what: "curve values",
                expected: grid.count(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "curve value at index {k} is not finite"
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Curve::new(grid, grid.points().map(f).collect())
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Curve::new(grid, vec![value; grid.count()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn ensure_same_grid(&self, other: &Curve) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )))
        }
    }
}

/// Trapezoidal approximation of the integral of `f` over its grid.
pub fn integrate(f: &Curve) -> f64 {
    trapezoid(f.values(), f.grid().step())
}

/// Trapezoid rule on raw samples with uniform spacing `step`.
pub(crate) fn trapezoid(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    debug_assert!(n >= 2);
    let mut acc = CompensatedSum::new();
    acc.add(0.5 * values[0]);
    for &v in &values[1..n - 1] {
        acc.add(v);
    }
    acc.add(0.5 * values[n - 1]);
    step * acc.total()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineOp {
    Subtract,
    Multiply,
}

/// Elementwise `a - b` or `a * b` on a shared grid.
pub fn pointwise_combine(a: &Curve, b: &Curve, op: CombineOp) -> Result<Curve> {
    a.ensure_same_grid(b)?;
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| match op {
            CombineOp::Subtract => x - y,
            CombineOp::Multiply => x * y,
        })
        .collect();
    Curve::new(a.grid, values)
}

/// Pointwise centering and scaling fitted on one sample of curves.
///
/// Uses the population standard deviation (divisor `n`). Grid points whose
/// standard deviation is below [`SD_FLOOR`] are centred but not scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    grid: Grid,
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(curves: &[Curve]) -> Result<Self> {
        if curves.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: curves.len(),
            });
        }
        let first = &curves[0];
        for c in &curves[1..] {
            first.ensure_same_grid(c)?;
        }
        let n = curves.len() as f64;
        let grid = *first.grid();
        let mut mean = Vec::with_capacity(grid.count());
        let mut sd = Vec::with_capacity(grid.count());
        for k in 0..grid.count() {
            let m = curves
                .iter()
                .map(|c| c.values[k])
                .collect::<CompensatedSum>()
                .total()
                / n;
            let var = curves
                .iter()
                .map(|c| {
                    let d = c.values[k] - m;
                    d * d
                })
                .collect::<CompensatedSum>()
                .total()
                / n;
            mean.push(m);
            sd.push(var.sqrt());
        }
        Ok(Self { grid, mean, sd })
    }

    pub fn apply(&self, curve: &Curve) -> Result<Curve> {
        if *curve.grid() != self.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs fitted {:?}",
                curve.grid(),
                self.grid
            )));
        }
        let values = curve
            .values
            .iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(&v, (&m, &s))| if s < SD_FLOOR { v - m } else { (v - m) / s })
            .collect();
        Curve::new(self.grid, values)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sd(&self) -> &[f64] {
        &self.sd
    }
}

/// Centres and scales a sample of curves at every grid point.
pub fn standardize_sample(curves: &[Curve]) -> Result<Vec<Curve>> {
    let fitted = Standardizer::fit(curves)?;
    curves.iter().map(|c| fitted.apply(c)).collect()
}
