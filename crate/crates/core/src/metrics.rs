//! Distances between covariate values.
//!
//! Functional covariates use the L² distance (trapezoid rule on the squared
//! difference). Categorical covariates use either the 0/1 discrete distance
//! or the ordinal distance `|a - b|`. Both categorical distances take values
//! in `{0} ∪ [1, ∞)`.

use serde::{Deserialize, Serialize};

use crate::curves::Curve;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// A categorical observation: a label in `1..=cardinality`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CategoryValue {
    label: u32,
    cardinality: u32,
}

impl CategoryValue {
    pub fn new(label: u32, cardinality: u32) -> Result<Self> {
        if cardinality < 2 {
            return Err(Error::InvalidValue(format!(
                "category cardinality must be at least 2, got {cardinality}"
            )));
        }
        if label == 0 || label > cardinality {
            return Err(Error::InvalidValue(format!(
                "category label {label} outside 1..={cardinality}"
            )));
        }
        Ok(Self { label, cardinality })
    }

    pub fn label(&self) -> u32 {
        self.label
    }

    pub fn cardinality(&self) -> u32 {
        self.cardinality
    }

    fn ensure_same_cardinality(&self, other: &CategoryValue) -> Result<()> {
        if self.cardinality == other.cardinality {
            Ok(())
        } else {
            Err(Error::CardinalityMismatch {
                left: self.cardinality,
                right: other.cardinality,
            })
        }
    }
}

/// Which distance a covariate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    L2,
    Discrete,
    Ordinal,
}

impl DistanceKind {
    pub fn is_functional(&self) -> bool {
        matches!(self, DistanceKind::L2)
    }
}

pub fn l2_distance(a: &Curve, b: &Curve) -> Result<f64> {
    a.ensure_same_grid(b)?;
    Ok(l2_distance_raw(a.values(), b.values(), a.grid().step()))
}

/// L² distance on raw samples sharing a uniform `step`.
pub(crate) fn l2_distance_raw(a: &[f64], b: &[f64], step: f64) -> f64 {
    let n = a.len();
    debug_assert!(n >= 2 && b.len() == n);
    let sq = |k: usize| {
        let d = a[k] - b[k];
        d * d
    };
    let mut acc = CompensatedSum::new();
    acc.add(0.5 * sq(0));
    for k in 1..n - 1 {
        acc.add(sq(k));
    }
    acc.add(0.5 * sq(n - 1));
    (step * acc.total()).max(0.0).sqrt()
}

pub fn discrete_distance(a: &CategoryValue, b: &CategoryValue) -> Result<f64> {
    a.ensure_same_cardinality(b)?;
    Ok(if a.label == b.label { 0.0 } else { 1.0 })
}

pub fn ordinal_distance(a: &CategoryValue, b: &CategoryValue) -> Result<f64> {
    a.ensure_same_cardinality(b)?;
    Ok(a.label.abs_diff(b.label) as f64)
}

/// Dispatches to the categorical distance selected by `kind`.
pub fn categorical_distance(kind: DistanceKind, a: &CategoryValue, b: &CategoryValue) -> Result<f64> {
    match kind {
        DistanceKind::Discrete => discrete_distance(a, b),
        DistanceKind::Ordinal => ordinal_distance(a, b),
        DistanceKind::L2 => Err(Error::SchemaMismatch(
            "L2 distance requested for a categorical covariate".into(),
        )),
    }
}
