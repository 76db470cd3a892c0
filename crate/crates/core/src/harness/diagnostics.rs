//! Growth of the selected weights with the sample size.
//!
//! For a relevant functional covariate the selected weight should grow
//! like a power of `n`; for a noise covariate it should vanish. Both are
//! checked on medians over replications of the free fits.

use serde::{Deserialize, Serialize};

use super::{ExperimentReport, ModeName};
use crate::error::{Error, Result};
use crate::numeric::median;

/// Least-squares slope of `ln y` against `ln x`. `None` when fewer than
/// two points are given, any coordinate is not positive, or all `x` agree.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] > w[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateRates {
    /// 1-based covariate index; functional covariates come first.
    pub covariate: usize,
    pub functional: bool,
    pub relevant: bool,
    pub median_weight: Vec<f64>,
    pub median_normalized_weight: Vec<f64>,
    /// Slope of log median weight against log n; absent if some median is 0.
    pub weight_slope: Option<f64>,
    pub normalized_weight_slope: Option<f64>,
    /// For relevant functional covariates with a positive slope `s`, the
    /// smoothness `β` solving `s = 1/(q_fun + 2β)`.
    pub implied_beta: Option<f64>,
    /// Relevant: median weight strictly increasing in n.
    /// Noise: median normalized weight strictly decreasing in n.
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub sample_sizes: Vec<usize>,
    pub replications: Vec<usize>,
    pub covariates: Vec<CovariateRates>,
    pub relevant_weights_increasing: bool,
    pub noise_normalized_weights_decreasing: bool,
}

/// Slope summary over the free-mode rows of `report`.
pub fn rate_diagnostics(report: &ExperimentReport) -> Result<RateSummary> {
    let sizes: Vec<usize> = report
        .sample_sizes()
        .into_iter()
        .filter(|n| !report.outcomes(*n, ModeName::Free).is_empty())
        .collect();
    if sizes.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "rate diagnostics need free-mode fits at 3 or more sample sizes, found {}",
            sizes.len()
        )));
    }
    let p = report.p();
    let p_fun = report.meta.p_fun;
    let xs: Vec<f64> = sizes.iter().map(|n| *n as f64).collect();
    let per_n: Vec<Vec<_>> = sizes.iter().map(|n| report.outcomes(*n, ModeName::Free)).collect();

    let mut covariates = Vec::with_capacity(p);
    for j in 0..p {
        let med = |f: &dyn Fn(&super::FitOutcome) -> f64| -> Vec<f64> {
            per_n
                .iter()
                .map(|rows| {
                    let v: Vec<f64> = rows.iter().map(|(_, o)| f(o)).collect();
                    median(&v).expect("nonempty")
                })
                .collect()
        };
        let median_weight = med(&|o| o.weights[j]);
        let median_normalized_weight = med(&|o| o.normalized_weights[j]);
        let relevant = report.meta.relevant_mask[j];
        let functional = j < p_fun;
        let weight_slope = log_log_slope(&xs, &median_weight);
        let implied_beta = match weight_slope {
            Some(s) if relevant && functional && s > 0.0 => {
                Some((1.0 / s - report.meta.q_fun as f64) / 2.0)
            }
            _ => None,
        };
        let monotone = if relevant {
            strictly_increasing(&median_weight)
        } else {
            strictly_decreasing(&median_normalized_weight)
        };
        covariates.push(CovariateRates {
            covariate: j + 1,
            functional,
            relevant,
            normalized_weight_slope: log_log_slope(&xs, &median_normalized_weight),
            median_weight,
            median_normalized_weight,
            weight_slope,
            implied_beta,
            monotone,
        });
    }
    Ok(RateSummary {
        replications: per_n.iter().map(|r| r.len()).collect(),
        relevant_weights_increasing: covariates.iter().filter(|c| c.relevant).all(|c| c.monotone),
        noise_normalized_weights_decreasing: covariates.iter().filter(|c| !c.relevant).all(|c| c.monotone),
        sample_sizes: sizes,
        covariates,
    })
}
