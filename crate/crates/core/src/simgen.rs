//! Seeded generator for the mixed functional/categorical regression study.
//!
//! Functional covariates are sums of five randomly scaled and shifted
//! sines on the grid `t = 1, ..., T`, standardized pointwise across the
//! training sample. Categorical covariates are fair coin flips coded as
//! labels 1 and 2. The response is
//!
//! ```text
//! Y = 5 Σ_{j ≤ q_fun} ∫ X_j(t) γ_{3,1/3}(t/10) dt + 2 Σ_{j ≤ q_cat} b_j + ε
//! ```
//!
//! where `b_j ∈ {0, 1}` is the coin flip behind the label and `ε ~ N(0, 1)`.
//!
//! Every covariate of every replication draws from its own ChaCha stream,
//! so regenerating the noise covariates leaves the relevant covariates,
//! the errors and hence the regression truth untouched.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::curves::{integrate, pointwise_combine, CombineOp, Curve, Grid, Standardizer};
use crate::error::{Error, Result};
use crate::estimator::{Dataset, MixedSample, Responses, Schema};
use crate::metrics::CategoryValue;
use crate::numeric::median;

pub const DEFAULT_GRID_LEN: usize = 300;
pub const DEFAULT_TEST_SIZE: usize = 100;
const SINE_TERMS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// One relevant and one noise covariate of each kind.
    Minimal,
    /// Two relevant and six noise covariates of each kind.
    Sparse,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "minimal" => Ok(Preset::Minimal),
            "sparse" => Ok(Preset::Sparse),
            other => Err(Error::InvalidValue(format!("unknown preset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n: usize,
    pub p_fun: usize,
    pub q_fun: usize,
    pub p_cat: usize,
    pub q_cat: usize,
    pub grid_len: usize,
    pub seed: u64,
    pub test_size: usize,
    /// Seed for the noise covariates only; defaults to `seed`.
    pub noise_seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn preset(preset: Preset, n: usize, seed: u64) -> Self {
        let (p, q) = match preset {
            Preset::Minimal => (2, 1),
            Preset::Sparse => (8, 2),
        };
        Self {
            n,
            p_fun: p,
            q_fun: q,
            p_cat: p,
            q_cat: q,
            grid_len: DEFAULT_GRID_LEN,
            seed,
            test_size: DEFAULT_TEST_SIZE,
            noise_seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidValue(format!("n must be at least 2, got {}", self.n)));
        }
        if !(1 <= self.q_fun && self.q_fun <= self.p_fun) {
            return Err(Error::InvalidValue(format!(
                "need 1 <= q_fun <= p_fun, got q_fun={} p_fun={}",
                self.q_fun, self.p_fun
            )));
        }
        if self.q_cat > self.p_cat {
            return Err(Error::InvalidValue(format!(
                "need q_cat <= p_cat, got q_cat={} p_cat={}",
                self.q_cat, self.p_cat
            )));
        }
        if self.grid_len < 2 {
            return Err(Error::InvalidValue(format!(
                "grid_len must be at least 2, got {}",
                self.grid_len
            )));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p_fun + self.p_cat
    }

    /// `t = 1, 2, ..., T`.
    pub fn grid(&self) -> Grid {
        Grid::new(1.0, 1.0, self.grid_len).expect("validated grid length")
    }

    /// True for the first `q_fun` functional and first `q_cat` categorical
    /// covariates.
    pub fn relevant_mask(&self) -> Vec<bool> {
        (0..self.p_fun)
            .map(|j| j < self.q_fun)
            .chain((0..self.p_cat).map(|j| j < self.q_cat))
            .collect()
    }

    /// Indices (0-based, functional first) of the relevant covariates.
    pub fn relevant_indices(&self) -> Vec<usize> {
        self.relevant_mask()
            .iter()
            .enumerate()
            .filter(|(_, r)| **r)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Gamma density with shape `a` and rate `b`.
pub fn gamma_density(a: f64, b: f64, t: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::DomainError(format!(
            "gamma density needs a > 0 and b > 0, got a={a} b={b}"
        )));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let log = a * b.ln() - statrs::function::gamma::ln_gamma(a) + (a - 1.0) * t.ln() - b * t;
    Ok(log.exp())
}

/// `Σ_l (B_l sin((t/T)(5 − B_l)2π) − M_l)` for the given `(B_l, M_l)` terms.
pub fn sine_mixture(terms: &[(f64, f64)], t: f64, grid_len: usize) -> f64 {
    let tt = grid_len as f64;
    terms
        .iter()
        .map(|(b, m)| b * ((t / tt) * (5.0 - b) * 2.0 * PI).sin() - m)
        .sum()
}

/// Draws `count` unstandardized functional covariate curves.
pub fn gen_functional(cfg: &ScenarioConfig, count: usize, rng: &mut impl Rng) -> Vec<Curve> {
    let grid = cfg.grid();
    (0..count)
        .map(|_| {
            let terms: Vec<(f64, f64)> = (0..SINE_TERMS)
                .map(|_| (rng.random_range(0.0..5.0), rng.random_range(0.0..2.0 * PI)))
                .collect();
            Curve::from_fn(grid, |t| sine_mixture(&terms, t, cfg.grid_len))
                .expect("sine mixture is finite")
        })
        .collect()
}

/// Draws `count` fair coin flips as labels 1 (tails) and 2 (heads).
pub fn gen_categorical(count: usize, rng: &mut impl Rng) -> Vec<CategoryValue> {
    (0..count)
        .map(|_| {
            let label = if rng.random_bool(0.5) { 2 } else { 1 };
            CategoryValue::new(label, 2).expect("binary label")
        })
        .collect()
}

/// `γ_{3,1/3}(t/10)` sampled on the scenario grid.
pub fn coefficient_curve(cfg: &ScenarioConfig) -> Curve {
    Curve::from_fn(cfg.grid(), |t| {
        gamma_density(3.0, 1.0 / 3.0, t / 10.0).expect("valid parameters")
    })
    .expect("finite density")
}

/// Noiseless regression value from the relevant covariates.
///
/// `functional` holds the first `q_fun` standardized curves and
/// `categorical` the first `q_cat` labels of one sample.
pub fn regression_truth(
    coefficient: &Curve,
    functional: &[Curve],
    categorical: &[CategoryValue],
) -> Result<f64> {
    let mut truth = 0.0;
    for x in functional {
        truth += 5.0 * integrate(&pointwise_combine(x, coefficient, CombineOp::Multiply)?);
    }
    for c in categorical {
        truth += 2.0 * (c.label() - 1) as f64;
    }
    Ok(truth)
}

/// Responses `Y_i = truth_i + ε_i`, returned with the truths.
///
/// `samples` must carry at least `q_fun` curves and `q_cat` labels each.
pub fn gen_response(
    cfg: &ScenarioConfig,
    samples: &[MixedSample],
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let coefficient = coefficient_curve(cfg);
    let mut y = Vec::with_capacity(samples.len());
    let mut truth = Vec::with_capacity(samples.len());
    for s in samples {
        let m = regression_truth(
            &coefficient,
            &s.functional[..cfg.q_fun],
            &s.categorical[..cfg.q_cat],
        )?;
        let eps: f64 = rng.sample(StandardNormal);
        truth.push(m);
        y.push(m + eps);
    }
    Ok((y, truth))
}

/// Role of a random stream within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Functional(usize),
    Categorical(usize),
    Noise,
    TestFunctional(usize),
    TestCategorical(usize),
    TestNoise,
}

impl StreamRole {
    fn code(self) -> u64 {
        let (role, index) = match self {
            StreamRole::Functional(j) => (1u64, j),
            StreamRole::Categorical(j) => (2, j),
            StreamRole::Noise => (3, 0),
            StreamRole::TestFunctional(j) => (4, j),
            StreamRole::TestCategorical(j) => (5, j),
            StreamRole::TestNoise => (6, 0),
        };
        (role << 32) | index as u64
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `replication` derived from a base seed.
pub fn replication_seed(base_seed: u64, replication: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(replication))
}

/// Independent generator for one role within one replication.
pub fn stream(base_seed: u64, replication: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(base_seed, replication));
    rng.set_stream(role.code());
    rng
}

/// Held-out draw from the same covariate law, for test error.
#[derive(Debug, Clone, PartialEq)]
pub struct TestDraw {
    pub samples: Vec<MixedSample>,
    pub truth: Vec<f64>,
    pub noisy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimDraw {
    pub dataset: Dataset,
    pub truth: Vec<f64>,
    pub relevant_mask: Vec<bool>,
    pub test: TestDraw,
}

impl SimDraw {
    /// Two-class variant: label 2 where the truth exceeds the training
    /// median of the truth, label 1 otherwise. Test labels use the same
    /// threshold.
    pub fn thresholded(&self) -> Result<(Dataset, Vec<u32>)> {
        let threshold = median(&self.truth).expect("nonempty draw");
        let label = |m: &f64| if *m > threshold { 2 } else { 1 };
        let labels = self.truth.iter().map(label).collect();
        let ds = self.dataset.with_responses(Responses::Class { labels, classes: 2 })?;
        Ok((ds, self.test.truth.iter().map(label).collect()))
    }
}

fn curves_for(
    cfg: &ScenarioConfig,
    replication: u64,
    j: usize,
) -> (Vec<Curve>, Vec<Curve>) {
    let seed = if j < cfg.q_fun {
        cfg.seed
    } else {
        cfg.noise_seed.unwrap_or(cfg.seed)
    };
    let train = gen_functional(cfg, cfg.n, &mut stream(seed, replication, StreamRole::Functional(j)));
    let test = gen_functional(
        cfg,
        cfg.test_size,
        &mut stream(seed, replication, StreamRole::TestFunctional(j)),
    );
    (train, test)
}

fn labels_for(cfg: &ScenarioConfig, replication: u64, j: usize) -> (Vec<CategoryValue>, Vec<CategoryValue>) {
    let seed = if j < cfg.q_cat {
        cfg.seed
    } else {
        cfg.noise_seed.unwrap_or(cfg.seed)
    };
    (
        gen_categorical(cfg.n, &mut stream(seed, replication, StreamRole::Categorical(j))),
        gen_categorical(
            cfg.test_size,
            &mut stream(seed, replication, StreamRole::TestCategorical(j)),
        ),
    )
}

/// Draws the training sample and test sample of one replication.
///
/// Test curves are standardized with the training sample's pointwise mean
/// and standard deviation.
pub fn draw_scenario(cfg: &ScenarioConfig, replication: u64) -> Result<SimDraw> {
    cfg.validate()?;
    let n = cfg.n;
    let mut train: Vec<MixedSample> = (0..n).map(|_| MixedSample::new(vec![], vec![])).collect();
    let mut test: Vec<MixedSample> = (0..cfg.test_size)
        .map(|_| MixedSample::new(vec![], vec![]))
        .collect();

    for j in 0..cfg.p_fun {
        let (raw_train, raw_test) = curves_for(cfg, replication, j);
        let standardizer = Standardizer::fit(&raw_train)?;
        for (s, c) in train.iter_mut().zip(&raw_train) {
            s.functional.push(standardizer.apply(c)?);
        }
        for (s, c) in test.iter_mut().zip(&raw_test) {
            s.functional.push(standardizer.apply(c)?);
        }
    }
    for j in 0..cfg.p_cat {
        let (train_labels, test_labels) = labels_for(cfg, replication, j);
        for (s, c) in train.iter_mut().zip(train_labels) {
            s.categorical.push(c);
        }
        for (s, c) in test.iter_mut().zip(test_labels) {
            s.categorical.push(c);
        }
    }

    let (y, truth) = gen_response(cfg, &train, &mut stream(cfg.seed, replication, StreamRole::Noise))?;
    let (test_y, test_truth) =
        gen_response(cfg, &test, &mut stream(cfg.seed, replication, StreamRole::TestNoise))?;

    let schema = Schema::discrete(vec![cfg.grid(); cfg.p_fun], vec![2; cfg.p_cat])?;
    Ok(SimDraw {
        dataset: Dataset::new(schema, train, Responses::Continuous(y))?,
        truth,
        relevant_mask: cfg.relevant_mask(),
        test: TestDraw {
            samples: test,
            truth: test_truth,
            noisy: test_y,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_density_examples() {
        assert_eq!(gamma_density(3.0, 1.0 / 3.0, -1.0).unwrap(), 0.0);
        assert_eq!(gamma_density(3.0, 1.0 / 3.0, 0.0).unwrap(), 0.0);
        let v = gamma_density(1.0, 1.0, 0.5).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-12);
        let v = gamma_density(3.0, 1.0 / 3.0, 6.0).unwrap();
        assert!((v - 2.0 / 3.0 * (-2.0f64).exp()).abs() < 1e-12);
        assert!(matches!(gamma_density(0.0, 1.0, 1.0), Err(Error::DomainError(_))));
        assert!(matches!(gamma_density(1.0, -1.0, 1.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn sine_mixture_degenerate_cases() {
        let terms = [(0.0, 0.5), (0.0, 1.25), (0.0, 2.0), (0.0, 0.0), (0.0, 3.0)];
        for t in [1.0, 77.0, 300.0] {
            assert_eq!(sine_mixture(&terms, t, 300), -6.75);
        }
        for t in [1.0, 150.0, 299.0] {
            assert_eq!(sine_mixture(&[(5.0, 1.7)], t, 300), -1.7);
        }
        assert!(sine_mixture(&[(2.5, 0.0)], 300.0, 300).abs() < 1e-12);
    }

    #[test]
    fn presets() {
        let m = ScenarioConfig::preset(Preset::Minimal, 50, 1);
        assert_eq!((m.p_fun, m.q_fun, m.p_cat, m.q_cat), (2, 1, 2, 1));
        assert_eq!(m.relevant_mask(), vec![true, false, true, false]);
        assert_eq!(m.relevant_indices(), vec![0, 2]);
        let s = ScenarioConfig::preset(Preset::Sparse, 50, 1);
        assert_eq!((s.p_fun, s.q_fun, s.p_cat, s.q_cat), (8, 2, 8, 2));
        let mask = s.relevant_mask();
        assert_eq!(mask.iter().filter(|r| **r).count(), 4);
        assert!(mask[0] && mask[1] && !mask[2] && mask[8] && mask[9] && !mask[10]);
    }

    #[test]
    fn config_validation() {
        let mut c = ScenarioConfig::preset(Preset::Minimal, 50, 1);
        c.q_fun = 0;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::preset(Preset::Minimal, 50, 1);
        c.q_cat = 3;
        assert!(c.validate().is_err());
        let c = ScenarioConfig::preset(Preset::Minimal, 1, 1);
        assert!(c.validate().is_err());
    }

    #[test]
    fn categorical_frequency_and_support() {
        let labels = gen_categorical(100_000, &mut stream(3, 0, StreamRole::Categorical(0)));
        let heads = labels.iter().filter(|c| c.label() == 2).count() as f64 / 1e5;
        assert!((heads - 0.5).abs() < 0.01);
        assert!(labels.iter().all(|c| c.cardinality() == 2));
        let again = gen_categorical(100_000, &mut stream(3, 0, StreamRole::Categorical(0)));
        assert_eq!(labels, again);
    }

    #[test]
    fn null_signal_gives_zero_truth() {
        let cfg = ScenarioConfig {
            q_cat: 1,
            ..ScenarioConfig::preset(Preset::Minimal, 2, 0)
        };
        let coefficient = coefficient_curve(&cfg);
        let zero = Curve::constant(cfg.grid(), 0.0).unwrap();
        let tails = CategoryValue::new(1, 2).unwrap();
        assert_eq!(regression_truth(&coefficient, &[zero], &[tails]).unwrap(), 0.0);
        assert_eq!(regression_truth(&coefficient, &[], &[tails]).unwrap(), 0.0);
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = stream(1, 0, StreamRole::Noise).random();
        let b: u64 = stream(1, 0, StreamRole::Noise).random();
        let c: u64 = stream(1, 1, StreamRole::Noise).random();
        let d: u64 = stream(1, 0, StreamRole::TestNoise).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn draws_are_deterministic_and_standardized() {
        let cfg = ScenarioConfig {
            grid_len: 40,
            test_size: 7,
            ..ScenarioConfig::preset(Preset::Minimal, 25, 11)
        };
        let a = draw_scenario(&cfg, 2).unwrap();
        let b = draw_scenario(&cfg, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.test.samples.len(), 7);
        for j in 0..cfg.p_fun {
            for k in 0..cfg.grid_len {
                let vals: Vec<f64> = a
                    .dataset
                    .samples()
                    .iter()
                    .map(|s| s.functional[j].values()[k])
                    .collect();
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
                assert!(m.abs() <= 1e-10);
                assert!((sd - 1.0).abs() <= 1e-10 || sd <= 1e-10);
            }
        }
    }

    #[test]
    fn noise_covariates_do_not_move_truth() {
        let cfg = ScenarioConfig {
            grid_len: 60,
            ..ScenarioConfig::preset(Preset::Sparse, 30, 5)
        };
        let base = draw_scenario(&cfg, 0).unwrap();
        let other = draw_scenario(
            &ScenarioConfig {
                noise_seed: Some(999),
                ..cfg.clone()
            },
            0,
        )
        .unwrap();
        assert_eq!(base.truth, other.truth);
        assert_eq!(base.test.truth, other.test.truth);
        assert_ne!(
            base.dataset.samples()[0].functional[5],
            other.dataset.samples()[0].functional[5]
        );
    }

    #[test]
    fn thresholded_labels_split_at_median() {
        let cfg = ScenarioConfig {
            grid_len: 30,
            ..ScenarioConfig::preset(Preset::Minimal, 20, 4)
        };
        let draw = draw_scenario(&cfg, 0).unwrap();
        let (ds, test_labels) = draw.thresholded().unwrap();
        let (labels, classes) = ds.class_labels().unwrap();
        assert_eq!(classes, 2);
        assert_eq!(labels.iter().filter(|l| **l == 2).count(), 10);
        assert_eq!(test_labels.len(), cfg.test_size);
    }
}
