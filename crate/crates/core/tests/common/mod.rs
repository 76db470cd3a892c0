//! Shared test helpers: random datasets and an explicit-removal
//! leave-one-out evaluator written independently of the library code.

#![allow(dead_code)]

use mixkern::curves::{Curve, Grid};
use mixkern::estimator::{Dataset, MixedSample, Responses, Schema};
use mixkern::kernels::{FunctionalKernel, KernelSpec};
use mixkern::metrics::{CategoryValue, DistanceKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct RandomSpec {
    pub n: usize,
    pub p_fun: usize,
    pub p_cat: usize,
    pub classes: Option<u32>,
}

pub fn random_spec(rng: &mut impl Rng) -> RandomSpec {
    let p = rng.random_range(1..=4usize);
    let p_fun = rng.random_range(0..=p);
    RandomSpec {
        n: rng.random_range(2..=20),
        p_fun,
        p_cat: p - p_fun,
        classes: if rng.random_bool(0.5) {
            Some(rng.random_range(2..=4))
        } else {
            None
        },
    }
}

pub fn random_dataset(rng: &mut impl Rng, spec: &RandomSpec) -> Dataset {
    let grids: Vec<Grid> = (0..spec.p_fun)
        .map(|_| {
            let count = rng.random_range(2..=12);
            Grid::new(rng.random_range(-1.0..1.0), rng.random_range(0.05..0.5), count).unwrap()
        })
        .collect();
    let cards: Vec<u32> = (0..spec.p_cat).map(|_| rng.random_range(2..=4)).collect();
    let kinds: Vec<DistanceKind> = (0..spec.p_cat)
        .map(|_| {
            if rng.random_bool(0.5) {
                DistanceKind::Discrete
            } else {
                DistanceKind::Ordinal
            }
        })
        .collect();
    let schema = Schema::new(grids, cards, kinds).unwrap();
    let samples = random_samples(rng, &schema, spec.n);
    let responses = match spec.classes {
        Some(classes) => Responses::Class {
            labels: (0..spec.n).map(|_| rng.random_range(1..=classes)).collect(),
            classes,
        },
        None => Responses::Continuous((0..spec.n).map(|_| rng.random_range(-3.0..3.0)).collect()),
    };
    Dataset::new(schema, samples, responses).unwrap()
}

/// Samples conforming to `schema`.
pub fn random_samples(rng: &mut impl Rng, schema: &Schema, n: usize) -> Vec<MixedSample> {
    (0..n)
        .map(|_| {
            let functional = schema
                .grids()
                .iter()
                .map(|g| {
                    let values = (0..g.count()).map(|_| rng.random_range(-1.5..1.5)).collect();
                    Curve::new(*g, values).unwrap()
                })
                .collect();
            let categorical = schema
                .cardinalities()
                .iter()
                .map(|c| CategoryValue::new(rng.random_range(1..=*c), *c).unwrap())
                .collect();
            MixedSample::new(functional, categorical)
        })
        .collect()
}

pub fn random_kernel(rng: &mut impl Rng, p_cat: usize) -> KernelSpec {
    let kind = if rng.random_bool(0.5) {
        FunctionalKernel::Picard
    } else {
        FunctionalKernel::Boxcar
    };
    KernelSpec::with_bases(kind, (0..p_cat).map(|_| rng.random_range(1.5..4.0)).collect()).unwrap()
}

/// Weights drawn so that exact zeros appear and kernel values stay far
/// from underflow.
pub fn random_weights(rng: &mut impl Rng, p: usize) -> Vec<f64> {
    (0..p)
        .map(|_| {
            if rng.random_bool(0.2) {
                0.0
            } else {
                rng.random_range(0.0..3.0)
            }
        })
        .collect()
}

// ---- independent reference evaluator ----

fn ref_l2(a: &Curve, b: &Curve) -> f64 {
    let h = a.grid().step();
    let sq: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).collect();
    let mut s = 0.0;
    for k in 0..sq.len() - 1 {
        s += 0.5 * h * (sq[k] + sq[k + 1]);
    }
    s.sqrt()
}

fn ref_kernel_value(schema: &Schema, kernel: &KernelSpec, w: &[f64], a: &MixedSample, b: &MixedSample) -> f64 {
    let p_fun = schema.p_fun();
    let mut k = 1.0;
    for j in 0..p_fun {
        let u = w[j] * ref_l2(&a.functional[j], &b.functional[j]);
        k *= match kernel.functional_kernel {
            FunctionalKernel::Picard => {
                if u >= 0.0 {
                    (-u).exp()
                } else {
                    0.0
                }
            }
            FunctionalKernel::Boxcar => {
                if (0.0..=1.0).contains(&u) {
                    1.0
                } else {
                    0.0
                }
            }
        };
    }
    for j in 0..schema.p_cat() {
        let (la, lb) = (a.categorical[j].label(), b.categorical[j].label());
        let d = match schema.distances()[p_fun + j] {
            DistanceKind::Ordinal => (la as f64 - lb as f64).abs(),
            _ => {
                if la == lb {
                    0.0
                } else {
                    1.0
                }
            }
        };
        k *= kernel.categorical_base[j].powf(-w[p_fun + j] * d);
    }
    k
}

/// Prediction at `x` from `train`: a value for regression, class
/// frequencies for classification. Falls back to the plain mean or the
/// plain frequencies when the kernel mass is at most 1e-300.
pub fn ref_predict(train: &Dataset, kernel: &KernelSpec, w: &[f64], x: &MixedSample) -> Vec<f64> {
    let ks: Vec<f64> = train
        .samples()
        .iter()
        .map(|s| ref_kernel_value(train.schema(), kernel, w, s, x))
        .collect();
    let total: f64 = ks.iter().sum();
    let ks = if total > 1e-300 { ks } else { vec![1.0; ks.len()] };
    let total: f64 = ks.iter().sum();
    match train.responses() {
        Responses::Continuous(y) => vec![ks.iter().zip(y).map(|(k, v)| k * v).sum::<f64>() / total],
        Responses::Class { labels, classes } => (1..=*classes)
            .map(|g| {
                ks.iter()
                    .zip(labels)
                    .filter(|(_, l)| **l == g)
                    .map(|(k, _)| k)
                    .sum::<f64>()
                    / total
            })
            .collect(),
    }
}

/// Leave-one-out objective, rebuilding each reduced dataset explicitly.
pub fn brute_force_q(ds: &Dataset, kernel: &KernelSpec, w: &[f64]) -> f64 {
    let n = ds.len();
    let mut total = 0.0;
    for i in 0..n {
        let rest = ds.without(i).unwrap();
        let pred = ref_predict(&rest, kernel, w, &ds.samples()[i]);
        total += match ds.responses() {
            Responses::Continuous(y) => (y[i] - pred[0]).powi(2),
            Responses::Class { labels, .. } => pred
                .iter()
                .enumerate()
                .map(|(g, p)| {
                    let ind = if labels[i] as usize == g + 1 { 1.0 } else { 0.0 };
                    (ind - p).powi(2)
                })
                .sum(),
        };
    }
    total / n as f64
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || a == b
}
