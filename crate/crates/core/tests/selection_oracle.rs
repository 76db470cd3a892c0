mod common;

use common::*;
use mixkern::curves::{Curve, Grid};
use mixkern::estimator::{Dataset, MixedSample, Responses, Schema};
use mixkern::kernels::{FunctionalKernel, KernelSpec, WeightVector};
use mixkern::metrics::{l2_distance, CategoryValue};
use mixkern::numeric::median;
use mixkern::selection::{cv_objective_regression, minimize_weights, CvConfig, SelectionMode};
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn one_curve_dataset(seed: u64, n: usize, signal: bool) -> Dataset {
    let mut r = rng(seed);
    let grid = Grid::new(0.0, 0.1, 11).unwrap();
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut y = Vec::new();
    let samples = (0..n)
        .map(|_| {
            let a: f64 = r.random_range(-1.0..1.0);
            let b: f64 = r.random_range(-1.0..1.0);
            let c = Curve::from_fn(grid, |t| a + b * t * t).unwrap();
            let e = noise.sample(&mut r);
            y.push(if signal { (2.0 * a).sin() + b + e } else { e });
            MixedSample::new(vec![c], vec![])
        })
        .collect();
    Dataset::new(Schema::discrete(vec![grid], vec![]).unwrap(), samples, Responses::Continuous(y)).unwrap()
}

fn q_at(ds: &Dataset, cfg: &CvConfig, w: &[f64]) -> f64 {
    cv_objective_regression(ds, &WeightVector::new(w.to_vec()).unwrap(), cfg).unwrap()
}

#[test]
fn one_dimensional_grid_scan() {
    for seed in [1, 2, 3] {
        let ds = one_curve_dataset(seed, 40, true);
        let cfg = CvConfig::new(KernelSpec::new(FunctionalKernel::Picard, 0));
        let fit = minimize_weights(&ds, &cfg).unwrap();
        let mut best = q_at(&ds, &cfg, &[0.0]);
        let mut w = 0.01;
        while w <= cfg.weight_cap {
            best = best.min(q_at(&ds, &cfg, &[w]));
            w *= 1.2;
        }
        assert!(
            fit.q_value <= best * (1.0 + 1e-6),
            "seed {seed}: optimizer {} vs grid {best}",
            fit.q_value
        );
    }
}

#[test]
fn descent_from_every_start() {
    let ds = one_curve_dataset(7, 30, false);
    let cfg = CvConfig::new(KernelSpec::new(FunctionalKernel::Picard, 0));
    let fit = minimize_weights(&ds, &cfg).unwrap();
    let s = ds.samples();
    let mut d = Vec::new();
    for i in 0..s.len() {
        for k in i + 1..s.len() {
            d.push(l2_distance(&s[i].functional[0], &s[k].functional[0]).unwrap());
        }
    }
    let unit = 1.0 / median(&d).unwrap();
    for m in [0.1, 1.0, 10.0] {
        assert!(fit.q_value <= q_at(&ds, &cfg, &[m * unit]));
    }
    assert!(fit.q_value <= q_at(&ds, &cfg, &[0.0]) + 1e-12);
}

fn mixed_dataset(seed: u64, n: usize) -> Dataset {
    let mut r = rng(seed);
    let grid = Grid::new(0.0, 0.1, 11).unwrap();
    let noise = Normal::new(0.0, 0.2).unwrap();
    let mut y = Vec::new();
    let samples = (0..n)
        .map(|_| {
            let a: f64 = r.random_range(-1.0..1.0);
            let b: f64 = r.random_range(-1.0..1.0);
            let c1 = Curve::from_fn(grid, |t| a * t).unwrap();
            let c2 = Curve::from_fn(grid, |t| b * t).unwrap();
            let l1 = r.random_range(1..=2u32);
            let l2 = r.random_range(1..=2u32);
            y.push(3.0 * a + l1 as f64 + noise.sample(&mut r));
            MixedSample::new(
                vec![c1, c2],
                vec![CategoryValue::new(l1, 2).unwrap(), CategoryValue::new(l2, 2).unwrap()],
            )
        })
        .collect();
    Dataset::new(
        Schema::discrete(vec![grid; 2], vec![2, 2]).unwrap(),
        samples,
        Responses::Continuous(y),
    )
    .unwrap()
}

#[test]
fn free_mode_dominates_equal_weights() {
    for seed in 0..3 {
        let ds = mixed_dataset(100 + seed, 40);
        let kernel = KernelSpec::new(FunctionalKernel::Picard, 2);
        let equal = minimize_weights(
            &ds,
            &CvConfig::new(kernel.clone()).with_mode(SelectionMode::EqualWeights),
        )
        .unwrap();
        let w = equal.weights.as_slice();
        assert!(w.iter().all(|v| *v == w[0]));
        let mut cfg = CvConfig::new(kernel.clone());
        cfg.extra_starts.push(equal.weights.clone());
        let free = minimize_weights(&ds, &cfg).unwrap();
        assert!(free.q_value <= equal.q_value + 1e-9);

        let oracle = minimize_weights(
            &ds,
            &CvConfig::new(kernel).with_mode(SelectionMode::Oracle(vec![0, 2])),
        )
        .unwrap();
        assert_eq!(oracle.weights.as_slice()[1], 0.0);
        assert_eq!(oracle.weights.as_slice()[3], 0.0);
    }
}

#[test]
fn fits_are_bitwise_reproducible() {
    let ds = mixed_dataset(5, 30);
    let cfg = CvConfig::new(KernelSpec::new(FunctionalKernel::Picard, 2));
    let a = minimize_weights(&ds, &cfg).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| minimize_weights(&ds, &cfg).unwrap());
    assert_eq!(a, b);
}

#[test]
fn constant_responses_give_zero() {
    let ds = one_curve_dataset(9, 12, true);
    let ds = ds.with_responses(Responses::Continuous(vec![2.5; 12])).unwrap();
    let cfg = CvConfig::new(KernelSpec::new(FunctionalKernel::Picard, 0));
    for w in [0.0, 0.3, 40.0] {
        assert!(q_at(&ds, &cfg, &[w]) <= 1e-28);
    }
}
