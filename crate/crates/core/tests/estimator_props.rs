mod common;

use common::*;
use mixkern::estimator::{loo_predict, predict_posterior, predict_regression, Dataset, MixedSample, Responses};
use mixkern::kernels::{product_kernel, FunctionalKernel, KernelSpec, WeightVector};
use proptest::prelude::*;
use rand::Rng;

fn regression_case(seed: u64) -> (Dataset, KernelSpec, WeightVector, Vec<MixedSample>) {
    let mut r = rng(seed);
    let mut spec = random_spec(&mut r);
    spec.classes = None;
    spec.n = spec.n.max(3);
    let ds = random_dataset(&mut r, &spec);
    let kernel = random_kernel(&mut r, spec.p_cat);
    let w = WeightVector::new(random_weights(&mut r, spec.p_fun + spec.p_cat)).unwrap();
    let queries = random_samples(&mut r, ds.schema(), 4);
    (ds, kernel, w, queries)
}

fn with_y(ds: &Dataset, f: impl Fn(f64) -> f64) -> Dataset {
    let y = ds.continuous().unwrap().iter().map(|v| f(*v)).collect();
    ds.with_responses(Responses::Continuous(y)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prediction_is_a_convex_combination(seed in any::<u64>()) {
        let (ds, kernel, w, queries) = regression_case(seed);
        let y = ds.continuous().unwrap();
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for x in &queries {
            let v = predict_regression(&ds, &kernel, &w, x).unwrap().value().unwrap();
            prop_assert!(v >= lo - 1e-12 * lo.abs().max(1.0) && v <= hi + 1e-12 * hi.abs().max(1.0));
        }
    }

    #[test]
    fn affine_response_maps_commute(seed in any::<u64>(), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let (ds, kernel, w, queries) = regression_case(seed);
        let moved = with_y(&ds, |v| a * v + b);
        for x in &queries {
            let m = predict_regression(&ds, &kernel, &w, x).unwrap().value().unwrap();
            let m2 = predict_regression(&moved, &kernel, &w, x).unwrap().value().unwrap();
            prop_assert!((m2 - (a * m + b)).abs() <= 1e-10 * (1.0 + (a * m).abs() + b.abs()));
        }
    }

    #[test]
    fn zero_weights_reduce_to_plain_averages(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = random_spec(&mut r);
        let ds = random_dataset(&mut r, &spec);
        let kernel = random_kernel(&mut r, spec.p_cat);
        let w = WeightVector::zeros(spec.p_fun + spec.p_cat);
        let x = &ds.samples()[0];
        match ds.responses() {
            Responses::Continuous(y) => {
                let v = predict_regression(&ds, &kernel, &w, x).unwrap().value().unwrap();
                let mean = y.iter().sum::<f64>() / y.len() as f64;
                prop_assert!((v - mean).abs() <= 1e-14 * (1.0 + mean.abs()));
            }
            Responses::Class { labels, classes } => {
                let post = predict_posterior(&ds, &kernel, &w, x).unwrap();
                let post = post.posterior().unwrap();
                for g in 1..=*classes {
                    let f = labels.iter().filter(|l| **l == g).count() as f64 / labels.len() as f64;
                    prop_assert!((post[g as usize - 1] - f).abs() <= 1e-15);
                }
            }
        }
    }

    #[test]
    fn leave_one_out_equals_removal(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = random_spec(&mut r);
        let ds = random_dataset(&mut r, &spec);
        let kernel = random_kernel(&mut r, spec.p_cat);
        let w = WeightVector::new(random_weights(&mut r, spec.p_fun + spec.p_cat)).unwrap();
        let i = r.random_range(0..ds.len());
        let loo = loo_predict(&ds, &kernel, &w, i).unwrap();
        let rest = ds.without(i).unwrap();
        let x = &ds.samples()[i];
        let direct = match ds.responses() {
            Responses::Continuous(_) => predict_regression(&rest, &kernel, &w, x).unwrap(),
            Responses::Class { .. } => predict_posterior(&rest, &kernel, &w, x).unwrap(),
        };
        prop_assert_eq!(loo.fallback_used, direct.fallback_used);
        match (loo.value(), direct.value()) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs())),
            _ => {
                for (a, b) in loo.posterior().unwrap().iter().zip(direct.posterior().unwrap()) {
                    prop_assert!((a - b).abs() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn picard_product_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p_fun = r.random_range(0..=3usize);
        let p_cat = r.random_range(0..=3usize);
        let p = p_fun + p_cat;
        prop_assume!(p > 0);
        let w = random_weights(&mut r, p);
        let d: Vec<f64> = (0..p)
            .map(|j| if j < p_fun { r.random_range(0.0..4.0) } else { r.random_range(0..=3u32) as f64 })
            .collect();
        let spec = KernelSpec::new(FunctionalKernel::Picard, p_cat);
        let k = product_kernel(&spec, &WeightVector::new(w.clone()).unwrap(), &d, p_fun).unwrap();
        let s: f64 = w.iter().zip(&d).map(|(a, b)| a * b).sum();
        prop_assert!((k - (-s).exp()).abs() <= 1e-12 * (-s).exp().max(1e-300));
    }
}


#[test]
fn large_weights_interpolate() {
    // Sharper kernels put more mass on the nearest sample.
    let mut hits = 0;
    let trials = 30;
    for seed in 0..trials {
        let mut r = rng(500 + seed);
        let spec = RandomSpec {
            n: 15,
            p_fun: 2,
            p_cat: 0,
            classes: None,
        };
        let ds = random_dataset(&mut r, &spec);
        let kernel = KernelSpec::new(FunctionalKernel::Picard, 0);
        let y = ds.continuous().unwrap();
        let err = |scale: f64| -> f64 {
            let w = WeightVector::new(vec![scale; 2]).unwrap();
            ds.samples()
                .iter()
                .zip(y)
                .map(|(x, v)| (predict_regression(&ds, &kernel, &w, x).unwrap().value().unwrap() - v).abs())
                .sum()
        };
        if err(1e3) < err(1e1) {
            hits += 1;
        }
    }
    assert!(hits as f64 >= 0.9 * trials as f64, "{hits}/{trials}");
}
