//! Box-constrained Nelder–Mead.
//!
//! Trial points falling outside `[lower, upper]` are projected coordinatewise
//! onto the box before evaluation. Because projection can flatten the
//! simplex onto a face of the box, the search is restarted from the best
//! vertex with a fresh simplex while restarts keep improving the minimum.

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
const MAX_RESTARTS: usize = 3;

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Stop once every vertex lies within `rel_tol · max(1, ‖best‖∞)` of the
    /// best vertex in the max-norm.
    pub rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexMinimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

struct Search<'a, F> {
    f: F,
    lower: &'a [f64],
    upper: &'a [f64],
    evals: usize,
    max_evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Search<'_, F> {
    fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(self.lower).zip(self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.max_evals
    }

    /// Point `from + t·(to − from)`, projected onto the box.
    fn along(&self, from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
        let mut x: Vec<f64> = from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect();
        self.project(&mut x);
        x
    }

    fn initial_simplex(&mut self, x0: &[f64], steps: &[f64]) -> Vec<(Vec<f64>, f64)> {
        let mut base = x0.to_vec();
        self.project(&mut base);
        let f0 = self.eval(&base);
        let mut simplex = vec![(base.clone(), f0)];
        for (j, step) in steps.iter().enumerate() {
            let mut x = base.clone();
            x[j] += step;
            self.project(&mut x);
            if x[j] == base[j] {
                x[j] = base[j] - step;
                self.project(&mut x);
            }
            let fx = self.eval(&x);
            simplex.push((x, fx));
        }
        simplex
    }

    fn converged(simplex: &[(Vec<f64>, f64)], rel_tol: f64) -> bool {
        let best = &simplex[0].0;
        let scale = best.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        diameter <= rel_tol * scale
    }

    fn run(&mut self, x0: &[f64], steps: &[f64], rel_tol: f64) -> (Vec<f64>, f64) {
        let dim = x0.len();
        let mut simplex = self.initial_simplex(x0, steps);
        loop {
            // Stable sort keeps earlier vertices ahead on ties.
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if Self::converged(&simplex, rel_tol) || self.exhausted() {
                break;
            }
            let mut centroid = vec![0.0; dim];
            for (x, _) in &simplex[..dim] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / dim as f64;
                }
            }
            let worst = simplex[dim].clone();
            let reflected = self.along(&centroid, &worst.0, -REFLECT);
            let f_reflected = self.eval(&reflected);

            if f_reflected < simplex[0].1 {
                let expanded = self.along(&centroid, &worst.0, -EXPAND);
                let f_expanded = self.eval(&expanded);
                simplex[dim] = if f_expanded < f_reflected {
                    (expanded, f_expanded)
                } else {
                    (reflected, f_reflected)
                };
                continue;
            }
            if f_reflected < simplex[dim - 1].1 {
                simplex[dim] = (reflected, f_reflected);
                continue;
            }
            let (candidate, accept_below) = if f_reflected < worst.1 {
                (self.along(&centroid, &reflected, CONTRACT), f_reflected)
            } else {
                (self.along(&centroid, &worst.0, CONTRACT), worst.1)
            };
            let f_candidate = self.eval(&candidate);
            if f_candidate < accept_below || (f_candidate == accept_below && f_reflected < worst.1) {
                simplex[dim] = (candidate, f_candidate);
                continue;
            }
            let best = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                if self.exhausted() {
                    break;
                }
                let x = self.along(&best, &vertex.0, SHRINK);
                let fx = self.eval(&x);
                *vertex = (x, fx);
            }
        }
        let (x, v) = simplex.swap_remove(0);
        (x, v)
    }
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0`, with an
/// initial simplex spanned by `steps` along the coordinate axes.
pub fn minimize_in_box(
    f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    lower: &[f64],
    upper: &[f64],
    options: &SimplexOptions,
) -> SimplexMinimum {
    assert_eq!(x0.len(), steps.len());
    assert_eq!(x0.len(), lower.len());
    assert_eq!(x0.len(), upper.len());
    let mut search = Search {
        f,
        lower,
        upper,
        evals: 0,
        max_evals: options.max_evals.max(1),
    };
    if x0.is_empty() {
        let v = search.eval(x0);
        return SimplexMinimum {
            x: vec![],
            value: v,
            evaluations: search.evals,
        };
    }
    let (mut best_x, mut best_v) = search.run(x0, steps, options.rel_tol);
    for _ in 0..MAX_RESTARTS {
        if search.exhausted() {
            break;
        }
        let restart_steps: Vec<f64> = best_x
            .iter()
            .zip(steps)
            .map(|(x, s)| (0.1 * x.abs()).max(0.1 * s.abs()).max(f64::MIN_POSITIVE))
            .collect();
        let (x, v) = search.run(&best_x, &restart_steps, options.rel_tol);
        let improved = v < best_v - options.rel_tol * best_v.abs().max(f64::MIN_POSITIVE);
        if v < best_v {
            best_x = x;
            best_v = v;
        }
        if !improved {
            break;
        }
    }
    SimplexMinimum {
        x: best_x,
        value: best_v,
        evaluations: search.evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SimplexOptions {
        SimplexOptions {
            max_evals: 5000,
            rel_tol: 1e-10,
        }
    }

    #[test]
    fn finds_interior_minimum() {
        let f = |x: &[f64]| (x[0] - 1.5).powi(2) + 3.0 * (x[1] - 0.25).powi(2);
        let m = minimize_in_box(f, &[4.0, 4.0], &[1.0, 1.0], &[0.0, 0.0], &[10.0, 10.0], &opts());
        assert!((m.x[0] - 1.5).abs() < 1e-6, "{:?}", m);
        assert!((m.x[1] - 0.25).abs() < 1e-6, "{:?}", m);
    }

    #[test]
    fn respects_lower_bound() {
        let f = |x: &[f64]| (x[0] + 2.0).powi(2) + (x[1] - 1.0).powi(2);
        let m = minimize_in_box(f, &[3.0, 3.0], &[1.0, 1.0], &[0.0, 0.0], &[10.0, 10.0], &opts());
        assert_eq!(m.x[0], 0.0);
        assert!((m.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let m = minimize_in_box(f, &[0.0, 0.0], &[0.5, 0.5], &[-5.0, -5.0], &[5.0, 5.0], &opts());
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m);
    }

    #[test]
    fn one_dimensional_and_budget() {
        let f = |x: &[f64]| (x[0] - 7.0).abs();
        let m = minimize_in_box(f, &[1.0], &[0.5], &[0.0], &[100.0], &opts());
        assert!((m.x[0] - 7.0).abs() < 1e-6);

        let budget = SimplexOptions {
            max_evals: 10,
            rel_tol: 1e-12,
        };
        let m = minimize_in_box(f, &[1.0], &[0.5], &[0.0], &[100.0], &budget);
        assert!(m.evaluations <= 12);
        assert!(m.value <= 6.0);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| (x[0] * 3.0).sin() + (x[1] * 5.0).cos();
        let start = [0.7, 0.2];
        let m = minimize_in_box(f, &start, &[0.3, 0.3], &[0.0, 0.0], &[2.0, 2.0], &opts());
        assert!(m.value <= f(&start));
    }
}
