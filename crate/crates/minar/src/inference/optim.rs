//! Unconstrained minimizers used by the CMLE fit: a Nelder-Mead simplex with
//! restarts (default) and a numerical-gradient BFGS alternative.

use serde::{Deserialize, Serialize};

/// Optimization algorithm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OptimMethod {
    #[default]
    NelderMead,
    QuasiNewton,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimOptions {
    pub method: OptimMethod,
    /// Total objective-evaluation budget across restarts.
    pub max_evaluations: usize,
    /// Relative tolerance on the objective spread.
    pub rel_tol: f64,
    /// Number of simplex restarts around the incumbent best point.
    pub restarts: usize,
    /// Initial simplex step on the unconstrained scale.
    pub initial_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            method: OptimMethod::NelderMead,
            max_evaluations: 20_000,
            rel_tol: 1e-8,
            restarts: 2,
            initial_step: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
}

struct Budget<'a, F> {
    f: &'a mut F,
    used: usize,
    max: usize,
}

impl<'a, F: FnMut(&[f64]) -> f64> Budget<'a, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.used += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn exhausted(&self) -> bool {
        self.used >= self.max
    }
}

pub fn minimize<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    opts: &OptimOptions,
) -> OptimOutcome {
    match opts.method {
        OptimMethod::NelderMead => nelder_mead(f, x0, opts),
        OptimMethod::QuasiNewton => bfgs(f, x0, opts),
    }
}

/// Nelder-Mead with standard coefficients and up to `opts.restarts` fresh
/// simplexes around the incumbent best point.
fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    opts: &OptimOptions,
) -> OptimOutcome {
    let mut budget = Budget {
        f,
        used: 0,
        max: opts.max_evaluations,
    };
    let mut best_x = x0.to_vec();
    let mut best_f = budget.eval(x0);
    let mut iterations = 0;
    let mut converged = false;
    let mut step = opts.initial_step;
    for round in 0..=opts.restarts {
        let run = nelder_mead_run(&mut budget, &best_x, step, opts.rel_tol, &mut iterations);
        let improved = run.1 < best_f - opts.rel_tol * (best_f.abs() + opts.rel_tol);
        if run.1 < best_f {
            best_x = run.0;
            best_f = run.1;
        }
        converged = run.2;
        if budget.exhausted() {
            converged = false;
            break;
        }
        // restarts stop once they no longer move the optimum
        if round > 0 && !improved {
            break;
        }
        step *= 0.25;
    }
    OptimOutcome {
        x: best_x,
        value: best_f,
        evaluations: budget.used,
        iterations,
        converged,
    }
}

fn nelder_mead_run<F: FnMut(&[f64]) -> f64>(
    budget: &mut Budget<'_, F>,
    x0: &[f64],
    step: f64,
    rel_tol: f64,
    iterations: &mut usize,
) -> (Vec<f64>, f64, bool) {
    let dim = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut p = x0.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut scores: Vec<f64> = simplex.iter().map(|p| budget.eval(p)).collect();

    let mut converged = false;
    while !budget.exhausted() {
        *iterations += 1;
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        let spread = scores[worst] - scores[best];
        if spread.abs() <= rel_tol * (scores[best].abs() + rel_tol) && scores[best].is_finite() {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; dim];
        for &i in order.iter().take(dim) {
            for (c, v) in centroid.iter_mut().zip(&simplex[i]) {
                *c += v;
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&simplex[worst])
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let f_reflect = budget.eval(&reflect);

        if f_reflect < scores[best] {
            // expansion
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&reflect)
                .map(|(c, r)| c + gamma * (r - c))
                .collect();
            let f_expand = budget.eval(&expand);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                scores[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                scores[worst] = f_reflect;
            }
            continue;
        }
        if f_reflect < scores[second_worst] {
            simplex[worst] = reflect;
            scores[worst] = f_reflect;
            continue;
        }
        // contraction (outside if the reflection improved on the worst)
        let toward: &[f64] = if f_reflect < scores[worst] {
            &reflect
        } else {
            &simplex[worst]
        };
        let contract: Vec<f64> = centroid
            .iter()
            .zip(toward)
            .map(|(c, w)| c + rho * (w - c))
            .collect();
        let f_contract = budget.eval(&contract);
        if f_contract < scores[worst].min(f_reflect) {
            simplex[worst] = contract;
            scores[worst] = f_contract;
            continue;
        }
        // shrink toward the best vertex
        let best_point = simplex[best].clone();
        for i in 0..=dim {
            if i == best {
                continue;
            }
            let shrunk: Vec<f64> = best_point
                .iter()
                .zip(&simplex[i])
                .map(|(b, v)| b + sigma * (v - b))
                .collect();
            scores[i] = budget.eval(&shrunk);
            simplex[i] = shrunk;
            if budget.exhausted() {
                break;
            }
        }
    }

    let mut best_idx = 0;
    for i in 1..=dim {
        if scores[i] < scores[best_idx] {
            best_idx = i;
        }
    }
    (simplex.swap_remove(best_idx), scores[best_idx], converged)
}

/// BFGS with central-difference gradients and Armijo backtracking.
fn bfgs<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64], opts: &OptimOptions) -> OptimOutcome {
    let dim = x0.len();
    let mut budget = Budget {
        f,
        used: 0,
        max: opts.max_evaluations,
    };
    let grad_step = 1e-6;
    let mut x = x0.to_vec();
    let mut fx = budget.eval(&x);
    let mut h = identity(dim); // inverse-Hessian approximation
    let mut g = gradient(&mut budget, &x, grad_step);
    let mut iterations = 0;
    let mut converged = false;

    while !budget.exhausted() {
        iterations += 1;
        let g_norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !g_norm.is_finite() {
            break;
        }
        if g_norm <= 1e-6 * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        // search direction d = -H g
        let d: Vec<f64> = (0..dim)
            .map(|i| -(0..dim).map(|j| h[i * dim + j] * g[j]).sum::<f64>())
            .collect();
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        let d = if slope < 0.0 {
            d
        } else {
            g.iter().map(|v| -v).collect() // reset to steepest descent
        };
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            let fc = budget.eval(&cand);
            if fc <= fx + 1e-4 * t * slope {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
            if budget.exhausted() {
                break;
            }
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        let g_new = gradient(&mut budget, &x_new, grad_step);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            bfgs_update(&mut h, &s, &y, sy, dim);
        }
        let rel_drop = (fx - f_new).abs() <= opts.rel_tol * (fx.abs() + opts.rel_tol);
        x = x_new;
        fx = f_new;
        g = g_new;
        if rel_drop {
            converged = true;
            break;
        }
    }
    OptimOutcome {
        x,
        value: fx,
        evaluations: budget.used,
        iterations,
        converged,
    }
}

fn identity(dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim * dim];
    for i in 0..dim {
        m[i * dim + i] = 1.0;
    }
    m
}

fn gradient<F: FnMut(&[f64]) -> f64>(budget: &mut Budget<'_, F>, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut pt = x.to_vec();
    for i in 0..x.len() {
        pt[i] = x[i] + h;
        let fp = budget.eval(&pt);
        pt[i] = x[i] - h;
        let fm = budget.eval(&pt);
        pt[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, dim: usize) {
    // H <- (I - s y'/sy) H (I - y s'/sy) + s s'/sy
    let hy: Vec<f64> = (0..dim)
        .map(|i| (0..dim).map(|j| h[i * dim + j] * y[j]).sum::<f64>())
        .collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..dim {
        for j in 0..dim {
            h[i * dim + j] +=
                -(s[i] * hy[j] + hy[i] * s[j]) / sy + (1.0 + yhy / sy) * s[i] * s[j] / sy;
        }
    }
}
