//! Limited-memory BFGS with a diagonal preconditioner and a line search that
//! stays usable once energy differences drop below rounding.
//!
//! The line search accepts a step on the Armijo condition or, when the energy
//! change is at the level of floating-point noise, on the approximate-Wolfe
//! slope test. Accepted iterates therefore never raise the energy by more than
//! `noise_rel * |E|`.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Converged when `||grad||_inf < grad_tol * max(1, |E|)`.
    pub grad_tol: f64,
    pub armijo: f64,
    pub curvature: f64,
    pub max_linesearch: usize,
    pub noise_rel: f64,
    /// Keep the energy of every accepted iterate.
    pub record_history: bool,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 12,
            max_iter: 20_000,
            grad_tol: 1e-8,
            armijo: 1e-4,
            curvature: 0.9,
            max_linesearch: 40,
            noise_rel: 1e-13,
            record_history: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub energy: f64,
    pub grad_inf: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// The line search could not make progress before convergence.
    pub stalled: bool,
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimizes `objective`, which writes the gradient into its second argument
/// and returns the energy. `precond`, when given, is a positive diagonal used
/// as the initial inverse-Hessian shape.
pub fn minimize<F>(x0: &[f64], mut objective: F, precond: Option<&[f64]>, opts: &LbfgsOptions) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut e = objective(&x, &mut g);
    let mut evaluations = 1;
    let mut history = Vec::new();
    if opts.record_history {
        history.push(e);
    }

    let ones;
    let p: &[f64] = match precond {
        Some(p) => p,
        None => {
            ones = vec![1.0; n];
            &ones
        }
    };

    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut alpha_buf = vec![0.0; opts.memory];
    let mut stalled = false;
    let mut iterations = 0;

    if n == 0 {
        return Minimum {
            x,
            energy: e,
            grad_inf: 0.0,
            iterations: 0,
            evaluations,
            converged: true,
            stalled: false,
            history,
        };
    }

    loop {
        let gi = inf_norm(&g);
        if gi < opts.grad_tol * e.abs().max(1.0) {
            return Minimum {
                x,
                energy: e,
                grad_inf: gi,
                iterations,
                evaluations,
                converged: true,
                stalled: false,
                history,
            };
        }
        if iterations >= opts.max_iter || stalled || !e.is_finite() {
            return Minimum {
                x,
                energy: e,
                grad_inf: gi,
                iterations,
                evaluations,
                converged: false,
                stalled,
                history,
            };
        }

        // two-loop recursion
        d.copy_from_slice(&g);
        for (k, (s, y, rho)) in mem.iter().enumerate().rev() {
            let a = rho * dot(s, &d);
            alpha_buf[k] = a;
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
        }
        let gamma = match mem.back() {
            Some((s, y, _)) => {
                let ypy: f64 = y.iter().zip(p).map(|(yi, pi)| yi * yi * pi).sum();
                dot(s, y) / ypy
            }
            None => 1.0,
        };
        for (di, pi) in d.iter_mut().zip(p) {
            *di *= gamma * pi;
        }
        for (k, (s, y, rho)) in mem.iter().enumerate() {
            let b = rho * dot(y, &d);
            let a = alpha_buf[k];
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        for di in d.iter_mut() {
            *di = -*di;
        }
        let mut dg0 = dot(&d, &g);
        if !(dg0 < 0.0) {
            // not a descent direction: restart from the preconditioned gradient
            mem.clear();
            for ((di, gi), pi) in d.iter_mut().zip(&g).zip(p) {
                *di = -gi * pi;
            }
            dg0 = dot(&d, &g);
        }

        let mut alpha = if mem.is_empty() {
            (1.0 / inf_norm(&d)).min(1.0)
        } else {
            1.0
        };

        let noise = opts.noise_rel * e.abs().max(1e-300);
        let mut lo = 0.0;
        let mut hi = f64::INFINITY;
        let mut accepted: Option<(f64, f64, Vec<f64>)> = None;
        for _ in 0..opts.max_linesearch {
            for i in 0..n {
                x_new[i] = x[i] + alpha * d[i];
            }
            let e_new = objective(&x_new, &mut g_new);
            evaluations += 1;
            let dg = dot(&g_new, &d);
            let armijo = e_new <= e + opts.armijo * alpha * dg0;
            let approx = e_new <= e + noise && dg <= (1.0 - 2.0 * opts.armijo) * dg0.abs();
            if !e_new.is_finite() || !(armijo || approx) {
                hi = alpha;
                alpha = 0.5 * (lo + hi);
                continue;
            }
            let better = accepted.as_ref().is_none_or(|(_, ea, _)| e_new <= *ea);
            if better {
                accepted = Some((alpha, e_new, g_new.clone()));
            }
            if dg < opts.curvature * dg0 {
                // still descending steeply: try a longer step
                lo = alpha;
                alpha = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * alpha };
                continue;
            }
            break;
        }

        match accepted {
            Some((a, e_new, g_acc)) => {
                let mut s = vec![0.0; n];
                let mut y = vec![0.0; n];
                for i in 0..n {
                    s[i] = a * d[i];
                    y[i] = g_acc[i] - g[i];
                    x[i] += s[i];
                }
                let sy = dot(&s, &y);
                if sy > 1e-300 {
                    if mem.len() == opts.memory {
                        mem.pop_front();
                    }
                    mem.push_back((s, y, 1.0 / sy));
                }
                g.copy_from_slice(&g_acc);
                e = e_new;
                iterations += 1;
                if opts.record_history {
                    history.push(e);
                }
            }
            None => {
                if mem.is_empty() {
                    stalled = true;
                } else {
                    mem.clear();
                }
            }
        }
    }
}
