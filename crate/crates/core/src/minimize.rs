// Limited-memory BFGS with a backtracking Armijo line search.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

pub(crate) struct LbfgsOptions {
    pub max_iter: usize,
    /// Converged when the infinity norm of the gradient drops below this.
    pub gtol: f64,
    pub memory: usize,
    /// Cap on the infinity norm of any single step.
    pub max_step: f64,
}

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    /// Callers polish the result and judge convergence themselves.
    #[allow(dead_code)]
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `fg(x, grad)` returns the objective (non-finite for invalid points) and
/// writes the gradient.
pub(crate) fn lbfgs<F>(x0: Vec<f64>, mut fg: F, opts: &LbfgsOptions) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = fg(&x, &mut g);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut alpha = vec![0.0; opts.memory];

    for _ in 0..opts.max_iter {
        let gnorm = inf_norm(&g);
        if gnorm <= opts.gtol {
            return Minimum { x, converged: true };
        }

        // two-loop recursion
        dir.copy_from_slice(&g);
        for (k, (s, y, rho)) in hist.iter().enumerate().rev() {
            alpha[k] = rho * dot(s, &dir);
            for (d, yi) in dir.iter_mut().zip(y) {
                *d -= alpha[k] * yi;
            }
        }
        let gamma = match hist.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0,
        };
        for d in dir.iter_mut() {
            *d *= gamma;
        }
        for (k, (s, y, rho)) in hist.iter().enumerate() {
            let b = rho * dot(y, &dir);
            for (d, si) in dir.iter_mut().zip(s) {
                *d += (alpha[k] - b) * si;
            }
        }
        for d in dir.iter_mut() {
            *d = -*d;
        }
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            hist.clear();
            for (d, gi) in dir.iter_mut().zip(&g) {
                *d = -gi;
            }
            slope = dot(&g, &dir);
        }

        let mut step = 1.0;
        let dmax = inf_norm(&dir);
        if dmax * step > opts.max_step {
            step = opts.max_step / dmax;
        }
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            let f_new = fg(&x_new, &mut g_new);
            // near the minimum f stops resolving progress; accept steps
            // that keep f flat to rounding and shrink the gradient
            let flat = f_new.is_finite()
                && (f_new - f).abs() <= 1e-14 * f.abs().max(1.0)
                && inf_norm(&g_new) < gnorm;
            if flat || (f_new.is_finite() && f_new <= f + 1e-4 * step * slope) {
                let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-16 * crate::math::sqrt(dot(&s, &s) * dot(&y, &y)) && sy > 0.0 {
                    if hist.len() == opts.memory {
                        hist.pop_front();
                    }
                    hist.push_back((s, y, 1.0 / sy));
                }
                core::mem::swap(&mut x, &mut x_new);
                core::mem::swap(&mut g, &mut g_new);
                f = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if hist.is_empty() {
                break;
            }
            hist.clear();
        }
    }
    let converged = inf_norm(&g) <= opts.gtol;
    Minimum { x, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let opts = LbfgsOptions {
            max_iter: 5000,
            gtol: 1e-10,
            memory: 8,
            max_step: 1.0,
        };
        let m = lbfgs(
            vec![-1.2, 1.0],
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            &opts,
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-8 && (m.x[1] - 1.0).abs() < 1e-8);
    }
}
