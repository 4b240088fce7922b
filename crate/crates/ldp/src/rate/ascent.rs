use std::collections::VecDeque;

use super::AscentOptions;

pub(crate) struct AscentResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_l1: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
}

/// Gradient ascent with Armijo backtracking and step growth.
///
/// `f` returns the objective and its (super)gradient.
pub(crate) fn ascend(
    x0: Vec<f64>,
    opts: &AscentOptions,
    mut f: impl FnMut(&[f64]) -> (f64, Vec<f64>),
) -> AscentResult {
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut step = 1.0;
    let mut history = VecDeque::with_capacity(opts.window + 1);
    let mut converged = false;
    let mut diverged = false;
    let mut it = 0;
    while it < opts.max_iter {
        if fx > opts.divergence {
            diverged = true;
            break;
        }
        let g2: f64 = g.iter().map(|v| v * v).sum();
        if g2 == 0.0 || !fx.is_finite() {
            converged = true;
            break;
        }
        let mut accepted = false;
        while step > 1e-20 {
            let y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            let (fy, gy) = f(&y);
            if fy >= fx + 1e-4 * step * g2 {
                x = y;
                fx = fy;
                g = gy;
                step *= 2.0;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        it += 1;
        if !accepted {
            converged = true;
            break;
        }
        history.push_back(fx);
        if history.len() > opts.window {
            let old = history.pop_front().expect("nonempty");
            if fx - old < opts.tol {
                converged = true;
                break;
            }
        }
    }
    let grad_l1 = g.iter().map(|v| v.abs()).sum();
    AscentResult {
        x,
        value: fx,
        grad_l1,
        iterations: it,
        converged,
        diverged,
    }
}
