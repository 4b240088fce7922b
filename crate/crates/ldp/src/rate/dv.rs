use std::collections::HashMap;

use crate::chain::{decompose_classes, ChainSpec, StateId};
use crate::error::{Error, Result};
use crate::measure::{classify_admissible, SparseMeasure, Tuple};

use super::ascent::ascend;
use super::{solve_contraction, AscentOptions, Bound};

/// A support tuple's coordinate and mass, with its successors'
/// coordinates and log-probabilities.
type Term = (usize, f64, Vec<(usize, f64)>);

/// Lower bound on the Donsker–Varadhan entropy
/// `J(μ) = sup_f ⟨μ, log(f/Pf)⟩` at level `k = arity(μ)`.
///
/// Test functions are `f = exp(g)` on `S^k`, with
/// `Pf(u) = Σ_z p(u_k, z) f(u_2 … u_k z)`; only the coordinates that enter
/// the bracket are kept. The returned value is the best bracket found minus
/// a bound on its floating-point error.
pub fn dv_entropy(chain: &ChainSpec, mu: &SparseMeasure, opts: &AscentOptions) -> Result<Bound> {
    let k = mu.arity();
    if k == 0 {
        return Err(Error::InvalidArity {
            got: 0,
            why: "measure arity must be positive",
        });
    }
    // Mass on a tuple whose last step is forbidden lets f blow up there.
    if k >= 2 && mu.iter().any(|(t, _)| chain.p(t[k - 2], t[k - 1]) == 0.0) {
        return Ok(Bound::infinite());
    }
    let mut coords: Vec<Tuple> = mu.iter().map(|(t, _)| t.clone()).collect();
    for (t, _) in mu.iter() {
        for &(z, _) in chain.row(t[k - 1]) {
            let mut w = t[1..].to_vec();
            w.push(z);
            coords.push(w);
        }
    }
    coords.sort();
    coords.dedup();
    let index: HashMap<&[StateId], usize> = coords
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_slice(), i))
        .collect();
    // For each support tuple: its own coordinate, its mass and the
    // coordinates and log-probabilities of its successors.
    let terms: Vec<Term> = mu
        .iter()
        .map(|(t, m)| {
            let succ = chain
                .row(t[k - 1])
                .iter()
                .map(|&(z, p)| {
                    let mut w = t[1..].to_vec();
                    w.push(z);
                    (index[w.as_slice()], p.ln())
                })
                .collect();
            (index[t.as_slice()], m, succ)
        })
        .collect();
    let eval = |g: &[f64]| -> (f64, Vec<f64>) {
        let mut value = 0.0;
        let mut grad = vec![0.0; g.len()];
        for (i, m, succ) in &terms {
            let lse = log_sum_exp(succ.iter().map(|&(j, lp)| g[j] + lp));
            value += m * (g[*i] - lse);
            grad[*i] += m;
            for &(j, lp) in succ {
                grad[j] -= m * (g[j] + lp - lse).exp();
            }
        }
        (value, grad)
    };
    let g0 = if opts.warm_start {
        warm_start(chain, mu, &coords, opts.barrier)?
    } else {
        vec![0.0; coords.len()]
    };
    let res = ascend(g0, opts, eval);
    if res.diverged {
        return Ok(Bound {
            iterations: res.iterations,
            ..Bound::infinite()
        });
    }
    // Rounding error of the final bracket evaluation.
    let scale: f64 = terms
        .iter()
        .map(|(i, m, succ)| {
            let lse = log_sum_exp(succ.iter().map(|&(j, lp)| res.x[j] + lp));
            m * (res.x[*i].abs() + lse.abs() + 1.0) * (succ.len() as f64 + 2.0)
        })
        .sum();
    let value = (res.value - 64.0 * f64::EPSILON * scale).max(0.0);
    Ok(Bound {
        value,
        residual: res.grad_l1,
        iterations: res.iterations,
        converged: res.converged,
        unbounded: false,
    })
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `g = log(q/p)` on the support, with `q` the conditional law of the last
/// letter given the others, and a large negative value elsewhere. At level
/// 1 the contraction optimizer supplies `g`, shifted down class by class
/// along the reachability order so that later classes barely feed back.
fn warm_start(
    chain: &ChainSpec,
    mu: &SparseMeasure,
    coords: &[Tuple],
    barrier: f64,
) -> Result<Vec<f64>> {
    let k = mu.arity();
    if k >= 2 {
        let prefix = mu.marginal(k - 1)?;
        return Ok(coords
            .iter()
            .map(|t| {
                let m = mu.get(t);
                if m > 0.0 {
                    (m / prefix.get(&t[..k - 1]) / chain.p(t[k - 2], t[k - 1])).ln()
                } else {
                    -barrier
                }
            })
            .collect());
    }
    let d = decompose_classes(chain);
    let verdict = classify_admissible(&d, mu);
    let sol = solve_contraction(chain, &d, mu)?;
    let rank = |x: StateId| {
        d.class_of(x)
            .and_then(|j| verdict.j_mu.iter().position(|&c| c == j))
            .unwrap_or(verdict.j_mu.len())
    };
    let off = -barrier * (verdict.j_mu.len() as f64 + 2.0);
    Ok(coords
        .iter()
        .map(|t| {
            let x = t[0];
            if mu.get(t) == 0.0 {
                off
            } else if sol.value.is_finite() {
                sol.b[x].ln() - barrier * rank(x) as f64
            } else {
                0.0
            }
        })
        .collect())
}
