//! The level-1 rate as a contraction of the pair rate.
//!
//! `I^(1)(μ) = min { R²(ν) : ν balanced, ν^(1) = μ }`. Writing
//! `ν(x,y) = μ(x) q(x,y)`, this is the I-projection of `μ ⊗ p` onto the
//! pair measures with both marginals equal to `μ`. The feasible set is a
//! transportation polytope; a max-flow finds a feasible point and its
//! residual graph gives the largest support any feasible point can have.
//! Sinkhorn scaling on that support converges to the projection.

use std::collections::VecDeque;

use crate::chain::{ChainSpec, ClassDecomposition};
use crate::error::{Error, Result};
use crate::measure::{classify_admissible, SparseMeasure};

use super::conditional_entropy;

const SINKHORN_TOL: f64 = 1e-14;
const SINKHORN_MAX_ITER: usize = 100_000;
/// Flows below this are treated as zero.
const FLOW_EPS: f64 = 1e-13;

/// Minimizer of the contraction problem.
#[derive(Debug, Clone)]
pub struct ContractionSolution {
    /// `I^(1)(μ)`; infinite when `μ` is not admissible or no balanced pair
    /// measure has first marginal `μ`.
    pub value: f64,
    /// The optimal pair measure `ν`.
    pub nu: Option<SparseMeasure>,
    /// Sinkhorn scalings indexed by state, `ν(x,y) = a(x) μ(x) p(x,y) b(y)`;
    /// one outside the support.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `I^(1)(μ)` for a probability measure on `S`.
pub fn rate_i1(chain: &ChainSpec, d: &ClassDecomposition, mu: &SparseMeasure) -> Result<f64> {
    Ok(solve_contraction(chain, d, mu)?.value)
}

pub fn solve_contraction(
    chain: &ChainSpec,
    d: &ClassDecomposition,
    mu: &SparseMeasure,
) -> Result<ContractionSolution> {
    if mu.arity() != 1 {
        return Err(Error::InvalidArity {
            got: mu.arity(),
            why: "the level-1 rate takes a measure on S",
        });
    }
    let n = chain.n_states();
    let infinite = ContractionSolution {
        value: f64::INFINITY,
        nu: None,
        a: vec![1.0; n],
        b: vec![1.0; n],
        iterations: 0,
        converged: true,
    };
    if !classify_admissible(d, mu).is_admissible() {
        return Ok(infinite);
    }
    let support: Vec<usize> = mu.iter().map(|(t, _)| t[0]).collect();
    let m = support.len();
    let mass: Vec<f64> = mu.iter().map(|(_, v)| v).collect();
    let local = |x: usize| support.binary_search(&x).ok();
    // Candidate edges between support states inside one class.
    let edges: Vec<Vec<(usize, f64)>> = support
        .iter()
        .map(|&x| {
            chain
                .row(x)
                .iter()
                .filter(|&&(y, _)| d.class_of(y) == d.class_of(x))
                .filter_map(|&(y, p)| local(y).map(|j| (j, p)))
                .collect()
        })
        .collect();
    let Some(flow) = feasible_flow(&mass, &edges) else {
        return Ok(infinite);
    };
    let keep = maximal_support(&edges, &flow);
    let kernel: Vec<Vec<(usize, f64)>> = (0..m)
        .map(|i| {
            edges[i]
                .iter()
                .zip(&keep[i])
                .filter(|e| *e.1)
                .map(|(&(j, p), _)| (j, mass[i] * p))
                .collect()
        })
        .collect();
    let (a, b, iterations, converged) = sinkhorn(&mass, &kernel);
    let mut entries = Vec::new();
    for i in 0..m {
        for &(j, kv) in &kernel[i] {
            entries.push((vec![support[i], support[j]], a[i] * kv * b[j]));
        }
    }
    let nu = SparseMeasure::from_entries(2, entries)?;
    let value = conditional_entropy(chain, &nu);
    let mut aa = vec![1.0; n];
    let mut bb = vec![1.0; n];
    for i in 0..m {
        aa[support[i]] = a[i];
        bb[support[i]] = b[i];
    }
    Ok(ContractionSolution {
        value,
        nu: Some(nu),
        a: aa,
        b: bb,
        iterations,
        converged,
    })
}

/// A transport plan with both marginals `mass` on the given edges, by
/// Edmonds–Karp; `None` if none exists.
fn feasible_flow(mass: &[f64], edges: &[Vec<(usize, f64)>]) -> Option<Vec<Vec<f64>>> {
    let m = mass.len();
    // Nodes: source 0, rows 1..=m, columns m+1..=2m, sink 2m+1.
    let nn = 2 * m + 2;
    let (s, t) = (0, 2 * m + 1);
    let mut cap = vec![vec![0.0; nn]; nn];
    let mut adj = vec![Vec::new(); nn];
    let link = |adj: &mut Vec<Vec<usize>>, u: usize, v: usize| {
        adj[u].push(v);
        adj[v].push(u);
    };
    for i in 0..m {
        cap[s][1 + i] = mass[i];
        link(&mut adj, s, 1 + i);
        cap[1 + m + i][t] = mass[i];
        link(&mut adj, 1 + m + i, t);
        for &(j, _) in &edges[i] {
            cap[1 + i][1 + m + j] = 2.0;
            link(&mut adj, 1 + i, 1 + m + j);
        }
    }
    let orig = cap.clone();
    let mut total = 0.0;
    loop {
        let mut prev = vec![usize::MAX; nn];
        prev[s] = s;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if prev[v] == usize::MAX && cap[u][v] > FLOW_EPS {
                    prev[v] = u;
                    q.push_back(v);
                }
            }
        }
        if prev[t] == usize::MAX {
            break;
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = t;
        while v != s {
            bottleneck = bottleneck.min(cap[prev[v]][v]);
            v = prev[v];
        }
        let mut v = t;
        while v != s {
            cap[prev[v]][v] -= bottleneck;
            cap[v][prev[v]] += bottleneck;
            v = prev[v];
        }
        total += bottleneck;
    }
    let need: f64 = mass.iter().sum();
    if total < need - 1e-9 {
        return None;
    }
    Some(
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| (orig[1 + i][1 + m + j] - cap[1 + i][1 + m + j]).max(0.0))
                    .collect()
            })
            .collect(),
    )
}

/// Edges carrying mass in some feasible plan: those with flow, or closing a
/// cycle in the residual graph of the plan.
fn maximal_support(edges: &[Vec<(usize, f64)>], flow: &[Vec<f64>]) -> Vec<Vec<bool>> {
    let m = edges.len();
    // Residual graph: row i -> column j always; column j -> row i on flow.
    let reaches_row = |col: usize| -> Vec<bool> {
        let mut seen_row = vec![false; m];
        let mut seen_col = vec![false; m];
        seen_col[col] = true;
        let mut q = VecDeque::from([(false, col)]);
        while let Some((is_row, u)) = q.pop_front() {
            if is_row {
                for &(j, _) in &edges[u] {
                    if !seen_col[j] {
                        seen_col[j] = true;
                        q.push_back((false, j));
                    }
                }
            } else {
                for i in 0..m {
                    if flow[i][u] > FLOW_EPS && !seen_row[i] {
                        seen_row[i] = true;
                        q.push_back((true, i));
                    }
                }
            }
        }
        seen_row
    };
    let from_col: Vec<Vec<bool>> = (0..m).map(reaches_row).collect();
    (0..m)
        .map(|i| {
            edges[i]
                .iter()
                .map(|&(j, _)| flow[i][j] > FLOW_EPS || from_col[j][i])
                .collect()
        })
        .collect()
}

/// Scalings `a, b` with `a(i) Σ_j K(i,j) b(j) = mass(i)` and
/// `b(j) Σ_i a(i) K(i,j) = mass(j)`.
fn sinkhorn(mass: &[f64], kernel: &[Vec<(usize, f64)>]) -> (Vec<f64>, Vec<f64>, usize, bool) {
    let m = mass.len();
    let mut a = vec![1.0; m];
    let mut b = vec![1.0; m];
    for it in 1..=SINKHORN_MAX_ITER {
        for i in 0..m {
            let s: f64 = kernel[i].iter().map(|&(j, k)| k * b[j]).sum();
            a[i] = mass[i] / s;
        }
        let mut col = vec![0.0; m];
        for i in 0..m {
            for &(j, k) in &kernel[i] {
                col[j] += a[i] * k;
            }
        }
        for j in 0..m {
            b[j] = mass[j] / col[j];
        }
        let err: f64 = (0..m)
            .map(|i| (a[i] * kernel[i].iter().map(|&(j, k)| k * b[j]).sum::<f64>() - mass[i]).abs())
            .sum();
        if err < SINKHORN_TOL {
            return (a, b, it, true);
        }
    }
    (a, b, SINKHORN_MAX_ITER, false)
}
