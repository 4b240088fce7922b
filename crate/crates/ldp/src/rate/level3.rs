//! Markov measures, entropy of their finite marginals relative to the path
//! law, and the lift of level-k measures to pair measures of the chain of
//! overlapping `(k−1)`-tuples.

use crate::chain::{path_probability, ChainOptions, ChainSpec, StateId, Word};
use crate::error::{Error, Result};
use crate::measure::{is_balanced, SparseMeasure, Tuple};

use super::relative_entropy;

/// Tolerance for `πq = π`.
const STATIONARITY_TOL: f64 = 1e-10;

/// The stationary Markov law with marginal `π` and kernel `q`.
#[derive(Debug, Clone)]
pub struct MarkovMeasure {
    pi: Vec<f64>,
    q: Vec<Vec<(StateId, f64)>>,
}

impl MarkovMeasure {
    /// Validates that rows of `q` are stochastic and `π` is stationary.
    pub fn new(pi: Vec<f64>, q: Vec<Vec<(StateId, f64)>>) -> Result<Self> {
        let n = pi.len();
        if q.len() != n {
            return Err(Error::Precondition(format!(
                "kernel has {} rows for {n} states",
                q.len()
            )));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-9 || pi.iter().any(|&v| v.is_nan() || v < 0.0) {
            return Err(Error::Precondition("π is not a probability vector".into()));
        }
        let mut pq = vec![0.0; n];
        for (x, row) in q.iter().enumerate() {
            let s: f64 = row.iter().map(|e| e.1).sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|e| e.0 >= n || e.1.is_nan() || e.1 < 0.0) {
                return Err(Error::Precondition(format!(
                    "row {x} of q is not stochastic"
                )));
            }
            for &(y, v) in row {
                pq[y] += pi[x] * v;
            }
        }
        if pq
            .iter()
            .zip(&pi)
            .any(|(a, b)| (a - b).abs() > STATIONARITY_TOL)
        {
            return Err(Error::Precondition("π is not stationary for q".into()));
        }
        let q = q
            .into_iter()
            .map(|r| r.into_iter().filter(|e| e.1 > 0.0).collect())
            .collect();
        Ok(Self { pi, q })
    }

    pub fn from_dense(pi: &[f64], q: &[Vec<f64>]) -> Result<Self> {
        let rows = q
            .iter()
            .map(|r| {
                r.iter()
                    .copied()
                    .enumerate()
                    .filter(|e| e.1 > 0.0)
                    .collect()
            })
            .collect();
        Self::new(pi.to_vec(), rows)
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn q(&self, x: StateId, y: StateId) -> f64 {
        self.q[x].iter().find(|e| e.0 == y).map_or(0.0, |e| e.1)
    }

    pub fn row(&self, x: StateId) -> &[(StateId, f64)] {
        &self.q[x]
    }
}

fn check_states(chain: &ChainSpec, m: &MarkovMeasure) -> Result<()> {
    if chain.n_states() != m.pi.len() {
        return Err(Error::Precondition(format!(
            "Markov measure has {} states, chain has {}",
            m.pi.len(),
            chain.n_states()
        )));
    }
    Ok(())
}

/// `H(π|β)`.
fn initial_entropy(chain: &ChainSpec, m: &MarkovMeasure) -> Result<f64> {
    let pi = SparseMeasure::from_entries(1, m.pi.iter().enumerate().map(|(x, &v)| (vec![x], v)))?;
    let beta =
        SparseMeasure::from_entries(1, chain.beta_entries().iter().map(|&(x, v)| (vec![x], v)))?;
    relative_entropy(&pi, &beta)
}

/// `Σ_x π(x) H(q(x,·) | p(x,·))`, the limit of `(1/k) H(μ^(k) | P_k)`.
pub fn entropy_rate_limit(chain: &ChainSpec, m: &MarkovMeasure) -> Result<f64> {
    check_states(chain, m)?;
    let mut s = 0.0;
    for (x, &w) in m.pi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for &(y, v) in &m.q[x] {
            let p = chain.p(x, y);
            if p == 0.0 {
                return Ok(f64::INFINITY);
            }
            s += w * v * (v / p).ln();
        }
    }
    Ok(s.max(0.0))
}

/// `(1/k) H(μ^(k) | P_k) = (1/k) [H(π|β) + (k−1) Σ_x π(x) H(q(x,·)|p(x,·))]`.
pub fn level3_marginal_entropy(chain: &ChainSpec, m: &MarkovMeasure, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArity {
            got: 0,
            why: "marginal length must be positive",
        });
    }
    check_states(chain, m)?;
    let h0 = initial_entropy(chain, m)?;
    let r = entropy_rate_limit(chain, m)?;
    if h0.is_infinite() || (k > 1 && r.is_infinite()) {
        return Ok(f64::INFINITY);
    }
    Ok((h0 + (k - 1) as f64 * r) / k as f64)
}

/// The `k`-marginal `μ^(k)(w) = π(w_1) Π q(w_i, w_{i+1})` by enumeration.
pub fn markov_marginal(m: &MarkovMeasure, k: usize) -> Result<SparseMeasure> {
    if k == 0 {
        return Err(Error::InvalidArity {
            got: 0,
            why: "marginal length must be positive",
        });
    }
    let mut layer: Vec<(Word, f64)> =
        m.pi.iter()
            .enumerate()
            .filter(|e| *e.1 > 0.0)
            .map(|(x, &v)| (vec![x], v))
            .collect();
    for _ in 1..k {
        let mut next = Vec::with_capacity(layer.len() * 2);
        for (w, v) in &layer {
            for &(y, qv) in &m.q[*w.last().expect("nonempty")] {
                let mut w2 = w.clone();
                w2.push(y);
                next.push((w2, v * qv));
            }
        }
        layer = next;
    }
    SparseMeasure::from_entries(k, layer)
}

/// `H(μ | P_k)` with `P_k(w) = β(w_1) p(w)`, by direct summation.
pub fn path_law_entropy(chain: &ChainSpec, mu: &SparseMeasure) -> f64 {
    let mut s = 0.0;
    for (t, v) in mu.iter() {
        let p = path_probability(chain, t);
        if p == 0.0 {
            return f64::INFINITY;
        }
        s += v * (v / p).ln();
    }
    s
}

/// The chain of overlapping `(k−1)`-tuples and the lifted pair measure.
#[derive(Debug, Clone)]
pub struct LiftedChain {
    pub chain: ChainSpec,
    /// `Φ⁻¹(μ)`: mass `μ(u_1 … u_{k−1} v_{k−1})` on `(u, v)` with `v` the
    /// shift of `u` extended by one letter.
    pub measure: SparseMeasure,
    /// `(k−1)`-tuple of each lifted state.
    pub tuples: Vec<Tuple>,
}

/// Lifts a balanced level-`k` measure, `k ≥ 3`, to a pair measure.
///
/// Lifted states are all `(k−1)`-tuples, labelled by their letters joined
/// with commas. The lifted kernel moves `u → (u_2 … u_{k−1} z)` with
/// probability `p(u_{k−1}, z)` and the initial law is `β(u_1) p(u)`.
pub fn lift_to_pairs_level_k(chain: &ChainSpec, mu: &SparseMeasure) -> Result<LiftedChain> {
    let k = mu.arity();
    if k < 3 {
        return Err(Error::InvalidArity {
            got: k,
            why: "lifting needs arity ≥ 3",
        });
    }
    if !is_balanced(mu)? {
        return Err(Error::NotBalanced);
    }
    let n = chain.n_states();
    let len = k - 1;
    let count = n.checked_pow(len as u32).ok_or(Error::BudgetExceeded {
        states: usize::MAX,
        budget: 1 << 24,
    })?;
    if count > 1 << 24 {
        return Err(Error::BudgetExceeded {
            states: count,
            budget: 1 << 24,
        });
    }
    let tuples: Vec<Tuple> = (0..count)
        .map(|mut c| {
            let mut t = vec![0; len];
            for slot in t.iter_mut().rev() {
                *slot = c % n;
                c /= n;
            }
            t
        })
        .collect();
    let id = |t: &[StateId]| t.iter().fold(0usize, |acc, &x| acc * n + x);
    let labels = tuples
        .iter()
        .map(|t| {
            t.iter()
                .map(|&x| chain.label(x))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    let mut kernel = Vec::new();
    for t in &tuples {
        for &(z, p) in chain.row(t[len - 1]) {
            let mut v = t[1..].to_vec();
            v.push(z);
            kernel.push((id(t), id(&v), p));
        }
    }
    let beta: Vec<(usize, f64)> = tuples
        .iter()
        .map(|t| (id(t), path_probability(chain, t)))
        .filter(|e| e.1 > 0.0)
        .collect();
    let lifted = ChainSpec::new(
        labels,
        kernel,
        beta,
        ChainOptions {
            renormalize: true,
            ..Default::default()
        },
    )?;
    let measure = SparseMeasure::from_entries(
        2,
        mu.iter()
            .map(|(w, v)| (vec![id(&w[..len]), id(&w[1..])], v)),
    )?;
    Ok(LiftedChain {
        chain: lifted,
        measure,
        tuples,
    })
}

/// Parses a kernel file of `trans <from> <to> <prob>` lines over the
/// chain's labels; `state` and `init` lines are ignored.
pub fn parse_kernel(chain: &ChainSpec, text: &str) -> Result<Vec<Vec<(StateId, f64)>>> {
    let mut rows = vec![Vec::new(); chain.n_states()];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["trans", a, b, v] => {
                let v: f64 = v.parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    msg: "invalid probability".into(),
                })?;
                rows[chain.require_id(a)?].push((chain.require_id(b)?, v));
            }
            ["state", ..] | ["init", ..] => {}
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "expected `trans <from> <to> <prob>`".into(),
                })
            }
        }
    }
    Ok(rows)
}
