//! Exact and Monte Carlo ball probabilities for the pair empirical measure,
//! and Ruelle–Lanford slopes built on them.
//!
//! The exact law of the transition counts after `n` steps comes from a
//! forward dynamic program over `(current state, count vector)`. Layers are
//! kept in ordered maps and processed sequentially, so results do not
//! depend on thread scheduling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{ChainSpec, ClassDecomposition, StateId};
use crate::error::{Error, Result};
use crate::measure::{classify_admissible, SparseMeasure};
use crate::rate::rate_i;
use crate::words::{build_transition_table, coupling_count, ln_c_nt};

/// DP states with smaller probability are dropped and reported as defect.
pub const PRUNE_BELOW: f64 = 1e-300;
/// Default bound on the number of DP states in one layer.
pub const DEFAULT_BUDGET: usize = 50_000_000;
/// Slack in the strict ball inequality `Σ|M − nμ| < 2nδ`.
const BALL_SLACK: f64 = 1e-9;
/// Trajectories per Monte Carlo block; each block owns one stream.
pub const MC_BLOCK: u64 = 4096;

/// The positive transitions of a chain in row order.
struct Edges {
    from: Vec<StateId>,
    to: Vec<StateId>,
    prob: Vec<f64>,
    offset: Vec<usize>,
}

impl Edges {
    fn new(chain: &ChainSpec) -> Self {
        let mut e = Edges {
            from: Vec::new(),
            to: Vec::new(),
            prob: Vec::new(),
            offset: vec![0],
        };
        for x in 0..chain.n_states() {
            for &(y, p) in chain.row(x) {
                e.from.push(x);
                e.to.push(y);
                e.prob.push(p);
            }
            e.offset.push(e.from.len());
        }
        e
    }

    fn len(&self) -> usize {
        self.from.len()
    }

    fn row(&self, x: StateId) -> std::ops::Range<usize> {
        self.offset[x]..self.offset[x + 1]
    }

    fn index(&self, x: StateId, y: StateId) -> Option<usize> {
        self.row(x).find(|&e| self.to[e] == y)
    }
}

type Layer = BTreeMap<(StateId, Vec<u16>), f64>;

struct Forward {
    layer: Layer,
    defect: f64,
}

fn forward(
    chain: &ChainSpec,
    edges: &Edges,
    n: usize,
    budget: usize,
    keep: impl Fn(&[u16]) -> bool,
) -> Result<Forward> {
    if n > u16::MAX as usize {
        return Err(Error::Precondition(format!(
            "horizon {n} exceeds {}",
            u16::MAX
        )));
    }
    let mut layer: Layer = BTreeMap::new();
    for &(x, b) in chain.beta_entries() {
        layer.insert((x, vec![0; edges.len()]), b);
    }
    let mut defect = 0.0;
    for _ in 0..n {
        let mut next: Layer = BTreeMap::new();
        for ((x, counts), pr) in &layer {
            for e in edges.row(*x) {
                let mut c = counts.clone();
                c[e] += 1;
                if !keep(&c) {
                    continue;
                }
                *next.entry((edges.to[e], c)).or_insert(0.0) += pr * edges.prob[e];
            }
            if next.len() > budget {
                return Err(Error::BudgetExceeded {
                    states: next.len(),
                    budget,
                });
            }
        }
        next.retain(|_, v| {
            let small = *v < PRUNE_BELOW;
            if small {
                defect += *v;
            }
            !small
        });
        layer = next;
    }
    Ok(Forward { layer, defect })
}

/// Terminal state and sorted nonzero pair counts.
pub type PairCountKey = (StateId, Vec<([StateId; 2], u32)>);

/// One point of the law of `(X_n, n L_n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCountEntry {
    pub terminal: StateId,
    /// Nonzero transition counts, sorted by pair.
    pub counts: Vec<([StateId; 2], u32)>,
    pub probability: f64,
}

/// The exact law of the terminal state and pair counts after `n` steps.
#[derive(Debug, Clone, Serialize)]
pub struct PairCountDistribution {
    pub horizon: usize,
    pub entries: Vec<PairCountEntry>,
    /// Probability dropped by pruning.
    pub defect: f64,
}

impl PairCountDistribution {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    /// Lookup keyed like the entries.
    pub fn as_map(&self) -> BTreeMap<PairCountKey, f64> {
        self.entries
            .iter()
            .map(|e| ((e.terminal, e.counts.clone()), e.probability))
            .collect()
    }
}

pub fn pair_count_distribution(chain: &ChainSpec, n: usize) -> Result<PairCountDistribution> {
    pair_count_distribution_with_budget(chain, n, DEFAULT_BUDGET)
}

pub fn pair_count_distribution_with_budget(
    chain: &ChainSpec,
    n: usize,
    budget: usize,
) -> Result<PairCountDistribution> {
    let edges = Edges::new(chain);
    let f = forward(chain, &edges, n, budget, |_| true)?;
    let mut entries: Vec<PairCountEntry> = f
        .layer
        .into_iter()
        .map(|((x, c), p)| {
            let mut counts: Vec<([StateId; 2], u32)> = c
                .iter()
                .enumerate()
                .filter(|e| *e.1 > 0)
                .map(|(e, &k)| ([edges.from[e], edges.to[e]], k as u32))
                .collect();
            counts.sort_unstable();
            PairCountEntry {
                terminal: x,
                counts,
                probability: p,
            }
        })
        .collect();
    entries.sort_by(|a, b| (a.terminal, &a.counts).cmp(&(b.terminal, &b.counts)));
    Ok(PairCountDistribution {
        horizon: n,
        entries,
        defect: f.defect,
    })
}

/// Brute-force law of `(X_n, n L_n)` by enumerating all words of length
/// `n + 1`; exponential, for validation only.
pub fn enumerate_pair_counts(chain: &ChainSpec, n: usize) -> BTreeMap<PairCountKey, f64> {
    let mut out = BTreeMap::new();
    let mut stack: Vec<(Vec<StateId>, f64)> = chain
        .beta_entries()
        .iter()
        .map(|&(x, b)| (vec![x], b))
        .collect();
    while let Some((w, p)) = stack.pop() {
        if w.len() == n + 1 {
            let mut counts: BTreeMap<[StateId; 2], u32> = BTreeMap::new();
            for pair in w.windows(2) {
                *counts.entry([pair[0], pair[1]]).or_insert(0) += 1;
            }
            *out.entry((w[n], counts.into_iter().collect()))
                .or_insert(0.0) += p;
            continue;
        }
        for &(y, q) in chain.row(w[w.len() - 1]) {
            let mut v = w.clone();
            v.push(y);
            stack.push((v, p * q));
        }
    }
    out
}

/// Target counts `nμ` per edge, and the mass of `μ` off the edges.
fn targets(edges: &Edges, mu: &SparseMeasure) -> Result<(Vec<f64>, f64)> {
    if mu.arity() != 2 {
        return Err(Error::InvalidArity {
            got: mu.arity(),
            why: "balls live in pair measures",
        });
    }
    if !mu.is_probability() {
        return Err(Error::Precondition(
            "ball centre must be a probability measure".into(),
        ));
    }
    let mut on = vec![0.0; edges.len()];
    let mut off = 0.0;
    for (t, v) in mu.iter() {
        match edges.index(t[0], t[1]) {
            Some(e) => on[e] = v,
            None => off += v,
        }
    }
    Ok((on, off))
}

/// `P(L_n ∈ B(μ, δ))` for the open total-variation ball.
///
/// Because `Σ_e (M_e − nμ_e)^+` never decreases along a trajectory and
/// equals half the final `ℓ¹` distance, partial paths that already leave
/// the ball are dropped without changing the result.
pub fn ball_probability(
    chain: &ChainSpec,
    mu: &SparseMeasure,
    delta: f64,
    n: usize,
) -> Result<f64> {
    Ok(ball_probability_detail(chain, mu, delta, n, DEFAULT_BUDGET)?.0)
}

/// Ball probability and pruning defect.
pub fn ball_probability_detail(
    chain: &ChainSpec,
    mu: &SparseMeasure,
    delta: f64,
    n: usize,
    budget: usize,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Precondition("horizon must be positive".into()));
    }
    let edges = Edges::new(chain);
    let (on, _) = targets(&edges, mu)?;
    let target: Vec<f64> = on.iter().map(|v| v * n as f64).collect();
    let limit = n as f64 * delta - BALL_SLACK / 2.0;
    let excess = |c: &[u16]| -> f64 {
        c.iter()
            .zip(&target)
            .map(|(&k, &m)| (k as f64 - m).max(0.0))
            .sum()
    };
    let f = forward(chain, &edges, n, budget, |c| excess(c) < limit)?;
    Ok((f.layer.values().sum(), f.defect))
}

/// Whether a count vector lies in the ball.
fn in_ball(counts: &[u32], target: &[f64], n: usize, delta: f64) -> bool {
    let excess: f64 = counts
        .iter()
        .zip(target)
        .map(|(&k, &m)| (k as f64 - m).max(0.0))
        .sum();
    excess < n as f64 * delta - BALL_SLACK / 2.0
}

/// Finite-`n` decay rates of ball probabilities.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeReport {
    pub grid: Vec<usize>,
    /// `(1/n) log P(L_n ∈ B(μ, δ))`, possibly `−∞`.
    #[serde(serialize_with = "crate::num::ext_vec")]
    pub logprobs: Vec<f64>,
    /// Limit of the fit `a + b/n` through the two largest finite points.
    #[serde(serialize_with = "crate::num::ext")]
    pub slope: f64,
    /// `I²(μ)`.
    #[serde(serialize_with = "crate::num::ext")]
    pub reference: f64,
    /// `|slope + reference| / reference` when the reference is positive and finite.
    #[serde(serialize_with = "crate::num::ext_opt")]
    pub relative_gap: Option<f64>,
    pub defect: f64,
}

pub fn rl_slope(
    chain: &ChainSpec,
    d: &ClassDecomposition,
    mu: &SparseMeasure,
    delta: f64,
    grid: &[usize],
) -> Result<SlopeReport> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] == 0 {
        return Err(Error::Precondition(
            "grid must be a nonempty increasing list of positive integers".into(),
        ));
    }
    let mut logprobs = Vec::with_capacity(grid.len());
    let mut defect: f64 = 0.0;
    for &n in grid {
        let (p, def) = ball_probability_detail(chain, mu, delta, n, DEFAULT_BUDGET)?;
        defect = defect.max(def);
        logprobs.push(if p > 0.0 {
            (p.ln() / n as f64).min(0.0)
        } else {
            f64::NEG_INFINITY
        });
    }
    let finite: Vec<(f64, f64)> = grid
        .iter()
        .zip(&logprobs)
        .filter(|e| e.1.is_finite())
        .map(|(&n, &l)| (n as f64, l))
        .collect();
    let slope = match finite.as_slice() {
        [] => f64::NEG_INFINITY,
        [(_, l)] => *l,
        [.., (n1, l1), (n2, l2)] => ((n2 * l2 - n1 * l1) / (n2 - n1)).min(0.0),
    };
    let reference = rate_i(chain, d, mu, None)?.r_value;
    let relative_gap =
        (reference.is_finite() && reference > 0.0).then(|| (slope + reference).abs() / reference);
    Ok(SlopeReport {
        grid: grid.to_vec(),
        logprobs,
        slope,
        reference,
        relative_gap,
        defect,
    })
}

/// A Monte Carlo estimate with a Wilson score interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub hits: u64,
    pub samples: u64,
    pub seed: u64,
    /// Generator: ChaCha8 seeded with `seed`; block `b` of `MC_BLOCK`
    /// trajectories uses stream `b`.
    pub generator: &'static str,
}

/// Wilson score interval at 95% confidence.
pub fn wilson(hits: u64, samples: u64) -> (f64, f64) {
    let z = 1.959_963_984_540_054_f64;
    let n = samples as f64;
    let p = hits as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    let lower = if hits == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let upper = if hits == samples {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lower, upper)
}

/// Fraction of simulated trajectories with `L_n ∈ B(μ, δ)`.
///
/// Blocks run in parallel but every block has its own stream, so the
/// result depends only on `seed` and `samples`.
pub fn monte_carlo_ball(
    chain: &ChainSpec,
    mu: &SparseMeasure,
    delta: f64,
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::Precondition("samples must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::Precondition("horizon must be positive".into()));
    }
    let edges = Edges::new(chain);
    let (on, _) = targets(&edges, mu)?;
    let target: Vec<f64> = on.iter().map(|v| v * n as f64).collect();
    let beta = chain.beta_entries();
    let blocks = samples.div_ceil(MC_BLOCK);
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = MC_BLOCK.min(samples - b * MC_BLOCK);
            let mut counts = vec![0u32; edges.len()];
            let mut hits = 0u64;
            for _ in 0..count {
                counts.iter_mut().for_each(|c| *c = 0);
                let mut x = sample(beta.iter().copied(), rng.random::<f64>());
                for _ in 0..n {
                    let u = rng.random::<f64>();
                    let e = sample(edges.row(x).map(|e| (e, edges.prob[e])), u);
                    counts[e] += 1;
                    x = edges.to[e];
                }
                if in_ball(&counts, &target, n, delta) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let (lower, upper) = wilson(hits, samples);
    Ok(McEstimate {
        estimate: hits as f64 / samples as f64,
        lower,
        upper,
        hits,
        samples,
        seed,
        generator: "chacha8-stream-per-block",
    })
}

/// Inverse-CDF draw; the last item absorbs rounding.
fn sample<T: Copy>(items: impl Iterator<Item = (T, f64)>, u: f64) -> T {
    let mut acc = 0.0;
    let mut last = None;
    for (item, p) in items {
        acc += p;
        last = Some(item);
        if u < acc {
            return item;
        }
    }
    last.expect("rows and the initial law are nonempty")
}

/// Both sides of the decoupled inequality
/// `P_{t+1}(W_t(μ, 20δ)) ≥ C_{n,t} P_{n+1}(W_n(μ_1, δ))^{N_1} P_{n+1}(W_n(μ_2, δ))^{N_2}`
/// with `S_2 = S` and `μ = (μ_1 + μ_2)/2`.
#[derive(Debug, Clone, Serialize)]
pub struct DecoupledCheck {
    pub n: usize,
    pub t: usize,
    pub big_n: usize,
    pub lhs: f64,
    #[serde(serialize_with = "crate::num::ext")]
    pub ln_rhs: f64,
    pub holds: bool,
}

/// Evaluates the decoupled inequality for `N` words of length `n + 1`,
/// taking the largest `t` with `N = ⌈(t+1)/(n(1−4δ))⌉`.
///
/// The constant comes from the transition table on the full classes of
/// `J_μ`. Ball probabilities are exact.
pub fn decoupled_inequality(
    chain: &ChainSpec,
    d: &ClassDecomposition,
    mu1: &SparseMeasure,
    mu2: &SparseMeasure,
    delta: f64,
    n: usize,
    big_n: usize,
) -> Result<DecoupledCheck> {
    if !(delta > 0.0 && delta <= 1.0 / 12.0) {
        return Err(Error::Precondition("δ must lie in (0, 1/12]".into()));
    }
    let mu = mu1.plus(mu2)?.scaled(0.5);
    let verdict = classify_admissible(d, &mu);
    if !verdict.is_admissible()
        || !classify_admissible(d, mu1).is_admissible()
        || !classify_admissible(d, mu2).is_admissible()
    {
        return Err(Error::Inadmissible(Box::new(verdict)));
    }
    let t = ((big_n * n) as f64 * (1.0 - 4.0 * delta)).floor() as usize;
    let t = t
        .checked_sub(1)
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::Precondition("t would be zero".into()))?;
    debug_assert_eq!(coupling_count(n, t, delta), big_n);
    let k: Vec<StateId> = verdict
        .j_mu
        .iter()
        .flat_map(|&j| d.class(j).iter().copied())
        .collect();
    let table = build_transition_table(chain, d, &k, &verdict.j_mu)?;
    let lhs = ball_probability(chain, &mu, 20.0 * delta, t)?;
    let (n1, n2) = (big_n / 2, big_n - big_n / 2);
    let p1 = ball_probability(chain, mu1, delta, n)?;
    let p2 = ball_probability(chain, mu2, delta, n)?;
    let ln_rhs = ln_c_nt(&table, n, big_n) + n1 as f64 * p1.ln() + n2 as f64 * p2.ln();
    let holds = ln_rhs == f64::NEG_INFINITY || lhs.ln() >= ln_rhs - 1e-12;
    Ok(DecoupledCheck {
        n,
        t,
        big_n,
        lhs,
        ln_rhs,
        holds,
    })
}
