//! Minimal cycles, the greedy balanced-measure decomposition and words whose
//! pair empirical measures approximate a balanced admissible measure.

use serde::Serialize;

use crate::chain::{
    decompose_classes, log_word_probability, tarjan_scc, ChainSpec, ClassDecomposition, StateId,
    Word,
};
use crate::error::{Error, Result};
use crate::measure::{
    classify_admissible, in_allowed_support, is_balanced, l1_distance, tv_distance, SparseMeasure,
};
use crate::rate::rate_r;
use crate::words::{connecting_word, count_measure, distances_to, empirical};

/// Longest word `approximating_words` will build.
pub const MAX_WORD_LEN: usize = 1 << 20;

/// A word `v v_1` in which every letter of `v` appears once.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct MinimalCycle {
    word: Word,
}

impl MinimalCycle {
    pub fn new(word: Word) -> Result<Self> {
        let ok = word.len() >= 2 && word[0] == word[word.len() - 1] && {
            let mut body = word[..word.len() - 1].to_vec();
            body.sort_unstable();
            body.windows(2).all(|w| w[0] != w[1])
        };
        if !ok {
            return Err(Error::Precondition(format!(
                "{word:?} is not a minimal cycle"
            )));
        }
        Ok(Self { word })
    }

    pub fn word(&self) -> &[StateId] {
        &self.word
    }

    /// Number of transitions, `|u| − 1`.
    pub fn period(&self) -> usize {
        self.word.len() - 1
    }

    /// `M[u]`.
    pub fn count_measure(&self) -> SparseMeasure {
        count_measure(&self.word)
    }

    fn edges(&self) -> impl Iterator<Item = [StateId; 2]> + '_ {
        self.word.windows(2).map(|w| [w[0], w[1]])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CycleEnumeration {
    pub cycles: Vec<MinimalCycle>,
    pub truncated: bool,
}

/// All positive-probability minimal cycles through `support` only, ordered
/// by length then lexicographically, keeping at most `cap`.
///
/// Every rotation of a cycle is listed.
pub fn enumerate_minimal_cycles(
    chain: &ChainSpec,
    support: &[StateId],
    cap: usize,
) -> CycleEnumeration {
    let n = chain.n_states();
    let mut inside = vec![false; n];
    for &x in support.iter().filter(|&&x| x < n) {
        inside[x] = true;
    }
    let succ = |x: StateId| -> Vec<StateId> {
        if !inside[x] {
            return Vec::new();
        }
        chain
            .row(x)
            .iter()
            .map(|e| e.0)
            .filter(|&y| inside[y])
            .collect()
    };
    let comps = tarjan_scc(n, |x| succ(x).into_iter());
    let mut comp_of = vec![usize::MAX; n];
    for (c, comp) in comps.iter().enumerate() {
        for &x in comp {
            comp_of[x] = c;
        }
    }
    let longest = comps
        .iter()
        .filter(|c| inside[c[0]])
        .map(Vec::len)
        .max()
        .unwrap_or(0);
    let mut cycles = Vec::new();
    let mut truncated = false;
    'outer: for period in 1..=longest {
        let mut layer = Vec::new();
        for s in (0..n).filter(|&s| inside[s]) {
            if comps[comp_of[s]].len() < period {
                continue;
            }
            if period == 1 {
                if chain.p(s, s) > 0.0 {
                    layer.push(vec![s, s]);
                }
                continue;
            }
            let mut path = vec![s];
            let mut on = vec![false; n];
            on[s] = true;
            extend(&succ, &comp_of, period, &mut path, &mut on, &mut layer);
        }
        layer.sort();
        for w in layer {
            if cycles.len() == cap {
                truncated = true;
                break 'outer;
            }
            cycles.push(MinimalCycle { word: w });
        }
    }
    CycleEnumeration { cycles, truncated }
}

fn extend(
    succ: &impl Fn(StateId) -> Vec<StateId>,
    comp_of: &[usize],
    period: usize,
    path: &mut Vec<StateId>,
    on: &mut [bool],
    out: &mut Vec<Word>,
) {
    let s = path[0];
    let x = *path.last().expect("nonempty");
    for y in succ(x) {
        if comp_of[y] != comp_of[s] {
            continue;
        }
        if path.len() == period {
            if y == s {
                let mut w = path.clone();
                w.push(s);
                out.push(w);
            }
        } else if !on[y] {
            on[y] = true;
            path.push(y);
            extend(succ, comp_of, period, path, on, out);
            path.pop();
            on[y] = false;
        }
    }
}

/// A minimal cycle `v` and the largest `α` with `ν ≥ α M[v]`.
///
/// The walk starts at the smallest state of the support of `ν^(1)` and
/// always moves to the smallest state `y` with `ν(x, y) > 0`.
pub fn find_cycle_in(nu: &SparseMeasure) -> Result<(MinimalCycle, f64)> {
    if nu.arity() != 2 {
        return Err(Error::InvalidArity {
            got: nu.arity(),
            why: "cycles live in pair measures",
        });
    }
    if nu.is_empty() {
        return Err(Error::Precondition(
            "the zero measure contains no cycle".into(),
        ));
    }
    if nu.iter().any(|(_, v)| v < 0.0) {
        return Err(Error::Precondition("measure has negative mass".into()));
    }
    if !is_balanced(nu)? {
        return Err(Error::NotBalanced);
    }
    let next = |x: StateId| nu.iter().find(|(t, _)| t[0] == x).map(|(t, _)| t[1]);
    let start = nu.iter().next().map(|(t, _)| t[0]).expect("nonempty");
    let mut path = vec![start];
    loop {
        let x = *path.last().expect("nonempty");
        let y = next(x).ok_or_else(|| Error::Precondition("walk left the support".into()))?;
        if let Some(i) = path.iter().position(|&z| z == y) {
            let mut w = path[i..].to_vec();
            w.push(y);
            let cycle = MinimalCycle { word: w };
            let alpha = cycle
                .edges()
                .map(|e| nu.get(&e))
                .fold(f64::INFINITY, f64::min);
            return Ok((cycle, alpha));
        }
        path.push(y);
    }
}

/// `μ_n = Σ_k α_{n,k} M[u^k]` together with diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct CycleDecomposition {
    pub cycles: Vec<MinimalCycle>,
    /// Greedy coefficients `a_k`.
    #[serde(skip)]
    pub greedy: Vec<f64>,
    /// `α_{n,k}`: the greedy coefficients with the missing mass folded
    /// into the first cycle.
    pub coefficients: Vec<f64>,
    #[serde(skip)]
    pub approximant: SparseMeasure,
    /// `‖μ_n − μ‖_TV`.
    pub residual_tv: f64,
    /// `‖μ_k − μ‖_TV` for `k = 1..=n`.
    pub residual_history: Vec<f64>,
    /// Whether the cycle enumeration hit its cap.
    pub truncated: bool,
}

/// Default cap on enumerated cycles.
pub const CYCLE_CAP: usize = 100_000;

/// Greedy decomposition of a balanced probability measure in `D²` over the
/// first `n_terms` enumerated cycles.
///
/// The enumeration is rotated to start at the first cycle with a positive
/// coefficient.
pub fn decompose_balanced(
    chain: &ChainSpec,
    mu: &SparseMeasure,
    n_terms: usize,
) -> Result<CycleDecomposition> {
    if mu.arity() != 2 {
        return Err(Error::InvalidArity {
            got: mu.arity(),
            why: "decomposition takes a pair measure",
        });
    }
    if !mu.is_probability() {
        return Err(Error::Precondition(
            "measure is not a probability measure".into(),
        ));
    }
    if !is_balanced(mu)? {
        return Err(Error::NotBalanced);
    }
    if !in_allowed_support(chain, mu) {
        return Err(Error::Precondition(
            "measure charges a forbidden transition".into(),
        ));
    }
    let support = mu.marginal(1)?.support_states();
    let en = enumerate_minimal_cycles(chain, &support, CYCLE_CAP);
    let first = en
        .cycles
        .iter()
        .position(|c| c.edges().all(|e| mu.get(&e) > 0.0))
        .ok_or_else(|| {
            Error::Precondition("no positive-probability cycle inside the support".into())
        })?;
    let mut cycles = en.cycles;
    cycles.rotate_left(first);
    cycles.truncate(n_terms.max(1));

    let mut nu = SparseMeasure::null(2);
    let mut greedy = Vec::with_capacity(cycles.len());
    let mut history = Vec::with_capacity(cycles.len());
    let mut mass = 0.0;
    for c in &cycles {
        let a = c
            .edges()
            .map(|e| mu.get(&e) - nu.get(&e))
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        if a > 0.0 {
            nu = nu.plus(&c.count_measure().scaled(a))?;
            mass += a * c.period() as f64;
        }
        greedy.push(a);
        let approx = fold_remainder(&nu, &cycles[0], mass)?;
        history.push(tv_distance(&approx, mu)?);
    }
    let approximant = fold_remainder(&nu, &cycles[0], mass)?;
    let mut coefficients = greedy.clone();
    coefficients[0] += (1.0 - mass) / cycles[0].period() as f64;
    Ok(CycleDecomposition {
        cycles,
        greedy,
        coefficients,
        residual_tv: *history.last().expect("at least one term"),
        approximant,
        residual_history: history,
        truncated: en.truncated,
    })
}

fn fold_remainder(nu: &SparseMeasure, first: &MinimalCycle, mass: f64) -> Result<SparseMeasure> {
    nu.plus(
        &first
            .count_measure()
            .scaled((1.0 - mass) / first.period() as f64),
    )
}

/// A word whose pair empirical measure is certified close to `μ`.
#[derive(Debug, Clone, Serialize)]
pub struct Approximation {
    pub word: Word,
    /// Cycles used, in the order they appear in the word.
    pub cycles: Vec<MinimalCycle>,
    pub coefficients: Vec<f64>,
    /// Powers `λ_{N,k} = ⌊α_{n,k} N⌋`.
    pub powers: Vec<usize>,
    pub big_n: usize,
    /// `‖L[w] − μ‖_TV`, measured.
    pub tv: f64,
    /// The certified upper bound on `‖L[w] − μ‖`, valid in `ℓ¹` and hence
    /// in total variation.
    pub certified: f64,
}

/// Builds `w = ξ^1 (ũ^1)^{λ_1} u^1_1 ξ^2 (ũ^2)^{λ_2} u^2_1 …` with
/// `‖L[w] − μ‖ ≤ 3/m`.
///
/// `N` doubles until the bound
/// `(τ+1)n/ℓ_N + ‖μ_n − μ‖ + Σ_k |λ_{N,k}/ℓ_N − α_{n,k}| (|u^k| − 1)`
/// drops below `3/m`, with norms taken in `ℓ¹`.
pub fn approximating_words(
    chain: &ChainSpec,
    d: &ClassDecomposition,
    mu: &SparseMeasure,
    m: usize,
) -> Result<Approximation> {
    if m == 0 {
        return Err(Error::Precondition(
            "precision index must be positive".into(),
        ));
    }
    let verdict = classify_admissible(d, mu);
    if !verdict.is_admissible() {
        return Err(Error::Inadmissible(Box::new(verdict)));
    }
    let target = 1.0 / m as f64;
    let full = decompose_balanced(chain, mu, usize::MAX)?;
    // Fewest terms reaching ‖μ_n − μ‖ ≤ 1/m in ℓ¹.
    let n_terms = full
        .residual_history
        .iter()
        .position(|&r| 2.0 * r <= target)
        .map_or(full.cycles.len(), |i| i + 1);
    let dec = decompose_balanced(chain, mu, n_terms)?;
    let residual = l1_distance(&dec.approximant, mu)?;

    let rank = |x: StateId| {
        d.class_of(x)
            .and_then(|j| verdict.j_mu.iter().position(|&c| c == j))
            .unwrap_or(usize::MAX)
    };
    let mut terms: Vec<(MinimalCycle, f64)> = dec
        .cycles
        .into_iter()
        .zip(dec.coefficients)
        .filter(|t| t.1 > 0.0)
        .collect();
    terms.sort_by_key(|(c, _)| rank(c.word[0]));

    let n = chain.n_states();
    let mut rev = vec![Vec::new(); n];
    for x in 0..n {
        for &(y, _) in chain.row(x) {
            rev[y].push(x);
        }
    }
    let mut connectors: Vec<Word> = Vec::with_capacity(terms.len());
    for (k, (c, _)) in terms.iter().enumerate() {
        let y = c.word[0];
        let dist = distances_to(n, &rev, y);
        let xi = if k == 0 {
            entry_word(chain, &dist, y)?
        } else {
            connecting_word(chain, &dist, terms[k - 1].0.word[0], y)
                .ok_or_else(|| Error::Precondition("consecutive cycles are not connected".into()))?
        };
        connectors.push(xi);
    }
    let tau = connectors.iter().map(Vec::len).max().unwrap_or(0);

    let mut big_n = 1usize;
    loop {
        let powers: Vec<usize> = terms
            .iter()
            .map(|(_, a)| (a * big_n as f64).floor() as usize)
            .collect();
        if powers.iter().all(|&l| l >= 1) {
            let len: usize = connectors.iter().map(Vec::len).sum::<usize>()
                + terms
                    .iter()
                    .zip(&powers)
                    .map(|((c, _), &l)| c.period() * l + 1)
                    .sum::<usize>();
            if len > MAX_WORD_LEN {
                return Err(Error::BudgetExceeded {
                    states: len,
                    budget: MAX_WORD_LEN,
                });
            }
            let ell = (len - 1) as f64;
            let bound = (tau + 1) as f64 * terms.len() as f64 / ell
                + residual
                + terms
                    .iter()
                    .zip(&powers)
                    .map(|((c, a), &l)| (l as f64 / ell - a).abs() * c.period() as f64)
                    .sum::<f64>();
            if bound <= 3.0 * target {
                let mut word = Vec::with_capacity(len);
                for (((c, _), &l), xi) in terms.iter().zip(&powers).zip(&connectors) {
                    word.extend_from_slice(xi);
                    for _ in 0..l {
                        word.extend_from_slice(&c.word[..c.period()]);
                    }
                    word.push(c.word[0]);
                }
                debug_assert_eq!(word.len(), len);
                debug_assert!(
                    chain.beta(word[0]) > 0.0
                        && log_word_probability(chain, &word) > f64::NEG_INFINITY
                );
                let tv = tv_distance(&empirical(&word), mu)?;
                let (cycles, coefficients) = terms.into_iter().unzip();
                return Ok(Approximation {
                    word,
                    cycles,
                    coefficients,
                    powers,
                    big_n,
                    tv,
                    certified: bound,
                });
            }
        }
        big_n =
            big_n
                .checked_mul(2)
                .filter(|&b| b <= MAX_WORD_LEN)
                .ok_or(Error::BudgetExceeded {
                    states: big_n.saturating_mul(2),
                    budget: MAX_WORD_LEN,
                })?;
    }
}

/// `ξ^1`: empty if `β(y) > 0`, otherwise all but the last letter of the
/// lexicographically smallest shortest path from `supp β` to `y`.
fn entry_word(chain: &ChainSpec, dist: &[usize], y: StateId) -> Result<Word> {
    if chain.beta(y) > 0.0 {
        return Ok(Vec::new());
    }
    let start = chain
        .beta_entries()
        .iter()
        .map(|e| e.0)
        .filter(|&x| dist[x] != usize::MAX)
        .min_by_key(|&x| (dist[x], x))
        .ok_or_else(|| {
            Error::Precondition("the initial law does not reach the first cycle".into())
        })?;
    let mut w = vec![start];
    w.extend(connecting_word(chain, dist, start, y).expect("reachable"));
    Ok(w)
}

/// `R²(μ_n)` along a decomposition, for divergence and continuity checks.
pub fn decomposition_entropies(
    chain: &ChainSpec,
    mu: &SparseMeasure,
    terms: &[usize],
) -> Result<Vec<(f64, f64)>> {
    terms
        .iter()
        .map(|&n| {
            let dec = decompose_balanced(chain, mu, n)?;
            Ok((dec.residual_tv, rate_r(chain, &dec.approximant)?))
        })
        .collect()
}

/// Convenience wrapper classifying the chain first.
pub fn approximate(chain: &ChainSpec, mu: &SparseMeasure, m: usize) -> Result<Approximation> {
    approximating_words(chain, &decompose_classes(chain), mu, m)
}
