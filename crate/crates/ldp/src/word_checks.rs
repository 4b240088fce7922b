//! Exhaustive verification of the word-machine inequalities on small
//! instances.
//!
//! Each check enumerates every relevant word, list or tuple, evaluates both
//! sides exactly and reports the number of violations with the tightest
//! margin seen. Enumerations larger than [`ENUMERATION_CAP`] are skipped and
//! reported as such.

use std::collections::HashMap;

use serde::Serialize;

use crate::chain::{path_probability, word_probability, ChainSpec, Word};
use crate::measure::{l1_distance, SparseMeasure};
use crate::words::{
    bounds, count_measure, decoupling_map, gamma_mass, list_length, ln_c_nt, ln_c_sl, ln_c_st,
    ln_c_tilde, reorder, slice_unchecked, slicing_bounds, stitch_full, Piece, SlicedWord,
    TransitionTable,
};

/// Largest number of words, lists or tuples enumerated per case.
pub const ENUMERATION_CAP: usize = 1_000_000;

/// Relative slack for probability inequalities, absorbing rounding only.
const REL_SLACK: f64 = 1e-12;

/// Outcome of one exhaustive check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    /// Number of inequality instances evaluated.
    pub instances: usize,
    pub violations: usize,
    /// Smallest `rhs − lhs` for geographic bounds, or smallest
    /// `ln(larger side) − ln(smaller side)` for probability bounds.
    pub worst_margin: f64,
    /// Set when the enumeration exceeded the cap and nothing was checked.
    pub skipped: Option<String>,
}

impl CheckReport {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            instances: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            skipped: None,
        }
    }

    fn skip(name: impl Into<String>, why: String) -> Self {
        Self {
            skipped: Some(why),
            ..Self::new(name)
        }
    }

    /// Records `lhs ≤ rhs` for a geographic bound.
    fn geographic(&mut self, lhs: f64, rhs: f64) {
        self.instances += 1;
        self.worst_margin = self.worst_margin.min(rhs - lhs);
        if lhs > rhs + 1e-9 {
            self.violations += 1;
        }
    }

    /// Records `ln_small ≤ ln_big` for a probability bound.
    fn log_ratio(&mut self, ln_small: f64, ln_big: f64) {
        self.instances += 1;
        if ln_small == f64::NEG_INFINITY {
            return;
        }
        let m = ln_big - ln_small;
        self.worst_margin = self.worst_margin.min(m);
        if m < -REL_SLACK {
            self.violations += 1;
        }
    }

    /// Passed with at least one instance and nothing skipped.
    pub fn passed(&self) -> bool {
        self.skipped.is_none() && self.violations == 0 && self.instances > 0
    }
}

/// All words of the given length with positive transition probability.
pub fn positive_words(chain: &ChainSpec, len: usize) -> Vec<Word> {
    let mut out = Vec::new();
    if len == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut stack: Vec<Word> = (0..chain.n_states()).map(|x| vec![x]).collect();
    while let Some(w) = stack.pop() {
        if w.len() == len {
            out.push(w);
            continue;
        }
        let last = *w.last().expect("nonempty");
        for &(y, _) in chain.row(last).iter().rev() {
            let mut next = w.clone();
            next.push(y);
            stack.push(next);
        }
    }
    out.sort();
    out
}

/// Positive words of length `len` started inside `supp β`.
fn initial_words(chain: &ChainSpec, len: usize) -> Vec<Word> {
    positive_words(chain, len)
        .into_iter()
        .filter(|w| chain.beta(w[0]) > 0.0)
        .collect()
}

/// Slicing geographic bounds over all positive words of length `1..=len`.
pub fn check_slicing_geographic(
    chain: &ChainSpec,
    table: &TransitionTable,
    len: usize,
) -> CheckReport {
    let mut rep = CheckReport::new("slicing geographic");
    for l in 1..=len {
        for u in positive_words(chain, l) {
            let s = slice_unchecked(&table.config, &u);
            let b = slicing_bounds(&table.config, &u, &s);
            for (lhs, rhs) in b.per_class.iter().copied().chain(std::iter::once(b.total)) {
                rep.geographic(lhs, rhs);
            }
        }
    }
    rep
}

/// Slice outcomes of positive words of length `n+1` with their total
/// probability `P_{n+1}(fiber)`.
fn slice_fibers(chain: &ChainSpec, table: &TransitionTable, n: usize) -> Vec<(SlicedWord, f64)> {
    let mut fibers: HashMap<Vec<Word>, (SlicedWord, f64)> = HashMap::new();
    for u in initial_words(chain, n + 1) {
        let s = slice_unchecked(&table.config, &u);
        let p = path_probability(chain, &u);
        fibers.entry(s.pieces.clone()).or_insert((s, 0.0)).1 += p;
    }
    let mut v: Vec<_> = fibers.into_values().collect();
    v.sort_by(|a, b| a.0.pieces.cmp(&b.0.pieces));
    v
}

/// `P_{n+1}(fiber) ≤ c_sl Π_j p(v^j)` for every slicing fiber.
pub fn check_slicing_probability(
    chain: &ChainSpec,
    table: &TransitionTable,
    n: usize,
) -> CheckReport {
    let mut rep = CheckReport::new(format!("slicing probability n={n}"));
    let ln_csl = ln_c_sl(n, table.r());
    for (s, p) in slice_fibers(chain, table, n) {
        let prod: f64 = s
            .pieces
            .iter()
            .map(|v| word_probability(chain, v))
            .product();
        rep.log_ratio(p.ln(), ln_csl + prod.ln());
    }
    rep
}

/// Nonempty pieces of length at most `max_len` for position `pos`, with
/// positive probability and both ends in `K_pos`.
fn pieces_for(chain: &ChainSpec, table: &TransitionTable, pos: usize, max_len: usize) -> Vec<Word> {
    let cfg = &table.config;
    (1..=max_len)
        .flat_map(|l| positive_words(chain, l))
        .filter(|w| cfg.k_pos(w[0]) == Some(pos) && cfg.k_pos(*w.last().unwrap()) == Some(pos))
        .collect()
}

/// All stitchable lists of positive pieces with at most `k_star` entries and
/// total length at most `l_star`, or `None` past the cap.
pub fn stitchable_lists(
    chain: &ChainSpec,
    table: &TransitionTable,
    k_star: usize,
    l_star: usize,
) -> Option<Vec<Vec<Piece>>> {
    let by_pos: Vec<Vec<Word>> = (0..table.r())
        .map(|p| pieces_for(chain, table, p, l_star))
        .collect();
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(
        by_pos: &[Vec<Word>],
        min_pos: usize,
        room: usize,
        k_left: usize,
        cur: &mut Vec<Piece>,
        out: &mut Vec<Vec<Piece>>,
    ) -> bool {
        if !cur.is_empty() {
            if out.len() >= ENUMERATION_CAP {
                return false;
            }
            out.push(cur.clone());
        }
        if k_left == 0 {
            return true;
        }
        for (pos, ws) in by_pos.iter().enumerate().skip(min_pos) {
            for w in ws.iter().filter(|w| w.len() <= room) {
                cur.push(Piece {
                    pos,
                    word: w.clone(),
                });
                let ok = rec(by_pos, pos, room - w.len(), k_left - 1, cur, out);
                cur.pop();
                if !ok {
                    return false;
                }
            }
        }
        true
    }
    rec(&by_pos, 0, l_star, k_star, &mut cur, &mut out).then_some(out)
}

/// Stitching geographic bound for every list with `k ≤ k*`, `|v| ≤ l*` and
/// every admissible `t`.
pub fn check_stitching_geographic(
    chain: &ChainSpec,
    table: &TransitionTable,
    k_star: usize,
    l_star: usize,
) -> CheckReport {
    let name = format!("stitching geographic k*={k_star} l*={l_star}");
    let Some(lists) = stitchable_lists(chain, table, k_star, l_star) else {
        return CheckReport::skip(name, format!("more than {ENUMERATION_CAP} lists"));
    };
    let mut rep = CheckReport::new(name);
    for v in &lists {
        let g = stitch_full(table, v).expect("enumerated lists are stitchable");
        let sum = v.iter().fold(SparseMeasure::null(2), |acc, p| {
            acc.plus(&count_measure(&p.word)).unwrap()
        });
        for t in 0..list_length(v) {
            let lhs = l1_distance(&count_measure(&g[..=t]), &sum).unwrap();
            rep.geographic(
                lhs,
                bounds::stitching(list_length(v), t, v.len(), table.tau),
            );
        }
    }
    rep
}

/// `P_{t+1}(w) ≥ c_st Σ_{G_t(v)=w} Π p(v^i)` over `B^{(t)}_{k*,l*}` for every
/// `t < l*`.
pub fn check_stitching_probability(
    chain: &ChainSpec,
    table: &TransitionTable,
    k_star: usize,
    l_star: usize,
) -> CheckReport {
    let name = format!("stitching probability k*={k_star} l*={l_star}");
    let Some(lists) = stitchable_lists(chain, table, k_star, l_star) else {
        return CheckReport::skip(name, format!("more than {ENUMERATION_CAP} lists"));
    };
    let mut sums: HashMap<Word, f64> = HashMap::new();
    for v in &lists {
        let g = stitch_full(table, v).expect("enumerated lists are stitchable");
        let weight: f64 = v.iter().map(|p| word_probability(chain, &p.word)).product();
        for t in 0..list_length(v) {
            *sums.entry(g[..=t].to_vec()).or_insert(0.0) += weight;
        }
    }
    let ln_cst = ln_c_st(table.beta_z0, table.eta, table.tau, k_star, l_star);
    let mut rep = CheckReport::new(name);
    let mut keys: Vec<_> = sums.into_iter().collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0));
    for (w, s) in keys {
        rep.log_ratio(ln_cst + s.ln(), path_probability(chain, &w).ln());
    }
    rep
}

fn tuple_count(base: usize, n: usize) -> Option<usize> {
    base.checked_pow(n as u32).filter(|&c| c <= ENUMERATION_CAP)
}

/// Calls `f` on every `big_n`-tuple of indices below `base`.
fn for_each_tuple(base: usize, big_n: usize, mut f: impl FnMut(&[usize])) {
    if base == 0 {
        return;
    }
    let mut idx = vec![0usize; big_n];
    loop {
        f(&idx);
        let mut i = big_n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < base {
                break;
            }
            idx[i] = 0;
        }
    }
}

/// Coupling geographic bound over all `N`-tuples of positive words of
/// length `n+1` and all `t` meeting the mass hypothesis.
pub fn check_coupling_geographic(
    chain: &ChainSpec,
    table: &TransitionTable,
    n: usize,
    big_n: usize,
) -> CheckReport {
    let name = format!("coupling geographic n={n} N={big_n}");
    let words = positive_words(chain, n + 1);
    if tuple_count(words.len(), big_n).is_none() {
        return CheckReport::skip(
            name,
            format!("{}^{big_n} tuples exceed the cap", words.len()),
        );
    }
    let sliced: Vec<SlicedWord> = words
        .iter()
        .map(|u| slice_unchecked(&table.config, u))
        .collect();
    let measures: Vec<SparseMeasure> = words.iter().map(|u| count_measure(u)).collect();
    let masses: Vec<usize> = words
        .iter()
        .map(|u| gamma_mass(&table.config, std::iter::once(u.as_slice()), |_| true))
        .collect();
    let mut rep = CheckReport::new(name);
    for_each_tuple(words.len(), big_n, |idx| {
        let mass: usize = idx.iter().map(|&i| masses[i]).sum();
        if mass == 0 {
            return;
        }
        let v = reorder(&idx.iter().map(|&i| sliced[i].clone()).collect::<Vec<_>>());
        let g = stitch_full(table, &v).expect("reordered slices are stitchable");
        let sum = idx.iter().fold(SparseMeasure::null(2), |acc, &i| {
            acc.plus(&measures[i]).unwrap()
        });
        for t in 0..mass {
            let lhs = l1_distance(&count_measure(&g[..=t]), &sum).unwrap();
            rep.geographic(lhs, bounds::coupling(big_n, n, t, table.r(), table.tau));
        }
    });
    rep
}

/// `P_{t+1}(w) ≥ C_{n,t} P^{⊗N}_{n+1}(Ψ⁻¹(w))` for every `w` in the range
/// and every `t`, with preimage mass aggregated over slicing fibers.
pub fn check_coupling_probability(
    chain: &ChainSpec,
    table: &TransitionTable,
    n: usize,
    big_n: usize,
) -> CheckReport {
    let name = format!("coupling probability n={n} N={big_n}");
    let fibers = slice_fibers(chain, table, n);
    if tuple_count(fibers.len(), big_n).is_none() {
        return CheckReport::skip(
            name,
            format!("{}^{big_n} fiber tuples exceed the cap", fibers.len()),
        );
    }
    let mut sums: HashMap<Word, f64> = HashMap::new();
    for_each_tuple(fibers.len(), big_n, |idx| {
        let v = reorder(&idx.iter().map(|&i| fibers[i].0.clone()).collect::<Vec<_>>());
        if v.is_empty() {
            return;
        }
        let weight: f64 = idx.iter().map(|&i| fibers[i].1).product();
        let g = stitch_full(table, &v).expect("reordered slices are stitchable");
        for t in 0..list_length(&v) {
            *sums.entry(g[..=t].to_vec()).or_insert(0.0) += weight;
        }
    });
    let ln_c = ln_c_nt(table, n, big_n);
    let mut rep = CheckReport::new(name);
    let mut keys: Vec<_> = sums.into_iter().collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0));
    for (w, s) in keys {
        rep.log_ratio(ln_c + s.ln(), path_probability(chain, &w).ln());
    }
    rep
}

/// Decoupling geographic bound over all positive words of length `n+1` and
/// all `(t1, t2)` meeting the mass hypotheses.
pub fn check_decoupling_geographic(
    chain: &ChainSpec,
    table: &TransitionTable,
    n: usize,
    j1: &[usize],
    j2: &[usize],
) -> CheckReport {
    let mut rep = CheckReport::new(format!("decoupling geographic n={n}"));
    let cfg = &table.config;
    let in_j = |js: &[usize], p: usize| js.contains(&cfg.j0()[p]);
    for u in positive_words(chain, n + 1) {
        let m1 = gamma_mass(cfg, std::iter::once(u.as_slice()), |p| in_j(j1, p));
        let m2 = gamma_mass(cfg, std::iter::once(u.as_slice()), |p| in_j(j2, p));
        let mu = count_measure(&u);
        let restrict = |js: &[usize]| {
            mu.restricted(|t| matches!((cfg.c_pos(t[0]), cfg.c_pos(t[1])), (Some(a), Some(b)) if a == b && in_j(js, a)))
        };
        let (r1, r2) = (restrict(j1), restrict(j2));
        for t1 in 0..m1 {
            for t2 in 0..m2 {
                let (w1, w2) = decoupling_map(chain, table, &u, j1, j2, t1, t2)
                    .expect("valid configuration")
                    .expect("mass hypothesis guarantees definition");
                let b = bounds::decoupling(u.len(), t1, t2, table.r(), table.tau);
                rep.geographic(l1_distance(&count_measure(&w1), &r1).unwrap(), b);
                rep.geographic(l1_distance(&count_measure(&w2), &r2).unwrap(), b);
            }
        }
    }
    rep
}

/// `P(w¹)P(w²) ≥ C̃_n P_{n+1}(Ψ̃⁻¹(w¹,w²))` for all `t1, t2 ≤ n`.
pub fn check_decoupling_probability(
    chain: &ChainSpec,
    table: &TransitionTable,
    n: usize,
    j1: &[usize],
    j2: &[usize],
) -> CheckReport {
    let name = format!("decoupling probability n={n}");
    let words = initial_words(chain, n + 1);
    if words.len() * (n + 1) * (n + 1) > ENUMERATION_CAP {
        return CheckReport::skip(name, format!("{} words exceed the cap", words.len()));
    }
    let ln_c = ln_c_tilde(table, n);
    let mut rep = CheckReport::new(name);
    for t1 in 0..=n {
        for t2 in 0..=n {
            let mut sums: HashMap<(Word, Word), f64> = HashMap::new();
            for u in &words {
                if let Some(pair) =
                    decoupling_map(chain, table, u, j1, j2, t1, t2).expect("valid configuration")
                {
                    *sums.entry(pair).or_insert(0.0) += path_probability(chain, u);
                }
            }
            let mut keys: Vec<_> = sums.into_iter().collect();
            keys.sort_by(|a, b| a.0.cmp(&b.0));
            for ((w1, w2), s) in keys {
                let lhs = path_probability(chain, &w1).ln() + path_probability(chain, &w2).ln();
                rep.log_ratio(ln_c + s.ln(), lhs);
            }
        }
    }
    rep
}
