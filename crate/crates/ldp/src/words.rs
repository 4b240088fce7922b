//! Empirical measures of words and the word surgery used to compare
//! trajectory probabilities: slicing a word into per-class pieces,
//! reordering pieces from several words, stitching them back together with
//! short connecting words, and the coupling and decoupling maps built from
//! these.
//!
//! Geographic bounds below are stated for unnormalized count measures, so
//! they are checked with the `ℓ¹` norm, under which `M[u]` has mass `|u|−1`.

use std::collections::{BTreeMap, VecDeque};

use crate::chain::{
    log_word_probability, path_probability, word_probability, ChainSpec, ClassDecomposition,
    StateId, Word,
};
use crate::error::{Error, Result};
use crate::measure::{l1_distance, SparseMeasure};

/// `M[u] = Σ_i δ_(u_i, u_{i+1})`; null for `|u| ≤ 1`.
pub fn count_measure(u: &[StateId]) -> SparseMeasure {
    SparseMeasure::from_entries(2, u.windows(2).map(|w| (w.to_vec(), 1.0)))
        .expect("pairs have arity 2")
}

/// `L[u] = M[u]/(|u|−1)`; null for `|u| ≤ 1`.
pub fn empirical(u: &[StateId]) -> SparseMeasure {
    if u.len() <= 1 {
        return SparseMeasure::null(2);
    }
    count_measure(u).scaled(1.0 / (u.len() - 1) as f64)
}

/// The k-window empirical measure, averaging over `|w|−k+1` windows.
pub fn empirical_k(w: &[StateId], k: usize) -> Result<SparseMeasure> {
    if k == 0 {
        return Err(Error::InvalidArity {
            got: 0,
            why: "window length must be positive",
        });
    }
    if w.len() < k {
        return Err(Error::Precondition(format!(
            "word of length {} shorter than {k}",
            w.len()
        )));
    }
    let n = (w.len() - k + 1) as f64;
    SparseMeasure::from_entries(k, w.windows(k).map(|t| (t.to_vec(), 1.0 / n)))
}

/// The finite window `K` cut down to an ordered chain of classes `J0`.
#[derive(Debug, Clone)]
pub struct SliceConfig {
    j0: Vec<usize>,
    k_sets: Vec<Vec<StateId>>,
    /// Position in `J0` of the class whose `K_j` contains the state.
    k_pos: Vec<Option<usize>>,
    /// Position in `J0` of the class containing the state.
    c_pos: Vec<Option<usize>>,
}

impl SliceConfig {
    /// `j0` must be totally ordered by reachability in the given order.
    pub fn new(
        d: &ClassDecomposition,
        n_states: usize,
        k: &[StateId],
        j0: &[usize],
    ) -> Result<Self> {
        if j0.is_empty() {
            return Err(Error::Precondition("J0 must not be empty".into()));
        }
        for &j in j0 {
            if j >= d.n_classes() {
                return Err(Error::Precondition(format!("class index {j} out of range")));
            }
        }
        for w in j0.windows(2) {
            if w[0] == w[1] || !d.reaches(w[0], w[1]) {
                return Err(Error::Precondition(format!(
                    "classes {} and {} are not ordered by reachability",
                    w[0], w[1]
                )));
            }
        }
        let mut k_pos = vec![None; n_states];
        let mut c_pos = vec![None; n_states];
        let mut k_sets = vec![Vec::new(); j0.len()];
        for (pos, &j) in j0.iter().enumerate() {
            for &x in d.class(j) {
                c_pos[x] = Some(pos);
            }
        }
        let mut kk = k.to_vec();
        kk.sort_unstable();
        kk.dedup();
        for x in kk {
            if x >= n_states {
                return Err(Error::Precondition(format!("state id {x} out of range")));
            }
            if let Some(pos) = c_pos[x] {
                k_pos[x] = Some(pos);
                k_sets[pos].push(x);
            }
        }
        Ok(Self {
            j0: j0.to_vec(),
            k_sets,
            k_pos,
            c_pos,
        })
    }

    /// Number of classes `r = |J0|`.
    pub fn r(&self) -> usize {
        self.j0.len()
    }

    pub fn j0(&self) -> &[usize] {
        &self.j0
    }

    /// `K_j = K ∩ C_j` for the class at position `pos` of `J0`.
    pub fn k_set(&self, pos: usize) -> &[StateId] {
        &self.k_sets[pos]
    }

    pub fn k_pos(&self, x: StateId) -> Option<usize> {
        self.k_pos[x]
    }

    pub fn c_pos(&self, x: StateId) -> Option<usize> {
        self.c_pos[x]
    }

    /// Whether `(x,y)` lies in `Γ = ⋃_j K_j²`, restricted to the positions
    /// accepted by `sel`.
    pub fn in_gamma(&self, x: StateId, y: StateId, sel: impl Fn(usize) -> bool) -> bool {
        matches!((self.k_pos[x], self.k_pos[y]), (Some(a), Some(b)) if a == b && sel(a))
    }
}

/// The per-class pieces of a sliced word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlicedWord {
    /// `u^j` for each position of `J0`; possibly empty.
    pub pieces: Vec<Word>,
    /// Index range in the source, inclusive, for nonempty pieces.
    pub ranges: Vec<Option<(usize, usize)>>,
    pub source_len: usize,
}

/// Slices a positive-probability word: `u^j` is the longest subword whose
/// first and last letters lie in `K_j`, or empty.
pub fn slice(chain: &ChainSpec, cfg: &SliceConfig, u: &[StateId]) -> Result<SlicedWord> {
    if log_word_probability(chain, u) == f64::NEG_INFINITY {
        return Err(Error::Precondition(
            "slicing needs a positive-probability word".into(),
        ));
    }
    let sliced = slice_unchecked(cfg, u);
    debug_assert!(slicing_bounds(cfg, u, &sliced).holds());
    Ok(sliced)
}

/// Slicing without the probability check.
pub(crate) fn slice_unchecked(cfg: &SliceConfig, u: &[StateId]) -> SlicedWord {
    let r = cfg.r();
    let mut ranges: Vec<Option<(usize, usize)>> = vec![None; r];
    for (i, &x) in u.iter().enumerate() {
        if let Some(pos) = cfg.k_pos[x] {
            let e = ranges[pos].get_or_insert((i, i));
            e.1 = i;
        }
    }
    let pieces = ranges
        .iter()
        .map(|r| r.map_or_else(Vec::new, |(a, b)| u[a..=b].to_vec()))
        .collect();
    SlicedWord {
        pieces,
        ranges,
        source_len: u.len(),
    }
}

/// Both sides of the slicing geographic inequalities for one word.
#[derive(Debug, Clone)]
pub struct SlicingBounds {
    /// `‖M[u]|_{C_j²} − M[u^j]‖` and `M[u](C_j² ∖ K_j²)` per class.
    pub per_class: Vec<(f64, f64)>,
    /// `‖M[u] − Σ_j M[u^j]‖` and `M[u](S² ∖ Γ)`.
    pub total: (f64, f64),
}

impl SlicingBounds {
    pub fn holds(&self) -> bool {
        self.per_class.iter().all(|(l, r)| l <= r) && self.total.0 <= self.total.1
    }
}

pub fn slicing_bounds(cfg: &SliceConfig, u: &[StateId], s: &SlicedWord) -> SlicingBounds {
    let m = count_measure(u);
    let mut sum = SparseMeasure::null(2);
    let mut per_class = Vec::with_capacity(cfg.r());
    for (pos, piece) in s.pieces.iter().enumerate() {
        let mj = count_measure(piece);
        let restricted =
            m.restricted(|t| cfg.c_pos[t[0]] == Some(pos) && cfg.c_pos[t[1]] == Some(pos));
        let lhs = l1_distance(&restricted, &mj).expect("same arity");
        let rhs: f64 = restricted
            .iter()
            .filter(|(t, _)| !cfg.in_gamma(t[0], t[1], |p| p == pos))
            .map(|(_, v)| v)
            .sum();
        per_class.push((lhs, rhs));
        sum = sum.plus(&mj).expect("same arity");
    }
    let lhs = l1_distance(&m, &sum).expect("same arity");
    let rhs: f64 = m
        .iter()
        .filter(|(t, _)| !cfg.in_gamma(t[0], t[1], |_| true))
        .map(|(_, v)| v)
        .sum();
    SlicingBounds {
        per_class,
        total: (lhs, rhs),
    }
}

/// A nonempty piece tagged with its position in `J0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Piece {
    pub pos: usize,
    pub word: Word,
}

/// An ordered list of pieces suitable for stitching.
pub type StitchableList = Vec<Piece>;

/// Total length `|v|` of a list of pieces.
pub fn list_length(v: &[Piece]) -> usize {
    v.iter().map(|p| p.word.len()).sum()
}

/// Reads the matrix of pieces column by column (class first, then word),
/// skipping empty pieces.
pub fn reorder(sliced: &[SlicedWord]) -> StitchableList {
    let r = sliced.first().map_or(0, |s| s.pieces.len());
    let mut out = Vec::new();
    for pos in 0..r {
        for s in sliced {
            if !s.pieces[pos].is_empty() {
                out.push(Piece {
                    pos,
                    word: s.pieces[pos].clone(),
                });
            }
        }
    }
    out
}

/// Whether every piece is nonempty, starts and ends in its `K_j`, and the
/// positions are nondecreasing.
pub fn is_stitchable(cfg: &SliceConfig, v: &[Piece]) -> bool {
    let ends_ok = |p: &Piece| match (p.word.first(), p.word.last()) {
        (Some(&a), Some(&b)) => cfg.k_pos[a] == Some(p.pos) && cfg.k_pos[b] == Some(p.pos),
        _ => false,
    };
    v.iter().all(ends_ok) && v.windows(2).all(|w| w[0].pos <= w[1].pos)
}

/// Connecting words between window states, built once per configuration.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    pub config: SliceConfig,
    /// Minimal-id state of `supp β` leading to the first class.
    pub z0: StateId,
    pub beta_z0: f64,
    /// Shortest connecting word for each pair of the table; empty for a
    /// direct edge.
    pub xi: BTreeMap<(StateId, StateId), Word>,
    /// `min p(x ξ_{x,y} y)` over the table.
    pub eta: f64,
    /// `max |ξ_{x,y}| + 1` over the table.
    pub tau: usize,
}

impl TransitionTable {
    pub fn r(&self) -> usize {
        self.config.r()
    }

    /// The connecting word from `x` to `y`.
    pub fn connector(&self, x: StateId, y: StateId) -> Result<&Word> {
        self.xi
            .get(&(x, y))
            .ok_or_else(|| Error::Precondition(format!("no connection stored for ({x},{y})")))
    }
}

/// Builds the table of connecting words for `K` and the ordered classes `J0`.
///
/// Pairs run from `K_j` (with `K_0 = {z0}`) to `K_{j'}` for `j ≤ j'`, `j' ≥ 1`.
/// Each connecting word is a shortest one, ties broken lexicographically.
pub fn build_transition_table(
    chain: &ChainSpec,
    d: &ClassDecomposition,
    k: &[StateId],
    j0: &[usize],
) -> Result<TransitionTable> {
    let config = SliceConfig::new(d, chain.n_states(), k, j0)?;
    if let Some(pos) = (0..config.r()).find(|&p| config.k_sets[p].is_empty()) {
        return Err(Error::Precondition(format!(
            "K has no state in class {}",
            j0[pos]
        )));
    }
    let first = d.class(j0[0]);
    let z0 = chain
        .beta_entries()
        .iter()
        .map(|e| e.0)
        .find(|&z| {
            let seen = crate::chain::reachable_from(chain, [z], None);
            first.iter().any(|&x| seen[x])
        })
        .ok_or_else(|| {
            Error::Precondition("the initial law does not reach the first class".into())
        })?;
    let mut rev: Vec<Vec<StateId>> = vec![Vec::new(); chain.n_states()];
    for x in 0..chain.n_states() {
        for &(y, _) in chain.row(x) {
            rev[y].push(x);
        }
    }
    let mut xi = BTreeMap::new();
    let mut eta = f64::INFINITY;
    let mut tau = 0usize;
    for pos_y in 0..config.r() {
        for &y in &config.k_sets[pos_y] {
            let dist = distances_to(chain.n_states(), &rev, y);
            let sources = std::iter::once(z0)
                .chain((0..=pos_y).flat_map(|p| config.k_sets[p].iter().copied()));
            for x in sources {
                if xi.contains_key(&(x, y)) {
                    continue;
                }
                let w = connecting_word(chain, &dist, x, y).ok_or_else(|| {
                    Error::Precondition(format!(
                        "no positive path from `{}` to `{}`",
                        chain.label(x),
                        chain.label(y)
                    ))
                })?;
                let mut full = Vec::with_capacity(w.len() + 2);
                full.push(x);
                full.extend_from_slice(&w);
                full.push(y);
                eta = eta.min(word_probability(chain, &full));
                tau = tau.max(w.len() + 1);
                xi.insert((x, y), w);
            }
        }
    }
    Ok(TransitionTable {
        config,
        z0,
        beta_z0: chain.beta(z0),
        xi,
        eta,
        tau,
    })
}

/// Edge distances to `y` along positive transitions.
pub(crate) fn distances_to(n: usize, rev: &[Vec<StateId>], y: StateId) -> Vec<usize> {
    let mut dist = vec![usize::MAX; n];
    dist[y] = 0;
    let mut q = VecDeque::from([y]);
    while let Some(v) = q.pop_front() {
        for &u in &rev[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                q.push_back(u);
            }
        }
    }
    dist
}

/// Interior letters of the lexicographically smallest shortest path of
/// length at least one from `x` to `y`.
pub(crate) fn connecting_word(
    chain: &ChainSpec,
    dist: &[usize],
    x: StateId,
    y: StateId,
) -> Option<Word> {
    let first = chain
        .row(x)
        .iter()
        .map(|e| e.0)
        .filter(|&z| dist[z] != usize::MAX)
        .min_by_key(|&z| (dist[z], z))?;
    let mut w = Vec::new();
    let mut cur = first;
    while cur != y {
        w.push(cur);
        cur = chain
            .row(cur)
            .iter()
            .map(|e| e.0)
            .find(|&z| dist[z] == dist[cur] - 1)?;
    }
    Some(w)
}

/// `G(v) = z0 ξ^1 v^1 ξ^2 v^2 … ξ^k v^k` without truncation.
pub fn stitch_full(table: &TransitionTable, v: &[Piece]) -> Result<Word> {
    if !is_stitchable(&table.config, v) {
        return Err(Error::Precondition("list is not stitchable".into()));
    }
    let mut g = vec![table.z0];
    let mut last = table.z0;
    for p in v {
        g.extend_from_slice(table.connector(last, p.word[0])?);
        g.extend_from_slice(&p.word);
        last = *p.word.last().expect("nonempty piece");
    }
    Ok(g)
}

/// `G_t(v)`: the prefix of length `t+1` of `G(v)`; requires `|v| ≥ t+1`.
pub fn stitch(table: &TransitionTable, v: &[Piece], t: usize) -> Result<Word> {
    if list_length(v) < t + 1 {
        return Err(Error::Precondition(format!(
            "total length {} below t+1 = {}",
            list_length(v),
            t + 1
        )));
    }
    let mut g = stitch_full(table, v)?;
    g.truncate(t + 1);
    Ok(g)
}

/// The coupling map: slice each word, reorder, stitch to length `t+1`.
///
/// Returns `None` when the reordered list is shorter than `t+1`, where the
/// map is undefined.
pub fn coupling_map(
    chain: &ChainSpec,
    table: &TransitionTable,
    words: &[Word],
    t: usize,
) -> Result<Option<Word>> {
    let sliced = words
        .iter()
        .map(|u| slice(chain, &table.config, u))
        .collect::<Result<Vec<_>>>()?;
    let v = reorder(&sliced);
    if list_length(&v) < t + 1 {
        return Ok(None);
    }
    stitch(table, &v, t).map(Some)
}

/// The coupling map under the mass hypothesis `Σ_i M[u^i](Γ) ≥ t+1`.
///
/// All words must have the same length `n+1` and positive probability.
pub fn couple(
    chain: &ChainSpec,
    table: &TransitionTable,
    words: &[Word],
    t: usize,
) -> Result<Word> {
    let len = words.first().map_or(0, |w| w.len());
    if words.is_empty() || words.iter().any(|w| w.len() != len || len < 2) {
        return Err(Error::Precondition(
            "coupling needs N ≥ 1 words of equal length ≥ 2".into(),
        ));
    }
    let mass = gamma_mass(&table.config, words.iter().map(|w| w.as_slice()), |_| true);
    if mass < t + 1 {
        return Err(Error::Precondition(format!(
            "mass on Γ is {mass}, below t+1 = {}",
            t + 1
        )));
    }
    Ok(coupling_map(chain, table, words, t)?.expect("mass hypothesis guarantees length"))
}

/// `Σ_i M[u^i](Γ)` with `Γ` restricted to positions accepted by `sel`.
pub fn gamma_mass<'a>(
    cfg: &SliceConfig,
    words: impl Iterator<Item = &'a [StateId]>,
    sel: impl Fn(usize) -> bool + Copy,
) -> usize {
    words
        .map(|u| {
            u.windows(2)
                .filter(|w| cfg.in_gamma(w[0], w[1], sel))
                .count()
        })
        .sum()
}

/// Positions in `J0` of the given class indices.
fn positions(cfg: &SliceConfig, classes: &[usize]) -> Result<Vec<usize>> {
    classes
        .iter()
        .map(|j| {
            cfg.j0
                .iter()
                .position(|x| x == j)
                .ok_or_else(|| Error::Precondition(format!("class {j} not in J0")))
        })
        .collect()
}

/// The decoupling map without mass hypotheses: `None` when either list is
/// too short.
pub fn decoupling_map(
    chain: &ChainSpec,
    table: &TransitionTable,
    u: &[StateId],
    j1: &[usize],
    j2: &[usize],
    t1: usize,
    t2: usize,
) -> Result<Option<(Word, Word)>> {
    let p1 = positions(&table.config, j1)?;
    let p2 = positions(&table.config, j2)?;
    if p1.iter().any(|p| p2.contains(p)) {
        return Err(Error::Precondition("J1 and J2 must be disjoint".into()));
    }
    let s = slice(chain, &table.config, u)?;
    let pick = |ps: &[usize]| -> StitchableList {
        let mut ps = ps.to_vec();
        ps.sort_unstable();
        ps.into_iter()
            .filter(|&p| !s.pieces[p].is_empty())
            .map(|p| Piece {
                pos: p,
                word: s.pieces[p].clone(),
            })
            .collect()
    };
    let (v1, v2) = (pick(&p1), pick(&p2));
    if list_length(&v1) < t1 + 1 || list_length(&v2) < t2 + 1 {
        return Ok(None);
    }
    Ok(Some((stitch(table, &v1, t1)?, stitch(table, &v2, t2)?)))
}

/// The decoupling map under `M[u](Γ_1) ≥ t1+1` and `M[u](Γ_2) ≥ t2+1`.
pub fn decouple(
    chain: &ChainSpec,
    table: &TransitionTable,
    u: &[StateId],
    j1: &[usize],
    j2: &[usize],
    t1: usize,
    t2: usize,
) -> Result<(Word, Word)> {
    let p1 = positions(&table.config, j1)?;
    let p2 = positions(&table.config, j2)?;
    let m1 = gamma_mass(&table.config, std::iter::once(u), |p| p1.contains(&p));
    let m2 = gamma_mass(&table.config, std::iter::once(u), |p| p2.contains(&p));
    if m1 < t1 + 1 || m2 < t2 + 1 {
        return Err(Error::Precondition(format!(
            "mass on Γ1, Γ2 is ({m1}, {m2}), below ({}, {})",
            t1 + 1,
            t2 + 1
        )));
    }
    Ok(
        decoupling_map(chain, table, u, j1, j2, t1, t2)?
            .expect("mass hypothesis guarantees length"),
    )
}

/// `ln c_sl = (r+1) ln(n+1)`.
pub fn ln_c_sl(n: usize, r: usize) -> f64 {
    (r as f64 + 1.0) * ((n + 1) as f64).ln()
}

/// The slicing constant `c_sl = (n+1)^{r+1}`.
pub fn c_sl(n: usize, r: usize) -> f64 {
    ((n + 1) as f64).powi(r as i32 + 1)
}

/// `ln c_st` for the stitching constant with bounds `k*`, `l*`.
pub fn ln_c_st(beta_z0: f64, eta: f64, tau: usize, k_star: usize, l_star: usize) -> f64 {
    let (k, l, tau) = (k_star as f64, l_star as f64, tau as f64);
    beta_z0.ln() + k * eta.ln() - 2.0 * (l + tau * k).ln()
        + 2.0 * k * (2.0 * k / (std::f64::consts::E * (l + (tau + 2.0) * k))).ln()
}

/// `c_st = β(z0) η^{k*} (l*+τk*)^{-2} (2k*/(e(l*+(τ+2)k*)))^{2k*}`.
pub fn c_st(beta_z0: f64, eta: f64, tau: usize, k_star: usize, l_star: usize) -> f64 {
    ln_c_st(beta_z0, eta, tau, k_star, l_star).exp()
}

/// `ln C_{n,t}` for `N` coupled words of length `n+1`.
pub fn ln_c_nt(table: &TransitionTable, n: usize, big_n: usize) -> f64 {
    let r = table.r();
    ln_c_st(
        table.beta_z0,
        table.eta,
        table.tau,
        big_n * r,
        big_n * (n + 1),
    ) - (big_n * r) as f64 * 2f64.ln()
        - big_n as f64 * ln_c_sl(n, r)
}

/// `C_{n,t} = c_st(Nr, N(n+1)) / (2^{Nr} c_sl^N)`.
pub fn c_nt(table: &TransitionTable, n: usize, big_n: usize) -> f64 {
    ln_c_nt(table, n, big_n).exp()
}

/// `ln C̃_n`.
pub fn ln_c_tilde(table: &TransitionTable, n: usize) -> f64 {
    let r = table.r();
    2.0 * ln_c_st(table.beta_z0, table.eta, table.tau, r, n + 1) - ln_c_sl(n, r)
}

/// `C̃_n = c_st(r, n+1)² / c_sl`.
pub fn c_tilde(table: &TransitionTable, n: usize) -> f64 {
    ln_c_tilde(table, n).exp()
}

/// `N = ⌈(t+1)/(n(1−4δ))⌉`, the number of coupled words.
pub fn coupling_count(n: usize, t: usize, delta: f64) -> usize {
    ((t + 1) as f64 / (n as f64 * (1.0 - 4.0 * delta))).ceil() as usize
}

/// `t_i = ⌊n(λ_i − 2δ)⌋ − 1`, the decoupled target lengths.
pub fn decoupled_length(n: usize, lambda: f64, delta: f64) -> Option<usize> {
    let v = (n as f64 * (lambda - 2.0 * delta)).floor() as i64 - 1;
    usize::try_from(v).ok()
}

/// `P_{|w|}(w)` in log space.
pub fn ln_path_probability(chain: &ChainSpec, w: &[StateId]) -> f64 {
    path_probability(chain, w).ln()
}

/// Right-hand sides of the stitching, coupling and decoupling geographic
/// inequalities.
pub mod bounds {
    /// `|v| − (t+1) + 2kτ`.
    pub fn stitching(total_len: usize, t: usize, k: usize, tau: usize) -> f64 {
        total_len as f64 - (t + 1) as f64 + 2.0 * (k * tau) as f64
    }

    /// `2(Nn − (t+1)) + 2N(rτ+1)`.
    pub fn coupling(big_n: usize, n: usize, t: usize, r: usize, tau: usize) -> f64 {
        2.0 * ((big_n * n) as f64 - (t + 1) as f64) + 2.0 * (big_n * (r * tau + 1)) as f64
    }

    /// `2(|u|−1−t1−t2) + 2rτ`.
    pub fn decoupling(len: usize, t1: usize, t2: usize, r: usize, tau: usize) -> f64 {
        2.0 * (len as f64 - 1.0 - t1 as f64 - t2 as f64) + 2.0 * (r * tau) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::decompose_classes;

    #[test]
    fn count_and_empirical() {
        let m = count_measure(&[0, 1, 0]);
        assert_eq!(m.get(&[0, 1]), 1.0);
        assert_eq!(m.get(&[1, 0]), 1.0);
        assert_eq!(empirical(&[0, 1, 0]).get(&[0, 1]), 0.5);
        assert!(empirical(&[]).is_empty() && empirical(&[3]).is_empty());
        assert_eq!(count_measure(&[0, 0, 0, 0]).total(), 3.0);
    }

    #[test]
    fn windows() {
        let e = empirical_k(&[0, 1, 0, 1], 3).unwrap();
        assert_eq!(e.get(&[0, 1, 0]), 0.5);
        assert_eq!(e.get(&[1, 0, 1]), 0.5);
        assert_eq!(
            empirical_k(&[0, 1, 0, 1], 2).unwrap(),
            empirical(&[0, 1, 0, 1])
        );
        assert_eq!(empirical_k(&[0; 5], 5).unwrap().get(&[0; 5]), 1.0);
        assert!(empirical_k(&[0, 1], 3).is_err());
    }

    #[test]
    fn direct_edges_need_no_connector() {
        // 1 -> 2 with self-loops, both classes.
        let c = ChainSpec::from_dense(&[vec![0.5, 0.5], vec![0.0, 1.0]], &[1.0, 0.0]).unwrap();
        let d = decompose_classes(&c);
        let t = build_transition_table(&c, &d, &[0, 1], &[0, 1]).unwrap();
        assert_eq!(t.z0, 0);
        assert!(t.xi.values().all(|w| w.is_empty()));
        assert_eq!(t.tau, 1);
        assert_eq!(t.eta, 0.5);
        assert!(build_transition_table(&c, &d, &[0], &[0, 1]).is_err());
        assert!(build_transition_table(&c, &d, &[0, 1], &[1, 0]).is_err());
    }

    #[test]
    fn stitch_and_truncate() {
        let c = ChainSpec::from_dense(&[vec![0.5, 0.5], vec![0.0, 1.0]], &[1.0, 0.0]).unwrap();
        let d = decompose_classes(&c);
        let t = build_transition_table(&c, &d, &[0, 1], &[0, 1]).unwrap();
        let v = vec![
            Piece {
                pos: 0,
                word: vec![0, 0],
            },
            Piece {
                pos: 1,
                word: vec![1, 1],
            },
        ];
        assert_eq!(stitch_full(&t, &v).unwrap(), vec![0, 0, 0, 1, 1]);
        assert_eq!(stitch(&t, &v, 3).unwrap(), vec![0, 0, 0, 1]);
        assert!(stitch(&t, &v, 4).is_err());
        let bad = vec![
            Piece {
                pos: 1,
                word: vec![1],
            },
            Piece {
                pos: 0,
                word: vec![0],
            },
        ];
        assert!(stitch(&t, &bad, 0).is_err());
    }

    #[test]
    fn decouple_micro_instance() {
        let c = ChainSpec::from_dense(&[vec![0.5, 0.5], vec![0.0, 1.0]], &[1.0, 0.0]).unwrap();
        let d = decompose_classes(&c);
        let t = build_transition_table(&c, &d, &[0, 1], &[0, 1]).unwrap();
        let (w1, w2) = decouple(&c, &t, &[0, 0, 0, 1, 1, 1], &[0], &[1], 1, 1).unwrap();
        assert_eq!(w1, vec![0, 0]);
        assert_eq!(w2, vec![0, 1]);
        assert!(decouple(&c, &t, &[0, 0, 1, 1], &[0], &[1], 1, 1).is_err());
        assert!(decouple(&c, &t, &[0, 0, 0, 1, 1, 1], &[0], &[0], 1, 1).is_err());
    }

    #[test]
    fn constants_match_closed_forms() {
        assert_eq!(c_sl(4, 2), 125.0);
        let v = c_st(0.5, 0.25, 2, 3, 10);
        let e = std::f64::consts::E;
        let closed = 0.5 * 0.25f64.powi(3) / 16f64.powi(2) * (6.0 / (e * 22.0)).powi(6);
        assert!((v / closed - 1.0).abs() < 1e-12);
        assert_eq!(coupling_count(5, 9, 0.05), 3);
        assert_eq!(decoupled_length(10, 0.5, 0.05), Some(3));
    }
}
