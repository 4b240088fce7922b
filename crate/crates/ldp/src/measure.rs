//! Sparse measures on `S^k`, the total-variation metric, marginals, balance
//! and admissibility.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::chain::{word_probability, ChainSpec, ClassDecomposition, StateId};
use crate::error::{Error, Result};

/// Masses below this are dropped on construction.
pub const PRUNE_EPS: f64 = 1e-15;
/// Two measures are equal when their TV distance is at most this.
pub const MEASURE_EQ_TOL: f64 = 1e-12;
/// Tolerance on the total mass of a probability measure.
pub const PROBABILITY_TOL: f64 = 1e-9;

/// A k-tuple of states.
pub type Tuple = Vec<StateId>;

/// A nonnegative measure on `S^k` with finite support, iterated in
/// lexicographic order of tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMeasure {
    arity: usize,
    entries: BTreeMap<Tuple, f64>,
    total: f64,
}

impl SparseMeasure {
    /// The null measure of the given arity.
    pub fn null(arity: usize) -> Self {
        Self {
            arity,
            entries: BTreeMap::new(),
            total: 0.0,
        }
    }

    /// Sums repeated tuples, rejects negative masses and prunes tiny ones.
    pub fn from_entries(
        arity: usize,
        entries: impl IntoIterator<Item = (Tuple, f64)>,
    ) -> Result<Self> {
        if arity == 0 {
            return Err(Error::InvalidArity {
                got: 0,
                why: "arity must be at least 1",
            });
        }
        let mut map: BTreeMap<Tuple, f64> = BTreeMap::new();
        for (t, v) in entries {
            if t.len() != arity {
                return Err(Error::ArityMismatch(arity, t.len()));
            }
            if v.is_nan() || v < 0.0 || !v.is_finite() {
                return Err(Error::Precondition(format!("invalid mass {v} at {t:?}")));
            }
            *map.entry(t).or_insert(0.0) += v;
        }
        Ok(Self::from_map(arity, map))
    }

    fn from_map(arity: usize, mut map: BTreeMap<Tuple, f64>) -> Self {
        map.retain(|_, v| *v >= PRUNE_EPS);
        let total = map.values().sum();
        Self {
            arity,
            entries: map,
            total,
        }
    }

    pub fn dirac(t: Tuple) -> Self {
        let arity = t.len();
        Self::from_map(arity, BTreeMap::from([(t, 1.0)]))
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, t: &[StateId]) -> f64 {
        self.entries.get(t).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Tuple, f64)> + '_ {
        self.entries.iter().map(|(t, &v)| (t, v))
    }

    pub fn is_probability(&self) -> bool {
        (self.total - 1.0).abs() <= PROBABILITY_TOL
    }

    /// States appearing in some support tuple.
    pub fn support_states(&self) -> Vec<StateId> {
        let mut s: Vec<StateId> = self.entries.keys().flatten().copied().collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_map(
            self.arity,
            self.entries
                .iter()
                .map(|(t, v)| (t.clone(), v * c))
                .collect(),
        )
    }

    /// Rescales to total mass one; the null measure stays null.
    pub fn normalized(&self) -> Self {
        if self.total > 0.0 {
            self.scaled(1.0 / self.total)
        } else {
            self.clone()
        }
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        check_arity(self, other)?;
        let mut map = self.entries.clone();
        for (t, v) in &other.entries {
            *map.entry(t.clone()).or_insert(0.0) += v;
        }
        Ok(Self::from_map(self.arity, map))
    }

    /// Keeps the tuples satisfying `keep`.
    pub fn restricted(&self, mut keep: impl FnMut(&[StateId]) -> bool) -> Self {
        Self::from_map(
            self.arity,
            self.entries
                .iter()
                .filter(|(t, _)| keep(t))
                .map(|(t, &v)| (t.clone(), v))
                .collect(),
        )
    }

    /// Projection onto the first `k` coordinates.
    pub fn marginal(&self, k: usize) -> Result<Self> {
        self.project(k, false)
    }

    /// Projection onto the last `k` coordinates.
    pub fn last_marginal(&self, k: usize) -> Result<Self> {
        self.project(k, true)
    }

    fn project(&self, k: usize, last: bool) -> Result<Self> {
        if k == 0 || k > self.arity {
            return Err(Error::InvalidArity {
                got: k,
                why: "marginal arity must be in 1..=k",
            });
        }
        let mut map: BTreeMap<Tuple, f64> = BTreeMap::new();
        for (t, &v) in &self.entries {
            let key = if last {
                t[self.arity - k..].to_vec()
            } else {
                t[..k].to_vec()
            };
            *map.entry(key).or_insert(0.0) += v;
        }
        Ok(Self::from_map(k, map))
    }
}

fn check_arity(a: &SparseMeasure, b: &SparseMeasure) -> Result<()> {
    if a.arity != b.arity {
        return Err(Error::ArityMismatch(a.arity, b.arity));
    }
    Ok(())
}

/// `Σ_u |μ(u) − ν(u)|` over the union of supports.
pub fn l1_distance(mu: &SparseMeasure, nu: &SparseMeasure) -> Result<f64> {
    check_arity(mu, nu)?;
    let mut s = 0.0;
    for (t, &v) in &mu.entries {
        s += (v - nu.get(t)).abs();
    }
    for (t, &v) in &nu.entries {
        if !mu.entries.contains_key(t) {
            s += v;
        }
    }
    Ok(s)
}

/// Total-variation distance, half the `ℓ¹` distance.
pub fn tv_distance(mu: &SparseMeasure, nu: &SparseMeasure) -> Result<f64> {
    Ok(0.5 * l1_distance(mu, nu)?)
}

/// Measure equality under the uniform comparison rule.
pub fn measures_equal(mu: &SparseMeasure, nu: &SparseMeasure) -> bool {
    tv_distance(mu, nu).is_ok_and(|d| d <= MEASURE_EQ_TOL)
}

/// Projection onto the first `k` coordinates.
pub fn marginal(mu: &SparseMeasure, k: usize) -> Result<SparseMeasure> {
    mu.marginal(k)
}

/// Whether the first and last `(k−1)`-marginals agree entrywise within
/// [`MEASURE_EQ_TOL`].
pub fn is_balanced(mu: &SparseMeasure) -> Result<bool> {
    if mu.arity < 2 {
        return Err(Error::InvalidArity {
            got: mu.arity,
            why: "balance needs arity ≥ 2",
        });
    }
    let a = mu.marginal(mu.arity - 1)?;
    let b = mu.last_marginal(mu.arity - 1)?;
    let ok = a
        .entries
        .iter()
        .all(|(t, &v)| (v - b.get(t)).abs() <= MEASURE_EQ_TOL)
        && b.entries
            .iter()
            .all(|(t, &v)| (v - a.get(t)).abs() <= MEASURE_EQ_TOL);
    Ok(ok)
}

/// Whether every support tuple is a positive-probability word.
pub fn in_allowed_support(chain: &ChainSpec, mu: &SparseMeasure) -> bool {
    mu.entries.keys().all(|t| word_probability(chain, t) > 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AdmissibilityStatus {
    NotPreAdmissible,
    PreAdmissibleOnly,
    Admissible,
}

/// Why a measure failed admissibility.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// A support tuple lying in no `C_j^k`.
    OutsideClasses { tuple: Tuple },
    /// Two classes of `J_μ` with neither reaching the other.
    Incomparable { first: usize, second: usize },
    /// A class of `J_μ` the initial law cannot reach.
    Unreachable { class: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityVerdict {
    pub status: AdmissibilityStatus,
    /// Classes charged by the measure; for admissible measures, listed in
    /// reachability order. Empty when not pre-admissible.
    pub j_mu: Vec<usize>,
    pub witness: Option<Witness>,
}

impl AdmissibilityVerdict {
    pub fn is_admissible(&self) -> bool {
        self.status == AdmissibilityStatus::Admissible
    }
}

/// Sorts classes compatibly with reachability: if `a ↝ b` and `a ≠ b` then
/// `a` comes first.
pub fn sort_by_reachability(d: &ClassDecomposition, js: &mut [usize]) {
    let ancestors = |j: usize| (0..d.n_classes()).filter(|&i| d.reaches(i, j)).count();
    js.sort_by_key(|&j| (ancestors(j), j));
}

/// Classifies `mu` as not pre-admissible, pre-admissible only, or admissible.
pub fn classify_admissible(d: &ClassDecomposition, mu: &SparseMeasure) -> AdmissibilityVerdict {
    let mut js: Vec<usize> = Vec::new();
    for t in mu.entries.keys() {
        let j = d.class_of(t[0]);
        let same = j.is_some() && t.iter().all(|&x| d.class_of(x) == j);
        if !same {
            return AdmissibilityVerdict {
                status: AdmissibilityStatus::NotPreAdmissible,
                j_mu: Vec::new(),
                witness: Some(Witness::OutsideClasses { tuple: t.clone() }),
            };
        }
        js.push(j.unwrap());
    }
    js.sort_unstable();
    js.dedup();
    sort_by_reachability(d, &mut js);
    let pre = |w| AdmissibilityVerdict {
        status: AdmissibilityStatus::PreAdmissibleOnly,
        j_mu: js.clone(),
        witness: Some(w),
    };
    for w in js.windows(2) {
        if !d.reaches(w[0], w[1]) {
            return pre(Witness::Incomparable {
                first: w[0],
                second: w[1],
            });
        }
    }
    if let Some(&j) = js.iter().find(|&&j| !d.beta_reaches(j)) {
        return pre(Witness::Unreachable { class: j });
    }
    AdmissibilityVerdict {
        status: AdmissibilityStatus::Admissible,
        j_mu: js,
        witness: None,
    }
}

/// `μ(C_j^k)` for each class `j`.
pub fn class_weights(d: &ClassDecomposition, mu: &SparseMeasure) -> Vec<f64> {
    let mut w = vec![0.0; d.n_classes()];
    for (t, v) in mu.iter() {
        let j = d.class_of(t[0]);
        if let Some(j) = j.filter(|&j| t.iter().all(|&x| d.class_of(x) == Some(j))) {
            w[j] += v;
        }
    }
    w
}

/// Parses `mass <l1> … <lk> <value>` lines; `#` starts a comment.
pub fn parse_measure(chain: &ChainSpec, text: &str) -> Result<SparseMeasure> {
    let mut arity = None;
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            line: i + 1,
            msg: msg.to_string(),
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks[0] != "mass" || toks.len() < 3 {
            return Err(bad("expected `mass <labels…> <value>`"));
        }
        let k = toks.len() - 2;
        if *arity.get_or_insert(k) != k {
            return Err(bad("mixed arities in one measure file"));
        }
        let t = toks[1..=k]
            .iter()
            .map(|l| chain.require_id(l))
            .collect::<Result<Tuple>>()?;
        let v: f64 = toks[k + 1]
            .parse()
            .map_err(|_| bad("invalid mass literal"))?;
        entries.push((t, v));
    }
    let arity = arity.ok_or(Error::Parse {
        line: 0,
        msg: "empty measure file".into(),
    })?;
    SparseMeasure::from_entries(arity, entries)
}

/// Serializes to the measure text format.
pub fn measure_to_text(chain: &ChainSpec, mu: &SparseMeasure) -> String {
    mu.iter()
        .map(|(t, v)| format!("mass {} {:?}\n", chain.format_word(t), v))
        .collect()
}
