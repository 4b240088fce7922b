//! Finite Markov chains: parsing, validation, word probabilities and the
//! decomposition of the state space into irreducible classes.
//!
//! A chain is given by a sparse stochastic kernel `p` and an initial law
//! `beta`. States that can return to themselves along a positive path of
//! length at least one are grouped into irreducible classes; every other
//! state is transient. Reducible chains are the normal case here, so the
//! reachability order between classes is part of the public surface.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};

/// Dense index into the state table.
pub type StateId = usize;

/// A finite sequence of states. The empty word is allowed.
pub type Word = Vec<StateId>;

/// Default tolerance for row sums and the initial law.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Words longer than this are scored in log space.
const LOG_SPACE_THRESHOLD: usize = 64;

/// Options controlling validation of a chain.
#[derive(Debug, Clone, Copy)]
pub struct ChainOptions {
    pub tolerance: f64,
    /// Rescale rows and `beta` instead of rejecting them.
    pub renormalize: bool,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            tolerance: STOCHASTIC_TOL,
            renormalize: false,
        }
    }
}

/// A validated finite Markov chain.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    labels: Vec<String>,
    index: HashMap<String, StateId>,
    rows: Vec<Vec<(StateId, f64)>>,
    beta: Vec<(StateId, f64)>,
}

impl ChainSpec {
    /// Builds a chain from labelled states and sparse entries.
    ///
    /// Zero entries are dropped. Duplicate entries, negative values or
    /// probabilities above one, and rows that are not stochastic are
    /// rejected unless `opts.renormalize` is set, in which case rows and
    /// `beta` are rescaled.
    pub fn new(
        labels: Vec<String>,
        kernel: impl IntoIterator<Item = (StateId, StateId, f64)>,
        beta: impl IntoIterator<Item = (StateId, f64)>,
        opts: ChainOptions,
    ) -> Result<Self> {
        let n = labels.len();
        let mut index = HashMap::with_capacity(n);
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::Precondition("empty state label".into()));
            }
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::Duplicate(format!("state `{l}`")));
            }
        }
        let mut rows: Vec<Vec<(StateId, f64)>> = vec![Vec::new(); n];
        for (x, y, v) in kernel {
            if x >= n || y >= n {
                return Err(Error::Precondition(format!(
                    "state id out of range in ({x},{y})"
                )));
            }
            check_prob(v, || format!("p({},{})", labels[x], labels[y]))?;
            if v > 0.0 {
                rows[x].push((y, v));
            }
        }
        for (x, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|e| e.0);
            if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::Duplicate(format!(
                    "trans {} {}",
                    labels[x], labels[w[0].0]
                )));
            }
            let sum: f64 = row.iter().map(|e| e.1).sum();
            if (sum - 1.0).abs() > opts.tolerance {
                if opts.renormalize && sum > 0.0 {
                    row.iter_mut().for_each(|e| e.1 /= sum);
                } else {
                    return Err(Error::NotStochastic {
                        label: labels[x].clone(),
                        sum,
                    });
                }
            }
        }
        let mut b: Vec<(StateId, f64)> = Vec::new();
        for (x, v) in beta {
            if x >= n {
                return Err(Error::Precondition(format!(
                    "state id {x} out of range in beta"
                )));
            }
            check_prob(v, || format!("beta({})", labels[x]))?;
            if v > 0.0 {
                b.push((x, v));
            }
        }
        b.sort_by_key(|e| e.0);
        if let Some(w) = b.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Duplicate(format!("init {}", labels[w[0].0])));
        }
        let sum: f64 = b.iter().map(|e| e.1).sum();
        if (sum - 1.0).abs() > opts.tolerance {
            if opts.renormalize && sum > 0.0 {
                b.iter_mut().for_each(|e| e.1 /= sum);
            } else {
                return Err(Error::BetaNotNormalized(sum));
            }
        }
        Ok(Self {
            labels,
            index,
            rows,
            beta: b,
        })
    }

    /// Builds a chain from a dense matrix and initial vector; labels are
    /// `1..=n`. Convenient for tests and generated chains.
    pub fn from_dense(p: &[Vec<f64>], beta: &[f64]) -> Result<Self> {
        let labels = (1..=p.len()).map(|i| i.to_string()).collect();
        let kernel = p
            .iter()
            .enumerate()
            .flat_map(|(x, r)| r.iter().enumerate().map(move |(y, &v)| (x, y, v)));
        let b = beta.iter().enumerate().map(|(x, &v)| (x, v));
        Self::new(labels, kernel, b, ChainOptions::default())
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, x: StateId) -> &str {
        &self.labels[x]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn id(&self, label: &str) -> Option<StateId> {
        self.index.get(label).copied()
    }

    /// Looks up a label, failing with [`Error::UnknownLabel`].
    pub fn require_id(&self, label: &str) -> Result<StateId> {
        self.id(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Transition probability `p(x,y)`; zero when absent.
    pub fn p(&self, x: StateId, y: StateId) -> f64 {
        let row = &self.rows[x];
        match row.binary_search_by_key(&y, |e| e.0) {
            Ok(i) => row[i].1,
            Err(_) => 0.0,
        }
    }

    /// Positive entries of row `x`, sorted by target.
    pub fn row(&self, x: StateId) -> &[(StateId, f64)] {
        &self.rows[x]
    }

    pub fn beta(&self, x: StateId) -> f64 {
        match self.beta.binary_search_by_key(&x, |e| e.0) {
            Ok(i) => self.beta[i].1,
            Err(_) => 0.0,
        }
    }

    /// Positive entries of the initial law, sorted by state.
    pub fn beta_entries(&self) -> &[(StateId, f64)] {
        &self.beta
    }

    /// Serializes back to the chain-spec text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in &self.labels {
            s.push_str(&format!("state {l}\n"));
        }
        for &(x, v) in &self.beta {
            s.push_str(&format!("init {} {:?}\n", self.labels[x], v));
        }
        for (x, row) in self.rows.iter().enumerate() {
            for &(y, v) in row {
                s.push_str(&format!(
                    "trans {} {} {:?}\n",
                    self.labels[x], self.labels[y], v
                ));
            }
        }
        s
    }

    /// Parses a whitespace-separated label sequence.
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        text.split_whitespace()
            .map(|l| self.require_id(l))
            .collect()
    }

    pub fn format_word(&self, w: &[StateId]) -> String {
        w.iter()
            .map(|&x| self.label(x))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn check_prob(v: f64, what: impl FnOnce() -> String) -> Result<()> {
    if !v.is_finite() || !(0.0..=1.0 + STOCHASTIC_TOL).contains(&v) {
        return Err(Error::InvalidProbability {
            what: what(),
            value: v,
        });
    }
    Ok(())
}

/// Parses a chain-spec document.
///
/// ```text
/// # comment
/// state a
/// state b
/// init a 1
/// trans a b 1
/// trans b b 1
/// ```
pub fn parse_chain(text: &str, opts: ChainOptions) -> Result<ChainSpec> {
    let mut labels: Vec<String> = Vec::new();
    let mut index: HashMap<String, StateId> = HashMap::new();
    let mut kernel = Vec::new();
    let mut beta = Vec::new();
    let lookup = |index: &HashMap<String, StateId>, l: &str| {
        index
            .get(l)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(l.to_string()))
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| Error::Parse {
            line: line_no,
            msg: msg.to_string(),
        };
        match toks[0] {
            "state" => {
                if toks.len() != 2 {
                    return Err(bad("expected `state <label>`"));
                }
                if index.contains_key(toks[1]) {
                    return Err(Error::Duplicate(format!(
                        "state `{}` (line {line_no})",
                        toks[1]
                    )));
                }
                index.insert(toks[1].to_string(), labels.len());
                labels.push(toks[1].to_string());
            }
            "init" => {
                if toks.len() != 3 {
                    return Err(bad("expected `init <label> <prob>`"));
                }
                let x = lookup(&index, toks[1])?;
                let v: f64 = toks[2]
                    .parse()
                    .map_err(|_| bad("invalid probability literal"))?;
                beta.push((x, v));
            }
            "trans" => {
                if toks.len() != 4 {
                    return Err(bad("expected `trans <from> <to> <prob>`"));
                }
                let x = lookup(&index, toks[1])?;
                let y = lookup(&index, toks[2])?;
                let v: f64 = toks[3]
                    .parse()
                    .map_err(|_| bad("invalid probability literal"))?;
                kernel.push((x, y, v));
            }
            _ => return Err(bad("unknown directive")),
        }
    }
    ChainSpec::new(labels, kernel, beta, opts)
}

/// `p(u) = Π p(u_i, u_{i+1})`, with `p(u) = 1` when `|u| ≤ 1`.
pub fn word_probability(chain: &ChainSpec, u: &[StateId]) -> f64 {
    if u.len() > LOG_SPACE_THRESHOLD {
        return log_word_probability(chain, u).exp();
    }
    u.windows(2).map(|w| chain.p(w[0], w[1])).product()
}

/// `P_{|u|}(u) = β(u_1) p(u)`; the empty word has probability one.
pub fn path_probability(chain: &ChainSpec, u: &[StateId]) -> f64 {
    match u.first() {
        None => 1.0,
        Some(&x) if u.len() > LOG_SPACE_THRESHOLD => {
            (chain.beta(x).ln() + log_word_probability(chain, u)).exp()
        }
        Some(&x) => chain.beta(x) * word_probability(chain, u),
    }
}

/// `log p(u)`, `-inf` when some transition is forbidden.
pub fn log_word_probability(chain: &ChainSpec, u: &[StateId]) -> f64 {
    let mut s = 0.0;
    for w in u.windows(2) {
        let v = chain.p(w[0], w[1]);
        if v == 0.0 {
            return f64::NEG_INFINITY;
        }
        s += v.ln();
    }
    s
}

/// Strongly connected components by an iterative Tarjan search.
///
/// Components come out in reverse topological order: a component is emitted
/// only after every component it reaches.
pub(crate) fn tarjan_scc<F, I>(n: usize, succ: F) -> Vec<Vec<usize>>
where
    F: Fn(usize) -> I,
    I: Iterator<Item = usize>,
{
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0usize;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = Vec::new();
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, succ(root).collect(), 0));
        while let Some(frame) = call.last_mut() {
            let v = frame.0;
            if frame.2 < frame.1.len() {
                let w = frame.1[frame.2];
                frame.2 += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, succ(w).collect(), 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(parent) = call.last() {
                    let p = parent.0;
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

/// States reachable from `sources` by paths of length ≥ 0 that stay inside
/// `allowed` (all states when `None`).
pub fn reachable_from(
    chain: &ChainSpec,
    sources: impl IntoIterator<Item = StateId>,
    allowed: Option<&[bool]>,
) -> Vec<bool> {
    let ok = |x: StateId| allowed.is_none_or(|a| a[x]);
    let mut seen = vec![false; chain.n_states()];
    let mut queue = VecDeque::new();
    for s in sources {
        if ok(s) && !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(x) = queue.pop_front() {
        for &(y, _) in chain.row(x) {
            if ok(y) && !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    seen
}

/// Irreducible classes, transient states and the reachability order.
#[derive(Debug, Clone)]
pub struct ClassDecomposition {
    classes: Vec<Vec<StateId>>,
    class_of: Vec<Option<usize>>,
    transient: Vec<StateId>,
    reach: Vec<Vec<bool>>,
    beta_reaches: Vec<bool>,
}

impl ClassDecomposition {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Class `j`, sorted by state id.
    pub fn class(&self, j: usize) -> &[StateId] {
        &self.classes[j]
    }

    pub fn classes(&self) -> &[Vec<StateId>] {
        &self.classes
    }

    pub fn class_of(&self, x: StateId) -> Option<usize> {
        self.class_of[x]
    }

    pub fn transient(&self) -> &[StateId] {
        &self.transient
    }

    /// Whether a positive path leads from `C_{j1}` to `C_{j2}`; reflexive.
    pub fn reaches(&self, j1: usize, j2: usize) -> bool {
        self.reach[j1][j2]
    }

    /// Whether some state in the support of `beta` is in, or leads to, `C_j`.
    pub fn beta_reaches(&self, j: usize) -> bool {
        self.beta_reaches[j]
    }

    /// Strict order pairs `(j1, j2)`, `j1 ≠ j2`, with `C_{j1} ↝ C_{j2}`.
    pub fn order_pairs(&self) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for j1 in 0..self.n_classes() {
            for j2 in 0..self.n_classes() {
                if j1 != j2 && self.reach[j1][j2] {
                    v.push((j1, j2));
                }
            }
        }
        v
    }
}

/// Computes the irreducible classes of `chain`.
///
/// Classes are the strongly connected components that contain a cycle; a
/// lone state needs a self-loop. Indices ascend with the minimal state id.
pub fn decompose_classes(chain: &ChainSpec) -> ClassDecomposition {
    let n = chain.n_states();
    let comps = tarjan_scc(n, |x| chain.row(x).iter().map(|e| e.0));
    let mut classes: Vec<Vec<StateId>> = comps
        .into_iter()
        .filter(|c| c.len() > 1 || chain.p(c[0], c[0]) > 0.0)
        .collect();
    classes.sort_by_key(|c| c[0]);
    let mut class_of = vec![None; n];
    for (j, c) in classes.iter().enumerate() {
        for &x in c {
            class_of[x] = Some(j);
        }
    }
    let transient = (0..n).filter(|&x| class_of[x].is_none()).collect();
    let nc = classes.len();
    let mut reach = vec![vec![false; nc]; nc];
    for (j, c) in classes.iter().enumerate() {
        let seen = reachable_from(chain, c.iter().copied(), None);
        for (x, &s) in seen.iter().enumerate() {
            if let (true, Some(j2)) = (s, class_of[x]) {
                reach[j][j2] = true;
            }
        }
    }
    let from_beta = reachable_from(chain, chain.beta_entries().iter().map(|e| e.0), None);
    let mut beta_reaches = vec![false; nc];
    for (x, &s) in from_beta.iter().enumerate() {
        if let (true, Some(j)) = (s, class_of[x]) {
            beta_reaches[j] = true;
        }
    }
    ClassDecomposition {
        classes,
        class_of,
        transient,
        reach,
        beta_reaches,
    }
}

/// Convenience for callers that hold a chain and want both pieces.
pub fn reaches(d: &ClassDecomposition, j1: usize, j2: usize) -> bool {
    d.reaches(j1, j2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1() -> ChainSpec {
        ChainSpec::from_dense(
            &[
                vec![0.5, 0.25, 0.25],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            &[1.0, 0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn parses_two_state_doc() {
        let c = parse_chain(
            "state 1\nstate 2\ninit 1 1\ninit 2 0\ntrans 1 1 0.5\ntrans 1 2 0.5\ntrans 2 1 0.5\ntrans 2 2 0.5\n",
            ChainOptions::default(),
        )
        .unwrap();
        assert_eq!(c.n_states(), 2);
        assert_eq!(c.id("2"), Some(1));
        assert_eq!(c.beta_entries(), &[(0, 1.0)]);
    }

    #[test]
    fn rejects_substochastic_row() {
        let e = parse_chain(
            "state a\ninit a 1\ntrans a a 0.9\n",
            ChainOptions::default(),
        );
        assert!(matches!(e, Err(Error::NotStochastic { .. })));
        assert!(e.unwrap_err().to_string().contains("row not stochastic"));
        let ok = parse_chain(
            "state a\ninit a 1\ntrans a a 0.9\n",
            ChainOptions {
                renormalize: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(ok.p(0, 0), 1.0);
    }

    #[test]
    fn reports_line_numbers_and_labels() {
        let e = parse_chain("state a\n\nbogus line\n", ChainOptions::default()).unwrap_err();
        assert_eq!(
            e,
            Error::Parse {
                line: 3,
                msg: "unknown directive".into()
            }
        );
        let e = parse_chain("state a\ntrans a b 1\n", ChainOptions::default()).unwrap_err();
        assert_eq!(e, Error::UnknownLabel("b".into()));
        let e = parse_chain(
            "state a\ninit a 1\ntrans a a 0.5\ntrans a a 0.5\n",
            ChainOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(e, Error::Duplicate(_)));
    }

    #[test]
    fn text_round_trip() {
        let c = e1();
        let d = parse_chain(&c.to_text(), ChainOptions::default()).unwrap();
        assert_eq!(d.to_text(), c.to_text());
    }

    #[test]
    fn word_probabilities() {
        let sym = ChainSpec::from_dense(&[vec![0.5, 0.5], vec![0.5, 0.5]], &[1.0, 0.0]).unwrap();
        assert_eq!(word_probability(&sym, &[0, 0, 1]), 0.25);
        assert_eq!(word_probability(&sym, &[]), 1.0);
        assert_eq!(path_probability(&e1(), &[0, 0, 1]), 0.125);
        let long = vec![0; 200];
        let expect = 0.5f64.powi(199);
        assert!((word_probability(&sym, &long) / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn e1_classes() {
        let d = decompose_classes(&e1());
        assert_eq!(d.classes(), &[vec![0], vec![1], vec![2]]);
        assert!(d.transient().is_empty());
        assert!(d.reaches(0, 1) && d.reaches(0, 2));
        assert!(!d.reaches(1, 2) && !d.reaches(2, 1) && !d.reaches(1, 0));
        assert!((0..3).all(|j| d.beta_reaches(j) && d.reaches(j, j)));
        assert_eq!(d.order_pairs(), vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn state_without_self_loop_is_transient() {
        let c = ChainSpec::from_dense(&[vec![0.0, 1.0], vec![0.0, 1.0]], &[1.0, 0.0]).unwrap();
        let d = decompose_classes(&c);
        assert_eq!(d.classes(), &[vec![1]]);
        assert_eq!(d.transient(), &[0]);
    }
}
