use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::chain::{reachable_from, tarjan_scc, ChainSpec, ClassDecomposition, StateId};
use crate::error::{Error, Result};
use crate::measure::{SparseMeasure, Tuple};

use super::ascent::ascend;
use super::perron::{perron, Block, PerronPair};
use super::{solve_contraction, AscentOptions, Bound};

/// A bounded potential on `S^k`, zero off its table.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltPotential {
    arity: usize,
    values: BTreeMap<Tuple, f64>,
}

impl TiltPotential {
    pub fn new(arity: usize, entries: impl IntoIterator<Item = (Tuple, f64)>) -> Result<Self> {
        if arity == 0 {
            return Err(Error::InvalidArity {
                got: 0,
                why: "potential arity must be positive",
            });
        }
        let mut values = BTreeMap::new();
        for (t, v) in entries {
            if t.len() != arity {
                return Err(Error::ArityMismatch(arity, t.len()));
            }
            if !v.is_finite() {
                return Err(Error::Precondition(format!(
                    "potential value {v} at {t:?} is not finite"
                )));
            }
            if values.insert(t.clone(), v).is_some() {
                return Err(Error::Duplicate(format!("potential entry {t:?}")));
            }
        }
        Ok(Self { arity, values })
    }

    pub fn zero(arity: usize) -> Self {
        Self {
            arity,
            values: BTreeMap::new(),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn get(&self, t: &[StateId]) -> f64 {
        self.values.get(t).copied().unwrap_or(0.0)
    }

    /// `sup |V|`.
    pub fn bound(&self) -> f64 {
        self.values.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Tuple, f64)> + '_ {
        self.values.iter().map(|(t, &v)| (t, v))
    }
}

/// Parses `v <label_1> … <label_k> <value>` lines; `#` starts a comment.
pub fn parse_potential(chain: &ChainSpec, text: &str) -> Result<TiltPotential> {
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
        if toks[0] != "v" || toks.len() < 3 {
            return Err(bad("expected `v <labels…> <value>`"));
        }
        let k = toks.len() - 2;
        if *arity.get_or_insert(k) != k {
            return Err(bad("mixed arities in one potential file"));
        }
        let t = toks[1..=k]
            .iter()
            .map(|l| chain.require_id(l))
            .collect::<Result<Tuple>>()?;
        let v: f64 = toks[k + 1]
            .parse()
            .map_err(|_| bad("invalid value literal"))?;
        entries.push((t, v));
    }
    TiltPotential::new(
        arity.ok_or(Error::Parse {
            line: 0,
            msg: "empty potential file".into(),
        })?,
        entries,
    )
}

fn check_level(k: usize) -> Result<()> {
    if k == 1 || k == 2 {
        Ok(())
    } else {
        Err(Error::InvalidArity {
            got: k,
            why: "the SCGF is implemented for levels 1 and 2",
        })
    }
}

/// The tilted block of `states` (sorted) with weights `w(x, y, p(x,y))`.
fn tilted_block(
    chain: &ChainSpec,
    states: &[StateId],
    w: &impl Fn(StateId, StateId, f64) -> f64,
) -> Block {
    let local: HashMap<StateId, usize> = states.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let rows = states
        .iter()
        .map(|&x| {
            chain
                .row(x)
                .iter()
                .filter_map(|&(y, p)| local.get(&y).map(|&j| (j, w(x, y, p))))
                .collect()
        })
        .collect();
    Block { rows }
}

fn weight_fn(v: &TiltPotential) -> impl Fn(StateId, StateId, f64) -> f64 + '_ {
    move |x, y, p| {
        let e = if v.arity == 1 {
            v.get(&[x])
        } else {
            v.get(&[x, y])
        };
        p * e.exp()
    }
}

/// `Λ(V)` with the dominating class and per-class log roots.
#[derive(Debug, Clone, Serialize)]
pub struct ScgfDetail {
    #[serde(serialize_with = "crate::num::ext")]
    pub value: f64,
    pub class: Option<usize>,
    /// `(class, log ρ_j)` for each class reachable from `supp β`.
    pub per_class: Vec<(usize, f64)>,
    pub converged: bool,
}

/// `Λ(V)`: the largest log Perron root of the tilted kernel over classes
/// reachable from `supp β`.
pub fn scgf_lambda(chain: &ChainSpec, d: &ClassDecomposition, v: &TiltPotential) -> Result<f64> {
    Ok(scgf_detail(chain, d, v)?.value)
}

pub fn scgf_detail(
    chain: &ChainSpec,
    d: &ClassDecomposition,
    v: &TiltPotential,
) -> Result<ScgfDetail> {
    check_level(v.arity)?;
    let w = weight_fn(v);
    let mut best = ScgfDetail {
        value: f64::NEG_INFINITY,
        class: None,
        per_class: Vec::new(),
        converged: true,
    };
    for j in (0..d.n_classes()).filter(|&j| d.beta_reaches(j)) {
        let pp = perron(&tilted_block(chain, d.class(j), &w));
        let l = pp.root.ln();
        best.converged &= pp.converged;
        best.per_class.push((j, l));
        if l > best.value {
            best.value = l;
            best.class = Some(j);
        }
    }
    // A finite stochastic chain always reaches a closed class.
    assert!(
        best.class.is_some(),
        "no class reachable from the initial law"
    );
    Ok(best)
}

/// `Λ_K(V)`: the growth rate of the tilted operator killed outside `K`.
///
/// Classes are those of the graph restricted to `K` that can be reached
/// within `K` from `supp β ∩ K`; `−∞` when there is none.
pub fn scgf_lambda_k(chain: &ChainSpec, v: &TiltPotential, k: &[StateId]) -> Result<f64> {
    check_level(v.arity)?;
    let n = chain.n_states();
    let mut in_k = vec![false; n];
    for &x in k {
        if x >= n {
            return Err(Error::Precondition(format!("state id {x} out of range")));
        }
        in_k[x] = true;
    }
    let starts = chain
        .beta_entries()
        .iter()
        .map(|e| e.0)
        .filter(|&x| in_k[x]);
    let seen = reachable_from(chain, starts, Some(&in_k));
    let comps = tarjan_scc(n, |x| {
        chain
            .row(x)
            .iter()
            .map(|e| e.0)
            .filter(|&y| in_k[x] && in_k[y])
            .collect::<Vec<_>>()
            .into_iter()
    });
    let w = weight_fn(v);
    let mut best = f64::NEG_INFINITY;
    for c in comps {
        if !seen[c[0]] || !(c.len() > 1 || chain.p(c[0], c[0]) > 0.0) {
            continue;
        }
        best = best.max(perron(&tilted_block(chain, &c, &w)).root.ln());
    }
    Ok(best)
}

/// Coordinates of the conjugate problem: edges (level 2) or states
/// (level 1) inside classes reachable from `supp β`, with their class.
fn coordinates(chain: &ChainSpec, d: &ClassDecomposition, level: usize) -> Vec<(Tuple, usize)> {
    let mut out = Vec::new();
    for j in (0..d.n_classes()).filter(|&j| d.beta_reaches(j)) {
        for &x in d.class(j) {
            if level == 1 {
                out.push((vec![x], j));
            } else {
                for &(y, _) in chain.row(x) {
                    if d.class_of(y) == Some(j) {
                        out.push((vec![x, y], j));
                    }
                }
            }
        }
    }
    out.sort();
    out
}

/// Lower bound on `Λ*(μ) = sup_V ⟨μ,V⟩ − Λ(V)` by supergradient ascent.
///
/// Values of `Λ` use the upper Collatz–Wielandt bound, so every reported
/// value is a genuine lower bound. Mass outside the reachable classes makes
/// the supremum infinite.
pub fn scgf_conjugate(
    chain: &ChainSpec,
    d: &ClassDecomposition,
    mu: &SparseMeasure,
    opts: &AscentOptions,
) -> Result<Bound> {
    let level = mu.arity();
    check_level(level)?;
    let coords = coordinates(chain, d, level);
    let index: HashMap<&[StateId], usize> = coords
        .iter()
        .enumerate()
        .map(|(i, (t, _))| (t.as_slice(), i))
        .collect();
    let mut mass = vec![0.0; coords.len()];
    for (t, m) in mu.iter() {
        match index.get(t.as_slice()) {
            Some(&i) => mass[i] = m,
            None => return Ok(Bound::infinite()),
        }
    }
    let reachable: Vec<usize> = (0..d.n_classes()).filter(|&j| d.beta_reaches(j)).collect();
    let eval = |v: &[f64]| -> (f64, Vec<f64>) {
        let w = |x: StateId, y: StateId, p: f64| {
            let key: &[StateId] = if level == 1 { &[x] } else { &[x, y] };
            p * index.get(key).map_or(0.0, |&i| v[i]).exp()
        };
        let mut best: Option<(f64, usize, PerronPair, Vec<StateId>)> = None;
        for &j in &reachable {
            let pp = perron(&tilted_block(chain, d.class(j), &w));
            let l = pp.upper.ln();
            if best.as_ref().is_none_or(|b| l > b.0) {
                best = Some((l, j, pp, d.class(j).to_vec()));
            }
        }
        let (lam, _, pp, states) = best.expect("reachable classes exist");
        let inner: f64 = mass.iter().zip(v).map(|(m, x)| m * x).sum();
        let mut g = mass.clone();
        let lr: f64 = pp.left.iter().zip(&pp.right).map(|(a, b)| a * b).sum();
        for (li, &x) in states.iter().enumerate() {
            if level == 1 {
                g[index[[x].as_slice()]] -= pp.left[li] * pp.right[li] / lr;
            } else {
                for &(y, p) in chain.row(x) {
                    if let (Some(&i), Ok(yi)) =
                        (index.get([x, y].as_slice()), states.binary_search(&y))
                    {
                        g[i] -= pp.left[li] * p * v[i].exp() * pp.right[yi] / (pp.root * lr);
                    }
                }
            }
        }
        (inner - lam, g)
    };
    let x0 = if opts.warm_start {
        warm_start(chain, d, mu, &coords, &mass, opts.barrier)?
    } else {
        vec![0.0; coords.len()]
    };
    let res = ascend(x0, opts, eval);
    if res.diverged {
        return Ok(Bound {
            iterations: res.iterations,
            ..Bound::infinite()
        });
    }
    Ok(Bound {
        value: res.value.max(0.0),
        residual: res.grad_l1,
        iterations: res.iterations,
        converged: res.converged,
        unbounded: false,
    })
}

/// `log(q/p)` on the support and a large negative value elsewhere; at level
/// 1 the potential comes from the contraction optimizer when available.
fn warm_start(
    chain: &ChainSpec,
    d: &ClassDecomposition,
    mu: &SparseMeasure,
    coords: &[(Tuple, usize)],
    mass: &[f64],
    barrier: f64,
) -> Result<Vec<f64>> {
    let mut v = vec![-barrier; coords.len()];
    if mu.arity() == 2 {
        let first = mu.marginal(1)?;
        for (i, (t, _)) in coords.iter().enumerate() {
            if mass[i] > 0.0 {
                v[i] = (mass[i] / first.get(&t[..1]) / chain.p(t[0], t[1])).ln();
            }
        }
        return Ok(v);
    }
    let sol = solve_contraction(chain, d, mu)?;
    for (i, (t, _)) in coords.iter().enumerate() {
        if mass[i] > 0.0 {
            v[i] = if sol.value.is_finite() {
                (sol.a[t[0]] * sol.b[t[0]]).ln()
            } else {
                0.0
            };
        }
    }
    Ok(v)
}
