//! Subcommand handlers. Each returns the `result` part of the output document.

use std::path::Path;

use clap::ValueEnum;
use ldp::chain::{decompose_classes, parse_chain, ChainOptions, ChainSpec, Word};
use ldp::cycles::{approximate, decompose_balanced};
use ldp::estimator::{monte_carlo_ball, rl_slope};
use ldp::measure::l1_distance;
use ldp::measure::{
    class_weights, classify_admissible, in_allowed_support, is_balanced, parse_measure,
    SparseMeasure,
};
use ldp::rate::{
    entropy_rate_limit, level3_marginal_entropy, parse_kernel, parse_potential, rate_i, rate_r,
    scgf_conjugate, scgf_detail, scgf_lambda_k, solve_contraction, AscentOptions, MarkovMeasure,
};
use ldp::words::{
    bounds, build_transition_table, c_sl, count_measure, couple, gamma_mass, is_stitchable,
    list_length, ln_c_nt, ln_c_st, ln_path_probability, slice, slicing_bounds, stitch, Piece,
    TransitionTable,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{num, to_json, CmdResult, Failure, Run};
use crate::{Command, Global};

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WordOp {
    Slice,
    Stitch,
    Couple,
}

pub fn dispatch(cmd: &Command, g: &Global, run: &mut Run) -> CmdResult<Value> {
    match cmd {
        Command::Classify { chain } => classify(run, chain),
        Command::CheckMeasure { chain, measure } => check_measure(run, chain, measure),
        Command::Rate {
            chain,
            measure,
            level,
            cross_check,
        } => rate(run, g, chain, measure, *level, *cross_check),
        Command::Scgf {
            chain,
            potential,
            truncate,
        } => scgf(run, chain, potential, truncate.as_deref()),
        Command::Conjugate { chain, measure } => conjugate(run, g, chain, measure),
        Command::Decompose {
            chain,
            measure,
            terms,
        } => decompose(run, chain, measure, *terms),
        Command::Approximate { chain, measure, m } => approx(run, chain, measure, *m),
        Command::Words {
            op,
            chain,
            k,
            j0,
            words,
            t,
        } => word_op(run, *op, chain, k, j0, words.as_deref(), *t),
        Command::Estimate {
            chain,
            measure,
            delta,
            n,
            mc,
        } => estimate(run, g, chain, measure, *delta, n, mc.as_deref()),
        Command::Level3 { chain, pi, q, kmax } => level3(run, chain, pi, q, *kmax),
    }
}

fn load_chain(run: &mut Run, path: &Path) -> CmdResult<ChainSpec> {
    let text = run.read(path)?;
    Ok(parse_chain(&text, ChainOptions::default())?)
}

fn load_measure(run: &mut Run, chain: &ChainSpec, path: &Path) -> CmdResult<SparseMeasure> {
    let text = run.read(path)?;
    Ok(parse_measure(chain, &text)?)
}

fn labels(chain: &ChainSpec, w: &[usize]) -> Vec<String> {
    w.iter().map(|&x| chain.label(x).to_string()).collect()
}

fn measure_json(chain: &ChainSpec, mu: &SparseMeasure) -> Value {
    mu.iter()
        .map(|(t, v)| json!({ "tuple": labels(chain, t), "mass": num(v) }))
        .collect()
}

fn ascent(g: &Global) -> AscentOptions {
    let mut o = AscentOptions::default();
    if let Some(t) = g.tolerance {
        o.tol = t;
    }
    o
}

fn classify(run: &mut Run, path: &Path) -> CmdResult<Value> {
    let c = load_chain(run, path)?;
    let d = decompose_classes(&c);
    let classes: Vec<Vec<String>> = d.classes().iter().map(|k| labels(&c, k)).collect();
    let reachable: Vec<usize> = (0..d.n_classes()).filter(|&j| d.beta_reaches(j)).collect();
    Ok(json!({
        "states": c.labels(),
        "classes": classes,
        "order": d.order_pairs(),
        "transient": labels(&c, d.transient()),
        "reachable_from_initial": reachable,
    }))
}

fn check_measure(run: &mut Run, chain: &Path, measure: &Path) -> CmdResult<Value> {
    let c = load_chain(run, chain)?;
    let mu = load_measure(run, &c, measure)?;
    let d = decompose_classes(&c);
    let verdict = classify_admissible(&d, &mu);
    let witness_labels = match &verdict.witness {
        Some(ldp::measure::Witness::OutsideClasses { tuple }) => json!(labels(&c, tuple)),
        _ => Value::Null,
    };
    let balanced = if mu.arity() >= 2 {
        json!(is_balanced(&mu)?)
    } else {
        Value::Null
    };
    Ok(json!({
        "arity": mu.arity(),
        "total": num(mu.total()),
        "probability": mu.is_probability(),
        "balanced": balanced,
        "allowed_support": in_allowed_support(&c, &mu),
        "verdict": to_json(&verdict),
        "witness_labels": witness_labels,
        "class_weights": class_weights(&d, &mu).into_iter().map(num).collect::<Vec<_>>(),
    }))
}

fn rate(
    run: &mut Run,
    g: &Global,
    chain: &Path,
    measure: &Path,
    level: Option<usize>,
    cross: bool,
) -> CmdResult<Value> {
    let c = load_chain(run, chain)?;
    let mu = load_measure(run, &c, measure)?;
    let level = level.unwrap_or(mu.arity());
    if level != mu.arity() {
        return Err(Failure::Usage(format!(
            "--level {level} does not match the measure arity {}",
            mu.arity()
        )));
    }
    let d = decompose_classes(&c);
    if level == 1 {
        let sol = solve_contraction(&c, &d, &mu)?;
        return Ok(json!({
            "level": 1,
            "value": num(sol.value),
            "optimal_pair_measure": sol.nu.as_ref().map(|nu| measure_json(&c, nu)),
            "iterations": sol.iterations,
            "converged": sol.converged,
        }));
    }
    let opts = ascent(g);
    let rep = rate_i(&c, &d, &mu, cross.then_some(&opts))?;
    let mut v = to_json(&rep);
    v["level"] = json!(level);
    v["value"] = num(rep.r_value);
    Ok(v)
}

fn scgf(
    run: &mut Run,
    chain: &Path,
    potential: &Path,
    truncate: Option<&[String]>,
) -> CmdResult<Value> {
    let c = load_chain(run, chain)?;
    let text = run.read(potential)?;
    let v = parse_potential(&c, &text)?;
    match truncate {
        Some(ls) => {
            let k = ls
                .iter()
                .map(|l| c.require_id(l))
                .collect::<ldp::Result<Vec<_>>>()?;
            Ok(json!({ "value": num(scgf_lambda_k(&c, &v, &k)?), "window": ls }))
        }
        None => {
            let det = scgf_detail(&c, &decompose_classes(&c), &v)?;
            Ok(to_json(&det))
        }
    }
}

fn conjugate(run: &mut Run, g: &Global, chain: &Path, measure: &Path) -> CmdResult<Value> {
    let c = load_chain(run, chain)?;
    let mu = load_measure(run, &c, measure)?;
    let b = scgf_conjugate(&c, &decompose_classes(&c), &mu, &ascent(g))?;
    Ok(to_json(&b))
}

fn decompose(run: &mut Run, chain: &Path, measure: &Path, terms: usize) -> CmdResult<Value> {
    let c = load_chain(run, chain)?;
    let mu = load_measure(run, &c, measure)?;
    let dec = decompose_balanced(&c, &mu, terms)?;
    let cycles: Vec<Value> = dec
        .cycles
        .iter()
        .zip(&dec.coefficients)
        .map(|(cy, &a)| json!({ "word": labels(&c, cy.word()), "coefficient": num(a) }))
        .collect();
    Ok(json!({
        "cycles": cycles,
        "residual_tv": num(dec.residual_tv),
        "residual_history": dec.residual_history.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "truncated": dec.truncated,
        "rate_of_approximant": num(rate_r(&c, &dec.approximant)?),
        "rate": num(rate_r(&c, &mu)?),
    }))
}

fn approx(run: &mut Run, chain: &Path, measure: &Path, m: usize) -> CmdResult<Value> {
    let c = load_chain(run, chain)?;
    let mu = load_measure(run, &c, measure)?;
    let a = approximate(&c, &mu, m)?;
    run.say(c.format_word(&a.word));
    Ok(json!({
        "word": c.format_word(&a.word),
        "length": a.word.len(),
        "tv": num(a.tv),
        "certified": num(a.certified),
        "target": num(3.0 / m as f64),
        "big_n": a.big_n,
        "cycles": a.cycles.iter().map(|cy| labels(&c, cy.word())).collect::<Vec<_>>(),
        "coefficients": a.coefficients.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "powers": a.powers,
    }))
}

fn table_json(c: &ChainSpec, table: &TransitionTable) -> Value {
    json!({
        "z0": c.label(table.z0),
        "beta_z0": num(table.beta_z0),
        "eta": num(table.eta),
        "tau": table.tau,
        "r": table.r(),
    })
}

fn word_op(
    run: &mut Run,
    op: WordOp,
    chain: &Path,
    k: &[String],
    j0: &[usize],
    words: Option<&Path>,
    t: Option<usize>,
) -> CmdResult<Value> {
    let c = load_chain(run, chain)?;
    let d = decompose_classes(&c);
    let k = k
        .iter()
        .map(|l| c.require_id(l))
        .collect::<ldp::Result<Vec<_>>>()?;
    let table = build_transition_table(&c, &d, &k, j0)?;
    let text = match words {
        Some(p) => run.read(p)?,
        None => run.read_stdin()?,
    };
    let ws: Vec<Word> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| c.parse_word(l))
        .collect::<ldp::Result<_>>()?;
    if ws.is_empty() {
        return Err(Failure::Usage("no words given".into()));
    }
    if let Some(w) = ws
        .iter()
        .find(|w| ln_path_probability(&c, w) == f64::NEG_INFINITY)
    {
        return Err(Failure::Domain(ldp::Error::Precondition(format!(
            "word `{}` has zero probability",
            c.format_word(w)
        ))));
    }
    let cfg = &table.config;
    let constants = table_json(&c, &table);
    match op {
        WordOp::Slice => {
            let mut out = Vec::new();
            for u in &ws {
                let s = slice(&c, cfg, u)?;
                let b = slicing_bounds(cfg, u, &s);
                run.say(
                    s.pieces
                        .iter()
                        .map(|p| c.format_word(p))
                        .collect::<Vec<_>>()
                        .join(" | "),
                );
                out.push(json!({
                    "word": labels(&c, u),
                    "pieces": s.pieces.iter().map(|p| labels(&c, p)).collect::<Vec<_>>(),
                    "ranges": s.ranges,
                    "per_class": b.per_class.iter().map(|&(l, r)| json!({ "lhs": num(l), "rhs": num(r) })).collect::<Vec<_>>(),
                    "total": { "lhs": num(b.total.0), "rhs": num(b.total.1) },
                    "bounds_hold": b.holds(),
                    "c_sl": num(c_sl(u.len() - 1, table.r())),
                }));
            }
            Ok(json!({ "op": "slice", "constants": constants, "words": out }))
        }
        WordOp::Stitch => {
            let v: Vec<Piece> = ws
                .iter()
                .map(|w| {
                    cfg.k_pos(w[0]).map(|pos| Piece {
                        pos,
                        word: w.clone(),
                    })
                })
                .collect::<Option<_>>()
                .ok_or_else(|| {
                    Failure::Domain(ldp::Error::Precondition(
                        "a piece does not start in K".into(),
                    ))
                })?;
            if !is_stitchable(cfg, &v) {
                return Err(Failure::Domain(ldp::Error::Precondition(
                    "pieces must start and end in their K_j, in nondecreasing class order".into(),
                )));
            }
            let len = list_length(&v);
            let t = t.unwrap_or(len - 1);
            if t >= len {
                return Err(Failure::Usage(format!("--t must be below |v| = {len}")));
            }
            let w = stitch(&table, &v, t)?;
            let sum = v.iter().fold(SparseMeasure::null(2), |acc, p| {
                acc.plus(&count_measure(&p.word)).expect("pairs")
            });
            let lhs = l1_distance(&count_measure(&w), &sum)?;
            let ln_c = ln_c_st(table.beta_z0, table.eta, table.tau, v.len(), len);
            let ln_pieces: f64 = v
                .iter()
                .map(|p| ldp::chain::log_word_probability(&c, &p.word))
                .sum();
            run.say(c.format_word(&w));
            Ok(json!({
                "op": "stitch",
                "constants": constants,
                "word": labels(&c, &w),
                "t": t,
                "list_length": len,
                "geographic": { "lhs": num(lhs), "rhs": num(bounds::stitching(len, t, v.len(), table.tau)) },
                "probability": { "ln_p_word": num(ln_path_probability(&c, &w)), "ln_c_st_times_pieces": num(ln_c + ln_pieces) },
                "ln_c_st": num(ln_c),
            }))
        }
        WordOp::Couple => {
            let n = ws[0].len().saturating_sub(1);
            let mass = gamma_mass(cfg, ws.iter().map(|w| w.as_slice()), |_| true);
            let t = match t {
                Some(t) => t,
                None => mass.checked_sub(1).ok_or_else(|| {
                    Failure::Domain(ldp::Error::Precondition("no mass on Γ".into()))
                })?,
            };
            let w = couple(&c, &table, &ws, t)?;
            let sum = ws.iter().fold(SparseMeasure::null(2), |acc, u| {
                acc.plus(&count_measure(u)).expect("pairs")
            });
            let lhs = l1_distance(&count_measure(&w), &sum)?;
            let ln_c = ln_c_nt(&table, n, ws.len());
            let ln_words: f64 = ws.iter().map(|u| ln_path_probability(&c, u)).sum();
            run.say(c.format_word(&w));
            Ok(json!({
                "op": "couple",
                "constants": constants,
                "word": labels(&c, &w),
                "t": t,
                "n": n,
                "big_n": ws.len(),
                "gamma_mass": mass,
                "geographic": { "lhs": num(lhs), "rhs": num(bounds::coupling(ws.len(), n, t, table.r(), table.tau)) },
                "probability": { "ln_p_word": num(ln_path_probability(&c, &w)), "ln_c_nt_times_words": num(ln_c + ln_words) },
                "ln_c_nt": num(ln_c),
            }))
        }
    }
}

/// Parses `samples=…,seed=…`.
fn parse_mc(spec: &str, default_seed: u64) -> CmdResult<(u64, u64)> {
    let mut samples = None;
    let mut seed = default_seed;
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("expected key=value, got `{part}`")))?;
        let value: u64 = value
            .parse()
            .map_err(|_| Failure::Usage(format!("`{value}` is not an integer")))?;
        match key {
            "samples" => samples = Some(value),
            "seed" => seed = value,
            _ => {
                return Err(Failure::Usage(format!(
                    "unknown Monte Carlo option `{key}`"
                )))
            }
        }
    }
    let samples = samples.ok_or_else(|| Failure::Usage("--mc needs samples=…".into()))?;
    Ok((samples, seed))
}

fn estimate(
    run: &mut Run,
    g: &Global,
    chain: &Path,
    measure: &Path,
    delta: f64,
    grid: &[usize],
    mc: Option<&str>,
) -> CmdResult<Value> {
    let c = load_chain(run, chain)?;
    let mu = load_measure(run, &c, measure)?;
    if delta.is_nan() || delta <= 0.0 {
        return Err(Failure::Usage("--delta must be positive".into()));
    }
    let mc = mc.map(|s| parse_mc(s, g.seed)).transpose()?;
    let rep = rl_slope(&c, &decompose_classes(&c), &mu, delta, grid)?;
    let mut csv = String::from("n,logprob\n");
    for (n, l) in rep.grid.iter().zip(&rep.logprobs) {
        csv.push_str(&format!("{n},{}\n", num(*l).to_string().trim_matches('"')));
    }
    run.set_csv(csv);
    let mut v = to_json(&rep);
    if let Some((samples, seed)) = mc {
        let est = grid
            .iter()
            .map(|&n| Ok(json!({ "n": n, "estimate": to_json(&monte_carlo_ball(&c, &mu, delta, n, samples, seed)?) })))
            .collect::<CmdResult<Vec<_>>>()?;
        v["monte_carlo"] = json!(est);
    }
    Ok(v)
}

fn level3(run: &mut Run, chain: &Path, pi: &Path, q: &Path, kmax: usize) -> CmdResult<Value> {
    let c = load_chain(run, chain)?;
    let pi_m = load_measure(run, &c, pi)?;
    if pi_m.arity() != 1 {
        return Err(Failure::Usage("--pi must be a level-1 measure".into()));
    }
    let text = run.read(q)?;
    let kernel = parse_kernel(&c, &text)?;
    let pi_vec: Vec<f64> = (0..c.n_states()).map(|x| pi_m.get(&[x])).collect();
    let m = MarkovMeasure::new(pi_vec, kernel)?;
    if kmax == 0 {
        return Err(Failure::Usage("--kmax must be positive".into()));
    }
    let seq = (1..=kmax)
        .map(|k| level3_marginal_entropy(&c, &m, k))
        .collect::<ldp::Result<Vec<_>>>()?;
    let mut csv = String::from("k,entropy_per_step\n");
    for (k, v) in seq.iter().enumerate() {
        csv.push_str(&format!(
            "{},{}\n",
            k + 1,
            num(*v).to_string().trim_matches('"')
        ));
    }
    run.set_csv(csv);
    Ok(json!({
        "k": (1..=kmax).collect::<Vec<_>>(),
        "entropy_per_step": seq.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "limit": num(entropy_rate_limit(&c, &m)?),
    }))
}
