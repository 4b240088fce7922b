//! Fixtures and random instance generators shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use ldp::chain::{decompose_classes, parse_chain, ChainOptions, ChainSpec, ClassDecomposition};
use ldp::cycles::enumerate_minimal_cycles;
use ldp::measure::{parse_measure, SparseMeasure};
use ldp::rate::MarkovMeasure;
use ldp::words::count_measure;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn load_chain(name: &str) -> ChainSpec {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    parse_chain(&text, ChainOptions::default()).expect("fixture parses")
}

pub fn load_measure(chain: &ChainSpec, name: &str) -> SparseMeasure {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    parse_measure(chain, &text).expect("fixture parses")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

fn normalized(w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// A random chain on `n` states with sparse, usually reducible, structure.
pub fn random_chain(rng: &mut ChaCha8Rng, n: usize) -> ChainSpec {
    let mut p = vec![vec![0.0; n]; n];
    for (x, row) in p.iter_mut().enumerate() {
        for (y, v) in row.iter_mut().enumerate() {
            let keep = if x == y { 0.6 } else { 0.35 };
            if rng.random_bool(keep) {
                *v = rng.random_range(0.1..1.0);
            }
        }
        if row.iter().all(|&v| v == 0.0) {
            row[rng.random_range(0..n)] = 1.0;
        }
        *row = normalized(row.clone());
    }
    let mut beta: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                rng.random_range(0.1..1.0)
            } else {
                0.0
            }
        })
        .collect();
    if beta.iter().all(|&v| v == 0.0) {
        beta[0] = 1.0;
    }
    ChainSpec::from_dense(&p, &normalized(beta)).expect("valid random chain")
}

/// A random chain with every transition allowed.
pub fn random_full_chain(rng: &mut ChaCha8Rng, n: usize) -> ChainSpec {
    let p: Vec<Vec<f64>> = (0..n)
        .map(|_| normalized((0..n).map(|_| rng.random_range(0.05..1.0)).collect()))
        .collect();
    let beta = normalized((0..n).map(|_| rng.random_range(0.05..1.0)).collect());
    ChainSpec::from_dense(&p, &beta).expect("valid random chain")
}

/// A random admissible balanced pair measure with masses on the `1/grid`
/// lattice, built from minimal cycles inside one class or two ordered
/// classes. `classes` forces the class set when given.
pub fn random_admissible(
    rng: &mut ChaCha8Rng,
    chain: &ChainSpec,
    d: &ClassDecomposition,
    grid: usize,
    classes: Option<&[usize]>,
) -> Option<SparseMeasure> {
    let js: Vec<usize> = match classes {
        Some(js) => js.to_vec(),
        None => {
            let reachable: Vec<usize> = (0..d.n_classes()).filter(|&j| d.beta_reaches(j)).collect();
            let &j1 = reachable.choose(rng)?;
            let later: Vec<usize> = (0..d.n_classes())
                .filter(|&j| j != j1 && d.reaches(j1, j))
                .collect();
            match later.choose(rng) {
                Some(&j2) if rng.random_bool(0.5) => vec![j1, j2],
                _ => vec![j1],
            }
        }
    };
    let support: Vec<usize> = js
        .iter()
        .flat_map(|&j| d.class(j).iter().copied())
        .collect();
    let cycles = enumerate_minimal_cycles(chain, &support, 10_000).cycles;
    if cycles.is_empty() {
        return None;
    }
    for _ in 0..100 {
        let mut rem = grid;
        let mut mu = SparseMeasure::null(2);
        while rem > 0 {
            let fits: Vec<_> = cycles.iter().filter(|c| c.period() <= rem).collect();
            let Some(c) = fits.choose(rng) else { break };
            mu = mu
                .plus(&count_measure(c.word()).scaled(1.0 / grid as f64))
                .unwrap();
            rem -= c.period();
        }
        if rem == 0 {
            return Some(mu);
        }
    }
    None
}

/// A random stationary Markov measure whose kernel is supported where `p`
/// is, found as the stationary law of a random kernel.
pub fn random_markov(rng: &mut ChaCha8Rng, chain: &ChainSpec) -> MarkovMeasure {
    let n = chain.n_states();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|x| {
            let w = (0..n)
                .map(|y| {
                    if chain.p(x, y) > 0.0 {
                        rng.random_range(0.05..1.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            normalized(w)
        })
        .collect();
    // Power iteration from the uniform law; kernels here are positive.
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..10_000 {
        let mut next = vec![0.0; n];
        for x in 0..n {
            for y in 0..n {
                next[y] += pi[x] * q[x][y];
            }
        }
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-16 {
            break;
        }
    }
    let pi = normalized(pi);
    MarkovMeasure::from_dense(&pi, &q).expect("stationary by construction")
}

pub fn classes(chain: &ChainSpec) -> ClassDecomposition {
    decompose_classes(chain)
}
