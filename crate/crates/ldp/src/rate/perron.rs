//! Perron roots of irreducible nonnegative blocks by power iteration.
//!
//! Each iterate yields Collatz–Wielandt bounds `min_i (Ax)_i/x_i ≤ ρ ≤
//! max_i (Ax)_i/x_i`, so callers get a certified bracket even when the cap is
//! hit. Periodic blocks are iterated with `A + sI`, which is primitive.

use std::collections::VecDeque;

/// Relative width of the Collatz–Wielandt bracket at which iteration stops.
pub const PERRON_TOL: f64 = 1e-12;
/// Iteration cap for one power iteration.
pub const PERRON_MAX_ITER: usize = 100_000;

/// A square nonnegative block in sparse row form with local indices.
#[derive(Debug, Clone)]
pub struct Block {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    fn transpose(&self) -> Block {
        let mut rows = vec![Vec::new(); self.dim()];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                rows[j].push((i, v));
            }
        }
        Block { rows }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, r) in self.rows.iter().enumerate() {
            out[i] = r.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }

    /// Period of the block's graph, assumed strongly connected.
    pub fn period(&self) -> usize {
        let n = self.dim();
        let mut level = vec![usize::MAX; n];
        level[0] = 0;
        let mut q = VecDeque::from([0]);
        while let Some(u) = q.pop_front() {
            for &(v, w) in &self.rows[u] {
                if w > 0.0 && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    q.push_back(v);
                }
            }
        }
        let mut g = 0usize;
        for (u, r) in self.rows.iter().enumerate() {
            for &(v, w) in r {
                if w > 0.0 {
                    g = gcd(g, (level[u] + 1).abs_diff(level[v]));
                }
            }
        }
        g.max(1)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Perron root with its bracket and left/right Perron vectors.
#[derive(Debug, Clone)]
pub struct PerronPair {
    /// Geometric mean of the final bracket.
    pub root: f64,
    pub lower: f64,
    pub upper: f64,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
    pub converged: bool,
}

/// Right Perron vector and bracket.
fn power(a: &Block, shift: f64) -> (Vec<f64>, f64, f64, bool) {
    let n = a.dim();
    let mut x = vec![1.0; n];
    let mut ax = vec![0.0; n];
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for _ in 0..PERRON_MAX_ITER {
        a.apply(&x, &mut ax);
        let (mut l, mut h) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let r = ax[i] / x[i];
            l = l.min(r);
            h = h.max(r);
        }
        lo = f64::max(lo, l);
        hi = f64::min(hi, h);
        if hi <= lo * (1.0 + PERRON_TOL) {
            return (x, lo, hi, true);
        }
        let mut m = 0.0f64;
        for i in 0..n {
            x[i] = ax[i] + shift * x[i];
            m = m.max(x[i]);
        }
        for xi in &mut x {
            // Entries that underflow would break the ratios; keep them tiny.
            *xi = (*xi / m).max(f64::MIN_POSITIVE);
        }
    }
    (x, lo, hi, false)
}

/// Perron root and vectors of an irreducible block.
pub fn perron(a: &Block) -> PerronPair {
    if a.dim() == 1 {
        let v = a.rows[0].iter().map(|e| e.1).sum();
        return PerronPair {
            root: v,
            lower: v,
            upper: v,
            right: vec![1.0],
            left: vec![1.0],
            converged: true,
        };
    }
    let shift = if a.period() == 1 {
        0.0
    } else {
        a.rows
            .iter()
            .map(|r| r.iter().map(|e| e.1).sum::<f64>())
            .sum::<f64>()
            / a.dim() as f64
    };
    let (right, lo, hi, c1) = power(a, shift);
    let (left, lo2, hi2, c2) = power(&a.transpose(), shift);
    let lower = lo.max(lo2);
    let upper = hi.min(hi2);
    PerronPair {
        root: (lower * upper).sqrt(),
        lower,
        upper,
        right,
        left,
        converged: c1 && c2,
    }
}
