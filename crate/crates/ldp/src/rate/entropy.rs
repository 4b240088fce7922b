use serde::Serialize;

use crate::chain::{ChainSpec, ClassDecomposition};
use crate::error::{Error, Result};
use crate::measure::{
    class_weights, classify_admissible, is_balanced, AdmissibilityVerdict, SparseMeasure,
};

use super::{dv_entropy, scgf_conjugate, AscentOptions, Bound};

/// `H(μ|ν) = Σ μ log(μ/ν)`, infinite unless `μ ≪ ν`.
pub fn relative_entropy(mu: &SparseMeasure, nu: &SparseMeasure) -> Result<f64> {
    if mu.arity() != nu.arity() {
        return Err(Error::ArityMismatch(mu.arity(), nu.arity()));
    }
    let mut s = 0.0;
    for (t, m) in mu.iter() {
        let n = nu.get(t);
        if n <= 0.0 {
            return Ok(f64::INFINITY);
        }
        s += m * (m / n).ln();
    }
    Ok(s.max(0.0))
}

/// `R^(k)(μ) = Σ_u μ^(k−1)(u) H(q(u,·) | p(u_{k−1},·))` for balanced `μ`.
pub fn rate_r(chain: &ChainSpec, mu: &SparseMeasure) -> Result<f64> {
    if !is_balanced(mu)? {
        return Err(Error::NotBalanced);
    }
    Ok(conditional_entropy(chain, mu))
}

/// The sum defining `R^(k)` without the balance gate.
pub(crate) fn conditional_entropy(chain: &ChainSpec, mu: &SparseMeasure) -> f64 {
    let k = mu.arity();
    let entries: Vec<_> = mu.iter().collect();
    let mut s = 0.0;
    let mut i = 0;
    // Entries sharing a prefix are contiguous in lexicographic order.
    while i < entries.len() {
        let prefix = &entries[i].0[..k - 1];
        let mut j = i;
        let mut mass = 0.0;
        while j < entries.len() && &entries[j].0[..k - 1] == prefix {
            mass += entries[j].1;
            j += 1;
        }
        for (t, m) in &entries[i..j] {
            let p = chain.p(t[k - 2], t[k - 1]);
            if p <= 0.0 {
                return f64::INFINITY;
            }
            s += m * (m / (mass * p)).ln();
        }
        i = j;
    }
    s.max(0.0)
}

/// Contribution of one class to the rate.
#[derive(Debug, Clone, Serialize)]
pub struct ClassRate {
    pub class: usize,
    /// `μ(C_j^k)`.
    pub weight: f64,
    /// The rate of the normalized restriction `μ̃_j`.
    #[serde(serialize_with = "crate::num::ext")]
    pub rate: f64,
}

/// The rate of a measure with its admissibility verdict and cross-checks.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub verdict: AdmissibilityVerdict,
    pub balanced: bool,
    #[serde(serialize_with = "crate::num::ext")]
    pub r_value: f64,
    /// Donsker–Varadhan lower bound, when requested.
    pub j_value: Option<Bound>,
    /// Lower bound on the conjugate of the SCGF, when requested (arity 2).
    pub lambda_star: Option<Bound>,
    pub per_class: Vec<ClassRate>,
}

/// The rate function `I(μ)` for arity `k ≥ 2`.
///
/// Infinite unless `μ` is balanced and admissible; otherwise `R^(k)(μ)`,
/// decomposed over the classes charged by `μ`. With `cross_check`, the
/// Donsker–Varadhan entropy and (for `k = 2`) the conjugate SCGF are
/// computed too.
pub fn rate_i(
    chain: &ChainSpec,
    d: &ClassDecomposition,
    mu: &SparseMeasure,
    cross_check: Option<&AscentOptions>,
) -> Result<RateReport> {
    if mu.arity() < 2 {
        return Err(Error::InvalidArity {
            got: mu.arity(),
            why: "rate_i needs arity ≥ 2; use rate_i1",
        });
    }
    let verdict = classify_admissible(d, mu);
    let balanced = is_balanced(mu)?;
    let (j_value, lambda_star) = match cross_check {
        Some(o) => (
            Some(dv_entropy(chain, mu, o)?),
            if mu.arity() == 2 {
                Some(scgf_conjugate(chain, d, mu, o)?)
            } else {
                None
            },
        ),
        None => (None, None),
    };
    if !balanced || !verdict.is_admissible() {
        return Ok(RateReport {
            verdict,
            balanced,
            r_value: f64::INFINITY,
            j_value,
            lambda_star,
            per_class: Vec::new(),
        });
    }
    let r_value = conditional_entropy(chain, mu);
    let weights = class_weights(d, mu);
    let per_class = verdict
        .j_mu
        .iter()
        .map(|&j| {
            let part = mu
                .restricted(|t| t.iter().all(|&x| d.class_of(x) == Some(j)))
                .normalized();
            ClassRate {
                class: j,
                weight: weights[j],
                rate: conditional_entropy(chain, &part),
            }
        })
        .collect();
    Ok(RateReport {
        verdict,
        balanced,
        r_value,
        j_value,
        lambda_star,
        per_class,
    })
}

impl RateReport {
    /// `Σ_j μ(C_j^k) I(μ̃_j)`.
    pub fn recombined(&self) -> f64 {
        if self.per_class.is_empty() {
            return self.r_value;
        }
        self.per_class
            .iter()
            .map(|c| {
                if c.weight == 0.0 {
                    0.0
                } else {
                    c.weight * c.rate
                }
            })
            .sum()
    }
}
