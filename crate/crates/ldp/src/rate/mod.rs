//! Rate functions and their variational characterizations.
//!
//! On finite chains the rate of a balanced admissible measure has a closed
//! form `R^(k)`; the Donsker–Varadhan entropy `J` and the conjugate `Λ*` of the
//! scaled cumulant generating function are computed numerically as certified
//! lower bounds so that the three can be compared.

mod ascent;
mod contraction;
mod dv;
mod entropy;
mod level3;
pub mod perron;
mod scgf;

use serde::Serialize;

pub use contraction::{rate_i1, solve_contraction, ContractionSolution};
pub use dv::dv_entropy;
pub use entropy::{rate_i, rate_r, relative_entropy, ClassRate, RateReport};
pub use level3::{
    entropy_rate_limit, level3_marginal_entropy, lift_to_pairs_level_k, markov_marginal,
    parse_kernel, path_law_entropy, LiftedChain, MarkovMeasure,
};
pub use scgf::{
    parse_potential, scgf_conjugate, scgf_detail, scgf_lambda, scgf_lambda_k, ScgfDetail,
    TiltPotential,
};

pub(crate) use entropy::conditional_entropy;

/// Controls for the ascent used by [`dv_entropy`] and [`scgf_conjugate`].
#[derive(Debug, Clone, Serialize)]
pub struct AscentOptions {
    pub max_iter: usize,
    /// Stop when the value improved by less than `tol` over `window` steps.
    pub window: usize,
    pub tol: f64,
    /// Start from the closed-form optimizer candidate instead of zero.
    pub warm_start: bool,
    /// Magnitude of the negative potential placed off the support.
    pub barrier: f64,
    /// Values above this are reported as infinite.
    pub divergence: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            window: 50,
            tol: 1e-10,
            warm_start: true,
            barrier: 40.0,
            divergence: 1e6,
        }
    }
}

/// A numerically certified lower bound on a supremum.
#[derive(Debug, Clone, Serialize)]
pub struct Bound {
    #[serde(serialize_with = "crate::num::ext")]
    pub value: f64,
    /// `ℓ¹` norm of the (super)gradient at the returned point.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The supremum is infinite, either structurally or by detected
    /// unbounded ascent.
    pub unbounded: bool,
}

impl Bound {
    pub(crate) fn infinite() -> Self {
        Self {
            value: f64::INFINITY,
            residual: 0.0,
            iterations: 0,
            converged: true,
            unbounded: true,
        }
    }
}
