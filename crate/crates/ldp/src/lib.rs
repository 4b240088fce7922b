//! Large-deviation rate functions for Markov chains on finite state spaces,
//! including reducible chains.
//!
//! The crate is organised bottom-up:
//!
//! * [`chain`]: chain specifications, word probabilities, irreducible classes.
//! * [`measure`]: sparse measures on `S^k`, balance, admissibility.
//! * [`words`]: empirical measures of words and the slicing, stitching,
//!   coupling and decoupling maps together with their constants.
//! * [`rate`]: relative entropy, the rate `R^(k)`, Donsker–Varadhan entropy,
//!   the scaled cumulant generating function and its conjugate, level-1
//!   contraction and level-3 entropy rates.
//! * [`cycles`]: minimal cycles, balanced-measure decomposition and
//!   approximating words.
//! * [`estimator`]: exact and Monte Carlo ball probabilities and slopes.
//!
//! Rates take values in `[0, ∞]`; infinity is `f64::INFINITY`.

pub mod chain;
pub mod cycles;
pub mod error;
pub mod estimator;
pub mod measure;
pub mod num;
pub mod rate;
pub mod word_checks;
pub mod words;

pub use chain::{
    decompose_classes, parse_chain, ChainOptions, ChainSpec, ClassDecomposition, StateId, Word,
};
pub use error::{Error, Result};
pub use measure::{
    classify_admissible, tv_distance, AdmissibilityStatus, AdmissibilityVerdict, SparseMeasure,
};
