//! Stochastic slate selection with propensity logging and offline policy evaluation.
//!
//! `slatelog` implements a data-collection strategy for ranked-list (slate)
//! recommendation: instead of always showing the deterministically best items,
//! each round samples per-item Beta posteriors, converts the samples into a
//! selection distribution, draws the slate from that distribution, and logs the
//! probabilities it used. Logs produced this way carry a positive propensity
//! for every shown item, which is exactly what the inverse-propensity-score
//! estimator in [`eval`] needs to score arbitrary target policies offline.
//!
//! The crate is organized as a library plus a thin `slatelog` binary:
//!
//! - [`bandit`]: Beta-Bernoulli arm state, posterior sampling, and the
//!   selection algorithms (single-arm, deterministic top-N, exact stochastic
//!   slate sampling, and the fast λ-perturbation approximation).
//! - [`logging`]: the per-round log record `(t, ctx, items, props, rewards,
//!   pvec)` and its JSON Lines on-disk format.
//! - [`eval`]: policies, the IPS value estimator, a per-slot slate heuristic,
//!   and a ground-truth value oracle.
//! - [`mod@env`]: synthetic environments: true per-item CTRs, Bernoulli rewards,
//!   item arrival schedules.
//! - [`metrics`]: skewness/mean/median distribution reports and the
//!   cold-start exposure curve.
//! - [`runner`]: the closed-loop round-by-round driver and multi-strategy
//!   comparisons.
//! - [`config`] / [`cli`]: the experiment config file and the `run` / `eval` /
//!   `report` subcommands.
//!
//! Every random decision flows from a seed through [`seeding`], so a config
//! plus a seed reproduces a run byte-for-byte. See the `examples/` directory
//! for one runnable program per capability.

use serde::{Deserialize, Serialize};
use std::fmt;

pub mod bandit;
pub mod cli;
pub mod config;
pub mod env;
pub mod eval;
pub mod logging;
pub mod metrics;
pub mod runner;
pub mod seeding;

pub use bandit::{ArmState, BetaPrior, ProbVector, Slate, ThetaDraw};
pub use env::Environment;
pub use eval::{Policy, ValueEstimate};
pub use logging::{LogDataset, LogMetadata, LogRecord};
pub use metrics::{ColdStartCurve, DistributionReport};
pub use runner::{ExperimentResult, StrategyConfig, StrategyKind};

/// Opaque identifier of one selectable item (one bandit arm).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ItemId(pub u64);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "item{}", self.0)
    }
}

impl From<u64> for ItemId {
    fn from(v: u64) -> Self {
        ItemId(v)
    }
}

/// Opaque identifier of a round's context. The simulator uses the round
/// number; external logs may use anything that fits in a `u64`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ContextId(pub u64);

impl fmt::Display for ContextId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ctx{}", self.0)
    }
}

impl From<u64> for ContextId {
    fn from(v: u64) -> Self {
        ContextId(v)
    }
}
