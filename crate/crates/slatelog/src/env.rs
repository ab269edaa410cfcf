//! Synthetic environment for closed-loop experiments: a pool of items with
//! hidden true click probabilities, an arrival schedule that staggers when
//! items become recommendable, and Bernoulli click feedback.
//!
//! No position bias: a shown item clicks with its own probability regardless
//! of its slot, so every click difference between strategies comes from which
//! items they expose, not where.

use crate::bandit::Slate;
use crate::seeding::{self, rng_from_seed};
use crate::ItemId;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    /// The pool must contain at least one item.
    #[error("environment with zero items")]
    EmptyPool,
    /// True click probabilities live in [0, 1].
    #[error("true CTR {ctr} for item index {index} outside [0, 1]")]
    BadCtr { index: usize, ctr: f64 },
    /// Beta CTR model parameters must be positive.
    #[error("Beta CTR model parameters alpha={alpha}, beta={beta} must be > 0")]
    BadBetaParams { alpha: f64, beta: f64 },
    /// Staircase schedules need a positive batch size.
    #[error("staircase batch size must be >= 1")]
    ZeroBatch,
    /// Explicit arrival list must cover every item exactly once.
    #[error("explicit arrivals cover {given} items, pool has {pool}")]
    ArrivalMismatch { given: usize, pool: usize },
    /// A slate referenced an item the environment does not know.
    #[error("unknown {0} in slate")]
    UnknownItem(ItemId),
    /// A slate showed an item before its arrival round.
    #[error("{item} shown at round {round} but arrives at round {arrival}")]
    NotYetArrived {
        item: ItemId,
        round: u64,
        arrival: u64,
    },
}

/// How the hidden true click probabilities are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CtrModel {
    /// Every item clicks with the same probability.
    Fixed { ctr: f64 },
    /// Per-item CTRs drawn once from Beta(alpha, beta). The default
    /// Beta(1, 24) has mean 0.04, the magnitude seen in production comment
    /// feeds, and a long right tail of rare good items.
    Beta { alpha: f64, beta: f64 },
    /// Caller-provided CTRs, one per item in id order.
    Explicit { ctrs: Vec<f64> },
}

impl CtrModel {
    pub fn default_beta() -> Self {
        CtrModel::Beta {
            alpha: 1.0,
            beta: 24.0,
        }
    }
}

/// When each item becomes available for recommendation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case")]
pub enum ArrivalSchedule {
    /// The whole pool is live from round 0.
    AllAtZero,
    /// Items arrive in batches: item index i arrives at round
    /// `(i / batch) * interval`, i.e. `batch` items every `interval` rounds.
    Staircase { batch: usize, interval: u64 },
    /// Caller-provided arrival round per item, in id order.
    Explicit { rounds: Vec<u64> },
}

impl ArrivalSchedule {
    fn arrival_rounds(&self, pool: usize) -> Result<Vec<u64>, EnvError> {
        match self {
            ArrivalSchedule::AllAtZero => Ok(vec![0; pool]),
            ArrivalSchedule::Staircase { batch, interval } => {
                if *batch == 0 {
                    return Err(EnvError::ZeroBatch);
                }
                Ok((0..pool)
                    .map(|i| (i / batch) as u64 * interval)
                    .collect())
            }
            ArrivalSchedule::Explicit { rounds } => {
                if rounds.len() != pool {
                    return Err(EnvError::ArrivalMismatch {
                        given: rounds.len(),
                        pool,
                    });
                }
                Ok(rounds.clone())
            }
        }
    }
}

/// Declarative environment description; [`Environment::build`] turns it into
/// a live simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub num_items: usize,
    pub ctr_model: CtrModel,
    pub arrivals: ArrivalSchedule,
}

/// A live environment: items, their hidden CTRs, arrival rounds, and a
/// dedicated reward RNG.
#[derive(Debug, Clone)]
pub struct Environment {
    items: Vec<ItemId>,
    true_ctrs: BTreeMap<ItemId, f64>,
    arrivals: BTreeMap<ItemId, u64>,
    reward_rng: ChaCha8Rng,
}

impl Environment {
    /// Instantiate from a spec. `seed` feeds two independent streams: one
    /// that draws the hidden CTRs (for the Beta model) and one that drives
    /// Bernoulli click feedback, so changing the horizon never changes the
    /// item pool.
    pub fn build(spec: &EnvSpec, seed: u64) -> Result<Self, EnvError> {
        if spec.num_items == 0 {
            return Err(EnvError::EmptyPool);
        }
        let items: Vec<ItemId> = (0..spec.num_items as u64).map(ItemId).collect();

        let ctrs: Vec<f64> = match &spec.ctr_model {
            CtrModel::Fixed { ctr } => {
                if !ctr.is_finite() || !(0.0..=1.0).contains(ctr) {
                    return Err(EnvError::BadCtr { index: 0, ctr: *ctr });
                }
                vec![*ctr; spec.num_items]
            }
            CtrModel::Beta { alpha, beta } => {
                if !(alpha.is_finite() && beta.is_finite() && *alpha > 0.0 && *beta > 0.0) {
                    return Err(EnvError::BadBetaParams {
                        alpha: *alpha,
                        beta: *beta,
                    });
                }
                let mut ctr_rng =
                    rng_from_seed(seeding::derive_seed(seed, &[seeding::stream::CTR]));
                let dist = Beta::new(*alpha, *beta).expect("validated above");
                (0..spec.num_items)
                    .map(|_| dist.sample(&mut ctr_rng).clamp(0.0, 1.0))
                    .collect()
            }
            CtrModel::Explicit { ctrs } => {
                if ctrs.len() != spec.num_items {
                    return Err(EnvError::ArrivalMismatch {
                        given: ctrs.len(),
                        pool: spec.num_items,
                    });
                }
                for (index, &ctr) in ctrs.iter().enumerate() {
                    if !ctr.is_finite() || !(0.0..=1.0).contains(&ctr) {
                        return Err(EnvError::BadCtr { index, ctr });
                    }
                }
                ctrs.clone()
            }
        };

        let arrival_rounds = spec.arrivals.arrival_rounds(spec.num_items)?;

        Ok(Self {
            true_ctrs: items.iter().copied().zip(ctrs).collect(),
            arrivals: items.iter().copied().zip(arrival_rounds).collect(),
            items,
            reward_rng: rng_from_seed(seeding::derive_seed(
                seed,
                &[seeding::stream::REWARDS],
            )),
        })
    }

    /// All items, arrived or not, in id order.
    pub fn all_items(&self) -> &[ItemId] {
        &self.items
    }

    /// Items whose arrival round is <= `round`, in id order.
    pub fn available_at(&self, round: u64) -> Vec<ItemId> {
        self.items
            .iter()
            .filter(|i| self.arrivals[i] <= round)
            .copied()
            .collect()
    }

    pub fn arrivals(&self) -> &BTreeMap<ItemId, u64> {
        &self.arrivals
    }

    pub fn true_ctr(&self, item: ItemId) -> Option<f64> {
        self.true_ctrs.get(&item).copied()
    }

    pub fn true_ctrs(&self) -> &BTreeMap<ItemId, f64> {
        &self.true_ctrs
    }

    /// Draw one Bernoulli click per slate item, position-blind. Rejects
    /// slates containing unknown or not-yet-arrived items: feedback on an
    /// item nobody could have shown would corrupt the experiment.
    pub fn rewards_for(&mut self, slate: &Slate) -> Result<Vec<f64>, EnvError> {
        let round = slate.round();
        for &item in slate.items() {
            let arrival = *self
                .arrivals
                .get(&item)
                .ok_or(EnvError::UnknownItem(item))?;
            if arrival > round {
                return Err(EnvError::NotYetArrived {
                    item,
                    round,
                    arrival,
                });
            }
        }
        Ok(slate
            .items()
            .iter()
            .map(|item| {
                let p = self.true_ctrs[item];
                if self.reward_rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            })
            .collect())
    }
}
