//! Beta-Bernoulli arm state and the slate-selection algorithms.
//!
//! Three selection regimes live here:
//!
//! 1. **Single-arm posterior sampling** ([`select_single`]): draw one θ per
//!    arm from `Beta(S+α, F+β)` and play the argmax.
//! 2. **Deterministic ranked list** ([`select_topn_deterministic`]): sort the
//!    sampled θ descending and show the top N.
//! 3. **Stochastic collection** ([`compute_selection_probs`] +
//!    [`sample_slate_exact`]): normalize the sampled θ into a selection
//!    distribution `p_k = θ_k / Σθ` and draw the slate from it without
//!    replacement, recording the probability actually used for every draw.
//!    [`sample_slate_fast`] is the cheap approximation: perturb each θ by an
//!    independent Uniform(0,1) factor and sort once instead of sampling
//!    sequentially.
//!
//! Regime 3 is what makes the logs usable for unbiased offline evaluation:
//! every shown item carries the positive probability with which it was chosen.

use crate::{ContextId, ItemId};
use rand::Rng;
use rand_distr::{Beta, Distribution, OpenClosed01};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from arm-state construction and slate selection.
#[derive(Debug, Error, PartialEq)]
pub enum BanditError {
    /// Prior pseudo-counts must both be positive.
    #[error("invalid Beta prior: alpha={alpha}, beta={beta} (both must be > 0 and finite)")]
    InvalidPrior { alpha: f64, beta: f64 },
    /// A sampled or injected θ fell outside [0, 1].
    #[error("theta {theta} for {item} outside [0, 1]")]
    InvalidTheta { item: ItemId, theta: f64 },
    /// Selection was asked to pick from nothing.
    #[error("selection from an empty arm pool")]
    EmptyPool,
    /// Slate size exceeds the candidate pool.
    #[error("slate size {requested} exceeds pool size {pool}")]
    SlateTooLarge { requested: usize, pool: usize },
    /// A slate may not repeat an item.
    #[error("duplicate {0} in slate")]
    DuplicateItem(ItemId),
    /// A slate must contain at least one item.
    #[error("empty slate")]
    EmptySlate,
    /// All θ were zero, so `p_k = θ_k / Σθ` is undefined. Unreachable when
    /// priors are valid; hitting it signals a broken caller.
    #[error("cannot normalize an all-zero theta vector into selection probabilities")]
    ZeroMass,
    /// Probability entries must be finite and nonnegative.
    #[error("invalid probability {prob} for {item}")]
    InvalidProbability { item: ItemId, prob: f64 },
    /// A probability vector must sum to 1.
    #[error("probability vector sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    /// Sampling N items without replacement needs N entries with positive mass.
    #[error("need {need} items with positive probability, only {have} available")]
    InsufficientSupport { need: usize, have: usize },
    /// Average CTR must lie strictly inside (0, 1).
    #[error("average CTR {0} outside (0, 1)")]
    InvalidCtr(f64),
    /// Prior strength must be positive.
    #[error("prior strength {0} must be > 0 and finite")]
    InvalidStrength(f64),
}

/// Pseudo-count parameters of the conjugate Beta prior.
///
/// Both parameters are strictly positive; construct through [`BetaPrior::new`]
/// or [`BetaPrior::from_ctr`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrior")]
pub struct BetaPrior {
    alpha: f64,
    beta: f64,
}

#[derive(Deserialize)]
struct RawPrior {
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawPrior> for BetaPrior {
    type Error = BanditError;
    fn try_from(raw: RawPrior) -> Result<Self, BanditError> {
        BetaPrior::new(raw.alpha, raw.beta)
    }
}

/// Default pseudo-observation budget for [`BetaPrior::from_ctr`]: strong
/// enough to anchor fresh items near the pool average, loose enough to keep
/// meaningful posterior variance.
pub const DEFAULT_PRIOR_STRENGTH: f64 = 100.0;

impl BetaPrior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, BanditError> {
        if !(alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0) {
            return Err(BanditError::InvalidPrior { alpha, beta });
        }
        Ok(Self { alpha, beta })
    }

    /// Beta(1, 1): uniform over [0, 1].
    pub fn uniform() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    /// Build a prior whose mean equals an observed average CTR.
    ///
    /// `alpha = strength * avg_ctr`, `beta = strength * (1 - avg_ctr)`, so a
    /// fresh item starts at the pool-average CTR instead of zero, and
    /// `strength` (total pseudo-observations) controls how much variance the
    /// posterior sampling retains before real feedback arrives.
    pub fn from_ctr(avg_ctr: f64, strength: f64) -> Result<Self, BanditError> {
        if !avg_ctr.is_finite() || avg_ctr <= 0.0 || avg_ctr >= 1.0 {
            return Err(BanditError::InvalidCtr(avg_ctr));
        }
        if !strength.is_finite() || strength <= 0.0 {
            return Err(BanditError::InvalidStrength(strength));
        }
        Self::new(strength * avg_ctr, strength * (1.0 - avg_ctr))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Prior mean `alpha / (alpha + beta)`.
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

/// Alias for the operation name used in the module map.
pub fn prior_from_ctr(avg_ctr: f64, strength: f64) -> Result<BetaPrior, BanditError> {
    BetaPrior::from_ctr(avg_ctr, strength)
}

/// Success/failure counters for one arm. Counters only ever move up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmState {
    item_id: ItemId,
    successes: u64,
    failures: u64,
}

impl ArmState {
    /// A fresh arm with zero observations.
    pub fn new(item_id: ItemId) -> Self {
        Self {
            item_id,
            successes: 0,
            failures: 0,
        }
    }

    /// An arm preloaded with historical counts (useful for tests and replay).
    pub fn with_counts(item_id: ItemId, successes: u64, failures: u64) -> Self {
        Self {
            item_id,
            successes,
            failures,
        }
    }

    pub fn item_id(&self) -> ItemId {
        self.item_id
    }

    pub fn successes(&self) -> u64 {
        self.successes
    }

    pub fn failures(&self) -> u64 {
        self.failures
    }

    /// Total rewards observed for this arm.
    pub fn pulls(&self) -> u64 {
        self.successes + self.failures
    }

    /// Record one binary reward: a click increments `successes`, anything
    /// else increments `failures`.
    pub fn update(&mut self, clicked: bool) {
        if clicked {
            self.successes += 1;
        } else {
            self.failures += 1;
        }
    }

    /// Posterior parameters under `prior`: `(S + alpha, F + beta)`.
    pub fn posterior(&self, prior: &BetaPrior) -> (f64, f64) {
        (
            self.successes as f64 + prior.alpha(),
            self.failures as f64 + prior.beta(),
        )
    }

    /// Posterior mean `(S + alpha) / (S + F + alpha + beta)`.
    pub fn posterior_mean(&self, prior: &BetaPrior) -> f64 {
        let (a, b) = self.posterior(prior);
        a / (a + b)
    }
}

/// One sampled posterior parameter for one item, θ ∈ [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaDraw {
    item_id: ItemId,
    theta: f64,
}

impl ThetaDraw {
    pub fn new(item_id: ItemId, theta: f64) -> Result<Self, BanditError> {
        if !theta.is_finite() || !(0.0..=1.0).contains(&theta) {
            return Err(BanditError::InvalidTheta {
                item: item_id,
                theta,
            });
        }
        Ok(Self { item_id, theta })
    }

    pub fn item_id(&self) -> ItemId {
        self.item_id
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// The ordered list of items shown in one round. Never empty, never contains
/// a duplicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slate {
    items: Vec<ItemId>,
    round: u64,
}

impl Slate {
    pub fn new(items: Vec<ItemId>, round: u64) -> Result<Self, BanditError> {
        if items.is_empty() {
            return Err(BanditError::EmptySlate);
        }
        let mut seen = items.clone();
        seen.sort_unstable();
        for pair in seen.windows(2) {
            if pair[0] == pair[1] {
                return Err(BanditError::DuplicateItem(pair[0]));
            }
        }
        Ok(Self { items, round })
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.items.contains(&item)
    }
}

/// Draw θ for one arm from its posterior `Beta(S + alpha, F + beta)`.
pub fn sample_theta<R: Rng + ?Sized>(arm: &ArmState, prior: &BetaPrior, rng: &mut R) -> ThetaDraw {
    let (a, b) = arm.posterior(prior);
    // Parameters are strictly positive by construction, so Beta::new cannot
    // fail; the sampler is exact (gamma-ratio based), not a normal
    // approximation.
    let theta = Beta::new(a, b).expect("posterior parameters are positive").sample(rng);
    ThetaDraw {
        item_id: arm.item_id(),
        theta: theta.clamp(0.0, 1.0),
    }
}

/// Draw θ for every arm, in input order.
pub fn sample_thetas<R: Rng + ?Sized>(
    arms: &[ArmState],
    prior: &BetaPrior,
    rng: &mut R,
) -> Vec<ThetaDraw> {
    arms.iter().map(|arm| sample_theta(arm, prior, rng)).collect()
}

/// The argmax of a θ vector; ties go to the lowest item id so replays are
/// deterministic.
pub fn argmax_item(draws: &[ThetaDraw]) -> Result<ItemId, BanditError> {
    let mut best: Option<&ThetaDraw> = None;
    for d in draws {
        best = match best {
            None => Some(d),
            Some(b) => {
                if d.theta > b.theta || (d.theta == b.theta && d.item_id < b.item_id) {
                    Some(d)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.map(|d| d.item_id).ok_or(BanditError::EmptyPool)
}

/// Single-arm Thompson sampling: draw θ per arm, play the argmax.
pub fn select_single<R: Rng + ?Sized>(
    arms: &[ArmState],
    prior: &BetaPrior,
    rng: &mut R,
) -> Result<ItemId, BanditError> {
    if arms.is_empty() {
        return Err(BanditError::EmptyPool);
    }
    argmax_item(&sample_thetas(arms, prior, rng))
}

/// The N items with the largest θ, ordered descending (ties by lowest id).
pub fn top_n_by_theta(draws: &[ThetaDraw], n: usize, round: u64) -> Result<Slate, BanditError> {
    if n == 0 {
        return Err(BanditError::EmptySlate);
    }
    if n > draws.len() {
        return Err(BanditError::SlateTooLarge {
            requested: n,
            pool: draws.len(),
        });
    }
    let mut order: Vec<&ThetaDraw> = draws.iter().collect();
    order.sort_by(|a, b| {
        b.theta
            .total_cmp(&a.theta)
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
    Slate::new(order[..n].iter().map(|d| d.item_id).collect(), round)
}

/// Ranked-list Thompson sampling: draw θ per arm, sort descending, show the
/// top N. Deterministic given the draws.
pub fn select_topn_deterministic<R: Rng + ?Sized>(
    arms: &[ArmState],
    prior: &BetaPrior,
    n: usize,
    round: u64,
    rng: &mut R,
) -> Result<Slate, BanditError> {
    top_n_by_theta(&sample_thetas(arms, prior, rng), n, round)
}

/// A categorical distribution over items: aligned (item, probability) pairs
/// summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    items: Vec<ItemId>,
    probs: Vec<f64>,
}

impl ProbVector {
    /// Build from explicit pairs. Probabilities must be finite, nonnegative,
    /// free of duplicate items, and sum to 1 within 1e-9.
    pub fn new(pairs: Vec<(ItemId, f64)>) -> Result<Self, BanditError> {
        if pairs.is_empty() {
            return Err(BanditError::EmptyPool);
        }
        let mut ids: Vec<ItemId> = pairs.iter().map(|(id, _)| *id).collect();
        ids.sort_unstable();
        for pair in ids.windows(2) {
            if pair[0] == pair[1] {
                return Err(BanditError::DuplicateItem(pair[0]));
            }
        }
        for &(item, p) in &pairs {
            if !p.is_finite() || p < 0.0 {
                return Err(BanditError::InvalidProbability { item, prob: p });
            }
        }
        let sum: f64 = pairs.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(BanditError::NotNormalized { sum });
        }
        let (items, probs) = pairs.into_iter().unzip();
        Ok(Self { items, probs })
    }

    /// Uniform distribution over `items`.
    pub fn uniform(items: Vec<ItemId>) -> Result<Self, BanditError> {
        if items.is_empty() {
            return Err(BanditError::EmptyPool);
        }
        let p = 1.0 / items.len() as f64;
        let probs = vec![p; items.len()];
        Ok(Self { items, probs })
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn prob_of(&self, item: ItemId) -> Option<f64> {
        self.items
            .iter()
            .position(|&i| i == item)
            .map(|ix| self.probs[ix])
    }

    /// Iterate aligned `(item, probability)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (ItemId, f64)> + '_ {
        self.items.iter().copied().zip(self.probs.iter().copied())
    }
}

/// Normalize sampled θ into selection probabilities `p_k = θ_k / Σθ`.
///
/// Errors on an empty input or an all-zero θ vector; with valid priors a zero
/// vector is unreachable, so reaching it means the caller fed garbage.
pub fn compute_selection_probs(draws: &[ThetaDraw]) -> Result<ProbVector, BanditError> {
    if draws.is_empty() {
        return Err(BanditError::EmptyPool);
    }
    let total: f64 = draws.iter().map(|d| d.theta).sum();
    if total <= 0.0 {
        return Err(BanditError::ZeroMass);
    }
    Ok(ProbVector {
        items: draws.iter().map(|d| d.item_id).collect(),
        probs: draws.iter().map(|d| d.theta / total).collect(),
    })
}

/// A drawn slate together with the probability actually used at each draw
/// step: `propensities[0]` is the first item's mass in the original
/// distribution, `propensities[i]` for `i > 0` is the renormalized mass the
/// item had among the items still available at step `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlateDraw {
    pub slate: Slate,
    pub propensities: Vec<f64>,
}

/// Sample N distinct items sequentially without replacement, renormalizing
/// the remaining mass after each draw. Slate order is draw order.
pub fn sample_slate_exact<R: Rng + ?Sized>(
    p: &ProbVector,
    n: usize,
    round: u64,
    rng: &mut R,
) -> Result<SlateDraw, BanditError> {
    if n == 0 {
        return Err(BanditError::EmptySlate);
    }
    if n > p.len() {
        return Err(BanditError::SlateTooLarge {
            requested: n,
            pool: p.len(),
        });
    }
    let support = p.probs.iter().filter(|&&w| w > 0.0).count();
    if support < n {
        return Err(BanditError::InsufficientSupport {
            need: n,
            have: support,
        });
    }

    let mut available: Vec<usize> = (0..p.len()).collect();
    let mut chosen = Vec::with_capacity(n);
    let mut propensities = Vec::with_capacity(n);
    for step in 0..n {
        let total: f64 = available.iter().map(|&ix| p.probs[ix]).sum();
        let target: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = available.len() - 1;
        for (pos, &ix) in available.iter().enumerate() {
            acc += p.probs[ix];
            if target < acc {
                pick = pos;
                break;
            }
        }
        // Rounding in the cumulative walk can land past a trailing zero-mass
        // entry; step back onto positive mass.
        while p.probs[available[pick]] == 0.0 {
            pick -= 1;
        }
        let ix = available.swap_remove(pick);
        chosen.push(p.items[ix]);
        // The first draw uses the input distribution as-is, so its recorded
        // propensity is exactly the caller's probability mass.
        propensities.push(if step == 0 {
            p.probs[ix]
        } else {
            (p.probs[ix] / total).min(1.0)
        });
    }
    Ok(SlateDraw {
        slate: Slate::new(chosen, round)?,
        propensities,
    })
}

/// The fast sampler's output: the slate plus the perturbed values θ′ for every
/// candidate (aligned with the input draws), so the caller can normalize θ′
/// into the propensities it logs.
#[derive(Debug, Clone, PartialEq)]
pub struct FastSlateDraw {
    pub slate: Slate,
    pub perturbed: Vec<ThetaDraw>,
}

/// Fast approximate slate sampling: independently perturb each θ by a
/// Uniform(0,1] factor, `θ′_i = λ_i θ_i`, then sort θ′ descending and take the
/// top N. One sort replaces N sequential renormalized draws; the perturbation
/// keeps selection stochastic and preserves `E[θ′_i] = θ_i / 2`.
pub fn sample_slate_fast<R: Rng + ?Sized>(
    draws: &[ThetaDraw],
    n: usize,
    round: u64,
    rng: &mut R,
) -> Result<FastSlateDraw, BanditError> {
    if n == 0 {
        return Err(BanditError::EmptySlate);
    }
    if n > draws.len() {
        return Err(BanditError::SlateTooLarge {
            requested: n,
            pool: draws.len(),
        });
    }
    let perturbed: Vec<ThetaDraw> = draws
        .iter()
        .map(|d| {
            // OpenClosed01 keeps λ strictly positive, so an item with θ > 0
            // never collapses to zero propensity.
            let lambda: f64 = rng.sample(OpenClosed01);
            ThetaDraw {
                item_id: d.item_id,
                theta: lambda * d.theta,
            }
        })
        .collect();
    let slate = top_n_by_theta(&perturbed, n, round)?;
    Ok(FastSlateDraw { slate, perturbed })
}

/// Convenience context for single-action log records.
pub fn context_of_round(round: u64) -> ContextId {
    ContextId(round)
}
