//! Classic Thompson sampling over a handful of arms, one pick per round.
//! Shows the posterior concentrating on the best arm.
//!
//! Run with: cargo run --example single_arm

use slatelog::bandit::{sample_theta, select_single};
use slatelog::seeding::rng_from_seed;
use slatelog::{ArmState, BetaPrior, ItemId};
use rand::Rng;

fn main() {
    let true_ctrs = [0.02, 0.05, 0.11, 0.04];
    let prior = BetaPrior::uniform();
    let mut arms: Vec<ArmState> = (0..true_ctrs.len())
        .map(|i| ArmState::new(ItemId(i as u64)))
        .collect();
    let mut rng = rng_from_seed(7);

    for _ in 0..5_000 {
        let pick = select_single(&arms, &prior, &mut rng).unwrap();
        let ix = pick.0 as usize;
        let clicked = rng.random::<f64>() < true_ctrs[ix];
        arms[ix].update(clicked);
    }

    println!("{:<6} {:>8} {:>8} {:>10} {:>10}", "arm", "true", "pulls", "post.mean", "draw");
    for arm in &arms {
        let theta = sample_theta(arm, &prior, &mut rng);
        println!(
            "{:<6} {:>8.3} {:>8} {:>10.4} {:>10.4}",
            arm.item_id().0,
            true_ctrs[arm.item_id().0 as usize],
            arm.pulls(),
            arm.posterior_mean(&prior),
            theta.theta(),
        );
    }
    let best = arms.iter().max_by_key(|a| a.pulls()).unwrap();
    println!("\nmost pulled arm: {} (true best is arm 2)", best.item_id());
}
