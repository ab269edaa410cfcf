//! Offline policy evaluation from a logged run: reweight logged rewards by
//! inverse propensities to score policies that were never deployed. The
//! logging policy must be stochastic with recorded propensities; that is
//! the entire point of collection-mode logging.
//!
//! Run with: cargo run --example offline_eval

use slatelog::env::{ArrivalSchedule, CtrModel, EnvSpec};
use slatelog::eval::{evaluate_policy, EmpiricalBestPolicy, FixedItemPolicy};
use slatelog::runner::{run_strategy, RunOptions, StrategyConfig, StrategyKind};
use slatelog::ItemId;

fn main() {
    let ctrs = [0.10, 0.08, 0.06, 0.04, 0.02];
    let spec = EnvSpec {
        num_items: ctrs.len(),
        ctr_model: CtrModel::Explicit { ctrs: ctrs.to_vec() },
        arrivals: ArrivalSchedule::AllAtZero,
    };

    // Log 30k rounds of uniform exploration, one item per round.
    let logger = StrategyConfig::new(StrategyKind::UniformRandom, 1).with_full_probs(false);
    let out = run_strategy(&spec, 41, &logger, 42, 30_000, &RunOptions::default()).unwrap();
    let records = out.records.unwrap();
    println!(
        "logged {} uniform rounds (every propensity 1/{})",
        records.len(),
        ctrs.len()
    );

    println!("\n{:<26} {:>10} {:>10} {:>8}", "target policy", "estimate", "true", "se");
    for (ix, &truth) in ctrs.iter().enumerate() {
        let est = evaluate_policy(&records, &FixedItemPolicy(ItemId(ix as u64))).unwrap();
        println!(
            "{:<26} {:>10.4} {:>10.4} {:>8.4}",
            format!("always item {ix}"),
            est.value,
            truth,
            est.std_error.unwrap()
        );
    }

    let best = EmpiricalBestPolicy::from_records(&records, 100).unwrap();
    let est = evaluate_policy(&records, &best).unwrap();
    println!(
        "{:<26} {:>10.4} {:>10.4} {:>8.4}",
        format!("empirical best ({})", best.0),
        est.value,
        ctrs[best.0 .0 as usize],
        est.std_error.unwrap()
    );
    println!("\neach estimate should sit within a few standard errors of its truth");
}
