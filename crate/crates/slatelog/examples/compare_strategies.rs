//! Side-by-side strategy comparison on one simulated catalog: same item
//! pools, same reward streams, different selection behavior. Prints the
//! exposure, engagement, and cold-start numbers that motivate collection
//! mode.
//!
//! Run with: cargo run --example compare_strategies --release

use slatelog::env::{ArrivalSchedule, CtrModel, EnvSpec};
use slatelog::runner::{compare, CompareOptions, StrategyConfig, StrategyKind};
use slatelog::BetaPrior;

fn main() {
    let spec = EnvSpec {
        num_items: 100,
        ctr_model: CtrModel::default_beta(),
        arrivals: ArrivalSchedule::Staircase { batch: 10, interval: 500 },
    };
    let prior = BetaPrior::from_ctr(0.04, 25.0).unwrap();
    let strategies = vec![
        StrategyConfig::new(StrategyKind::Chronological, 5).with_full_probs(false),
        StrategyConfig::new(StrategyKind::GreedyTopn, 5)
            .with_prior(prior.clone())
            .with_full_probs(false),
        StrategyConfig::new(StrategyKind::TsRankedlist, 5)
            .with_prior(prior.clone())
            .with_full_probs(false),
        StrategyConfig::new(StrategyKind::TsCollectionExact, 5)
            .with_prior(prior.clone())
            .with_full_probs(false),
        StrategyConfig::new(StrategyKind::TsCollectionFast, 5)
            .with_prior(prior)
            .with_full_probs(false),
        StrategyConfig::new(StrategyKind::UniformRandom, 5).with_full_probs(false),
    ];
    let result = compare(
        &spec,
        1905,
        &strategies,
        8_000,
        &CompareOptions { replicates: 5, keep_records: false, min_views_for_ctr: 1 },
    )
    .unwrap();

    println!(
        "{:<22} {:>10} {:>12} {:>12} {:>12}",
        "strategy", "clicks", "view skew", "view median", "cold<10%"
    );
    for s in &result.strategies {
        println!(
            "{:<22} {:>10.0} {:>12.2} {:>12.1} {:>12.3}",
            s.label,
            s.mean_total_clicks(),
            s.mean_view_skewness().unwrap(),
            s.mean_view_median().unwrap(),
            s.mean_cold_start_within(0.10).unwrap(),
        );
    }
    println!("\n5 replicates, paired environments; 10 fresh items arrive every 500 rounds.");
    println!("collection keeps skew near uniform's while earning clicks between");
    println!("uniform and the pure rankers, and it surfaces new arrivals fast.");
}
