//! The perturbation shortcut for big pools: multiply every posterior draw
//! by an independent Uniform(0,1] factor and sort once, instead of sampling
//! slot by slot with renormalization. Scores halve in expectation and the
//! slate cost drops from N renormalizing passes to one sort, which starts
//! to matter once slates get wide.
//!
//! Run with: cargo run --release --example fast_slate

use slatelog::env::{ArrivalSchedule, CtrModel, EnvSpec};
use slatelog::runner::{run_strategy, RunOptions, StrategyConfig, StrategyKind};
use std::time::Instant;

fn main() {
    let spec = EnvSpec {
        num_items: 5_000,
        ctr_model: CtrModel::default_beta(),
        arrivals: ArrivalSchedule::AllAtZero,
    };
    let opts = RunOptions { keep_records: false, min_views_for_ctr: 1 };
    let horizon = 500u64;

    println!(
        "{:<8} {:<22} {:>10} {:>12} {:>10}",
        "slate", "sampler", "seconds", "view skew", "clicks"
    );
    for n in [10usize, 100] {
        for kind in [StrategyKind::TsCollectionExact, StrategyKind::TsCollectionFast] {
            let strategy = StrategyConfig::new(kind, n).with_full_probs(false);
            let start = Instant::now();
            let out = run_strategy(&spec, 31, &strategy, 32, horizon, &opts).unwrap();
            let elapsed = start.elapsed().as_secs_f64();
            println!(
                "{:<8} {:<22} {:>10.3} {:>12.2} {:>10}",
                n,
                out.label,
                elapsed,
                out.report.views.skewness.unwrap(),
                out.report.total_clicks
            );
        }
    }

    println!("\n{horizon} rounds over a {}-item pool.", spec.num_items);
    println!("at slate 10 both samplers are dominated by posterior sampling; at");
    println!("slate 100 the sequential sampler pays for 100 renormalizing passes");
    println!("per round while the perturbation sampler still sorts once. the");
    println!("trade: it logs normalized perturbed scores, not sequential-draw");
    println!("masses, so treat its propensities as approximate.");
}
