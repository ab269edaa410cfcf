//! Ranked-list Thompson sampling: draw one posterior sample per item, sort,
//! show the top N. Simple and effective at engagement, but the exposure it
//! produces is heavily concentrated, and its logs carry no usable
//! propensities for later reweighting.
//!
//! Run with: cargo run --example ranked_list

use slatelog::env::{ArrivalSchedule, CtrModel, EnvSpec};
use slatelog::runner::{run_strategy, RunOptions, StrategyConfig, StrategyKind};

fn main() {
    let spec = EnvSpec {
        num_items: 50,
        ctr_model: CtrModel::default_beta(),
        arrivals: ArrivalSchedule::AllAtZero,
    };
    let strategy = StrategyConfig::new(StrategyKind::TsRankedlist, 5);
    let out = run_strategy(&spec, 11, &strategy, 12, 8_000, &RunOptions::default()).unwrap();

    let mut by_views: Vec<_> = out.tallies.iter().collect();
    by_views.sort_by(|a, b| b.1.views.cmp(&a.1.views));

    println!("top 10 of 50 items by exposure after 8000 rounds of 5-item slates:");
    println!("{:<8} {:>8} {:>8} {:>8}", "item", "views", "clicks", "ctr");
    for (item, tally) in by_views.iter().take(10) {
        println!(
            "{:<8} {:>8} {:>8} {:>8.4}",
            item.0,
            tally.views,
            tally.clicks,
            tally.clicks as f64 / tally.views.max(1) as f64
        );
    }
    let top10: u64 = by_views.iter().take(10).map(|(_, t)| t.views).sum();
    println!(
        "\ntop 10 items hold {:.0}% of all impressions (view skewness {:.2})",
        100.0 * top10 as f64 / out.report.total_views as f64,
        out.report.views.skewness.unwrap(),
    );
    println!("note: every record's propensity field is 1.0 for this strategy");
}
