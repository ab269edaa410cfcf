//! Command-line surface: `run` executes a configured comparison and writes
//! logs plus a report, `eval` scores a target policy against an existing log,
//! `report` rebuilds the comparison tables from result files.
//!
//! Exit codes: 0 success, 2 configuration problems (bad flags, bad config
//! file, bad policy spec), 3 data problems (unreadable or invalid logs,
//! missing results). Failures print one `error[config]: ...` or
//! `error[data]: ...` line to stderr.

use crate::config::{load_config, ConfigError, ExperimentConfig};
use crate::env::Environment;
use crate::eval::{
    evaluate_slate_policy, EmpiricalBestPolicy, EvalError, FixedItemPolicy, SlatePolicy,
    UniformHashPolicy, ValueEstimate,
};
use crate::logging::{
    meta_path_for, read_records_file, write_log, LogDataset, LogError, LogMetadata,
    LogRecord, LOG_SCHEMA_VERSION,
};
use crate::metrics::{DistributionReport, ItemTally};
use crate::runner::{
    replicate_seeds, run_strategy, ExperimentResult, ReplicateRun, RunError, RunOptions,
    StrategyResult,
};
use crate::ItemId;
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Environment variable naming the default output directory.
pub const OUT_DIR_VAR: &str = "SLATELOG_OUT";

/// File names fixed by the output-directory layout.
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Parser, Debug)]
#[command(
    name = "slatelog",
    version,
    about = "Bandit data-collection simulator with propensity logging and offline evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured strategy comparison; write logs and a report.
    Run {
        /// Experiment config file (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to the config's `output_dir`, then
        /// to $SLATELOG_OUT.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate a target policy's value from a logged run.
    Eval {
        /// Log file (JSON Lines) produced by `run` or compatible tools.
        #[arg(long)]
        log: PathBuf,
        /// Target policy: `uniform`, `best`, `fixed:<item>`, or `map:<file>`
        /// (JSON object mapping context id to item id).
        #[arg(long)]
        policy: String,
        /// Estimator path; `auto` picks `ips` for single-item logs and
        /// `per-slot` for slate logs.
        #[arg(long, value_enum, default_value_t = Estimator::Auto)]
        estimator: Estimator,
        /// Minimum views for the `best` policy's CTR ranking.
        #[arg(long, default_value_t = 1)]
        min_views: u64,
    },
    /// Rebuild comparison tables from a result directory.
    Report {
        /// Result directory written by `run`; falls back to $SLATELOG_OUT.
        dir: Option<PathBuf>,
        /// Also write columnar plot-data files into the directory.
        #[arg(long)]
        plot_data: bool,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    Auto,
    Ips,
    #[value(name = "per-slot")]
    PerSlot,
}

/// CLI failures split by exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    pub fn stderr_line(&self) -> String {
        match self {
            CliError::Config(msg) => format!("error[config]: {msg}"),
            CliError::Data(msg) => format!("error[data]: {msg}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<LogError> for CliError {
    fn from(e: LogError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Parse argv and dispatch; returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed } => cmd_run(&config, out.as_deref(), seed),
        Command::Eval {
            log,
            policy,
            estimator,
            min_views,
        } => cmd_eval(&log, &policy, estimator, min_views),
        Command::Report { dir, plot_data } => cmd_report(dir.as_deref(), plot_data),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.stderr_line());
            e.exit_code()
        }
    }
}

/// Everything `report` needs to rebuild tables from the log files alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment_id: String,
    pub config_digest: String,
    /// The config as executed (seed already overridden if a flag was given).
    pub config: ExperimentConfig,
    pub runs: Vec<RunEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunEntry {
    pub strategy_index: usize,
    pub label: String,
    pub replicate: u64,
    pub env_seed: u64,
    pub strategy_seed: u64,
    /// Log and metadata file names, relative to the manifest's directory.
    pub log_file: String,
    pub meta_file: String,
}

fn resolve_out_dir(flag: Option<&Path>, config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    if let Some(p) = flag {
        return Ok(p.to_path_buf());
    }
    if let Some(p) = &config.output_dir {
        return Ok(p.clone());
    }
    if let Some(p) = std::env::var_os(OUT_DIR_VAR) {
        if !p.is_empty() {
            return Ok(PathBuf::from(p));
        }
    }
    Err(CliError::Config(format!(
        "no output directory: pass --out, set `output_dir` in the config, or set ${OUT_DIR_VAR}"
    )))
}

fn cmd_run(config_path: &Path, out_flag: Option<&Path>, seed_flag: Option<u64>) -> Result<(), CliError> {
    let (mut config, digest) = load_config(config_path)?;
    if let Some(seed) = seed_flag {
        config.seed = seed;
    }
    let out_dir = resolve_out_dir(out_flag, &config)?;
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;

    let experiment_id = config.effective_experiment_id();
    let created_at = rfc3339_now();
    let run_opts = RunOptions {
        keep_records: true,
        min_views_for_ctr: config.min_views_for_ctr,
    };

    let mut entries = Vec::new();
    let mut strategy_results = Vec::new();
    for (s_ix, strategy) in config.strategies.iter().enumerate() {
        let label = strategy.effective_label();
        let mut replicates = Vec::new();
        for rep in 0..config.replicates {
            let (env_seed, strategy_seed) = replicate_seeds(config.seed, s_ix, rep);
            let out = run_strategy(
                &config.environment,
                env_seed,
                strategy,
                strategy_seed,
                config.horizon,
                &run_opts,
            )?;
            let stem = format!("s{s_ix}_{label}_rep{rep}");
            let log_file = format!("{stem}.jsonl");
            let log_path = out_dir.join(&log_file);
            let meta_path = meta_path_for(&log_path);
            let dataset = LogDataset {
                metadata: LogMetadata {
                    schema_version: LOG_SCHEMA_VERSION,
                    experiment_id: experiment_id.clone(),
                    policy: label.clone(),
                    seed: config.seed,
                    config_digest: digest.clone(),
                    horizon: config.horizon,
                    slate_size: strategy.slate_size,
                    created_at: created_at.clone(),
                },
                records: out.records.expect("run kept records"),
            };
            write_log(&log_path, &meta_path, &dataset)?;
            entries.push(RunEntry {
                strategy_index: s_ix,
                label: label.clone(),
                replicate: rep,
                env_seed,
                strategy_seed,
                log_file,
                meta_file: meta_path
                    .file_name()
                    .expect("meta path has a name")
                    .to_string_lossy()
                    .into_owned(),
            });
            replicates.push(ReplicateRun {
                replicate: rep,
                env_seed,
                strategy_seed,
                report: out.report,
                records: None,
            });
            println!(
                "ran {label} replicate {rep}: {} rounds, {} clicks",
                config.horizon,
                replicates.last().expect("just pushed").report.total_clicks
            );
        }
        strategy_results.push(StrategyResult {
            config: strategy.clone(),
            label,
            replicates,
        });
    }

    let manifest = RunManifest {
        experiment_id,
        config_digest: digest,
        config: config.clone(),
        runs: entries,
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    let result = ExperimentResult {
        horizon: config.horizon,
        replicates: config.replicates,
        master_seed: config.seed,
        env: config.environment.clone(),
        strategies: strategy_results,
    };
    write_json(&out_dir.join(REPORT_FILE), &result)?;
    println!(
        "wrote {} log file(s), {MANIFEST_FILE}, and {REPORT_FILE} to {}",
        manifest.runs.len(),
        out_dir.display()
    );
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("cannot serialize {}: {e}", path.display())))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// A context -> item table loaded from a JSON object file. Contexts missing
/// from the table produce no recommendation and match nothing.
struct MappingPolicy {
    map: BTreeMap<u64, ItemId>,
}

impl SlatePolicy for MappingPolicy {
    fn slate(&self, ctx: u64) -> Vec<ItemId> {
        self.map.get(&ctx).map(|&i| vec![i]).unwrap_or_default()
    }
}

enum TargetPolicy {
    Fixed(FixedItemPolicy),
    Uniform(UniformHashPolicy),
    Best(EmpiricalBestPolicy),
    Map(MappingPolicy),
}

impl TargetPolicy {
    fn describe(&self) -> String {
        match self {
            TargetPolicy::Fixed(p) => format!("fixed:{}", p.0 .0),
            TargetPolicy::Uniform(_) => "uniform".into(),
            TargetPolicy::Best(p) => format!("best (resolved to {})", p.0),
            TargetPolicy::Map(p) => format!("map ({} contexts)", p.map.len()),
        }
    }
}

impl SlatePolicy for TargetPolicy {
    fn slate(&self, ctx: u64) -> Vec<ItemId> {
        match self {
            TargetPolicy::Fixed(p) => p.slate(ctx),
            TargetPolicy::Uniform(p) => p.slate(ctx),
            TargetPolicy::Best(p) => p.slate(ctx),
            TargetPolicy::Map(p) => p.slate(ctx),
        }
    }
}

fn parse_policy(
    spec: &str,
    records: &[LogRecord],
    min_views: u64,
) -> Result<TargetPolicy, CliError> {
    if spec == "uniform" {
        return Ok(TargetPolicy::Uniform(
            UniformHashPolicy::from_records(records)
                .map_err(|e| CliError::Data(e.to_string()))?,
        ));
    }
    if spec == "best" {
        return Ok(TargetPolicy::Best(
            EmpiricalBestPolicy::from_records(records, min_views)
                .map_err(|e| CliError::Data(e.to_string()))?,
        ));
    }
    if let Some(raw) = spec.strip_prefix("fixed:") {
        let item: u64 = raw.parse().map_err(|_| {
            CliError::Config(format!("bad item id in policy spec `{spec}`"))
        })?;
        return Ok(TargetPolicy::Fixed(FixedItemPolicy(ItemId(item))));
    }
    if let Some(path) = spec.strip_prefix("map:") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read policy map {path}: {e}")))?;
        let map: BTreeMap<u64, u64> = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad policy map {path}: {e}")))?;
        return Ok(TargetPolicy::Map(MappingPolicy {
            map: map.into_iter().map(|(c, i)| (c, ItemId(i))).collect(),
        }));
    }
    Err(CliError::Config(format!(
        "unknown policy spec `{spec}`; expected uniform, best, fixed:<item>, or map:<file>"
    )))
}

fn print_estimate(est: &ValueEstimate) {
    println!("value: {}", est.value);
    match est.std_error {
        Some(se) => println!("std_error: {se}"),
        None => println!("std_error: n/a"),
    }
    println!("n: {}", est.n);
    println!("matched: {}", est.matched);
    println!("raw_sum: {}", est.raw_sum);
}

fn cmd_eval(
    log_path: &Path,
    policy_spec: &str,
    estimator: Estimator,
    min_views: u64,
) -> Result<(), CliError> {
    let records = read_records_file(log_path)?;
    if records.is_empty() {
        return Err(CliError::Data(format!(
            "log {} contains no records",
            log_path.display()
        )));
    }
    let single_action = records.iter().all(|r| r.items.len() == 1);
    let chosen = match estimator {
        Estimator::Auto => {
            if single_action {
                Estimator::Ips
            } else {
                Estimator::PerSlot
            }
        }
        other => other,
    };
    if chosen == Estimator::Ips && !single_action {
        return Err(CliError::Config(
            "the ips estimator handles single-item logs only; \
             use --estimator per-slot for slate logs"
                .into(),
        ));
    }
    let policy = parse_policy(policy_spec, &records, min_views)?;
    let est = evaluate_slate_policy(&records, &policy)?;
    println!("log: {} ({} records)", log_path.display(), records.len());
    println!("policy: {}", policy.describe());
    println!(
        "estimator: {}",
        match chosen {
            Estimator::Ips => "ips",
            Estimator::PerSlot => "per-slot",
            Estimator::Auto => unreachable!("resolved above"),
        }
    );
    if chosen == Estimator::PerSlot && !single_action {
        println!(
            "note: per-slot flattening of slate records is a heuristic; \
             the estimate is not an unbiased slate value"
        );
    }
    print_estimate(&est);
    Ok(())
}

/// Per-run rebuild: tallies and first exposures recomputed from the log
/// records, then summarized exactly as the simulator would have.
fn rebuild_report(
    records: &[LogRecord],
    env: &Environment,
    horizon: u64,
    min_views: u64,
) -> Result<DistributionReport, CliError> {
    let mut tallies: BTreeMap<ItemId, ItemTally> = env
        .all_items()
        .iter()
        .map(|&i| (i, ItemTally::default()))
        .collect();
    let mut first_shown: BTreeMap<ItemId, u64> = BTreeMap::new();
    for rec in records {
        for (&item, &r) in rec.items.iter().zip(&rec.rewards) {
            let t = tallies.entry(item).or_default();
            t.views += 1;
            t.clicks += r as u64;
            first_shown.entry(item).or_insert(rec.t);
        }
    }
    DistributionReport::new(&tallies, env.arrivals(), &first_shown, horizon, min_views)
        .map_err(|e| CliError::Data(e.to_string()))
}

const COLD_START_WINDOWS: [f64; 5] = [0.05, 0.10, 0.25, 0.50, 1.00];

struct StrategyTable {
    label: String,
    reports: Vec<DistributionReport>,
}

impl StrategyTable {
    fn mean_of(&self, f: impl Fn(&DistributionReport) -> Option<f64>) -> Option<f64> {
        let vals: Vec<f64> = self.reports.iter().filter_map(&f).collect();
        (vals.len() == self.reports.len() && !vals.is_empty())
            .then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:>12.4}"),
        None => format!("{:>12}", "n/a"),
    }
}

fn print_tables(tables: &[StrategyTable], out: &mut impl std::io::Write) -> std::io::Result<()> {
    let label_width = tables
        .iter()
        .map(|t| t.label.len())
        .max()
        .unwrap_or(8)
        .max("strategy".len());

    type Extract = (&'static str, fn(&DistributionReport) -> Option<f64>);
    let sections: [(&str, [Extract; 3]); 3] = [
        (
            "view distribution (per item)",
            [
                ("skewness", |r| r.views.skewness),
                ("mean", |r| Some(r.views.mean)),
                ("median", |r| Some(r.views.median)),
            ],
        ),
        (
            "click distribution (per item)",
            [
                ("skewness", |r| r.clicks.skewness),
                ("mean", |r| Some(r.clicks.mean)),
                ("median", |r| Some(r.clicks.median)),
            ],
        ),
        (
            "ctr distribution (per item, view-filtered)",
            [
                ("skewness", |r| r.ctr.as_ref().and_then(|c| c.skewness)),
                ("mean", |r| r.ctr.as_ref().map(|c| c.mean)),
                ("median", |r| r.ctr.as_ref().map(|c| c.median)),
            ],
        ),
    ];

    for (title, cols) in &sections {
        writeln!(out, "\n== {title}, mean over replicates ==")?;
        write!(out, "{:<label_width$}", "strategy")?;
        for (name, _) in cols {
            write!(out, " {name:>12}")?;
        }
        writeln!(out)?;
        for t in tables {
            write!(out, "{:<label_width$}", t.label)?;
            for (_, f) in cols {
                write!(out, " {}", fmt_cell(t.mean_of(f)))?;
            }
            writeln!(out)?;
        }
    }

    writeln!(
        out,
        "\n== cold start: fraction of items first shown within w of horizon after arrival =="
    )?;
    write!(out, "{:<label_width$}", "strategy")?;
    for w in COLD_START_WINDOWS {
        write!(out, " {:>12}", format!("w={w:.2}"))?;
    }
    writeln!(out, " {:>12}", "never_shown")?;
    for t in tables {
        write!(out, "{:<label_width$}", t.label)?;
        for w in COLD_START_WINDOWS {
            let mean = t.mean_of(|r| r.cold_start.fraction_within(w).ok());
            write!(out, " {}", fmt_cell(mean))?;
        }
        let never: f64 = t
            .reports
            .iter()
            .map(|r| r.cold_start.never_shown() as f64)
            .sum::<f64>()
            / t.reports.len().max(1) as f64;
        writeln!(out, " {never:>12.1}")?;
    }

    writeln!(out, "\n== cumulative clicks, mean over replicates ==")?;
    for t in tables {
        let clicks = t
            .reports
            .iter()
            .map(|r| r.total_clicks as f64)
            .sum::<f64>()
            / t.reports.len().max(1) as f64;
        writeln!(out, "{:<label_width$} {clicks:>12.1}", t.label)?;
    }
    Ok(())
}

/// Cold-start curves on a fixed window grid; per-item view counts are
/// emitted by the caller, which still holds the raw records.
fn write_plot_data(dir: &Path, tables: &[StrategyTable]) -> Result<(), CliError> {
    let mut cold = String::from("strategy\treplicate\twindow\tfraction\n");
    for t in tables {
        for (rep, report) in t.reports.iter().enumerate() {
            for step in 1..=50 {
                let w = step as f64 / 50.0;
                if let Ok(frac) = report.cold_start.fraction_within(w) {
                    cold.push_str(&format!("{}\t{rep}\t{w:.2}\t{frac}\n", t.label));
                }
            }
        }
    }
    std::fs::write(dir.join("plot_cold_start.tsv"), cold)
        .map_err(|e| CliError::Data(format!("cannot write plot data: {e}")))?;
    Ok(())
}

fn cmd_report(dir_flag: Option<&Path>, plot_data: bool) -> Result<(), CliError> {
    let dir = match dir_flag {
        Some(d) => d.to_path_buf(),
        None => std::env::var_os(OUT_DIR_VAR)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "no result directory: pass one as an argument or set ${OUT_DIR_VAR}"
                ))
            })?,
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest_text = std::fs::read_to_string(&manifest_path).map_err(|e| {
        CliError::Data(format!("cannot read {}: {e}", manifest_path.display()))
    })?;
    let manifest: RunManifest = serde_json::from_str(&manifest_text)
        .map_err(|e| CliError::Data(format!("bad manifest: {e}")))?;

    let mut tables: Vec<StrategyTable> = Vec::new();
    let mut view_rows = String::from("strategy\treplicate\titem\tviews\tclicks\n");
    for entry in &manifest.runs {
        let env = Environment::build(&manifest.config.environment, entry.env_seed)
            .map_err(|e| CliError::Data(e.to_string()))?;
        let log_path = dir.join(&entry.log_file);
        let records = read_records_file(&log_path)?;
        if plot_data {
            let mut tallies: BTreeMap<ItemId, ItemTally> = BTreeMap::new();
            for rec in &records {
                for (&item, &r) in rec.items.iter().zip(&rec.rewards) {
                    let t = tallies.entry(item).or_default();
                    t.views += 1;
                    t.clicks += r as u64;
                }
            }
            for (item, t) in &tallies {
                view_rows.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    entry.label, entry.replicate, item.0, t.views, t.clicks
                ));
            }
        }
        let report = rebuild_report(
            &records,
            &env,
            manifest.config.horizon,
            manifest.config.min_views_for_ctr,
        )?;
        match tables.iter_mut().find(|t| t.label == entry.label) {
            Some(t) => t.reports.push(report),
            None => tables.push(StrategyTable {
                label: entry.label.clone(),
                reports: vec![report],
            }),
        }
    }
    if tables.is_empty() {
        return Err(CliError::Data(format!(
            "manifest {} lists no runs",
            manifest_path.display()
        )));
    }

    println!(
        "experiment: {} (config digest {})",
        manifest.experiment_id,
        &manifest.config_digest[..manifest.config_digest.len().min(12)]
    );
    let mut stdout = std::io::stdout().lock();
    print_tables(&tables, &mut stdout)
        .map_err(|e| CliError::Data(format!("cannot write report: {e}")))?;
    drop(stdout);

    if plot_data {
        write_plot_data(&dir, &tables)?;
        std::fs::write(dir.join("plot_view_counts.tsv"), view_rows)
            .map_err(|e| CliError::Data(format!("cannot write plot data: {e}")))?;
        println!(
            "\nwrote plot_cold_start.tsv and plot_view_counts.tsv to {}",
            dir.display()
        );
    }
    Ok(())
}

/// RFC 3339 UTC timestamp of the current system clock, without pulling in a
/// calendar dependency. Seconds precision.
pub fn rfc3339_now() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    rfc3339_from_unix(secs)
}

fn rfc3339_from_unix(secs: u64) -> String {
    let days = secs / 86_400;
    let rem = secs % 86_400;
    let (h, m, s) = (rem / 3600, (rem % 3600) / 60, rem % 60);
    // Civil-from-days (proleptic Gregorian), valid for the unix era.
    let z = days as i64 + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = if month <= 2 { y + 1 } else { y };
    format!("{year:04}-{month:02}-{d:02}T{h:02}:{m:02}:{s:02}Z")
}
