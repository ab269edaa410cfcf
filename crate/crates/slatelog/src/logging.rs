//! The interaction log: one JSONL record per round plus a metadata header
//! file describing how the log was produced.
//!
//! A record stores what was shown, the probability each shown item was chosen
//! with, and the observed rewards. Keeping the propensities positive and
//! exact is the whole point: downstream importance-weighted evaluation
//! divides by them, so a zero or rounded propensity silently corrupts every
//! estimate computed from the log. Floats are serialized with serde_json's
//! shortest-round-trip encoding, so values survive write/read bit for bit.

use crate::ItemId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record on line {line}: {source}")]
    Malformed {
        line: usize,
        source: serde_json::Error,
    },
    #[error("malformed metadata: {0}")]
    MalformedMetadata(serde_json::Error),
    #[error("record at round {t}: {reason}")]
    Invalid { t: u64, reason: String },
    #[error("rounds must increase: {prev} then {next}")]
    NonIncreasingRound { prev: u64, next: u64 },
}

/// One logged round. Field names are part of the on-disk contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    /// Round counter, strictly increasing within a log.
    pub t: u64,
    /// Opaque context key (user/request bucket) the decision conditioned on.
    pub ctx: u64,
    /// Items shown, in slot order.
    pub items: Vec<ItemId>,
    /// Probability each shown item was chosen with, aligned with `items`.
    /// Every entry must lie in (0, 1]; deterministic policies log 1.0.
    pub props: Vec<f64>,
    /// Observed reward per slot, aligned with `items`; each in [0, 1].
    pub rewards: Vec<f64>,
    /// Full selection distribution over the candidate pool at decision time,
    /// when the policy had one. Optional: it is large, and only needed by
    /// consumers that re-weight against non-shown items.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pvec: Option<BTreeMap<ItemId, f64>>,
}

impl LogRecord {
    /// Structural validity of a single record, independent of its neighbors.
    pub fn validate(&self) -> Result<(), LogError> {
        let fail = |reason: String| LogError::Invalid { t: self.t, reason };
        if self.items.is_empty() {
            return Err(fail("empty slate".into()));
        }
        if self.props.len() != self.items.len() || self.rewards.len() != self.items.len() {
            return Err(fail(format!(
                "misaligned lengths: {} items, {} props, {} rewards",
                self.items.len(),
                self.props.len(),
                self.rewards.len()
            )));
        }
        let mut seen = self.items.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(fail("duplicate item in slate".into()));
        }
        for &p in &self.props {
            if !p.is_finite() || p <= 0.0 || p > 1.0 {
                return Err(fail(format!(
                    "propensity {p} outside (0, 1]; reweighted evaluation \
                     requires every logged action to have been chosen with \
                     positive probability"
                )));
            }
        }
        for &r in &self.rewards {
            if !r.is_finite() || !(0.0..=1.0).contains(&r) {
                return Err(fail(format!("reward {r} outside [0, 1]")));
            }
        }
        if let Some(pvec) = &self.pvec {
            let sum: f64 = pvec.values().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(fail(format!("pvec sums to {sum}, expected 1")));
            }
            for (item, &p) in pvec {
                if !p.is_finite() || p < 0.0 {
                    return Err(fail(format!("pvec entry {item} has probability {p}")));
                }
            }
            // The first slot's propensity is by construction the item's mass
            // in the logged distribution.
            if let Some(&p0) = pvec.get(&self.items[0]) {
                if (p0 - self.props[0]).abs() > 1e-9 {
                    return Err(fail(format!(
                        "first-slot propensity {} disagrees with pvec mass {}",
                        self.props[0], p0
                    )));
                }
            } else {
                return Err(fail(format!(
                    "slate item {} missing from pvec",
                    self.items[0]
                )));
            }
        }
        Ok(())
    }
}

/// Header written next to every log: enough to tie the file back to the run
/// that produced it and to reproduce that run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMetadata {
    /// Schema version of the record format.
    pub schema_version: u32,
    /// Human-chosen experiment identifier.
    pub experiment_id: String,
    /// Strategy label that generated the log.
    pub policy: String,
    /// Master seed the run derived all randomness from.
    pub seed: u64,
    /// SHA-256 of the config file the run was launched with, hex-encoded;
    /// empty when the run was not config-driven.
    pub config_digest: String,
    /// Rounds the log is expected to contain.
    pub horizon: u64,
    /// Slate size per round.
    pub slate_size: usize,
    /// RFC 3339 creation timestamp (informational, not used in comparisons).
    pub created_at: String,
}

pub const LOG_SCHEMA_VERSION: u32 = 1;

/// An in-memory log: metadata plus validated records in round order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDataset {
    pub metadata: LogMetadata,
    pub records: Vec<LogRecord>,
}

impl LogDataset {
    /// Validate every record and the cross-record round ordering.
    pub fn validate(&self) -> Result<(), LogError> {
        let mut prev: Option<u64> = None;
        for rec in &self.records {
            rec.validate()?;
            if let Some(p) = prev {
                if rec.t <= p {
                    return Err(LogError::NonIncreasingRound {
                        prev: p,
                        next: rec.t,
                    });
                }
            }
            prev = Some(rec.t);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Streaming JSONL writer. Records are validated and round-ordering is
/// enforced at write time so a bad log can never reach disk.
pub struct LogWriter<W: Write> {
    sink: W,
    last_round: Option<u64>,
    written: usize,
}

impl<W: Write> LogWriter<W> {
    pub fn new(sink: W) -> Self {
        Self {
            sink,
            last_round: None,
            written: 0,
        }
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<(), LogError> {
        record.validate()?;
        if let Some(prev) = self.last_round {
            if record.t <= prev {
                return Err(LogError::NonIncreasingRound {
                    prev,
                    next: record.t,
                });
            }
        }
        serde_json::to_writer(&mut self.sink, record)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
        self.sink.write_all(b"\n")?;
        self.last_round = Some(record.t);
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn finish(mut self) -> Result<(), LogError> {
        self.sink.flush()?;
        Ok(())
    }
}

/// Write a full dataset: `<path>` gets the JSONL records, `<path>.meta.json`
/// (or `meta_path`) gets the metadata header.
pub fn write_log(
    log_path: &Path,
    meta_path: &Path,
    dataset: &LogDataset,
) -> Result<(), LogError> {
    dataset.validate()?;
    let meta_text = serde_json::to_string_pretty(&dataset.metadata)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
    std::fs::write(meta_path, meta_text + "\n")?;
    let file = std::fs::File::create(log_path)?;
    let mut writer = LogWriter::new(std::io::BufWriter::new(file));
    for rec in &dataset.records {
        writer.append(rec)?;
    }
    writer.finish()
}

/// Conventional metadata path for a log file: `<stem>.meta.json` next to it.
pub fn meta_path_for(log_path: &Path) -> std::path::PathBuf {
    let stem = log_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "log".into());
    log_path.with_file_name(format!("{stem}.meta.json"))
}

/// Read records from any line-oriented source, validating as it goes.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<LogRecord>, LogError> {
    let mut records = Vec::new();
    let mut prev: Option<u64> = None;
    for (ix, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogRecord = serde_json::from_str(&line).map_err(|source| {
            LogError::Malformed {
                line: ix + 1,
                source,
            }
        })?;
        rec.validate()?;
        if let Some(p) = prev {
            if rec.t <= p {
                return Err(LogError::NonIncreasingRound { prev: p, next: rec.t });
            }
        }
        prev = Some(rec.t);
        records.push(rec);
    }
    Ok(records)
}

/// Load a dataset from a JSONL file and its metadata header.
pub fn read_log(log_path: &Path, meta_path: &Path) -> Result<LogDataset, LogError> {
    let meta_text = std::fs::read_to_string(meta_path)?;
    let metadata: LogMetadata =
        serde_json::from_str(&meta_text).map_err(LogError::MalformedMetadata)?;
    let file = std::fs::File::open(log_path)?;
    let records = read_records(std::io::BufReader::new(file))?;
    Ok(LogDataset { metadata, records })
}

/// Load only the records when no metadata header is available (hand-written
/// logs, third-party exports).
pub fn read_records_file(log_path: &Path) -> Result<Vec<LogRecord>, LogError> {
    let file = std::fs::File::open(log_path)?;
    read_records(std::io::BufReader::new(file))
}

pub fn test_metadata(policy: &str) -> LogMetadata {
    LogMetadata {
        schema_version: LOG_SCHEMA_VERSION,
        experiment_id: "test".into(),
        policy: policy.into(),
        seed: 0,
        config_digest: String::new(),
        horizon: 0,
        slate_size: 1,
        created_at: "1970-01-01T00:00:00Z".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(v: u64) -> ItemId {
        ItemId(v)
    }

    fn simple_record(t: u64) -> LogRecord {
        LogRecord {
            t,
            ctx: t,
            items: vec![id(1), id(2)],
            props: vec![0.5, 0.7],
            rewards: vec![1.0, 0.0],
            pvec: None,
        }
    }

    #[test]
    fn record_round_trips_exactly() {
        let mut pvec = BTreeMap::new();
        // Deliberately awkward floats: 0.1 + 0.2 != 0.3 in binary, and the
        // shortest-representation encoder must preserve each bit pattern.
        pvec.insert(id(1), 0.1);
        pvec.insert(id(2), 0.2);
        pvec.insert(id(3), 1.0 - 0.1 - 0.2);
        let rec = LogRecord {
            t: 42,
            ctx: 7,
            items: vec![id(3), id(1)],
            props: vec![1.0 - 0.1 - 0.2, 0.1 / (0.1 + 0.2)],
            rewards: vec![1.0, 0.0],
            pvec: Some(pvec),
        };
        rec.validate().unwrap();
        let line = serde_json::to_string(&rec).unwrap();
        let back: LogRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.props[0].to_bits(), rec.props[0].to_bits());
        assert_eq!(back.props[1].to_bits(), rec.props[1].to_bits());
    }

    #[test]
    fn field_names_are_the_contract() {
        let line = serde_json::to_string(&simple_record(3)).unwrap();
        for field in ["\"t\":", "\"ctx\":", "\"items\":", "\"props\":", "\"rewards\":"] {
            assert!(line.contains(field), "missing {field} in {line}");
        }
        // pvec is omitted when absent, not serialized as null.
        assert!(!line.contains("pvec"));
    }

    #[test]
    fn zero_propensity_is_rejected() {
        let mut rec = simple_record(0);
        rec.props[1] = 0.0;
        assert!(rec.validate().is_err());
    }

    #[test]
    fn propensity_above_one_is_rejected() {
        let mut rec = simple_record(0);
        rec.props[0] = 1.0000001;
        assert!(rec.validate().is_err());
    }

    #[test]
    fn misaligned_lengths_are_rejected() {
        let mut rec = simple_record(0);
        rec.rewards.pop();
        assert!(rec.validate().is_err());
    }

    #[test]
    fn duplicate_slate_items_are_rejected() {
        let mut rec = simple_record(0);
        rec.items = vec![id(1), id(1)];
        assert!(rec.validate().is_err());
    }

    #[test]
    fn reward_outside_unit_interval_is_rejected() {
        let mut rec = simple_record(0);
        rec.rewards[0] = 1.5;
        assert!(rec.validate().is_err());
        rec.rewards[0] = -0.1;
        assert!(rec.validate().is_err());
    }

    #[test]
    fn unnormalized_pvec_is_rejected() {
        let mut rec = simple_record(0);
        let mut pvec = BTreeMap::new();
        pvec.insert(id(1), 0.5);
        pvec.insert(id(2), 0.4);
        rec.props = vec![0.5, 0.8];
        rec.pvec = Some(pvec);
        assert!(rec.validate().is_err());
    }

    #[test]
    fn first_slot_propensity_must_match_pvec() {
        let mut pvec = BTreeMap::new();
        pvec.insert(id(1), 0.25);
        pvec.insert(id(2), 0.75);
        let rec = LogRecord {
            t: 0,
            ctx: 0,
            items: vec![id(2), id(1)],
            props: vec![0.74, 1.0],
            rewards: vec![0.0, 0.0],
            pvec: Some(pvec),
        };
        let err = rec.validate().unwrap_err();
        assert!(err.to_string().contains("first-slot propensity"));
    }

    #[test]
    fn writer_enforces_increasing_rounds() {
        let mut buf = Vec::new();
        let mut w = LogWriter::new(&mut buf);
        w.append(&simple_record(5)).unwrap();
        let err = w.append(&simple_record(5)).unwrap_err();
        assert!(matches!(err, LogError::NonIncreasingRound { prev: 5, next: 5 }));
        assert_eq!(w.written(), 1);
    }

    #[test]
    fn reader_rejects_disordered_rounds() {
        let mut lines = String::new();
        lines += &serde_json::to_string(&simple_record(2)).unwrap();
        lines += "\n";
        lines += &serde_json::to_string(&simple_record(1)).unwrap();
        lines += "\n";
        let err = read_records(lines.as_bytes()).unwrap_err();
        assert!(matches!(err, LogError::NonIncreasingRound { prev: 2, next: 1 }));
    }

    #[test]
    fn reader_reports_malformed_line_numbers() {
        let mut lines = String::new();
        lines += &serde_json::to_string(&simple_record(1)).unwrap();
        lines += "\nnot json\n";
        let err = read_records(lines.as_bytes()).unwrap_err();
        match err {
            LogError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn reader_skips_blank_lines() {
        let mut lines = String::new();
        lines += &serde_json::to_string(&simple_record(1)).unwrap();
        lines += "\n\n";
        lines += &serde_json::to_string(&simple_record(2)).unwrap();
        lines += "\n";
        let recs = read_records(lines.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
    }

    #[test]
    fn file_round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let log_path = dir.path().join("run.jsonl");
        let meta_path = meta_path_for(&log_path);
        assert_eq!(meta_path.file_name().unwrap(), "run.meta.json");

        let mut pvec = BTreeMap::new();
        pvec.insert(id(1), 1.0 / 3.0);
        pvec.insert(id(2), 2.0 / 3.0);
        let dataset = LogDataset {
            metadata: LogMetadata {
                schema_version: LOG_SCHEMA_VERSION,
                experiment_id: "exp-7".into(),
                policy: "ts_collection_exact".into(),
                seed: 1234,
                config_digest: "abc123".into(),
                horizon: 2,
                slate_size: 1,
                created_at: "2024-05-01T12:00:00Z".into(),
            },
            records: vec![
                LogRecord {
                    t: 0,
                    ctx: 0,
                    items: vec![id(2)],
                    props: vec![2.0 / 3.0],
                    rewards: vec![1.0],
                    pvec: Some(pvec.clone()),
                },
                LogRecord {
                    t: 1,
                    ctx: 1,
                    items: vec![id(1)],
                    props: vec![1.0 / 3.0],
                    rewards: vec![0.0],
                    pvec: Some(pvec),
                },
            ],
        };
        write_log(&log_path, &meta_path, &dataset).unwrap();
        let back = read_log(&log_path, &meta_path).unwrap();
        assert_eq!(back, dataset);
        assert_eq!(
            back.records[0].props[0].to_bits(),
            (2.0f64 / 3.0).to_bits()
        );
    }

    #[test]
    fn dataset_validate_catches_round_regression() {
        let dataset = LogDataset {
            metadata: test_metadata("x"),
            records: vec![simple_record(3), simple_record(3)],
        };
        assert!(matches!(
            dataset.validate(),
            Err(LogError::NonIncreasingRound { .. })
        ));
    }
}
