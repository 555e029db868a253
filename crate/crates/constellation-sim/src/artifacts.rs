//! Run artifact emission: the JSONL event log, the CSV time series, the
//! JSON summary, and the verification path that recomputes the summary
//! totals from the event log.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::engine::{event_totals, EventRecord, RunResult, RunSummary};
use crate::error::{Result, SimError};

/// Paths produced by a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub events_path: PathBuf,
    pub timeseries_path: PathBuf,
    pub summary_path: PathBuf,
}

pub const EVENTS_FILE: &str = "events.jsonl";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CSV_HEADER: &str = "t,sat_id,activity,soc,temperature_c,train_loss";

/// One event per line, in step order.
pub fn events_to_jsonl(events: &[EventRecord]) -> String {
    let mut out = String::new();
    for ev in events {
        out.push_str(&serde_json::to_string(ev).expect("event serializes"));
        out.push('\n');
    }
    out
}

/// Fixed-schema CSV view of the event log.
pub fn events_to_csv(events: &[EventRecord]) -> String {
    let mut out = String::with_capacity(events.len() * 48 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for ev in events {
        let loss = match ev.train_loss {
            Some(l) => l.to_string(),
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            ev.t,
            ev.sat_id,
            ev.activity.name(),
            ev.soc,
            ev.temperature_c,
            loss
        ));
    }
    out
}

/// Write all artifacts into `out_dir`, creating it if needed.
pub fn write_artifacts(result: &RunResult, out_dir: &Path) -> Result<RunArtifacts> {
    fs::create_dir_all(out_dir)?;
    let artifacts = RunArtifacts {
        events_path: out_dir.join(EVENTS_FILE),
        timeseries_path: out_dir.join(TIMESERIES_FILE),
        summary_path: out_dir.join(SUMMARY_FILE),
    };
    let mut events_file = fs::File::create(&artifacts.events_path)?;
    events_file.write_all(events_to_jsonl(&result.events).as_bytes())?;
    let mut ts_file = fs::File::create(&artifacts.timeseries_path)?;
    ts_file.write_all(events_to_csv(&result.events).as_bytes())?;
    let summary_json = serde_json::to_string_pretty(&result.summary).expect("summary serializes");
    fs::write(&artifacts.summary_path, summary_json)?;
    Ok(artifacts)
}

pub fn read_events(path: &Path) -> Result<Vec<EventRecord>> {
    if !path.exists() {
        return Err(SimError::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ev: EventRecord = serde_json::from_str(line)
            .map_err(|e| SimError::VerifyMismatch(format!("events line {}: {e}", i + 1)))?;
        events.push(ev);
    }
    Ok(events)
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    if !path.exists() {
        return Err(SimError::MissingArtifact(path.to_path_buf()));
    }
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Recompute every total in `summary.json` from `events.jsonl` and demand
/// exact agreement. Final-evaluation fields depend on model state that the
/// event log does not carry, so they are checked for presence only.
pub fn verify_dir(out_dir: &Path) -> Result<()> {
    let events = read_events(&out_dir.join(EVENTS_FILE))?;
    let summary = read_summary(&out_dir.join(SUMMARY_FILE))?;
    let (totals, per_sat) = event_totals(&events);

    let mut mismatches = Vec::new();
    if totals != summary.totals {
        mismatches.push(format!(
            "totals: recomputed {totals:?} != summary {:?}",
            summary.totals
        ));
    }
    for sat in &summary.per_satellite {
        let recomputed = per_sat.iter().find(|s| s.sat_id == sat.totals.sat_id);
        match recomputed {
            Some(r) if *r == sat.totals => {}
            Some(r) => mismatches.push(format!(
                "sat {}: recomputed {r:?} != summary {:?}",
                sat.totals.sat_id, sat.totals
            )),
            None => {
                // No events for this satellite: its totals must be all zero.
                let zeroish = sat.totals.batches == 0
                    && sat.totals.exchanges_completed == 0
                    && sat.totals.exchanges_aborted == 0
                    && sat.totals.standby_seconds == 0.0
                    && sat.totals.eclipse_seconds == 0.0;
                if !zeroish {
                    mismatches.push(format!(
                        "sat {}: summary has totals but the log has no events",
                        sat.totals.sat_id
                    ));
                }
            }
        }
        if !sat.final_eval_loss.is_finite() || !sat.final_eval_iou.is_finite() {
            mismatches.push(format!("sat {}: non-finite final evaluation", sat.totals.sat_id));
        }
    }
    let sum_contacts: u64 = summary.server_contact_counts.iter().sum();
    if sum_contacts != totals.exchanges_completed {
        mismatches.push(format!(
            "server contact counts sum to {sum_contacts}, log has {} completed exchanges",
            totals.exchanges_completed
        ));
    }
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(SimError::VerifyMismatch(mismatches.join("; ")))
    }
}

/// Parse one CSV row back into its typed tuple.
pub fn parse_csv_row(line: &str) -> Result<(f64, u32, String, f64, f64, Option<f64>)> {
    let parts: Vec<&str> = line.split(',').collect();
    if parts.len() != 6 {
        return Err(SimError::VerifyMismatch(format!(
            "csv row has {} columns, expected 6",
            parts.len()
        )));
    }
    let bad = |field: &str| SimError::VerifyMismatch(format!("csv field {field} unparseable"));
    Ok((
        parts[0].parse().map_err(|_| bad("t"))?,
        parts[1].parse().map_err(|_| bad("sat_id"))?,
        parts[2].to_string(),
        parts[3].parse().map_err(|_| bad("soc"))?,
        parts[4].parse().map_err(|_| bad("temperature_c"))?,
        if parts[5].is_empty() {
            None
        } else {
            Some(parts[5].parse().map_err(|_| bad("train_loss"))?)
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::engine::run;

    fn small_run() -> RunResult {
        let mut cfg = ScenarioConfig::scenario1();
        cfg.satellite_count = 2;
        cfg.duration_s = 900.0;
        cfg.tiles.tiles_per_shard = 20;
        cfg.tiles.eval_tiles = 4;
        cfg.tiles.tile_size = 16;
        run(&cfg).unwrap()
    }

    #[test]
    fn artifacts_round_trip_and_verify() {
        let result = small_run();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_artifacts(&result, dir.path()).unwrap();
        assert!(paths.events_path.exists());
        assert!(paths.timeseries_path.exists());
        assert!(paths.summary_path.exists());

        let events = read_events(&paths.events_path).unwrap();
        assert_eq!(events, result.events);
        let summary = read_summary(&paths.summary_path).unwrap();
        assert_eq!(summary, result.summary);

        verify_dir(dir.path()).unwrap();
    }

    #[test]
    fn verify_catches_tampering() {
        let result = small_run();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_artifacts(&result, dir.path()).unwrap();

        // Drop the last event line.
        let text = std::fs::read_to_string(&paths.events_path).unwrap();
        let truncated: Vec<&str> = text.lines().collect();
        std::fs::write(
            &paths.events_path,
            truncated[..truncated.len() - 1].join("\n") + "\n",
        )
        .unwrap();
        assert!(matches!(
            verify_dir(dir.path()),
            Err(SimError::VerifyMismatch(_))
        ));
    }

    #[test]
    fn verify_reports_missing_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            verify_dir(dir.path()),
            Err(SimError::MissingArtifact(_))
        ));
    }

    #[test]
    fn csv_schema_is_stable_and_parseable() {
        let result = small_run();
        let csv = events_to_csv(&result.events);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        for (line, ev) in lines.zip(&result.events) {
            let (t, sat_id, activity, soc, temp, loss) = parse_csv_row(line).unwrap();
            assert_eq!(t, ev.t);
            assert_eq!(sat_id, ev.sat_id);
            assert_eq!(activity, ev.activity.name());
            assert_eq!(soc, ev.soc);
            assert_eq!(temp, ev.temperature_c);
            assert_eq!(loss, ev.train_loss);
        }
    }
}
