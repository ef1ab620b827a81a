//! File writers. Every file opens with its schema version and the config
//! hash; all numbers use Rust's shortest round-trip formatting, so output is
//! locale-independent and byte-stable.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use accrete_core::Trajectory;
use serde::Serialize;

use crate::error::CliError;

pub const TRAJECTORY_SCHEMA: &str = "accrete.trajectory/1";
pub const EVENTS_SCHEMA: &str = "accrete.events/1";
pub const REPLICAS_SCHEMA: &str = "accrete.replicas/1";
pub const META_SCHEMA: &str = "accrete.meta/1";
pub const AGGREGATE_SCHEMA: &str = "accrete.aggregate/1";
pub const REPORT_SCHEMA: &str = "accrete.validate/1";

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes `# schema=… config_hash=…` followed by a headed CSV of `rows`.
pub fn write_csv<R: Serialize>(
    path: &Path,
    schema: &str,
    hash: &str,
    rows: impl IntoIterator<Item = R>,
) -> Result<(), CliError> {
    let mut out = create(path)?;
    writeln!(out, "# schema={schema} config_hash={hash}").map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io(path, e.into()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::io(path, e.into()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| CliError::io(path, e))
}

#[derive(Serialize)]
struct TrajectoryRow {
    t: f64,
    xi: f64,
    #[serde(rename = "N")]
    n: u64,
    n0: u64,
    n1: u64,
}

#[derive(Serialize)]
struct EventRow {
    j: usize,
    t: f64,
    k: u64,
    hitter_origin: f64,
}

fn event_rows(traj: &Trajectory) -> impl Iterator<Item = EventRow> + '_ {
    traj.jump_log
        .iter()
        .enumerate()
        .map(|(j, e)| EventRow { j: j + 1, t: e.t, k: e.k, hitter_origin: e.hitter_origin })
}

pub fn write_trajectory(path: &Path, hash: &str, traj: &Trajectory) -> Result<(), CliError> {
    let rows = traj.samples.iter().map(|s| TrajectoryRow { t: s.t, xi: s.xi, n: s.n, n0: s.n0, n1: s.n1 });
    write_csv(path, TRAJECTORY_SCHEMA, hash, rows)
}

pub fn write_events(path: &Path, hash: &str, traj: &Trajectory) -> Result<(), CliError> {
    write_csv(path, EVENTS_SCHEMA, hash, event_rows(traj))
}

/// One JSON object per line; the first line carries schema and hash.
pub fn write_events_ndjson(path: &Path, hash: &str, traj: &Trajectory) -> Result<(), CliError> {
    let mut out = create(path)?;
    let io = |e: std::io::Error| CliError::io(path, e);
    let header = serde_json::json!({ "schema": EVENTS_SCHEMA, "config_hash": hash });
    writeln!(out, "{header}").map_err(io)?;
    for row in event_rows(traj) {
        let line = serde_json::to_string(&row).expect("plain data serializes");
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}
