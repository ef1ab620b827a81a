//! `simulate` and `sweep`.

use std::path::PathBuf;

use accrete_core::engine::{log_grid, run, run_replicas, RunOptions};
use accrete_core::model::{BoundaryMode, SystemParams};
use accrete_core::rng::replica_seed;
use accrete_core::stats::{estimate_speed, estimate_sqrt_ratio, explosion_frequency, mean_estimate, ReplicaSet};
use accrete_core::Trajectory;
use serde::Serialize;

use crate::config::{pool, RunConfig};
use crate::error::CliError;
use crate::output::{self, AGGREGATE_SCHEMA, META_SCHEMA, REPLICAS_SCHEMA};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Share of replicas that must succeed before a sweep aggregates.
pub const MIN_SUCCESS_FRACTION: f64 = 0.9;

/// Confidence level of sweep aggregates.
pub const SWEEP_LEVEL: f64 = 0.95;

fn options(cfg: &RunConfig) -> RunOptions {
    RunOptions { output_grid: log_grid(cfg.params.horizon, cfg.grid_points), stop_after_events: None, record_final_positions: false }
}

#[derive(Debug, Serialize)]
pub struct Meta<'a> {
    pub schema: &'static str,
    pub command: &'static str,
    pub config_hash: &'a str,
    pub code_version: &'static str,
    pub params: &'a SystemParams,
    pub engine: String,
    pub seed: u64,
    pub truncation_bound: f64,
    pub exploded: bool,
    pub explosion_time: Option<f64>,
    pub events: usize,
    pub final_n: u64,
    pub final_xi: f64,
}

/// Paths written by a command.
#[derive(Debug, Clone)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

fn persist_config(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let path = cfg.output_dir.join("config.toml");
    let text = toml::to_string(&cfg.to_file()).expect("config serializes");
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// One replica: trajectory.csv, events.csv, meta.json, config.toml, and
/// optionally events.ndjson.
pub fn simulate(cfg: &RunConfig) -> Result<(Trajectory, Written), CliError> {
    let hash = cfg.hash("simulate");
    let threads = cfg.worker_threads()?;
    let traj = pool(threads)?.install(|| run(&cfg.params, &options(cfg)))?;
    output::ensure_dir(&cfg.output_dir)?;
    let dir = &cfg.output_dir;
    let mut files = vec![dir.join("trajectory.csv"), dir.join("events.csv"), dir.join("meta.json")];
    output::write_trajectory(&files[0], &hash, &traj)?;
    output::write_events(&files[1], &hash, &traj)?;
    let final_n = traj.final_n();
    let meta = Meta {
        schema: META_SCHEMA,
        command: "simulate",
        config_hash: &hash,
        code_version: CODE_VERSION,
        params: &cfg.params,
        engine: cfg.params.engine_kind.to_string(),
        seed: cfg.params.seed,
        truncation_bound: traj.truncation_bound,
        exploded: traj.exploded,
        explosion_time: traj.explosion_time,
        events: traj.jump_log.len(),
        final_n,
        final_xi: match cfg.params.boundary_mode {
            BoundaryMode::Moving => cfg.params.delta * final_n as f64,
            BoundaryMode::Frozen => 0.0,
        },
    };
    output::write_json(&files[2], &meta)?;
    if cfg.ndjson {
        let p = dir.join("events.ndjson");
        output::write_events_ndjson(&p, &hash, &traj)?;
        files.push(p);
    }
    files.push(persist_config(cfg)?);
    Ok((traj, Written { files }))
}

#[derive(Debug, Clone, Serialize)]
struct ReplicaRow {
    replica: u64,
    seed: u64,
    status: &'static str,
    final_n: Option<u64>,
    xi_final: Option<f64>,
    first_event_time: Option<f64>,
    exploded: Option<bool>,
    truncation_bound: Option<f64>,
    error: String,
}

#[derive(Debug, Serialize)]
pub struct Aggregate {
    pub schema: &'static str,
    pub config_hash: String,
    pub code_version: &'static str,
    pub params: SystemParams,
    pub replicas: u64,
    pub succeeded: u64,
    pub failed: u64,
    pub level: f64,
    /// fewer than two usable replicas: intervals are undefined
    pub degenerate_ci: bool,
    pub final_n: accrete_core::stats::MeanEstimate,
    pub speed: Option<accrete_core::stats::SpeedEstimate>,
    pub sqrt_ratio_last: Option<accrete_core::stats::RatioPoint>,
    pub sqrt_lower_bound_exceeded: Option<bool>,
    pub explosion: accrete_core::stats::ExplosionEstimate,
    pub max_truncation_bound: f64,
}

/// `R` replicas: replicas.csv, aggregate.json and config.toml.
///
/// Failed replicas are listed with their error. The aggregate is computed
/// on the survivors, and only when at least 90% of the replicas succeeded.
pub fn sweep(cfg: &RunConfig) -> Result<(Aggregate, Written), CliError> {
    let hash = cfg.hash("sweep");
    let threads = cfg.worker_threads()?;
    let opts = options(cfg);
    let results = pool(threads)?.install(|| run_replicas(&cfg.params, cfg.replicas, &opts));
    output::ensure_dir(&cfg.output_dir)?;
    let dir = &cfg.output_dir;
    let rows = results.iter().enumerate().map(|(i, r)| {
        let seed = replica_seed(cfg.params.seed, i as u64);
        match r {
            Ok(t) => ReplicaRow {
                replica: i as u64,
                seed,
                status: "ok",
                final_n: Some(t.final_n()),
                xi_final: Some(t.xi_at(cfg.params.horizon)),
                first_event_time: t.first_event_time(),
                exploded: Some(t.exploded),
                truncation_bound: Some(t.truncation_bound),
                error: String::new(),
            },
            Err(e) => ReplicaRow {
                replica: i as u64,
                seed,
                status: "failed",
                final_n: None,
                xi_final: None,
                first_event_time: None,
                exploded: None,
                truncation_bound: None,
                error: e.to_string(),
            },
        }
    });
    let replicas_path = dir.join("replicas.csv");
    output::write_csv(&replicas_path, REPLICAS_SCHEMA, &hash, rows)?;
    let config_path = persist_config(cfg)?;

    let failures: Vec<(usize, String)> =
        results.iter().enumerate().filter_map(|(i, r)| r.as_ref().err().map(|e| (i, e.to_string()))).collect();
    for (i, e) in &failures {
        log::error!("replica {i} failed: {e}");
    }
    let succeeded = cfg.replicas - failures.len() as u64;
    if (succeeded as f64) < MIN_SUCCESS_FRACTION * cfg.replicas as f64 {
        return Err(CliError::Invariant(format!(
            "only {succeeded} of {} replicas succeeded (need {:.0}%); first error: {}",
            cfg.replicas,
            MIN_SUCCESS_FRACTION * 100.0,
            failures[0].1
        )));
    }

    let set = ReplicaSet::from_runs(
        cfg.params.clone(),
        SWEEP_LEVEL,
        results.into_iter().enumerate().filter_map(|(i, r)| r.ok().map(|t| (i as u64, t))),
    );
    let ns: Vec<f64> = set.iter().map(|(_, t)| t.final_n() as f64).collect();
    let p = &cfg.params;
    let moving = p.boundary_mode == BoundaryMode::Moving;
    let speed = if moving && p.is_subcritical() { Some(estimate_speed(&set).map_err(stats_err)?) } else { None };
    let ratio = if moving && p.is_subcritical() && p.drift == 0.0 {
        Some(estimate_sqrt_ratio(&set, &[p.horizon]).map_err(stats_err)?)
    } else {
        None
    };
    let aggregate = Aggregate {
        schema: AGGREGATE_SCHEMA,
        config_hash: hash,
        code_version: CODE_VERSION,
        params: p.clone(),
        replicas: cfg.replicas,
        succeeded,
        failed: failures.len() as u64,
        level: SWEEP_LEVEL,
        degenerate_ci: succeeded < 2,
        final_n: mean_estimate(&ns, SWEEP_LEVEL),
        speed,
        sqrt_ratio_last: ratio.as_ref().map(|r| r.points[0].clone()),
        sqrt_lower_bound_exceeded: ratio.as_ref().map(|r| r.lower_bound_exceeded),
        explosion: explosion_frequency(&set, SWEEP_LEVEL),
        max_truncation_bound: set.iter().map(|(_, t)| t.truncation_bound).fold(0.0, f64::max),
    };
    let aggregate_path = dir.join("aggregate.json");
    output::write_json(&aggregate_path, &aggregate)?;
    Ok((aggregate, Written { files: vec![replicas_path, aggregate_path, config_path] }))
}

fn stats_err(e: accrete_core::stats::StatsError) -> CliError {
    use accrete_core::stats::StatsError;
    match e {
        StatsError::SubcriticalExplosion { .. } => CliError::Invariant(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}
