//! Run configuration: a sectioned TOML file overlaid by command-line flags.
//!
//! ```toml
//! [system]
//! lambda = 0.5
//! delta = 1.0
//! drift = 1.0
//! horizon = 100.0
//! seed = 7
//!
//! [engine]
//! kind = "grid"
//! step = 1e-3
//!
//! [run]
//! replicas = 100
//! output_dir = "out"
//! ```

use std::path::{Path, PathBuf};

use accrete_core::model::{BoundaryMode, EngineKind, SystemParams};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "ACCRETE_THREADS";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub lambda: Option<f64>,
    pub delta: Option<f64>,
    pub drift: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub mode: Option<BoundaryMode>,
    pub explosion_cap: Option<u64>,
    pub trunc_epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub kind: Option<EngineKind>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub replicas: Option<u64>,
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub grid_points: Option<usize>,
    pub ndjson: Option<bool>,
}

/// The file form; every key is optional so files and flags overlay cleanly.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub run: RunSection,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),+) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )+
    };
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Keys set in `top` win.
    pub fn overlay(mut self, top: &ConfigFile) -> Self {
        overlay!(self.system, top.system, lambda, delta, drift, horizon, seed, mode, explosion_cap, trunc_epsilon);
        overlay!(self.engine, top.engine, kind, step);
        overlay!(self.run, top.run, replicas, threads, output_dir, grid_points, ndjson);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Event,
    Grid,
}

impl From<EngineArg> for EngineKind {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Event => EngineKind::Event,
            EngineArg::Grid => EngineKind::Grid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Moving,
    Frozen,
}

impl From<ModeArg> for BoundaryMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Moving => BoundaryMode::Moving,
            ModeArg::Frozen => BoundaryMode::Frozen,
        }
    }
}

/// Flags shared by `simulate` and `sweep`; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML config file with [system], [engine] and [run] sections
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub explosion_cap: Option<u64>,
    #[arg(long)]
    pub trunc_epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub engine: Option<EngineArg>,
    /// grid engine time step
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub replicas: Option<u64>,
    /// worker threads; defaults to $ACCRETE_THREADS, then the core count
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, short = 'o')]
    pub output_dir: Option<PathBuf>,
    /// number of log-spaced output times
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// also write the event log as NDJSON
    #[arg(long)]
    pub ndjson: bool,
}

impl RunArgs {
    fn as_overlay(&self) -> ConfigFile {
        ConfigFile {
            system: SystemSection {
                lambda: self.lambda,
                delta: self.delta,
                drift: self.drift,
                horizon: self.horizon,
                seed: self.seed,
                mode: self.mode.map(Into::into),
                explosion_cap: self.explosion_cap,
                trunc_epsilon: self.trunc_epsilon,
            },
            engine: EngineSection { kind: self.engine.map(Into::into), step: self.step },
            run: RunSection {
                replicas: self.replicas,
                threads: self.threads,
                output_dir: self.output_dir.clone(),
                grid_points: self.grid_points,
                ndjson: self.ndjson.then_some(true),
            },
        }
    }

    /// Config file (if any) overlaid by flags, then resolved.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        RunConfig::from_file(&base.overlay(&self.as_overlay()), self.config.as_deref())
    }
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: SystemParams,
    pub replicas: u64,
    pub threads: Option<usize>,
    pub output_dir: PathBuf,
    pub grid_points: usize,
    pub ndjson: bool,
}

/// The part of a configuration that determines output contents.
#[derive(Serialize)]
struct HashInput<'a> {
    command: &'a str,
    params: &'a SystemParams,
    grid_points: usize,
    replicas: Option<u64>,
}

impl RunConfig {
    pub fn from_file(file: &ConfigFile, origin: Option<&Path>) -> Result<Self, CliError> {
        let missing = |key: &str| match origin {
            Some(p) => CliError::Config { path: p.to_path_buf(), message: format!("missing [system] {key} (or --{key})") },
            None => CliError::Usage(format!("missing required --{key}")),
        };
        let s = &file.system;
        let mut params = SystemParams::new(
            s.lambda.ok_or_else(|| missing("lambda"))?,
            s.delta.ok_or_else(|| missing("delta"))?,
            s.drift.ok_or_else(|| missing("drift"))?,
            s.horizon.ok_or_else(|| missing("horizon"))?,
        )
        .with_seed(s.seed.unwrap_or(0))
        .with_mode(s.mode.unwrap_or_default())
        .with_engine(file.engine.kind.unwrap_or_default());
        if let Some(h) = file.engine.step {
            params = params.with_grid_step(h);
        }
        if let Some(c) = s.explosion_cap {
            params = params.with_cap(c);
        }
        if let Some(e) = s.trunc_epsilon {
            params.trunc_epsilon = e;
        }
        params.validate()?;
        let cfg = RunConfig {
            params,
            replicas: file.run.replicas.unwrap_or(1),
            threads: file.run.threads,
            output_dir: file.run.output_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
            grid_points: file.run.grid_points.unwrap_or(accrete_core::engine::DEFAULT_GRID_POINTS),
            ndjson: file.run.ndjson.unwrap_or(false),
        };
        if cfg.replicas == 0 {
            return Err(CliError::Usage("replicas must be at least 1".into()));
        }
        if cfg.threads == Some(0) {
            return Err(CliError::Usage("threads must be at least 1".into()));
        }
        Ok(cfg)
    }

    /// The file form of this configuration; loading it back gives `self`.
    pub fn to_file(&self) -> ConfigFile {
        let p = &self.params;
        ConfigFile {
            system: SystemSection {
                lambda: Some(p.lambda),
                delta: Some(p.delta),
                drift: Some(p.drift),
                horizon: Some(p.horizon),
                seed: Some(p.seed),
                mode: Some(p.boundary_mode),
                explosion_cap: p.explosion_cap,
                trunc_epsilon: Some(p.trunc_epsilon),
            },
            engine: EngineSection { kind: Some(p.engine_kind), step: Some(p.grid_step) },
            run: RunSection {
                replicas: Some(self.replicas),
                threads: self.threads,
                output_dir: Some(self.output_dir.clone()),
                grid_points: Some(self.grid_points),
                ndjson: Some(self.ndjson),
            },
        }
    }

    /// SHA-256 over everything that determines the outputs of `command`.
    /// Thread count, output directory and the NDJSON switch are excluded.
    pub fn hash(&self, command: &str) -> String {
        let input = HashInput {
            command,
            params: &self.params,
            grid_points: self.grid_points,
            replicas: (command != "simulate").then_some(self.replicas),
        };
        let bytes = serde_json::to_vec(&input).expect("plain data serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Worker count: explicit setting, then `$ACCRETE_THREADS`, then the core count.
    pub fn worker_threads(&self) -> Result<usize, CliError> {
        resolve_threads(self.threads)
    }
}

pub fn resolve_threads(explicit: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = explicit {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("{THREADS_ENV}={s:?} is not a positive integer"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// A rayon pool with `threads` workers.
pub fn pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} worker threads: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> RunArgs {
        RunArgs { lambda: Some(0.5), delta: Some(1.0), drift: Some(1.0), horizon: Some(10.0), ..Default::default() }
    }

    #[test]
    fn flags_override_file() {
        let file: ConfigFile = toml::from_str("[system]\nlambda = 0.3\nseed = 4\n[run]\nreplicas = 9\n").unwrap();
        let merged = file.overlay(&args().as_overlay());
        let cfg = RunConfig::from_file(&merged, None).unwrap();
        assert_eq!(cfg.params.lambda, 0.5);
        assert_eq!(cfg.params.seed, 4);
        assert_eq!(cfg.replicas, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ConfigFile>("[system]\nlamda = 0.3\n").is_err());
    }

    #[test]
    fn file_round_trip() {
        let cfg = args().resolve().unwrap();
        let text = toml::to_string(&cfg.to_file()).unwrap();
        let back: ConfigFile = toml::from_str(&text).unwrap();
        assert_eq!(RunConfig::from_file(&back, None).unwrap(), cfg);
    }

    #[test]
    fn hash_ignores_threads_and_output() {
        let a = args().resolve().unwrap();
        let mut b = a.clone();
        b.threads = Some(8);
        b.output_dir = PathBuf::from("/elsewhere");
        assert_eq!(a.hash("sweep"), b.hash("sweep"));
        b.params.seed = 1;
        assert_ne!(a.hash("sweep"), b.hash("sweep"));
        assert_ne!(a.hash("sweep"), a.hash("simulate"));
    }

    #[test]
    fn missing_key_is_named() {
        let e = RunArgs { lambda: None, ..args() }.resolve().unwrap_err();
        assert!(e.to_string().contains("lambda"));
    }

    #[test]
    fn supercritical_refused() {
        let e = RunArgs { lambda: Some(2.0), ..args() }.resolve().unwrap_err();
        assert!(e.to_string().contains("λδ"));
    }
}
