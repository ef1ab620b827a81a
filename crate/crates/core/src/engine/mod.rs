//! Simulation engines for the accreting boundary.
//!
//! Both engines share the same field, frontier control and ledger; they
//! differ only in how particle motion between boundary jumps is realized.

mod event;
mod grid;

pub use event::run_event_driven;
pub use grid::{run_frozen, run_grid};

use rayon::prelude::*;
use thiserror::Error;

use crate::analytic::{truncation_tail_mass_closed, AnalyticError};
use crate::field::{Particle, ParticleField};
use crate::model::{EngineKind, ModelError, SystemParams, Trajectory};
use crate::rng::{replica_seed, RngStream};
use crate::sampling::survivor_endpoint_sample;

/// Substream purposes; the substream is `(index << 2) | purpose`.
pub const PURPOSE_FPT: u32 = 0;
pub const PURPOSE_ENDPOINT: u32 = 1;
pub const PURPOSE_MATERIALIZE: u32 = 2;
pub const PURPOSE_GRID_STEP: u32 = 3;

/// Event or step indices must fit in the 30 bits left above the purpose.
pub const MAX_INDEX: u64 = 1 << 30;

/// Default number of output times.
pub const DEFAULT_GRID_POINTS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Params(#[from] ModelError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("invariant breach: {0}")]
    Invariant(String),
}

/// What to record besides the ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// ascending output times; entries beyond the horizon are ignored
    pub output_grid: Vec<f64>,
    /// stop once this many events have been processed
    pub stop_after_events: Option<u64>,
    pub record_final_positions: bool,
}

impl RunOptions {
    pub fn for_params(params: &SystemParams) -> Self {
        RunOptions {
            output_grid: log_grid(params.horizon, DEFAULT_GRID_POINTS),
            stop_after_events: None,
            record_final_positions: false,
        }
    }
}

/// `points` log-spaced times T·10^{−3(1 − i/(points−1))}, ending at T.
pub fn log_grid(horizon: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![horizon],
        _ => (0..points)
            .map(|i| {
                if i + 1 == points {
                    horizon
                } else {
                    horizon * 10f64.powf(-3.0 * (1.0 - i as f64 / (points - 1) as f64))
                }
            })
            .collect(),
    }
}

pub(crate) fn particle_rng(seed: u64, id: u64, index: u64, purpose: u32) -> RngStream {
    debug_assert!(index < MAX_INDEX);
    RngStream::new(seed, id, ((index as u32) << 2) | purpose)
}

/// Frontier control and the running truncation bound.
///
/// The frontier F lives in origin coordinates. Positions are trusted only up
/// to `F − margin`: a particle born beyond F reaches that far down within the
/// horizon with probability bounded by the tail mass. Particles materialized
/// after time 0 are drawn conditioned on staying above the current ξ; the
/// mass of paths that would have reached ξ earlier is charged to the bound.
pub(crate) struct Frontier {
    field: ParticleField,
    margin: f64,
    lambda: f64,
    drift: f64,
    horizon: f64,
    charged: f64,
}

impl Frontier {
    pub(crate) fn new(params: &SystemParams) -> Result<Self, EngineError> {
        let (v, t) = (params.drift, params.horizon);
        let mut margin = v * t + 10.0 * t.sqrt();
        while truncation_tail_mass_closed(margin, 0.0, t, v, params.lambda)? >= params.trunc_epsilon {
            margin += t.sqrt();
        }
        Ok(Frontier {
            field: ParticleField::new(params.seed, params.lambda),
            margin,
            lambda: params.lambda,
            drift: v,
            horizon: t,
            charged: 0.0,
        })
    }

    fn mass(&self, frontier: f64, level: f64) -> Result<f64, EngineError> {
        if frontier <= level {
            return Ok(f64::INFINITY);
        }
        Ok(truncation_tail_mass_closed(frontier, level, self.horizon, self.drift, self.lambda)?)
    }

    /// Current coordinates below this are exact.
    pub(crate) fn covered_to(&self) -> f64 {
        self.field.frontier() - self.margin
    }

    /// Extends until `covered_to() ≥ level` and returns the new origins.
    pub(crate) fn ensure(&mut self, level: f64, xi: f64, t: f64) -> Result<Vec<(u64, f64)>, EngineError> {
        if self.covered_to() >= level {
            return Ok(Vec::new());
        }
        let old = self.field.frontier();
        let born = self.field.extend_to(level + self.margin);
        if t > 0.0 {
            self.charged += self.mass(old, xi)? - self.mass(self.field.frontier(), xi)?;
        }
        Ok(born)
    }

    /// Materializes origins at time `t` above barrier `xi`.
    pub(crate) fn materialize(
        &self,
        born: Vec<(u64, f64)>,
        seed: u64,
        xi: f64,
        t: f64,
        index: u64,
    ) -> impl Iterator<Item = Particle> + '_ {
        let v = self.drift;
        born.into_iter().map(move |(id, origin)| {
            let pos = if t > 0.0 {
                let mut rng = particle_rng(seed, id, index, PURPOSE_MATERIALIZE);
                survivor_endpoint_sample(origin, xi, t, v, &mut rng)
            } else {
                origin
            };
            Particle { id, origin, pos }
        })
    }

    /// Total bound on expected missed hits for a run ending at level `xi`.
    pub(crate) fn bound(&self, xi: f64) -> Result<f64, EngineError> {
        let f = self.field.frontier();
        Ok(self.charged + self.mass(f, xi)? + self.mass(f, self.covered_to())?)
    }
}

/// Where to extend coverage when a jump scan runs short at `level`: the
/// scanned span is doubled (so a huge jump costs a bounded number of
/// extensions) but never pushed past the level at which the cap trips.
pub(crate) fn coverage_target(level: f64, xi: f64, lookahead: f64, budget: u64, delta: f64) -> f64 {
    let grown = level + lookahead.max(level - xi);
    let cap_level = xi + (budget as f64 + 1.0) * delta;
    grown.min(cap_level).max(level)
}

fn by_pos(a: &Particle, b: &Particle) -> std::cmp::Ordering {
    a.pos.total_cmp(&b.pos).then(a.id.cmp(&b.id))
}

/// Stable run-merging sort: appending a sorted batch costs a linear merge.
pub(crate) fn sort_by_pos(ps: &mut [Particle]) {
    ps.sort_by(by_pos);
    if ps.windows(2).any(|w| w[0].pos == w[1].pos) {
        log::warn!("two particles share a position; ordering by id");
    }
}

/// Adds a batch to a sorted vector, keeping it sorted. The batch is sorted
/// on its own first so the final pass sees two runs.
pub(crate) fn extend_sorted(ps: &mut Vec<Particle>, batch: impl Iterator<Item = Particle>) {
    let start = ps.len();
    ps.extend(batch);
    if ps.len() == start {
        return;
    }
    ps[start..].sort_by(by_pos);
    if start > 0 && by_pos(&ps[start - 1], &ps[start]).is_gt() {
        sort_by_pos(ps);
    }
}

pub(crate) fn finish(traj: Trajectory) -> Result<Trajectory, EngineError> {
    traj.check_invariants().map_err(EngineError::Invariant)?;
    Ok(traj)
}

/// Runs one replica with the engine named in `params`.
pub fn run(params: &SystemParams, opts: &RunOptions) -> Result<Trajectory, EngineError> {
    match params.engine_kind {
        EngineKind::Event => run_event_driven(params, opts),
        EngineKind::Grid => run_grid(params, opts),
    }
}

/// Parameters of replica `index`: identical except for the derived seed.
pub fn replica_params(params: &SystemParams, index: u64) -> SystemParams {
    params.clone().with_seed(replica_seed(params.seed, index))
}

/// Runs `replicas` independent replicas on the current rayon pool.
/// Results come back in replica-index order whatever the scheduling.
pub fn run_replicas(
    params: &SystemParams,
    replicas: u64,
    opts: &RunOptions,
) -> Vec<Result<Trajectory, EngineError>> {
    (0..replicas)
        .into_par_iter()
        .map(|i| run(&replica_params(params, i), opts))
        .collect()
}
