//! Exact event-driven engine.
//!
//! Between jumps the boundary is static, so the next hit is the minimum of
//! independent first-passage times to ξ. Everyone else is then redrawn at the
//! hit time conditioned on having stayed above ξ, which is exact because the
//! pre-event state is Markov.

use crate::field::Particle;
use crate::model::{AbsorptionEvent, BoundaryMode, BoundaryState, JumpScan, SystemParams, Trajectory, scan_jump};
use crate::sampling::{fpt_sample, survivor_endpoint_sample};

use super::{
    coverage_target, extend_sorted, finish, particle_rng, sort_by_pos, EngineError, Frontier, RunOptions, MAX_INDEX, PURPOSE_ENDPOINT, PURPOSE_FPT,
};

/// Lookahead kept materialized past ξ, in units of δ.
const LOOKAHEAD_SIZES: f64 = 32.0;

pub fn run_event_driven(params: &SystemParams, opts: &RunOptions) -> Result<Trajectory, EngineError> {
    params.validate()?;
    match params.boundary_mode {
        BoundaryMode::Moving => run_moving(params, opts),
        BoundaryMode::Frozen => run_frozen_boundary(params, opts),
    }
}

fn grid_within(opts: &RunOptions, horizon: f64) -> Vec<f64> {
    opts.output_grid.iter().copied().filter(|&t| t <= horizon).collect()
}

fn run_moving(params: &SystemParams, opts: &RunOptions) -> Result<Trajectory, EngineError> {
    let (seed, delta, v, horizon) = (params.seed, params.delta, params.drift, params.horizon);
    let cap = params.effective_cap().expect("validated");
    let lookahead = LOOKAHEAD_SIZES * delta;
    let grid = grid_within(opts, horizon);
    let mut gi = 0;

    let mut front = Frontier::new(params)?;
    let mut state = BoundaryState::new(delta, BoundaryMode::Moving);
    let mut samples = Vec::with_capacity(grid.len());
    let born = front.ensure(lookahead, 0.0, 0.0)?;
    let mut active: Vec<Particle> = front.materialize(born, seed, 0.0, 0.0, 0).collect();
    let mut clock = 0.0;
    let mut exploded = false;
    let mut event: u64 = 0;

    loop {
        let born = front.ensure(state.xi + lookahead, state.xi, clock)?;
        extend_sorted(&mut active, front.materialize(born, seed, state.xi, clock, event));

        let mut best: Option<usize> = None;
        let mut wait = f64::INFINITY;
        for (i, p) in active.iter().enumerate() {
            let mut rng = particle_rng(seed, p.id, event, PURPOSE_FPT);
            let tau = fpt_sample(p.pos - state.xi, v, &mut rng);
            let better = match best {
                None => true,
                Some(b) => tau < wait || (tau == wait && p.id < active[b].id),
            };
            if better {
                if best.is_some() && tau == wait {
                    log::warn!("simultaneous first-passage times; lower id wins");
                }
                best = Some(i);
                wait = tau;
            }
        }
        let t_hit = clock + wait;
        while gi < grid.len() && grid[gi] < t_hit {
            samples.push(state.sample(grid[gi]));
            gi += 1;
        }
        let Some(hit) = best.filter(|_| t_hit <= horizon) else {
            break;
        };
        if event + 1 >= MAX_INDEX {
            return Err(EngineError::Invariant(format!("event count exceeds {MAX_INDEX}")));
        }

        let hitter = active.remove(hit);
        for p in active.iter_mut() {
            let mut rng = particle_rng(seed, p.id, event, PURPOSE_ENDPOINT);
            p.pos = survivor_endpoint_sample(p.pos, state.xi, wait, v, &mut rng);
        }
        sort_by_pos(&mut active);
        clock = t_hit;

        let (k, swallowed) = loop {
            let budget = cap - state.n_absorbed;
            match scan_jump(state.xi, delta, active.len(), |i| active[i].pos, front.covered_to(), budget) {
                JumpScan::Found { k, swallowed } => break (k, swallowed),
                JumpScan::NeedCoverage(level) => {
                    let born = front.ensure(coverage_target(level, state.xi, lookahead, budget, delta), state.xi, clock)?;
                    extend_sorted(&mut active, front.materialize(born, seed, state.xi, clock, event));
                }
                JumpScan::ExceedsCap => {
                    exploded = true;
                    break (0, 0);
                }
            }
        };
        if exploded {
            break;
        }
        let eaten: Vec<f64> = active.drain(..swallowed).map(|p| p.origin).collect();
        state.advance(&AbsorptionEvent { t: clock, k, hitter_origin: hitter.origin, swallowed_origins: &eaten });
        event += 1;
        if opts.stop_after_events.is_some_and(|m| event >= m) {
            break;
        }
    }

    if !exploded && opts.stop_after_events.is_none_or(|m| event < m) {
        while gi < grid.len() {
            samples.push(state.sample(grid[gi]));
            gi += 1;
        }
    }
    state.check().map_err(EngineError::Invariant)?;

    let final_positions = (opts.record_final_positions && !exploded).then(|| {
        let dt = horizon - clock;
        active
            .iter()
            .map(|p| {
                let pos = if dt > 0.0 {
                    let mut rng = particle_rng(seed, p.id, event, PURPOSE_ENDPOINT);
                    survivor_endpoint_sample(p.pos, state.xi, dt, v, &mut rng)
                } else {
                    p.pos
                };
                (p.origin, pos)
            })
            .collect()
    });

    finish(Trajectory {
        params: params.clone(),
        samples,
        truncation_bound: front.bound(state.xi)?,
        jump_log: state.jump_log,
        exploded,
        explosion_time: exploded.then_some(clock),
        final_positions,
    })
}

/// Fixed boundary at 0: every particle's first-passage time is drawn once.
fn run_frozen_boundary(params: &SystemParams, opts: &RunOptions) -> Result<Trajectory, EngineError> {
    let (seed, v, horizon) = (params.seed, params.drift, params.horizon);
    let grid = grid_within(opts, horizon);
    let mut front = Frontier::new(params)?;
    let born = front.ensure(LOOKAHEAD_SIZES * params.delta, 0.0, 0.0)?;
    let particles: Vec<Particle> = front.materialize(born, seed, 0.0, 0.0, 0).collect();

    let mut hits = Vec::new();
    let mut survivors = Vec::new();
    for p in &particles {
        let mut rng = particle_rng(seed, p.id, 0, PURPOSE_FPT);
        let tau = fpt_sample(p.pos, v, &mut rng);
        if tau <= horizon {
            hits.push((tau, p.id, p.origin));
        } else {
            survivors.push(*p);
        }
    }
    hits.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if let Some(m) = opts.stop_after_events {
        hits.truncate(m as usize);
    }
    let cap = params.effective_cap().expect("validated");
    let exploded = hits.len() as u64 > cap;
    if exploded {
        hits.truncate(cap as usize);
    }

    let mut state = BoundaryState::new(params.delta, BoundaryMode::Frozen);
    let mut samples = Vec::with_capacity(grid.len());
    let mut gi = 0;
    for &(t, _, origin) in &hits {
        while gi < grid.len() && grid[gi] < t {
            samples.push(state.sample(grid[gi]));
            gi += 1;
        }
        state.advance(&AbsorptionEvent { t, k: 1, hitter_origin: origin, swallowed_origins: &[] });
    }
    if !exploded && opts.stop_after_events.is_none() {
        while gi < grid.len() {
            samples.push(state.sample(grid[gi]));
            gi += 1;
        }
    }

    let final_positions = opts.record_final_positions.then(|| {
        survivors
            .iter()
            .map(|p| {
                let mut rng = particle_rng(seed, p.id, 0, PURPOSE_ENDPOINT);
                (p.origin, survivor_endpoint_sample(p.pos, 0.0, horizon, v, &mut rng))
            })
            .collect()
    });

    finish(Trajectory {
        params: params.clone(),
        samples,
        truncation_bound: front.bound(0.0)?,
        jump_log: state.jump_log,
        exploded,
        explosion_time: exploded.then(|| hits.last().map_or(0.0, |h| h.0)),
        final_positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_replicas;

    fn opts(p: &SystemParams) -> RunOptions {
        RunOptions::for_params(p)
    }

    #[test]
    fn deterministic_for_a_seed() {
        let p = SystemParams::new(0.5, 1.0, 1.0, 30.0).with_seed(9);
        let a = run_event_driven(&p, &opts(&p)).unwrap();
        let b = run_event_driven(&p, &opts(&p)).unwrap();
        assert_eq!(a, b);
        assert!(!a.jump_log.is_empty());
        assert!(a.truncation_bound < 1e-6);
    }

    #[test]
    fn ledger_holds_and_samples_cover_grid() {
        let p = SystemParams::new(0.7, 1.0, 0.5, 40.0).with_seed(3);
        let t = run_event_driven(&p, &opts(&p)).unwrap();
        assert_eq!(t.samples.len(), 64);
        assert!(t.check_invariants().is_ok());
        let last = t.samples.last().unwrap();
        assert_eq!(last.n, t.final_n());
        assert_eq!(last.xi, p.delta * t.final_n() as f64);
    }

    #[test]
    fn stop_after_first_event() {
        let p = SystemParams::new(1.0, 1.0, 0.0, 100.0).with_seed(5).with_cap(1_000_000);
        let o = RunOptions { stop_after_events: Some(1), ..opts(&p) };
        let t = run_event_driven(&p, &o).unwrap();
        assert_eq!(t.jump_log.len(), 1);
    }

    #[test]
    fn first_jump_into_empty_window_is_one() {
        // density so low that (0, δ] is almost surely empty at the first hit
        let p = SystemParams::new(1e-3, 1.0, 1.0, 1e4).with_seed(1);
        let o = RunOptions { stop_after_events: Some(1), ..opts(&p) };
        let t = run_event_driven(&p, &o).unwrap();
        assert_eq!(t.jump_log[0].k, 1);
    }

    #[test]
    fn supercritical_needs_cap_and_can_explode() {
        let p = SystemParams::new(1.5, 1.0, 0.0, 50.0);
        assert!(run_event_driven(&p, &opts(&p)).is_err());
        let p = p.with_cap(2000);
        let runs = run_replicas(&p, 40, &opts(&p));
        let exploded = runs.iter().filter(|r| r.as_ref().unwrap().exploded).count();
        assert!(exploded > 0);
    }

    #[test]
    fn frozen_mean_matches_fixed_boundary_law() {
        let p = SystemParams::new(1.0, 1.0, 0.0, 9.0).with_mode(BoundaryMode::Frozen).with_seed(11);
        let runs = run_replicas(&p, 2000, &opts(&p));
        let xs: Vec<f64> = runs.iter().map(|r| r.as_ref().unwrap().final_n() as f64).collect();
        let m = crate::stats::mean_estimate(&xs, 0.95);
        let target = crate::analytic::mean_fixed_hits(1.0, 9.0).unwrap();
        assert!((m.mean - target).abs() < 4.0 * m.stderr, "{} vs {target}", m.mean);
    }

    #[test]
    fn final_positions_lie_above_boundary() {
        let p = SystemParams::new(0.5, 1.0, 1.0, 20.0).with_seed(2);
        let o = RunOptions { record_final_positions: true, ..opts(&p) };
        let t = run_event_driven(&p, &o).unwrap();
        let xi = t.xi_at(20.0);
        assert!(t.final_positions.unwrap().iter().all(|&(_, x)| x > xi));
    }
}
