//! Time-grid engine with Brownian-bridge crossing correction.
//!
//! Independent of the first-passage machinery of the event engine, so it
//! serves as an oracle for it. Boundary jumps are applied at step ends.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::field::Particle;
use crate::rng::RngStream;
use crate::model::{AbsorptionEvent, BoundaryMode, BoundaryState, JumpScan, SystemParams, Trajectory, scan_jump};

use super::{coverage_target, finish, particle_rng, EngineError, Frontier, RunOptions, PURPOSE_GRID_STEP};

const LOOKAHEAD_SIZES: f64 = 32.0;

/// A particle with its own increment stream, consumed step after step.
struct Walker {
    p: Particle,
    rng: RngStream,
}

fn walkers(ps: impl Iterator<Item = Particle>, seed: u64) -> impl Iterator<Item = Walker> {
    ps.map(move |p| Walker { p, rng: particle_rng(seed, p.id, 0, PURPOSE_GRID_STEP) })
}

fn sort_walkers(ws: &mut [Walker]) {
    ws.sort_by(|a, b| a.p.pos.total_cmp(&b.p.pos).then(a.p.id.cmp(&b.p.id)));
}
/// Crossing exponents beyond this are treated as no crossing.
const BRIDGE_EXPONENT_CUTOFF: f64 = 50.0;

pub fn run_grid(params: &SystemParams, opts: &RunOptions) -> Result<Trajectory, EngineError> {
    params.validate()?;
    let (seed, delta, v, horizon, h) = (params.seed, params.delta, params.drift, params.horizon, params.grid_step);
    let moving = params.boundary_mode == BoundaryMode::Moving;
    let cap = params.effective_cap().expect("validated");
    let lookahead = LOOKAHEAD_SIZES * delta;
    let grid: Vec<f64> = opts.output_grid.iter().copied().filter(|&t| t <= horizon).collect();
    let steps = (horizon / h).ceil() as u64;

    let mut front = Frontier::new(params)?;
    let mut state = BoundaryState::new(delta, params.boundary_mode);
    let born = front.ensure(lookahead, 0.0, 0.0)?;
    let mut active: Vec<Walker> = walkers(front.materialize(born, seed, 0.0, 0.0, 0), seed).collect();
    let mut samples = Vec::with_capacity(grid.len());
    let mut gi = 0;
    let mut exploded = false;
    let mut stopped = false;
    let mut hitters: Vec<Particle> = Vec::new();
    let mut t1 = 0.0;

    for n in 0..steps {
        let t0 = n as f64 * h;
        t1 = ((n + 1) as f64 * h).min(horizon);
        let dt = t1 - t0;
        if moving {
            let born = front.ensure(state.xi + lookahead, state.xi, t0)?;
            active.extend(walkers(front.materialize(born, seed, state.xi, t0, n), seed));
        }

        let xi = state.xi;
        let sd = dt.sqrt();
        hitters.clear();
        active.retain_mut(|w| {
            let (p, rng) = (&mut w.p, &mut w.rng);
            let z: f64 = rng.sample(StandardNormal);
            let x1 = p.pos - v * dt + sd * z;
            let gap0 = p.pos - xi;
            let gap1 = x1 - xi;
            let hit = gap1 <= 0.0 || {
                let e = 2.0 * gap0 * gap1 / dt;
                e <= BRIDGE_EXPONENT_CUTOFF && rng.random::<f64>() < (-e).exp()
            };
            if hit {
                hitters.push(*p);
            } else {
                p.pos = x1;
            }
            !hit
        });

        while gi < grid.len() && grid[gi] < t1 {
            samples.push(state.sample(grid[gi]));
            gi += 1;
        }
        if hitters.is_empty() {
            continue;
        }
        hitters.sort_unstable_by_key(|p| p.id);
        if !moving {
            for p in &hitters {
                if state.n_absorbed >= cap {
                    exploded = true;
                    break;
                }
                state.advance(&AbsorptionEvent { t: t1, k: 1, hitter_origin: p.origin, swallowed_origins: &[] });
            }
        } else {
            sort_walkers(&mut active);
            for p in &hitters {
                        let outcome = loop {
                    let budget = cap - state.n_absorbed;
                    match scan_jump(state.xi, delta, active.len(), |i| active[i].p.pos, front.covered_to(), budget) {
                        JumpScan::NeedCoverage(level) => {
                            let born = front.ensure(coverage_target(level, state.xi, lookahead, budget, delta), state.xi, t1)?;
                            active.extend(walkers(front.materialize(born, seed, state.xi, t1, n), seed));
                            sort_walkers(&mut active);
                                }
                        other => break other,
                    }
                };
                let JumpScan::Found { k, swallowed } = outcome else {
                    exploded = true;
                    break;
                };
                let eaten: Vec<f64> = active.drain(..swallowed).map(|q| q.p.origin).collect();
                state.advance(&AbsorptionEvent { t: t1, k, hitter_origin: p.origin, swallowed_origins: &eaten });
            }
        }
        if exploded {
            break;
        }
        if opts.stop_after_events.is_some_and(|m| state.jump_log.len() as u64 >= m) {
            stopped = true;
            break;
        }
    }

    if !exploded && !stopped {
        while gi < grid.len() {
            samples.push(state.sample(grid[gi]));
            gi += 1;
        }
    }
    state.check().map_err(EngineError::Invariant)?;
    let final_positions = (opts.record_final_positions && !exploded && !stopped)
        .then(|| active.iter().map(|w| (w.p.origin, w.p.pos)).collect());

    finish(Trajectory {
        params: params.clone(),
        samples,
        truncation_bound: front.bound(state.xi)?,
        jump_log: state.jump_log,
        exploded,
        explosion_time: exploded.then_some(t1),
        final_positions,
    })
}

/// One frozen-boundary replica on the grid engine: hits by the horizon `L`
/// and survivors left of `d·√T` at the horizon `K₀`.
pub fn run_frozen(params: &SystemParams, d: f64) -> Result<(u64, u64), EngineError> {
    let p = params.clone().with_mode(BoundaryMode::Frozen);
    let opts = RunOptions { output_grid: vec![p.horizon], stop_after_events: None, record_final_positions: true };
    let traj = run_grid(&p, &opts)?;
    let window = d * p.horizon.sqrt();
    let k0 = traj.final_positions.as_ref().map_or(0, |fp| fp.iter().filter(|&&(_, x)| x < window).count());
    Ok((traj.final_n(), k0 as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EngineKind;

    fn grid_params(lambda: f64, v: f64, t: f64, h: f64) -> SystemParams {
        SystemParams::new(lambda, 1.0, v, t).with_engine(EngineKind::Grid).with_grid_step(h)
    }

    #[test]
    fn deterministic_and_consistent() {
        let p = grid_params(0.5, 1.0, 10.0, 1e-2).with_seed(4);
        let o = RunOptions::for_params(&p);
        let a = run_grid(&p, &o).unwrap();
        assert_eq!(a, run_grid(&p, &o).unwrap());
        assert!(a.check_invariants().is_ok());
        assert_eq!(a.samples.len(), 64);
    }

    #[test]
    fn bridge_correction_makes_coarse_steps_exact() {
        // frozen, v = 0: mean hits at T is λ√(2T/π) even with a coarse step
        let p = grid_params(1.0, 0.0, 4.0, 0.25).with_mode(BoundaryMode::Frozen);
        let xs: Vec<f64> = (0..2000)
            .map(|i| run_frozen(&crate::engine::replica_params(&p.clone().with_seed(21), i), 1.0).unwrap().0 as f64)
            .collect();
        let m = crate::stats::mean_estimate(&xs, 0.95);
        let target = crate::analytic::mean_fixed_hits(1.0, 4.0).unwrap();
        assert!((m.mean - target).abs() < 4.0 * m.stderr, "{} vs {target}", m.mean);
    }

    #[test]
    fn frozen_window_zero_is_empty() {
        let p = grid_params(1.0, 0.0, 1.0, 1e-2).with_seed(8);
        assert_eq!(run_frozen(&p, 1e-12).unwrap().1, 0);
    }
}
