//! Engine behaviour seen through the public API.

use accrete_core::engine::{log_grid, run_replicas, RunOptions};
use accrete_core::model::{BoundaryMode, EngineKind};
use accrete_core::stats::{ks_two_sample, mean_estimate};
use accrete_core::{run, SystemParams};

fn opts(p: &SystemParams) -> RunOptions {
    RunOptions::for_params(p)
}

#[test]
fn replicas_do_not_depend_on_pool_size() {
    let p = SystemParams::new(0.5, 1.0, 1.0, 30.0).with_seed(77);
    let o = opts(&p);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| run_replicas(&p, 12, &o));
    let b = four.install(|| run_replicas(&p, 12, &o));
    assert_eq!(a, b);
}

#[test]
fn ledger_invariants_hold_on_both_engines() {
    for kind in [EngineKind::Event, EngineKind::Grid] {
        let p = SystemParams::new(0.8, 1.0, 1.0, 20.0).with_seed(3).with_engine(kind).with_grid_step(1e-2);
        for r in run_replicas(&p, 10, &opts(&p)) {
            let t = r.unwrap();
            t.check_invariants().unwrap();
            let last = t.samples.last().unwrap();
            assert_eq!(last.xi, p.delta * last.n as f64);
            assert_eq!(last.n, t.final_n());
            assert!(t.jump_log.iter().all(|j| j.k >= 1));
            assert!(t.truncation_bound <= p.trunc_epsilon * 10.0);
        }
    }
}

#[test]
fn frozen_mode_never_moves() {
    let p = SystemParams::new(1.0, 1.0, 0.0, 4.0).with_seed(1).with_mode(BoundaryMode::Frozen);
    let t = run(&p, &opts(&p)).unwrap();
    assert!(t.samples.iter().all(|s| s.xi == 0.0));
    assert!(t.jump_log.iter().all(|j| j.k == 1));
}

#[test]
fn engines_agree_on_short_horizon() {
    let ev = SystemParams::new(0.5, 1.0, 1.0, 5.0).with_seed(10);
    let gr = ev.clone().with_engine(EngineKind::Grid).with_grid_step(1e-3).with_seed(11);
    let n = |p: &SystemParams| -> Vec<f64> {
        run_replicas(p, 300, &opts(p)).into_iter().map(|r| r.unwrap().final_n() as f64).collect()
    };
    let (a, b) = (n(&ev), n(&gr));
    assert!(ks_two_sample(&a, &b).p_value > 0.001);
    let (ma, mb) = (mean_estimate(&a, 0.95), mean_estimate(&b, 0.95));
    assert!((ma.mean - mb.mean).abs() < 4.0 * (ma.stderr.powi(2) + mb.stderr.powi(2)).sqrt());
}

#[test]
fn moving_boundary_outpaces_frozen_count() {
    let p = SystemParams::new(0.5, 1.0, 0.0, 50.0).with_seed(5);
    let f = p.clone().with_mode(BoundaryMode::Frozen).with_seed(6);
    let mean = |p: &SystemParams| {
        let xs: Vec<f64> = run_replicas(p, 200, &opts(p)).into_iter().map(|r| r.unwrap().final_n() as f64).collect();
        mean_estimate(&xs, 0.95).mean
    };
    assert!(mean(&p) > mean(&f));
}

#[test]
fn output_grid_is_respected() {
    let p = SystemParams::new(0.5, 1.0, 1.0, 10.0).with_seed(2);
    let o = RunOptions { output_grid: log_grid(10.0, 5), ..opts(&p) };
    let t = run(&p, &o).unwrap();
    let ts: Vec<f64> = t.samples.iter().map(|s| s.t).collect();
    assert_eq!(ts, log_grid(10.0, 5));
}
