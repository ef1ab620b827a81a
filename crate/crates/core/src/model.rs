//! Parameters, the boundary ledger and the k-recurrence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on cumulative absorptions for subcritical runs.
pub const DEFAULT_EXPLOSION_CAP: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter {name}: {reason}")]
    Invalid { name: &'static str, reason: String },
    #[error("λδ = {load} ≥ 1 (supercritical): an explosion cap is required")]
    SupercriticalWithoutCap { load: f64 },
    #[error("λδ = {load} ≥ 1: the fixed-point recursion diverges")]
    Diverges { load: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    #[default]
    Event,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    #[default]
    Moving,
    Frozen,
}

impl std::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EngineKind::Event => "event",
            EngineKind::Grid => "grid",
        })
    }
}

impl std::fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundaryMode::Moving => "moving",
            BoundaryMode::Frozen => "frozen",
        })
    }
}

/// Everything that determines a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub lambda: f64,
    pub delta: f64,
    pub drift: f64,
    pub horizon: f64,
    /// bound on expected hits missed through truncating the field
    pub trunc_epsilon: f64,
    pub seed: u64,
    pub engine_kind: EngineKind,
    pub grid_step: f64,
    pub boundary_mode: BoundaryMode,
    /// max cumulative absorptions before the run is declared exploded
    pub explosion_cap: Option<u64>,
}

impl SystemParams {
    pub fn new(lambda: f64, delta: f64, drift: f64, horizon: f64) -> Self {
        SystemParams {
            lambda,
            delta,
            drift,
            horizon,
            trunc_epsilon: 1e-6,
            seed: 0,
            engine_kind: EngineKind::Event,
            grid_step: 1e-3,
            boundary_mode: BoundaryMode::Moving,
            explosion_cap: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_engine(mut self, kind: EngineKind) -> Self {
        self.engine_kind = kind;
        self
    }

    pub fn with_grid_step(mut self, h: f64) -> Self {
        self.grid_step = h;
        self
    }

    pub fn with_mode(mut self, mode: BoundaryMode) -> Self {
        self.boundary_mode = mode;
        self
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.explosion_cap = Some(cap);
        self
    }

    pub fn load(&self) -> f64 {
        self.lambda * self.delta
    }

    pub fn is_subcritical(&self) -> bool {
        self.load() < 1.0
    }

    /// The cap in force: the explicit one, else the default for runs that
    /// cannot explode (subcritical or frozen).
    pub fn effective_cap(&self) -> Option<u64> {
        match self.explosion_cap {
            Some(c) => Some(c),
            None if self.is_subcritical() || self.boundary_mode == BoundaryMode::Frozen => {
                Some(DEFAULT_EXPLOSION_CAP)
            }
            None => None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = |name: &'static str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(ModelError::Invalid { name, reason: format!("must be positive and finite, got {x}") })
            }
        };
        positive("lambda", self.lambda)?;
        positive("delta", self.delta)?;
        positive("horizon", self.horizon)?;
        positive("trunc_epsilon", self.trunc_epsilon)?;
        if !(self.drift >= 0.0 && self.drift.is_finite()) {
            return Err(ModelError::Invalid {
                name: "drift",
                reason: format!("must be nonnegative and finite, got {}", self.drift),
            });
        }
        if self.engine_kind == EngineKind::Grid {
            positive("grid_step", self.grid_step)?;
            let steps = (self.horizon / self.grid_step).ceil();
            if steps >= (1u64 << 30) as f64 {
                return Err(ModelError::Invalid {
                    name: "grid_step",
                    reason: format!("horizon/step = {steps:e} exceeds 2^30 steps"),
                });
            }
        }
        if self.explosion_cap == Some(0) {
            return Err(ModelError::Invalid { name: "explosion_cap", reason: "must be at least 1".into() });
        }
        if self.effective_cap().is_none() {
            return Err(ModelError::SupercriticalWithoutCap { load: self.load() });
        }
        Ok(())
    }
}

/// State of the ledger at one output time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub xi: f64,
    pub n: u64,
    pub n0: u64,
    pub n1: u64,
}

/// One boundary jump: a hit at time `t` that advanced the boundary by `k·δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub t: f64,
    pub k: u64,
    pub hitter_origin: f64,
}

/// An absorption event as handed to the ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionEvent<'a> {
    pub t: f64,
    pub k: u64,
    pub hitter_origin: f64,
    pub swallowed_origins: &'a [f64],
}

/// Boundary position, cumulative absorptions and the jump log.
///
/// Moving mode keeps `xi == delta * n_absorbed` exactly. Frozen mode counts
/// hits with `k = 1` and leaves `xi` at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryState {
    pub delta: f64,
    pub mode: BoundaryMode,
    pub xi: f64,
    pub n_absorbed: u64,
    pub jump_log: Vec<JumpRecord>,
    absorbed_origins: Vec<f64>,
}

impl BoundaryState {
    pub fn new(delta: f64, mode: BoundaryMode) -> Self {
        BoundaryState { delta, mode, xi: 0.0, n_absorbed: 0, jump_log: Vec::new(), absorbed_origins: Vec::new() }
    }

    pub fn last_event_time(&self) -> f64 {
        self.jump_log.last().map_or(0.0, |j| j.t)
    }

    /// Panics on a ledger violation; callers treat that as an internal fault.
    pub fn advance(&mut self, ev: &AbsorptionEvent<'_>) {
        assert!(ev.k >= 1, "jump size must be positive");
        assert!(ev.t >= self.last_event_time(), "events out of order: {} after {}", ev.t, self.last_event_time());
        assert_eq!(
            ev.swallowed_origins.len() as u64,
            ev.k - 1,
            "a jump of size k must swallow exactly k − 1 particles"
        );
        self.n_absorbed += ev.k;
        if self.mode == BoundaryMode::Moving {
            self.xi = self.delta * self.n_absorbed as f64;
        }
        self.jump_log.push(JumpRecord { t: ev.t, k: ev.k, hitter_origin: ev.hitter_origin });
        self.absorbed_origins.push(ev.hitter_origin);
        self.absorbed_origins.extend_from_slice(ev.swallowed_origins);
        debug_assert!(self.check().is_ok());
    }

    /// Verifies ξ = δN and N = Σk.
    pub fn check(&self) -> Result<(), String> {
        let sum: u64 = self.jump_log.iter().map(|j| j.k).sum();
        if sum != self.n_absorbed {
            return Err(format!("N = {} but Σk = {sum}", self.n_absorbed));
        }
        let expect = match self.mode {
            BoundaryMode::Moving => self.delta * self.n_absorbed as f64,
            BoundaryMode::Frozen => 0.0,
        };
        if self.xi != expect {
            return Err(format!("ξ = {} but δN = {expect}", self.xi));
        }
        if self.absorbed_origins.len() as u64 != self.n_absorbed {
            return Err("absorbed-origin count disagrees with N".into());
        }
        Ok(())
    }

    /// Splits N into n0 (origin ≤ ξ) and n1 (origin > ξ) at the current ξ.
    pub fn sample(&self, t: f64) -> Sample {
        let n0 = self.absorbed_origins.iter().filter(|&&x| x <= self.xi).count() as u64;
        Sample { t, xi: self.xi, n: self.n_absorbed, n0, n1: self.n_absorbed - n0 }
    }
}

/// Applies one absorption event to a ledger.
pub fn advance_bookkeeping(state: &mut BoundaryState, ev: &AbsorptionEvent<'_>) {
    state.advance(ev)
}

/// Time-indexed record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: SystemParams,
    pub samples: Vec<Sample>,
    pub jump_log: Vec<JumpRecord>,
    pub exploded: bool,
    pub explosion_time: Option<f64>,
    /// certified bound on expected hits lost to field truncation
    pub truncation_bound: f64,
    /// (origin, position) of survivors at the end, when requested
    pub final_positions: Option<Vec<(f64, f64)>>,
}

impl Trajectory {
    /// N(t) from the jump log; right-continuous.
    pub fn n_at(&self, t: f64) -> u64 {
        let end = self.jump_log.partition_point(|j| j.t <= t);
        self.jump_log[..end].iter().map(|j| j.k).sum()
    }

    pub fn xi_at(&self, t: f64) -> f64 {
        match self.params.boundary_mode {
            BoundaryMode::Moving => self.params.delta * self.n_at(t) as f64,
            BoundaryMode::Frozen => 0.0,
        }
    }

    pub fn first_event_time(&self) -> Option<f64> {
        self.jump_log.first().map(|j| j.t)
    }

    pub fn final_n(&self) -> u64 {
        self.jump_log.iter().map(|j| j.k).sum()
    }

    /// Checks ξ = δN (moving mode), N = n0 + n1 and monotonicity over the samples.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut prev: Option<&Sample> = None;
        for s in &self.samples {
            if s.n0 + s.n1 != s.n {
                return Err(format!("n0 + n1 ≠ N at t = {}", s.t));
            }
            if self.params.boundary_mode == BoundaryMode::Moving && s.xi != self.params.delta * s.n as f64 {
                return Err(format!("ξ ≠ δN at t = {}", s.t));
            }
            if let Some(p) = prev {
                if s.t < p.t || s.n < p.n || s.xi < p.xi {
                    return Err(format!("samples not monotone at t = {}", s.t));
                }
            }
            prev = Some(s);
        }
        if self.jump_log.windows(2).any(|w| w[1].t < w[0].t) {
            return Err("jump times decrease".into());
        }
        Ok(())
    }
}

/// k-recurrence on a finite survivor list (all entries `> xi`, sorted).
///
/// Returns the minimal k with |survivors ∩ (ξ, ξ + kδ]| ≤ k − 1 and the
/// swallowed particles, which number exactly k − 1.
pub fn jump_size(xi: f64, survivors: &[f64], delta: f64) -> (u64, Vec<f64>) {
    debug_assert!(survivors.windows(2).all(|w| w[0] <= w[1]));
    debug_assert!(survivors.iter().all(|&x| x > xi));
    match scan_jump(xi, delta, survivors.len(), |i| survivors[i], f64::INFINITY, u64::MAX) {
        JumpScan::Found { k, swallowed } => (k, survivors[..swallowed].to_vec()),
        _ => unreachable!("an infinite coverage never runs short"),
    }
}

/// Result of [`scan_jump`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpScan {
    /// jump of size k swallowing the first `swallowed` (= k − 1) survivors
    Found { k: u64, swallowed: usize },
    /// the scan needs exact positions up to this coordinate
    NeedCoverage(f64),
    /// the jump exceeds `max_k`
    ExceedsCap,
}

/// k-recurrence against a sorted position list that is known to be complete
/// only up to `covered_to`.
///
/// Whenever (ξ, ξ + kδ] holds j ≥ k particles, no k' ≤ j can satisfy the
/// rule, so the scan jumps straight to k = j + 1.
pub fn scan_jump<P: Fn(usize) -> f64>(
    xi: f64,
    delta: f64,
    len: usize,
    pos: P,
    covered_to: f64,
    max_k: u64,
) -> JumpScan {
    let mut k: u64 = 1;
    let mut j: usize = 0;
    loop {
        if k > max_k {
            return JumpScan::ExceedsCap;
        }
        let level = xi + k as f64 * delta;
        if level > covered_to {
            return JumpScan::NeedCoverage(level);
        }
        while j < len && pos(j) <= level {
            j += 1;
        }
        if (j as u64) < k {
            return JumpScan::Found { k, swallowed: j };
        }
        k = j as u64 + 1;
    }
}

/// The deterministic toy system: particles at λ⁻¹k moving left at speed v.
/// Returns the largest fixed point N of N = ⌊Nδλ⌋ + ⌊λvt⌋.
///
/// The recursion can have several fixed points (at λ = 0.5, δ = v = 1,
/// t = 100 both 99 and 100 solve it). Taking the largest matches the
/// closed-right-end convention of the k-recurrence: a particle landing
/// exactly on the boundary is absorbed.
pub fn toy_deterministic_n(params: &SystemParams, t: f64) -> Result<u64, ModelError> {
    let load = params.load();
    if load >= 1.0 {
        return Err(ModelError::Diverges { load });
    }
    if !(params.drift > 0.0) {
        return Err(ModelError::Invalid { name: "drift", reason: "the toy model needs v > 0".into() });
    }
    if t < 0.0 {
        return Err(ModelError::Invalid { name: "t", reason: "time must be nonnegative".into() });
    }
    let base = (params.lambda * params.drift * t).floor() as u64;
    // every fixed point is ≤ base/(1 − λδ); iterating the monotone map down
    // from there converges to the largest one
    let mut n = (base as f64 / (1.0 - load)).ceil() as u64;
    loop {
        let next = (n as f64 * load).floor() as u64 + base;
        if next == n {
            return Ok(n);
        }
        n = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_k(xi: f64, survivors: &[f64], delta: f64) -> u64 {
        (1u64..)
            .find(|&k| {
                let hi = xi + k as f64 * delta;
                survivors.iter().filter(|&&x| x > xi && x <= hi).count() as u64 <= k - 1
            })
            .unwrap()
    }

    #[test]
    fn jump_examples() {
        assert_eq!(jump_size(0.0, &[], 1.0), (1, vec![]));
        assert_eq!(jump_size(0.0, &[0.5, 1.5, 3.5], 1.0), (3, vec![0.5, 1.5]));
        assert_eq!(jump_size(2.0, &[10.0], 1.0), (1, vec![]));
    }

    #[test]
    fn closed_right_end_counts_inside() {
        // a particle exactly at ξ + δ is inside (ξ, ξ + δ]
        assert_eq!(jump_size(0.0, &[1.0], 1.0), (2, vec![1.0]));
        assert_eq!(jump_size(0.0, &[1.0 + 1e-12], 1.0), (1, vec![]));
    }

    #[test]
    fn scan_reports_coverage_and_cap() {
        let xs = [0.5, 1.5, 2.5, 3.5];
        assert_eq!(scan_jump(0.0, 1.0, 4, |i| xs[i], 2.0, 100), JumpScan::NeedCoverage(3.0));
        assert_eq!(scan_jump(0.0, 1.0, 4, |i| xs[i], 10.0, 3), JumpScan::ExceedsCap);
        assert_eq!(scan_jump(0.0, 1.0, 4, |i| xs[i], 10.0, 5), JumpScan::Found { k: 5, swallowed: 4 });
    }

    proptest! {
        #[test]
        fn jump_size_matches_brute_force(
            mut xs in prop::collection::vec(0.001f64..20.0, 0..40),
            delta in 0.1f64..3.0,
            xi in 0.0f64..0.001,
        ) {
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let (k, sw) = jump_size(xi, &xs, delta);
            prop_assert_eq!(k, brute_k(xi, &xs, delta));
            prop_assert_eq!(sw.len() as u64, k - 1);
            // minimality: every shorter window is overfull
            for j in 1..k {
                let hi = xi + j as f64 * delta;
                let c = xs.iter().filter(|&&x| x <= hi).count() as u64;
                prop_assert!(c >= j);
            }
        }

        #[test]
        fn ledger_identities(ks in prop::collection::vec(1u64..6, 0..30)) {
            let mut st = BoundaryState::new(0.7, BoundaryMode::Moving);
            let mut origin = 0.0;
            for (i, &k) in ks.iter().enumerate() {
                let sw: Vec<f64> = (1..k).map(|j| origin + j as f64).collect();
                origin += 0.9 * k as f64;
                st.advance(&AbsorptionEvent { t: i as f64, k, hitter_origin: origin, swallowed_origins: &sw });
                let s = st.sample(i as f64);
                prop_assert_eq!(s.n0 + s.n1, s.n);
                prop_assert_eq!(s.xi, 0.7 * s.n as f64);
            }
            prop_assert!(st.check().is_ok());
        }
    }

    #[test]
    fn ledger_examples() {
        let mut st = BoundaryState::new(1.0, BoundaryMode::Moving);
        st.advance(&AbsorptionEvent { t: 1.0, k: 2, hitter_origin: 0.3, swallowed_origins: &[1.2] });
        assert_eq!((st.n_absorbed, st.xi), (2, 2.0));
        let mut st = BoundaryState::new(0.5, BoundaryMode::Moving);
        st.advance(&AbsorptionEvent { t: 1.0, k: 1, hitter_origin: 0.2, swallowed_origins: &[] });
        st.advance(&AbsorptionEvent { t: 2.0, k: 3, hitter_origin: 0.9, swallowed_origins: &[1.0, 1.4] });
        assert_eq!((st.n_absorbed, st.xi), (4, 2.0));
        let s = st.sample(2.0);
        // origins 0.2, 0.9, 1.0, 1.4 all lie at or below ξ = 2
        assert_eq!((s.n0, s.n1), (4, 0));
    }

    #[test]
    #[should_panic(expected = "exactly k − 1")]
    fn ledger_rejects_wrong_swallow_count() {
        let mut st = BoundaryState::new(1.0, BoundaryMode::Moving);
        st.advance(&AbsorptionEvent { t: 1.0, k: 3, hitter_origin: 0.3, swallowed_origins: &[1.2] });
    }

    #[test]
    fn frozen_ledger_keeps_xi_at_zero() {
        let mut st = BoundaryState::new(1.0, BoundaryMode::Frozen);
        st.advance(&AbsorptionEvent { t: 1.0, k: 1, hitter_origin: 0.3, swallowed_origins: &[] });
        assert_eq!((st.n_absorbed, st.xi), (1, 0.0));
        assert!(st.check().is_ok());
    }

    #[test]
    fn toy_model_values() {
        let p = SystemParams::new(0.5, 1.0, 1.0, 1.0);
        assert_eq!(toy_deterministic_n(&p, 100.0).unwrap(), 100);
        // 99 is a smaller fixed point of the same recursion
        assert_eq!((99.0f64 * 0.5).floor() as u64 + 50, 99);
        assert_eq!(toy_deterministic_n(&p, 0.0).unwrap(), 0);
        let v = crate::analytic::asymptotic_speed(0.5, 1.0, 1.0).unwrap();
        for t in [1e2, 1e3, 1e4] {
            let n = toy_deterministic_n(&p, t).unwrap() as f64;
            assert!((n / t - v).abs() < 2.0 / t / (1.0 - 0.5), "t={t}");
        }
        let p = SystemParams::new(0.9, 1.0, 2.0, 1.0);
        let slope = (toy_deterministic_n(&p, 2e4).unwrap() - toy_deterministic_n(&p, 1e4).unwrap()) as f64 / 1e4;
        assert!((slope - 18.0).abs() < 0.01, "{slope}");
        assert!(toy_deterministic_n(&SystemParams::new(1.0, 1.0, 1.0, 1.0), 5.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(SystemParams::new(0.5, 1.0, 1.0, 10.0).validate().is_ok());
        assert!(matches!(
            SystemParams::new(2.0, 1.0, 0.0, 10.0).validate(),
            Err(ModelError::SupercriticalWithoutCap { .. })
        ));
        assert!(SystemParams::new(2.0, 1.0, 0.0, 10.0).with_cap(1000).validate().is_ok());
        assert!(SystemParams::new(-1.0, 1.0, 0.0, 10.0).validate().is_err());
        assert!(SystemParams::new(0.5, 1.0, -1.0, 10.0).validate().is_err());
        assert_eq!(SystemParams::new(0.5, 1.0, 0.0, 1.0).effective_cap(), Some(DEFAULT_EXPLOSION_CAP));
    }
}
