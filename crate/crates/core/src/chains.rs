//! The integer chains that decide whether a single boundary jump is finite.
//!
//! The m-chain counts particles in successive probe intervals of a
//! homogeneous field: from m the next count is Poisson(m·λδ). The μ-chain is
//! the same walk over the field seen at the first hit time τ = t, whose
//! intensity near the boundary is thinned by ψ(t, ·).

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{integrate, survivor_rate, AnalyticError};
use crate::rng::RngStream;
use crate::sampling::poisson_field;

/// Default count at which a chain is declared escaped.
pub const DEFAULT_ESCAPE_THRESHOLD: u64 = 10_000;
/// ψ(t, y) is treated as 1 for y beyond this many √t.
pub const PSI_SATURATION: f64 = 8.0;
const SIGMA_HAT_TOL: f64 = 1e-10;

/// Poisson(mean) pmf on 0..=n with n large enough that the omitted tail is
/// below 1e-16.
pub fn poisson_pmf_vec(mean: f64) -> Vec<f64> {
    if mean <= 0.0 {
        return vec![1.0];
    }
    let mut out = Vec::new();
    let mut p = (-mean).exp();
    let mut total = 0.0;
    let mut k = 0u64;
    if p > 0.0 {
        // small means: forward recursion from e^{−μ}
        loop {
            out.push(p);
            total += p;
            k += 1;
            p *= mean / k as f64;
            if (k as f64) > mean && (1.0 - total < 1e-16 || p < 1e-300) {
                break;
            }
        }
        return out;
    }
    // large means: log-space evaluation
    let hi = (mean + 12.0 * mean.sqrt() + 20.0) as u64;
    for k in 0..=hi {
        let kf = k as f64;
        out.push((kf * mean.ln() - mean - statrs::function::gamma::ln_gamma(kf + 1.0)).exp());
    }
    out
}

/// Transition law of the m-chain from `m`.
pub fn m_transition_pmf(m: u64, lambda: f64, delta: f64) -> Vec<f64> {
    poisson_pmf_vec(m as f64 * lambda * delta)
}

/// E[m' − m | m] = m(λδ − 1).
pub fn m_drift(m: u64, lambda: f64, delta: f64) -> f64 {
    m as f64 * (lambda * delta - 1.0)
}

fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// One step of the m-chain.
pub fn m_step<R: Rng + ?Sized>(m: u64, lambda: f64, delta: f64, rng: &mut R) -> u64 {
    poisson_draw(m as f64 * lambda * delta, rng)
}

/// How a simulated chain ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainFate {
    /// reached 0; `total` is Σ m_i including the start
    Absorbed { steps: u64, total: u64 },
    /// exceeded the escape threshold
    Escaped { steps: u64 },
    /// still alive after the step budget
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionEstimate {
    pub replicas: u64,
    pub absorbed: u64,
    pub escaped: u64,
    pub unresolved: u64,
    pub absorbed_fraction: f64,
    /// mean of Σ m_i over absorbed runs
    pub mean_total_progeny: f64,
}

/// Runs one m-chain from `m0`.
pub fn m_chain_run<R: Rng + ?Sized>(
    m0: u64,
    lambda: f64,
    delta: f64,
    max_steps: u64,
    threshold: u64,
    rng: &mut R,
) -> ChainFate {
    let mut m = m0;
    let mut total = m0;
    for step in 0..max_steps {
        if m == 0 {
            return ChainFate::Absorbed { steps: step, total };
        }
        if m > threshold {
            return ChainFate::Escaped { steps: step };
        }
        m = m_step(m, lambda, delta, rng);
        total += m;
    }
    if m == 0 {
        ChainFate::Absorbed { steps: max_steps, total }
    } else {
        ChainFate::Unresolved
    }
}

fn summarize(fates: &[ChainFate]) -> AbsorptionEstimate {
    let mut absorbed = 0u64;
    let mut escaped = 0u64;
    let mut progeny = 0.0;
    for f in fates {
        match f {
            ChainFate::Absorbed { total, .. } => {
                absorbed += 1;
                progeny += *total as f64;
            }
            ChainFate::Escaped { .. } => escaped += 1,
            ChainFate::Unresolved => {}
        }
    }
    let n = fates.len() as u64;
    AbsorptionEstimate {
        replicas: n,
        absorbed,
        escaped,
        unresolved: n - absorbed - escaped,
        absorbed_fraction: if n == 0 { f64::NAN } else { absorbed as f64 / n as f64 },
        mean_total_progeny: if absorbed == 0 { f64::NAN } else { progeny / absorbed as f64 },
    }
}

/// Monte Carlo absorption frequency of the m-chain. Replica `i` draws from
/// stream `i` of `seed`, so the result does not depend on scheduling.
pub fn m_absorption_estimate(
    m0: u64,
    lambda: f64,
    delta: f64,
    max_steps: u64,
    replicas: u64,
    threshold: u64,
    seed: u64,
) -> AbsorptionEstimate {
    let fates: Vec<ChainFate> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i, 0);
            m_chain_run(m0, lambda, delta, max_steps, threshold, &mut rng)
        })
        .collect();
    summarize(&fates)
}

/// Extinction probability of a Poisson(μ) branching process: the smallest
/// root of q = e^{μ(q−1)}.
pub fn branching_extinction_probability(mu: f64) -> f64 {
    if mu <= 1.0 {
        return 1.0;
    }
    let mut q = 0.0f64;
    for _ in 0..100_000 {
        let next = (mu * (q - 1.0)).exp();
        if (next - q).abs() < 1e-15 {
            return next;
        }
        q = next;
    }
    q
}

/// State of the μ-chain given τ = t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuChainState {
    pub m_prev: u64,
    pub m_cur: u64,
    /// left end of the current probe interval [left_edge, left_edge + m_cur·δ]
    pub left_edge: f64,
    pub t: f64,
}

impl MuChainState {
    /// The state right after the first hit: the hitter alone, probing [0, δ].
    pub fn initial(t: f64) -> Self {
        MuChainState { m_prev: 0, m_cur: 1, left_edge: 0.0, t }
    }

    pub fn is_absorbed(&self) -> bool {
        self.m_cur == 0
    }

    pub fn next(&self, m_next: u64, delta: f64) -> Self {
        MuChainState {
            m_prev: self.m_cur,
            m_cur: m_next,
            left_edge: self.left_edge + self.m_cur as f64 * delta,
            t: self.t,
        }
    }
}

/// σ̂(t, [a, b]) = ∫_a^b ψ(t, y) dy, with ψ ≡ 1 beyond 8√t.
pub fn sigma_hat(t: f64, a: f64, b: f64) -> Result<f64, AnalyticError> {
    if !(t > 0.0) || a < 0.0 || b < a {
        return Err(AnalyticError::Domain(format!("bad σ̂ arguments t={t}, [{a}, {b}]")));
    }
    let cut = PSI_SATURATION * t.sqrt();
    let mut total = 0.0;
    if a < cut {
        let hi = b.min(cut);
        total += integrate(|y| survivor_rate(t, y).unwrap_or(0.0), a, hi, SIGMA_HAT_TOL)?;
    }
    if b > cut {
        total += b - a.max(cut);
    }
    Ok(total)
}

/// Mean of the next count: λσ̂(t, D_i).
pub fn mu_transition_mean(state: &MuChainState, lambda: f64, delta: f64) -> Result<f64, AnalyticError> {
    if state.m_cur == 0 {
        return Ok(0.0);
    }
    let b = state.left_edge + state.m_cur as f64 * delta;
    Ok(lambda * sigma_hat(state.t, state.left_edge, b)?)
}

pub fn mu_transition_pmf(state: &MuChainState, lambda: f64, delta: f64) -> Result<Vec<f64>, AnalyticError> {
    Ok(poisson_pmf_vec(mu_transition_mean(state, lambda, delta)?))
}

/// Expected one-step change of f(μ) = m_cur.
pub fn lyapunov_drift(state: &MuChainState, lambda: f64, delta: f64) -> Result<f64, AnalyticError> {
    Ok(mu_transition_mean(state, lambda, delta)? - state.m_cur as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftThreshold {
    pub m: u64,
    /// smallest scanned left_edge from which the drift stays positive
    pub threshold: Option<f64>,
}

/// Scans left_edge over `[0, max_edge]` in steps of `step` and reports, per
/// `m_cur`, the edge beyond which the Lyapunov drift is positive on the
/// whole remaining grid.
pub fn drift_threshold_scan(
    lambda: f64,
    delta: f64,
    t: f64,
    m_values: &[u64],
    step: f64,
    max_edge: f64,
) -> Result<Vec<DriftThreshold>, AnalyticError> {
    let points = (max_edge / step).round() as usize;
    m_values
        .iter()
        .map(|&m| {
            let mut threshold = None;
            for i in 0..=points {
                let edge = i as f64 * step;
                let s = MuChainState { m_prev: 0, m_cur: m, left_edge: edge, t };
                if lyapunov_drift(&s, lambda, delta)? > 0.0 {
                    threshold.get_or_insert(edge);
                } else {
                    threshold = None;
                }
            }
            Ok(DriftThreshold { m, threshold })
        })
        .collect()
}

/// τ by inversion: λ√(2τ/π) ~ Exp(1).
pub fn tau_sample<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    let u = e / lambda;
    std::f64::consts::PI / 2.0 * u * u
}

/// The particle configuration at time τ given the first hit at τ: a Poisson
/// field of intensity λψ(τ, y), generated lazily by thinning.
#[derive(Debug, Clone)]
pub struct ConditionedField {
    pub tau: f64,
    lambda: f64,
    cell_len: f64,
    covered: f64,
    positions: Vec<f64>,
    rng: RngStream,
}

impl ConditionedField {
    pub fn new(tau: f64, lambda: f64, rng: RngStream) -> Self {
        ConditionedField { tau, lambda, cell_len: 32.0 / lambda, covered: 0.0, positions: Vec::new(), rng }
    }

    /// Generates the field on (0, x].
    pub fn extend_to(&mut self, x: f64) {
        let cut = PSI_SATURATION * self.tau.sqrt();
        while self.covered < x {
            let a = self.covered;
            let b = a + self.cell_len;
            for y in poisson_field(self.lambda, a, b, &mut self.rng) {
                let keep = y >= cut || self.rng.random::<f64>() < survivor_rate(self.tau, y).unwrap_or(0.0);
                if keep {
                    self.positions.push(y);
                }
            }
            self.covered = b;
        }
    }

    pub fn covered(&self) -> f64 {
        self.covered
    }

    /// Sorted positions generated so far.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Number of points in (a, b], extending as needed.
    pub fn count_in(&mut self, a: f64, b: f64) -> u64 {
        self.extend_to(b);
        let lo = self.positions.partition_point(|&y| y <= a);
        let hi = self.positions.partition_point(|&y| y <= b);
        (hi - lo) as u64
    }
}

/// A first hit time together with the configuration it conditions.
pub fn tau_and_field_sample(lambda: f64, mut rng: RngStream, extent: f64) -> ConditionedField {
    let tau = tau_sample(lambda, &mut rng);
    let mut field = ConditionedField::new(tau, lambda, rng);
    field.extend_to(extent);
    field
}

/// Walks the μ-chain over a sampled field: the probe interval starts at
/// (0, δ] and each interval's count sets the next interval's length. An
/// absorbed walk's `total` is the jump size k of the first boundary jump.
pub fn mu_walk(field: &mut ConditionedField, delta: f64, threshold: u64, max_steps: u64) -> ChainFate {
    let mut state = MuChainState::initial(field.tau);
    let mut total = 1u64;
    for step in 0..max_steps {
        if state.is_absorbed() {
            return ChainFate::Absorbed { steps: step, total };
        }
        if state.m_cur > threshold {
            return ChainFate::Escaped { steps: step };
        }
        let a = state.left_edge;
        let m = field.count_in(a, a + state.m_cur as f64 * delta);
        total += m;
        state = state.next(m, delta);
    }
    if state.is_absorbed() {
        ChainFate::Absorbed { steps: max_steps, total }
    } else {
        ChainFate::Unresolved
    }
}

/// Runs [`mu_walk`] on `replicas` independent (τ, field) samples.
pub fn mu_walk_estimate(
    lambda: f64,
    delta: f64,
    replicas: u64,
    threshold: u64,
    max_steps: u64,
    seed: u64,
) -> (AbsorptionEstimate, Vec<ChainFate>) {
    let fates: Vec<ChainFate> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut field = tau_and_field_sample(lambda, RngStream::new(seed, i, 0), 0.0);
            mu_walk(&mut field, delta, threshold, max_steps)
        })
        .collect();
    (summarize(&fates), fates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_one_sample;

    fn closed_sigma_hat(t: f64, a: f64, b: f64) -> f64 {
        // ∫ erf(y/√(2t)) dy = y·erf(y/√(2t)) + √(2t/π)·e^{−y²/2t}
        let f = |y: f64| {
            y * libm::erf(y / (2.0 * t).sqrt())
                + (2.0 * t / std::f64::consts::PI).sqrt() * (-y * y / (2.0 * t)).exp()
        };
        f(b) - f(a)
    }

    #[test]
    fn m_pmf_examples() {
        let p = m_transition_pmf(1, 0.5, 1.0);
        assert!((p[0] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert_eq!(m_transition_pmf(0, 0.5, 1.0), vec![1.0]);
        let big = m_transition_pmf(2000, 1.0, 1.0);
        assert!((big.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(m_drift(4, 0.5, 1.0), -2.0);
        assert!(m_drift(4, 1.2, 1.0) > 0.0);
    }

    #[test]
    fn m_chain_simulated_drift() {
        let mut rng = RngStream::new(3, 0, 0);
        for k in 1..=20u64 {
            let n = 4000;
            let mean: f64 = (0..n).map(|_| m_step(k, 0.7, 1.0, &mut rng) as f64).sum::<f64>() / n as f64;
            let se = (k as f64 * 0.7 / n as f64).sqrt();
            assert!((mean - k as f64 - m_drift(k, 0.7, 1.0)).abs() < 4.0 * se, "k={k}");
        }
    }

    #[test]
    fn extinction_fixed_point() {
        let q = branching_extinction_probability(1.5);
        assert!((q - 0.4172).abs() < 1e-4, "{q}");
        assert!((q - (1.5 * (q - 1.0)).exp()).abs() < 1e-14);
        assert_eq!(branching_extinction_probability(0.5), 1.0);
    }

    #[test]
    fn absorption_monotone_in_load() {
        let fr: Vec<f64> = [0.3, 0.6, 0.9, 1.2, 1.5]
            .iter()
            .map(|&l| m_absorption_estimate(1, l, 1.0, 1000, 4000, 1000, 5).absorbed_fraction)
            .collect();
        assert!(fr.windows(2).all(|w| w[0] >= w[1]), "{fr:?}");
    }

    #[test]
    fn subcritical_progeny_mean() {
        let est = m_absorption_estimate(1, 0.5, 1.0, 1000, 20_000, 10_000, 6);
        assert_eq!(est.absorbed, 20_000);
        // E Σ m_i = m0/(1 − λδ) = 2
        assert!((est.mean_total_progeny - 2.0).abs() < 0.05, "{}", est.mean_total_progeny);
        let zero = m_absorption_estimate(0, 0.5, 1.0, 10, 10, 10, 6);
        assert_eq!(zero.absorbed, 10);
    }

    #[test]
    fn sigma_hat_quadrature_matches_closed_form() {
        for &(t, a, b) in &[(1.0, 0.0, 1.0), (4.0, 0.5, 3.0), (0.1, 0.0, 5.0), (1.0, 6.0, 12.0)] {
            let q = sigma_hat(t, a, b).unwrap();
            assert!((q - closed_sigma_hat(t, a, b)).abs() < 1e-9, "t={t} [{a},{b}]");
        }
        let s = MuChainState { m_prev: 0, m_cur: 1, left_edge: 0.0, t: 1.0 };
        // ∫_0^1 ψ(1, y) dy is the same integral as σ(1)
        let mean = mu_transition_mean(&s, 1.0, 1.0).unwrap();
        assert!((mean - 0.368_746).abs() < 1e-6, "{mean}");
        assert!((mean - crate::analytic::sigma_constant(1.0).unwrap()).abs() < 1e-10);
        let pmf = mu_transition_pmf(&s, 1.0, 1.0).unwrap();
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mu_kernel_tends_to_m_kernel() {
        for m in [1u64, 3, 10] {
            let t: f64 = 2.0;
            let s = MuChainState { m_prev: 0, m_cur: m, left_edge: 12.0 * t.sqrt(), t };
            let a = mu_transition_pmf(&s, 1.2, 1.0).unwrap();
            let b = m_transition_pmf(m, 1.2, 1.0);
            let sup = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(sup < 1e-6, "m={m} sup={sup}");
            let d = lyapunov_drift(&s, 1.2, 1.0).unwrap();
            assert!((d - m_drift(m, 1.2, 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn drift_threshold_supercritical_and_subcritical() {
        let scan = drift_threshold_scan(1.2, 1.0, 1.0, &[1, 2, 5, 10], 0.05, 20.0).unwrap();
        assert!(scan.iter().all(|d| d.threshold.is_some_and(|x| x < 20.0)), "{scan:?}");
        // a lone probe needs to be away from the boundary before the drift turns positive
        assert!(scan[0].threshold.unwrap() > 0.0);
        let sub = drift_threshold_scan(0.5, 1.0, 1.0, &[1, 5], 0.5, 20.0).unwrap();
        assert!(sub.iter().all(|d| d.threshold.is_none()));
    }

    #[test]
    fn tau_sampler_law() {
        let mut rng = RngStream::new(17, 0, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| tau_sample(1.0, &mut rng)).collect();
        let ks = ks_one_sample(&xs, |t| crate::analytic::tau_cdf(t, 1.0));
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn conditioned_field_is_rarefied_near_zero() {
        // fix τ = 1 and compare empirical counts with λσ̂
        let reps = 4000;
        let (mut near, mut far) = (0u64, 0u64);
        for i in 0..reps {
            let mut f = ConditionedField::new(1.0, 1.0, RngStream::new(23, i, 0));
            near += f.count_in(0.0, 0.2);
            far += f.count_in(10.0, 10.2);
        }
        let near_mean = near as f64 / reps as f64;
        let far_mean = far as f64 / reps as f64;
        let expect_near = sigma_hat(1.0, 0.0, 0.2).unwrap();
        assert!((near_mean - expect_near).abs() < 4.0 * (expect_near / reps as f64).sqrt());
        assert!((far_mean - 0.2).abs() < 4.0 * (0.2 / reps as f64).sqrt());
        assert!(near_mean < 0.1 * far_mean);
    }

    #[test]
    fn mu_walk_supercritical_escapes_subcritical_absorbs() {
        let (sup, _) = mu_walk_estimate(1.5, 1.0, 400, DEFAULT_ESCAPE_THRESHOLD, 100_000, 31);
        assert!(sup.escaped > 0, "{sup:?}");
        let (sub, _) = mu_walk_estimate(0.5, 1.0, 2000, DEFAULT_ESCAPE_THRESHOLD, 100_000, 32);
        assert_eq!(sub.absorbed, 2000);
    }
}
