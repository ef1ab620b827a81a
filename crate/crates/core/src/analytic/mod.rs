//! Closed-form laws of drifted Brownian motion used by the model, and the
//! quadratures built on them.
//!
//! Conventions: a particle starting at `x > 0` moves as `x − v·s + w(s)` and
//! is absorbed at level 0. `t` is elapsed time, `λ` the particle density.
//! All functions are pure.

mod normal;
pub mod quad;

pub use normal::StdNormal;
pub use quad::{integrate, integrate_to_infinity, DEFAULT_ABS_TOL};

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge (estimate {estimate:e}, error {error:e})")]
    Quadrature { estimate: f64, error: f64 },
}

impl AnalyticError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        AnalyticError::Domain(msg.into())
    }
}

fn require(cond: bool, msg: &str) -> Result<(), AnalyticError> {
    if cond {
        Ok(())
    } else {
        Err(AnalyticError::domain(msg))
    }
}

/// P(max_{s≤t}(v·s + w(s)) ≥ x) = Φ̄((x − vt)/√t) + e^{2vx}·Φ((−x − vt)/√t).
///
/// The second term is evaluated as `exp(2vx + ln Φ(·))`, which stays finite
/// when `e^{2vx}` alone would overflow.
pub fn max_drifted_bm_tail(x: f64, v: f64, t: f64) -> Result<f64, AnalyticError> {
    require(t > 0.0 && t.is_finite(), "time must be positive and finite")?;
    require(x >= 0.0, "level must be nonnegative")?;
    require(v.is_finite(), "drift must be finite")?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let st = t.sqrt();
    let direct = StdNormal::sf((x - v * t) / st);
    let reflected = if v == 0.0 {
        StdNormal::cdf(-x / st)
    } else {
        (2.0 * v * x + StdNormal::log_cdf((-x - v * t) / st)).exp()
    };
    Ok((direct + reflected).clamp(0.0, 1.0))
}

/// Probability that a particle started at `x` reaches the fixed boundary 0 within time `t`.
pub fn hit_prob_fixed(x: f64, v: f64, t: f64) -> Result<f64, AnalyticError> {
    require(x > 0.0, "start must be strictly positive")?;
    max_drifted_bm_tail(x, v, t)
}

/// Mean number of hits on a fixed boundary during `[0, t]` for zero drift: λ√(2t/π).
pub fn mean_fixed_hits(lambda: f64, t: f64) -> Result<f64, AnalyticError> {
    require(lambda > 0.0, "density must be positive")?;
    require(t >= 0.0, "time must be nonnegative")?;
    Ok(lambda * (2.0 * t / PI).sqrt())
}

/// Density in `t` of the first passage at 0 from `x` (zero drift):
/// x/√(2πt³)·e^{−x²/2t}.
pub fn first_hit_density(t: f64, x: f64) -> Result<f64, AnalyticError> {
    require(t > 0.0, "time must be positive")?;
    require(x > 0.0, "start must be positive")?;
    Ok(x / (2.0 * PI * t * t * t).sqrt() * (-x * x / (2.0 * t)).exp())
}

/// Transition density of Brownian motion killed at 0:
/// (e^{−(x−y)²/2t} − e^{−(x+y)²/2t})/√(2πt).
pub fn survivor_kernel(t: f64, x: f64, y: f64) -> Result<f64, AnalyticError> {
    require(t > 0.0, "time must be positive")?;
    require(x > 0.0 && y > 0.0, "start and end must be positive")?;
    let d = x - y;
    // e^{-(x+y)²/2t} = e^{-(x-y)²/2t}·e^{-2xy/t}
    Ok((-d * d / (2.0 * t)).exp() * -(-2.0 * x * y / t).exp_m1() / (2.0 * PI * t).sqrt())
}

/// Killed-kernel density with drift: the law of `x − v·t + w(t)` on `y > 0`
/// restricted to paths that stay above 0. Equals `survivor_kernel` times the
/// Girsanov factor e^{−v(y−x) − v²t/2}.
pub fn survivor_kernel_drift(t: f64, x: f64, y: f64, v: f64) -> Result<f64, AnalyticError> {
    require(t > 0.0, "time must be positive")?;
    require(x > 0.0 && y > 0.0, "start and end must be positive")?;
    let m = y - x + v * t;
    Ok((-m * m / (2.0 * t)).exp() * -(-2.0 * x * y / t).exp_m1() / (2.0 * PI * t).sqrt())
}

/// ψ(t, y) = Φ(y/√t) − Φ(−y/√t): survival probability from `y` over time `t`,
/// and the thinning rate of the particle field conditioned on the first hit time.
pub fn survivor_rate(t: f64, y: f64) -> Result<f64, AnalyticError> {
    require(t > 0.0, "time must be positive")?;
    require(y >= 0.0, "coordinate must be nonnegative")?;
    Ok(libm::erf(y / (2.0 * t).sqrt()))
}

/// Density of the first hit time τ among all particles of a density-λ field,
/// zero drift, fixed boundary: λ/√(2πt)·e^{−λ√(2t/π)}.
pub fn tau_density(t: f64, lambda: f64) -> Result<f64, AnalyticError> {
    require(t > 0.0, "time must be positive")?;
    require(lambda > 0.0, "density must be positive")?;
    Ok(lambda / (2.0 * PI * t).sqrt() * (-lambda * (2.0 * t / PI).sqrt()).exp())
}

/// P(τ ≤ t) = 1 − e^{−λ√(2t/π)}.
pub fn tau_cdf(t: f64, lambda: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    -(-lambda * (2.0 * t / PI).sqrt()).exp_m1()
}

/// Median of τ: π(ln 2)²/(2λ²).
pub fn tau_median(lambda: f64) -> Result<f64, AnalyticError> {
    require(lambda > 0.0, "density must be positive")?;
    let l2 = std::f64::consts::LN_2;
    Ok(PI * l2 * l2 / (2.0 * lambda * lambda))
}

/// σ(d) = ∫_{−d}^0 Φ̄ − ∫_0^d Φ̄ = ∫_0^d (2Φ(x) − 1) dx
/// = 2dΦ(d) + 2φ(d) − 2φ(0) − d.
pub fn sigma_constant(d: f64) -> Result<f64, AnalyticError> {
    require(d > 0.0 && d.is_finite(), "window multiplier must be positive")?;
    if d < 1e-4 {
        // series: d²/√(2π) · (1 − d²/12)
        return Ok(d * d / (2.0 * PI).sqrt() * (1.0 - d * d / 12.0));
    }
    Ok(2.0 * d * StdNormal::cdf(d) + 2.0 * StdNormal::pdf(d) - 2.0 * StdNormal::pdf(0.0) - d)
}

/// Mean of K₀(t): survivors of the fixed-boundary model found left of d√t at time t.
/// Equals λ·σ(d)·√t.
pub fn k0_mean(lambda: f64, d: f64, t: f64) -> Result<f64, AnalyticError> {
    require(lambda > 0.0, "density must be positive")?;
    require(t >= 0.0, "time must be nonnegative")?;
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(lambda * sigma_constant(d)? * t.sqrt())
}

/// Limiting boundary speed v·δλ/(1 − δλ) for the subcritical drifted system.
pub fn asymptotic_speed(lambda: f64, delta: f64, v: f64) -> Result<f64, AnalyticError> {
    require(lambda > 0.0 && delta > 0.0, "density and size must be positive")?;
    require(v >= 0.0, "drift must be nonnegative")?;
    let load = lambda * delta;
    if load >= 1.0 {
        return Err(AnalyticError::domain(format!(
            "λδ = {load} ≥ 1: no linear speed exists"
        )));
    }
    Ok(v * load / (1.0 - load))
}

/// Expected number of particles initially beyond `frontier` that come down to
/// `level` within `horizon`: λ∫_F^∞ P(max(v·s + w) ≥ x − level) dx, by quadrature.
pub fn truncation_tail_mass(
    frontier: f64,
    level: f64,
    horizon: f64,
    v: f64,
    lambda: f64,
) -> Result<f64, AnalyticError> {
    require(frontier > level, "frontier must lie beyond the level")?;
    require(horizon > 0.0, "horizon must be positive")?;
    require(lambda > 0.0, "density must be positive")?;
    let gap = frontier - level;
    let scale = horizon.sqrt();
    let integrand = |u: f64| max_drifted_bm_tail(gap + u, v, horizon).unwrap_or(0.0);
    // Integrate the bulk explicitly; the remainder beyond the last window is
    // swept by the infinite map, where the integrand is Gaussian-small.
    let bulk_end = (v * horizon - gap).max(0.0) + 8.0 * scale;
    let bulk = integrate(integrand, 0.0, bulk_end, DEFAULT_ABS_TOL / lambda)?;
    let tail = integrate_to_infinity(integrand, bulk_end, DEFAULT_ABS_TOL / lambda)?;
    Ok(lambda * (bulk + tail))
}

/// Closed form of [`truncation_tail_mass`]. With A = F − level and z = (A − vT)/√T:
/// λ[√T(φ(z) − zΦ̄(z)) + (Φ̄(z) − e^{2vA}Φ̄((A + vT)/√T))/(2v)], and
/// 2λ√T(φ(a) − aΦ̄(a)), a = A/√T, when v = 0.
pub fn truncation_tail_mass_closed(
    frontier: f64,
    level: f64,
    horizon: f64,
    v: f64,
    lambda: f64,
) -> Result<f64, AnalyticError> {
    require(frontier > level, "frontier must lie beyond the level")?;
    require(horizon > 0.0, "horizon must be positive")?;
    require(v >= 0.0, "drift must be nonnegative")?;
    let gap = frontier - level;
    let st = horizon.sqrt();
    if v * st < 1e-7 {
        // the 1/(2v) term degenerates; the v = 0 form is accurate to O(v√T)
        let a = gap / st;
        return Ok(2.0 * lambda * st * StdNormal::sf_integral(a));
    }
    let z = (gap - v * horizon) / st;
    let first = st * StdNormal::sf_integral(z);
    let reflected = (2.0 * v * gap + StdNormal::log_cdf(-(gap + v * horizon) / st)).exp();
    let second = (StdNormal::sf(z) - reflected) / (2.0 * v);
    Ok(lambda * (first + second.max(0.0)))
}
