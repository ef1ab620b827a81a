//! Frozen reference values, each computed independently of the code under test
//! (closed forms evaluated at high precision), plus cross-checks between
//! closed forms and quadrature.

use accrete_core::analytic::*;
use accrete_core::chains::{branching_extinction_probability, sigma_hat, m_drift};
use accrete_core::model::{toy_deterministic_n, SystemParams};

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

#[test]
fn frozen_constants() {
    // σ(1) = 2Φ(1) + 2φ(1) − 2φ(0) − 1
    close(sigma_constant(1.0).unwrap(), 0.368_746_380_372_508, 1e-14);
    // π(ln 2)²/2
    close(tau_median(1.0).unwrap(), 0.754_693_829_460_248, 1e-14);
    // erf(1/√2)
    close(survivor_rate(4.0, 2.0).unwrap(), 0.682_689_492_137_086, 1e-14);
    // √(2/π)
    close(mean_fixed_hits(1.0, 1.0).unwrap(), 0.797_884_560_802_865, 1e-14);
    // smallest root of q = e^{1.5(q − 1)}
    close(branching_extinction_probability(1.5), 0.417_188_356_134_188_6, 1e-12);
    close(asymptotic_speed(0.5, 1.0, 1.0).unwrap(), 1.0, 1e-15);
    close(asymptotic_speed(0.9, 1.0, 2.0).unwrap(), 18.0, 1e-12);
}

#[test]
fn extinction_root_solves_its_equation() {
    for mu in [1.1, 1.5, 2.0, 3.0] {
        let q = branching_extinction_probability(mu);
        close(q, (mu * (q - 1.0)).exp(), 1e-12);
        assert!(q < 1.0);
    }
    assert_eq!(branching_extinction_probability(0.5), 1.0);
}

#[test]
fn sigma_constant_matches_quadrature() {
    for d in [0.2, 0.5, 1.0, 3.0] {
        let q = integrate(|x| 2.0 * StdNormal::cdf(x) - 1.0, 0.0, d, 1e-13).unwrap();
        close(sigma_constant(d).unwrap(), q, 1e-12);
    }
}

#[test]
fn sigma_hat_saturates_to_window_length() {
    // far from the boundary ψ ≈ 1, so σ̂ over a window is its length
    close(sigma_hat(1.0, 20.0, 21.0).unwrap(), 1.0, 1e-12);
}

#[test]
fn tau_cdf_inverts_at_median() {
    for lambda in [0.5, 1.0, 3.0] {
        close(tau_cdf(tau_median(lambda).unwrap(), lambda), 0.5, 1e-14);
    }
}

#[test]
fn hit_probability_is_tail_of_running_maximum() {
    for (x, v, t) in [(1.0, 0.0, 1.0), (0.5, 1.0, 2.0), (3.0, 0.3, 10.0)] {
        let tail = max_drifted_bm_tail(x, v, t).unwrap();
        close(hit_prob_fixed(x, v, t).unwrap(), tail, 1e-15);
        // first-hit density integrates to the hitting probability (v = 0)
        if v == 0.0 {
            let mass = integrate(|s| first_hit_density(s, x).unwrap_or(0.0), 1e-12, t, 1e-13).unwrap();
            close(mass, tail, 1e-10);
        }
    }
}

#[test]
fn truncation_mass_closed_form_matches_quadrature() {
    for (f, level, t, v, lambda) in [(30.0, 0.0, 10.0, 1.0, 0.5), (20.0, 5.0, 50.0, 0.0, 1.0)] {
        let a = truncation_tail_mass(f, level, t, v, lambda).unwrap();
        let b = truncation_tail_mass_closed(f, level, t, v, lambda).unwrap();
        close(a, b, 1e-9 + 1e-8 * b);
    }
}

#[test]
fn m_chain_drift_is_linear() {
    for k in 1..=20u64 {
        close(m_drift(k, 0.6, 1.0), k as f64 * (0.6 - 1.0), 1e-9);
    }
}

#[test]
fn toy_recursion_examples() {
    let p = SystemParams::new(0.5, 1.0, 1.0, 100.0);
    let n = toy_deterministic_n(&p, 100.0).unwrap();
    assert_eq!(n, 100);
    // speed of the toy system approaches vδλ/(1 − δλ)
    let n = toy_deterministic_n(&p, 1e6).unwrap() as f64;
    close(p.delta * n / 1e6, 1.0, 1e-5);
    assert!(toy_deterministic_n(&SystemParams::new(1.0, 1.0, 1.0, 10.0), 10.0).is_err());
}
