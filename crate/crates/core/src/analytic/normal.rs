//! Standard normal distribution functions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// ln(sqrt(2π))
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument `ln Φ` switches from `ln(erfc)` to the asymptotic
/// series. erfc does not underflow until about z = -37.5.
const LOG_CDF_ASYMPTOTIC_BELOW: f64 = -30.0;

/// Standard normal law: Φ, Φ̄ = 1 − Φ and the density φ.
#[derive(Debug, Clone, Copy, Default)]
pub struct StdNormal;

impl StdNormal {
    pub fn pdf(z: f64) -> f64 {
        (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
    }

    /// Φ(z). Evaluated through erfc so the lower tail keeps full relative precision.
    pub fn cdf(z: f64) -> f64 {
        0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
    }

    /// Φ̄(z), computed directly rather than as 1 − Φ(z).
    pub fn sf(z: f64) -> f64 {
        0.5 * libm::erfc(z * FRAC_1_SQRT_2)
    }

    /// ln Φ(z), finite for every finite z.
    pub fn log_cdf(z: f64) -> f64 {
        if z > 0.0 {
            (-Self::sf(z)).ln_1p()
        } else if z > LOG_CDF_ASYMPTOTIC_BELOW {
            Self::cdf(z).ln()
        } else {
            // Φ(z) = φ(z)/|z| · (1 − 1/z² + 3/z⁴ − 15/z⁶ + ...)
            let w = 1.0 / (z * z);
            let mut term = 1.0;
            let mut series = 1.0;
            for k in 1..12 {
                term *= -((2 * k - 1) as f64) * w;
                series += term;
            }
            -0.5 * z * z - LN_SQRT_2PI - (-z).ln() + series.ln()
        }
    }

    /// ∫_a^∞ Φ̄(u) du = φ(a) − a·Φ̄(a).
    pub fn sf_integral(a: f64) -> f64 {
        Self::pdf(a) - a * Self::sf(a)
    }
}
