//! Exact variate generators: Poisson fields, first-passage times of drifted
//! Brownian motion, and endpoints conditioned on not crossing a barrier.

use log::debug;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};

use crate::analytic::survivor_kernel_drift;

/// Retries of the bridge-rejection sampler before switching to the tabulated kernel.
pub const MAX_BRIDGE_RETRIES: usize = 10_000;
/// Points in the fallback inverse-CDF table.
pub const FALLBACK_TABLE_POINTS: usize = 2048;

/// Homogeneous Poisson field of density `lambda` on (a, b], sorted ascending.
pub fn poisson_field<R: Rng + ?Sized>(lambda: f64, a: f64, b: f64, rng: &mut R) -> Vec<f64> {
    assert!(a < b, "empty interval ({a}, {b}]");
    let mean = lambda * (b - a);
    if mean <= 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(mean).expect("positive finite mean").sample(rng) as usize;
    let width = b - a;
    // 1 − U with U ∈ [0, 1) lands in (0, 1], matching the half-open cell
    let draw = |rng: &mut R| a + width * (1.0 - rng.random::<f64>());
    let mut xs: Vec<f64> = (0..count).map(|_| draw(rng)).collect();
    xs.sort_unstable_by(f64::total_cmp);
    // exact ties have probability zero; redraw so the list is strictly increasing
    while xs.windows(2).any(|w| w[0] == w[1]) {
        xs.dedup();
        while xs.len() < count {
            xs.push(draw(rng));
        }
        xs.sort_unstable_by(f64::total_cmp);
    }
    xs
}

/// First time `a − v·s + w(s)` reaches 0, for `a > 0`, `v ≥ 0`.
///
/// v > 0: inverse Gaussian with mean a/v and shape a², by the
/// Michael–Schucany–Haas transformation. v = 0: Lévy law a²/Z².
pub fn fpt_sample<R: Rng + ?Sized>(a: f64, v: f64, rng: &mut R) -> f64 {
    debug_assert!(a > 0.0, "distance to boundary must be positive, got {a}");
    if v <= 0.0 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z != 0.0 {
                return a * a / (z * z);
            }
        }
    }
    let mean = a / v;
    let shape = a * a;
    let z: f64 = rng.sample(StandardNormal);
    let y = z * z;
    // smaller root μ(1 + r − √(2r + r²)), written without cancellation
    let r = mean * y / (2.0 * shape);
    let root = mean / (1.0 + r + (r * (2.0 + r)).sqrt());
    let u: f64 = rng.random();
    if u * (mean + root) <= mean {
        root
    } else {
        mean * mean / root
    }
}

/// Probability that a Brownian bridge from `x0` to `x1` over time `h` dips below 0:
/// exp(−2·x0·x1/h).
pub fn bridge_cross_prob(x0: f64, x1: f64, h: f64) -> f64 {
    debug_assert!(x0 > 0.0 && x1 > 0.0 && h > 0.0);
    (-2.0 * x0 * x1 / h).exp()
}

/// Normal(mean, sd²) conditioned on exceeding `lower`.
pub fn truncated_normal_above<R: Rng + ?Sized>(mean: f64, sd: f64, lower: f64, rng: &mut R) -> f64 {
    let alpha = (lower - mean) / sd;
    let z = if alpha < 0.5 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z > alpha {
                break z;
            }
        }
    } else {
        // exponential proposal with the optimal rate for this cut (Robert 1995)
        let rate = 0.5 * (alpha + (alpha * alpha + 4.0).sqrt());
        loop {
            let e: f64 = rng.sample(Exp1);
            let z = alpha + e / rate;
            let d = z - rate;
            let u: f64 = rng.random();
            if u <= (-0.5 * d * d).exp() && z > alpha {
                break z;
            }
        }
    };
    let y = mean + sd * z;
    if y > lower {
        y
    } else {
        // rounding can land exactly on the cut when alpha is huge
        lower + (lower.abs() * f64::EPSILON).max(f64::MIN_POSITIVE)
    }
}

/// Position at time `dt` of `x − v·s + w(s)` conditioned on staying above `b`
/// throughout [0, dt].
///
/// Draws from the free Gaussian truncated to (b, ∞) and accepts with the
/// bridge no-crossing probability 1 − exp(−2(x−b)(y−b)/dt). After
/// [`MAX_BRIDGE_RETRIES`] rejections falls back to inverse-CDF sampling on a
/// tabulated exact kernel.
pub fn survivor_endpoint_sample<R: Rng + ?Sized>(x: f64, b: f64, dt: f64, v: f64, rng: &mut R) -> f64 {
    debug_assert!(x > b && dt > 0.0);
    let gap = x - b;
    let sd = dt.sqrt();
    let mean = x - v * dt;
    for _ in 0..MAX_BRIDGE_RETRIES {
        let y = truncated_normal_above(mean, sd, b, rng);
        let e = 2.0 * gap * (y - b) / dt;
        if e > 50.0 {
            return y;
        }
        let u: f64 = rng.random();
        if u >= (-e).exp() {
            return y;
        }
    }
    debug!("bridge rejection exhausted (gap {gap:e}, dt {dt:e}); using tabulated kernel");
    b + tabulated_survivor_sample(gap, dt, v, rng)
}

/// Inverse-CDF draw of the killed-kernel endpoint above a barrier at 0,
/// starting from `gap`. The table has [`FALLBACK_TABLE_POINTS`] nodes, half
/// linear across the bulk and half log-spaced through the upper tail.
pub fn tabulated_survivor_sample<R: Rng + ?Sized>(gap: f64, dt: f64, v: f64, rng: &mut R) -> f64 {
    let sd = dt.sqrt();
    let bulk_end = (gap - v * dt).max(0.0) + 4.0 * sd;
    let tail_end = bulk_end + 12.0 * sd;
    let half = FALLBACK_TABLE_POINTS / 2;
    let mut nodes = Vec::with_capacity(FALLBACK_TABLE_POINTS);
    for i in 0..half {
        nodes.push(bulk_end * i as f64 / half as f64);
    }
    let ratio = (tail_end / bulk_end).ln();
    for i in 0..half {
        nodes.push(bulk_end * (ratio * i as f64 / (half - 1) as f64).exp());
    }
    let density: Vec<f64> = nodes
        .iter()
        .map(|&y| {
            if y <= 0.0 {
                0.0
            } else {
                survivor_kernel_drift(dt, gap, y, v).unwrap_or(0.0)
            }
        })
        .collect();
    let mut cdf = vec![0.0; nodes.len()];
    for i in 1..nodes.len() {
        cdf[i] = cdf[i - 1] + 0.5 * (density[i] + density[i - 1]) * (nodes[i] - nodes[i - 1]);
    }
    let total = cdf[cdf.len() - 1];
    if !(total > 0.0) {
        // kernel underflowed everywhere; the mass sits just above the barrier
        return gap.max(f64::MIN_POSITIVE);
    }
    let target = rng.random::<f64>() * total;
    let j = cdf.partition_point(|&c| c < target).clamp(1, nodes.len() - 1);
    let (c0, c1) = (cdf[j - 1], cdf[j]);
    let w = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
    let y = nodes[j - 1] + w * (nodes[j] - nodes[j - 1]);
    y.max(f64::MIN_POSITIVE)
}
