//! Estimators and hypothesis tests over replica outputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

use crate::analytic::tau_cdf;
use crate::model::{SystemParams, Trajectory};

/// Significance level of every acceptance gate.
pub const GATE_ALPHA: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("too few samples: need {need}, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("degenerate binning: {0}")]
    Binning(String),
    #[error("replica {index} exploded in a subcritical run (λδ = {load}); this is a simulator fault")]
    SubcriticalExplosion { index: u64, load: f64 },
    #[error("replica set mixes parameters")]
    MixedParams,
    #[error("{0}")]
    Precondition(String),
}

/// Two-sided normal quantile z_{1−α/2} for a confidence level such as 0.95.
pub fn z_two_sided(level: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.5 + level / 2.0)
}

/// One-sided normal quantile z_{1−α}.
pub fn z_one_sided(alpha: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Sample mean, standard error and a normal-approximation CI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub stderr: f64,
    /// `None` when fewer than two observations make the CI meaningless.
    pub ci: Option<Interval>,
    pub level: f64,
}

pub fn mean_estimate(xs: &[f64], level: f64) -> MeanEstimate {
    let n = xs.len();
    let mean = if n == 0 { f64::NAN } else { xs.iter().sum::<f64>() / n as f64 };
    if n < 2 {
        return MeanEstimate { n, mean, sd: f64::NAN, stderr: f64::NAN, ci: None, level };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let stderr = sd / (n as f64).sqrt();
    let z = z_two_sided(level);
    MeanEstimate {
        n,
        mean,
        sd,
        stderr,
        ci: Some(Interval { lo: mean - z * stderr, hi: mean + z * stderr }),
        level,
    }
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize, level: f64) -> Interval {
    if n == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let z = z_two_sided(level);
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * nf)) / (1.0 + z2 / nf);
    let half = z / (1.0 + z2 / nf) * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    Interval { lo, hi }
}

/// Pearson correlation with a Fisher-z confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub ci: Interval,
}

pub fn correlation(xs: &[f64], ys: &[f64], level: f64) -> Correlation {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    let r = if sxx > 0.0 && syy > 0.0 { sxy / (sxx * syy).sqrt() } else { 0.0 };
    let z = r.clamp(-0.999_999_999, 0.999_999_999).atanh();
    let half = z_two_sided(level) / (n - 3.0).max(1.0).sqrt();
    Correlation { r, ci: Interval { lo: (z - half).tanh(), hi: (z + half).tanh() } }
}

/// Kolmogorov–Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Q_KS(x) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²x²}.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    KsResult { n: xs.len(), statistic: d, p_value: ks_p(d, n) }
}

/// Two-sample KS test. Valid (conservative) for discrete data.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_unstable_by(f64::total_cmp);
    xb.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    KsResult { n: xa.len().min(xb.len()), statistic: d, p_value: ks_p(d, na * nb / (na + nb)) }
}

/// Pearson χ² outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub bins: usize,
}

fn chi2_sf(x: f64, dof: usize) -> f64 {
    ChiSquared::new(dof as f64).map(|c| c.sf(x)).unwrap_or(f64::NAN)
}

fn poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    (kf * mean.ln() - mean - statrs::function::gamma::ln_gamma(kf + 1.0)).exp()
}

/// χ² goodness of fit of nonnegative counts to Poisson(`mean`), with bins
/// pooled left to right until each expects at least 5 and an open tail bin.
pub fn poisson_gof(samples: &[u64], mean: f64) -> Result<ChiSquareResult, StatsError> {
    if samples.len() < 1000 {
        return Err(StatsError::TooFew { need: 1000, got: samples.len() });
    }
    if !(mean > 0.0) {
        return Err(StatsError::Binning(format!("Poisson mean must be positive, got {mean}")));
    }
    let n = samples.len() as f64;
    let max = *samples.iter().max().unwrap();
    let mut observed = vec![0usize; max as usize + 2];
    for &s in samples {
        observed[s as usize] += 1;
    }
    // (observed, expected) per pooled bin; the last bin is open-ended
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    let mut cdf = 0.0;
    let mut k = 0u64;
    loop {
        let p = poisson_pmf(k, mean);
        cdf += p;
        acc_o += *observed.get(k as usize).unwrap_or(&0) as f64;
        acc_e += n * p;
        k += 1;
        let tail_e = n * (1.0 - cdf).max(0.0);
        if acc_e >= 5.0 {
            bins.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
        if tail_e < 5.0 {
            break;
        }
    }
    let tail_o: f64 = observed.iter().skip(k as usize).map(|&c| c as f64).sum::<f64>() + acc_o;
    let tail_e = n * (1.0 - cdf).max(0.0) + acc_e;
    match bins.last_mut() {
        Some(last) if tail_e < 5.0 => {
            last.0 += tail_o;
            last.1 += tail_e;
        }
        _ => bins.push((tail_o, tail_e)),
    }
    if bins.len() < 2 {
        return Err(StatsError::Binning(format!("only {} bin(s) at mean {mean}", bins.len())));
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len() - 1;
    Ok(ChiSquareResult { statistic, dof, p_value: chi2_sf(statistic, dof), bins: bins.len() })
}

/// Independence of paired counts: χ² on a contingency table with pooled
/// marginal categories, plus the sample correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceResult {
    pub chi2: ChiSquareResult,
    pub rows: usize,
    pub cols: usize,
    pub correlation: Correlation,
}

/// Groups consecutive values 0..=max so that every group holds at least
/// `min_count` observations; returns the group index of each value.
fn pool_categories(counts: &[usize], min_count: usize) -> Vec<usize> {
    let mut group_of = vec![0usize; counts.len()];
    let mut group = 0;
    let mut acc = 0;
    let mut starts = vec![0usize];
    for (v, &c) in counts.iter().enumerate() {
        group_of[v] = group;
        acc += c;
        if acc >= min_count && v + 1 < counts.len() {
            group += 1;
            acc = 0;
            starts.push(v + 1);
        }
    }
    // a short final group is folded into its predecessor
    if acc < min_count && group > 0 {
        let last_start = *starts.last().unwrap();
        for g in group_of.iter_mut().skip(last_start) {
            *g = group - 1;
        }
    }
    group_of
}

pub fn independence_test(pairs: &[(u64, u64)]) -> Result<IndependenceResult, StatsError> {
    if pairs.len() < 1000 {
        return Err(StatsError::TooFew { need: 1000, got: pairs.len() });
    }
    let n = pairs.len();
    let max_x = pairs.iter().map(|p| p.0).max().unwrap() as usize;
    let max_y = pairs.iter().map(|p| p.1).max().unwrap() as usize;
    let mut cx = vec![0usize; max_x + 1];
    let mut cy = vec![0usize; max_y + 1];
    for &(x, y) in pairs {
        cx[x as usize] += 1;
        cy[y as usize] += 1;
    }
    let mut min_count = 5usize;
    loop {
        let gx = pool_categories(&cx, min_count);
        let gy = pool_categories(&cy, min_count);
        let rows = gx.iter().max().unwrap() + 1;
        let cols = gy.iter().max().unwrap() + 1;
        if rows < 2 || cols < 2 {
            return Err(StatsError::Binning(format!(
                "table collapsed to {rows}x{cols} at pooling threshold {min_count}"
            )));
        }
        let mut table = vec![vec![0f64; cols]; rows];
        for &(x, y) in pairs {
            table[gx[x as usize]][gy[y as usize]] += 1.0;
        }
        let row_sum: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
        let col_sum: Vec<f64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
        let nf = n as f64;
        let min_expected = row_sum.iter().cloned().fold(f64::INFINITY, f64::min)
            * col_sum.iter().cloned().fold(f64::INFINITY, f64::min)
            / nf;
        if min_expected < 5.0 {
            min_count *= 2;
            continue;
        }
        let mut stat = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                let e = row_sum[i] * col_sum[j] / nf;
                stat += (table[i][j] - e).powi(2) / e;
            }
        }
        let dof = (rows - 1) * (cols - 1);
        let xs: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        return Ok(IndependenceResult {
            chi2: ChiSquareResult { statistic: stat, dof, p_value: chi2_sf(stat, dof), bins: rows * cols },
            rows,
            cols,
            correlation: correlation(&xs, &ys, 0.95),
        });
    }
}

/// KS test of first-hit times against P(τ ≤ t) = 1 − e^{−λ√(2t/π)}.
/// Censored samples (`f64::INFINITY`) are allowed.
pub fn tau_gof(samples: &[f64], lambda: f64) -> KsResult {
    ks_one_sample(samples, |t| if t.is_finite() { tau_cdf(t, lambda) } else { 1.0 })
}

/// Median of a sample (average of the middle pair for even sizes).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Replica outputs sharing one parameter set, keyed by replica index.
///
/// Iteration is always in index order, so every estimator gives the same
/// bits no matter in which order replicas finished or were merged.
#[derive(Debug, Clone)]
pub struct ReplicaSet {
    pub params: SystemParams,
    pub level: f64,
    replicas: BTreeMap<u64, Trajectory>,
}

impl ReplicaSet {
    pub fn new(params: SystemParams, level: f64) -> Self {
        ReplicaSet { params, level, replicas: BTreeMap::new() }
    }

    /// Builds a set from (index, trajectory) pairs.
    pub fn from_runs<I: IntoIterator<Item = (u64, Trajectory)>>(params: SystemParams, level: f64, runs: I) -> Self {
        let mut set = ReplicaSet::new(params, level);
        for (i, t) in runs {
            set.insert(i, t);
        }
        set
    }

    pub fn insert(&mut self, index: u64, traj: Trajectory) {
        self.replicas.insert(index, traj);
    }

    /// Union of two sets with identical parameters.
    pub fn merge(mut self, other: ReplicaSet) -> Result<ReplicaSet, StatsError> {
        if self.params != other.params {
            return Err(StatsError::MixedParams);
        }
        self.replicas.extend(other.replicas);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.replicas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicas.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u64, &Trajectory)> {
        self.replicas.iter()
    }

    pub fn exploded_count(&self) -> usize {
        self.replicas.values().filter(|t| t.exploded).count()
    }

    /// Fails hard if a subcritical replica exploded.
    fn check_subcritical(&self) -> Result<(), StatsError> {
        if self.params.is_subcritical() {
            if let Some((i, _)) = self.replicas.iter().find(|(_, t)| t.exploded) {
                return Err(StatsError::SubcriticalExplosion {
                    index: *i,
                    load: self.params.load(),
                });
            }
        }
        Ok(())
    }
}

/// Speed estimate from the boundary position at the horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeedEstimate {
    /// mean of ξ(T)/T
    pub v_hat: MeanEstimate,
    /// mean of (ξ(T) − ξ(T/2))/(T/2)
    pub slope: MeanEstimate,
    pub used: usize,
    pub exploded: usize,
    /// fewer than 30 usable replicas
    pub small_sample: bool,
}

pub fn estimate_speed(reps: &ReplicaSet) -> Result<SpeedEstimate, StatsError> {
    reps.check_subcritical()?;
    let horizon = reps.params.horizon;
    let mut ratio = Vec::new();
    let mut slope = Vec::new();
    for (_, t) in reps.iter().filter(|(_, t)| !t.exploded) {
        let end = t.xi_at(horizon);
        ratio.push(end / horizon);
        slope.push((end - t.xi_at(horizon / 2.0)) / (horizon / 2.0));
    }
    if ratio.is_empty() {
        return Err(StatsError::TooFew { need: 1, got: 0 });
    }
    Ok(SpeedEstimate {
        used: ratio.len(),
        exploded: reps.exploded_count(),
        small_sample: ratio.len() < 30,
        v_hat: mean_estimate(&ratio, reps.level),
        slope: mean_estimate(&slope, reps.level),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioPoint {
    pub t: f64,
    pub ratio: MeanEstimate,
}

/// The curve MN(t)/√t against the fixed-boundary reference λ√(2/π).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SqrtRatioCurve {
    pub points: Vec<RatioPoint>,
    pub reference: f64,
    /// one-sided z statistic of the last point against the reference
    pub z_last: f64,
    /// mean at the largest t exceeds the reference at level [`GATE_ALPHA`]
    pub lower_bound_exceeded: bool,
    /// max/min of the mean curve over the last decade of t is below 2 (informational)
    pub bounded: bool,
}

pub fn estimate_sqrt_ratio(reps: &ReplicaSet, t_grid: &[f64]) -> Result<SqrtRatioCurve, StatsError> {
    reps.check_subcritical()?;
    if reps.params.drift != 0.0 {
        return Err(StatsError::Precondition("the √t ratio is defined for zero drift".into()));
    }
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(StatsError::Precondition("ratio grid needs positive times".into()));
    }
    let reference = reps.params.lambda * (2.0 / std::f64::consts::PI).sqrt();
    let points: Vec<RatioPoint> = t_grid
        .iter()
        .map(|&t| {
            let xs: Vec<f64> = reps.iter().map(|(_, tr)| tr.n_at(t) as f64 / t.sqrt()).collect();
            RatioPoint { t, ratio: mean_estimate(&xs, reps.level) }
        })
        .collect();
    let last = &points[points.len() - 1].ratio;
    let z_last = (last.mean - reference) / last.stderr;
    let t_max = t_grid.iter().cloned().fold(0.0, f64::max);
    let tail: Vec<f64> = points.iter().filter(|p| p.t >= t_max / 10.0).map(|p| p.ratio.mean).collect();
    let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(SqrtRatioCurve {
        reference,
        z_last,
        lower_bound_exceeded: z_last > z_one_sided(GATE_ALPHA),
        bounded: lo > 0.0 && hi / lo < 2.0,
        points,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplosionEstimate {
    pub exploded: usize,
    pub n: usize,
    pub fraction: f64,
    pub wilson: Interval,
    pub level: f64,
    /// the Wilson lower bound is strictly positive
    pub positive: bool,
}

pub fn explosion_frequency(reps: &ReplicaSet, level: f64) -> ExplosionEstimate {
    let n = reps.len();
    let k = reps.exploded_count();
    let wilson = wilson_interval(k, n, level);
    ExplosionEstimate {
        exploded: k,
        n,
        fraction: if n == 0 { 0.0 } else { k as f64 / n as f64 },
        positive: wilson.lo > 0.0,
        wilson,
        level,
    }
}
