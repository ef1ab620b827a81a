//! `analytic`: evaluates the closed-form laws from the command line.

use std::collections::BTreeMap;
use std::io::Write;

use accrete_core::analytic as an;
use accrete_core::chains::branching_extinction_probability;
use clap::{Args, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Expr {
    /// P(max(v·s + w(s)) ≥ x over s ≤ t); needs x, v, t
    Tail,
    /// probability a particle from x hits a fixed boundary by t; needs x, v, t
    HitProb,
    /// mean hits on a fixed boundary by t, λ√(2t/π); needs lambda, t
    MeanHits,
    /// first-hit density at t from x; needs t, x
    FirstHit,
    /// killed transition density; needs t, x, y (and v for drift)
    Kernel,
    /// ψ(t, y); needs t, y
    Psi,
    /// density of the first event time; needs t, lambda
    TauDensity,
    /// CDF of the first event time; needs t, lambda
    TauCdf,
    /// median of the first event time; needs lambda
    TauMedian,
    /// σ(d); needs d
    SigmaConst,
    /// mean of K₀(t), λσ(d)√t; needs lambda, d, t
    K0Mean,
    /// limiting speed vδλ/(1 − δλ); needs lambda, delta, v
    Speed,
    /// expected hits from beyond a frontier; needs frontier, level, horizon, v, lambda
    TruncationMass,
    /// extinction probability of a Poisson(μ) branching process; needs mu
    Extinction,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyticArgs {
    #[arg(value_enum)]
    pub expr: Expr,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub x: Option<f64>,
    #[arg(long)]
    pub y: Option<f64>,
    /// drift
    #[arg(long, visible_alias = "drift")]
    pub v: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub frontier: Option<f64>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// emit CSV over VAR = start..stop (inclusive) with COUNT points
    #[arg(long, value_name = "VAR=START:STOP:COUNT")]
    pub table: Option<String>,
}

type Vars = BTreeMap<&'static str, f64>;

const VAR_NAMES: [&str; 11] = ["t", "x", "y", "v", "lambda", "delta", "d", "frontier", "level", "horizon", "mu"];

impl AnalyticArgs {
    fn vars(&self) -> Vars {
        let vals = [
            self.t, self.x, self.y, self.v, self.lambda, self.delta, self.d, self.frontier, self.level, self.horizon, self.mu,
        ];
        VAR_NAMES.iter().zip(vals).filter_map(|(&k, v)| v.map(|v| (k, v))).collect()
    }
}

fn get(vars: &Vars, name: &str) -> Result<f64, CliError> {
    vars.get(name).copied().ok_or_else(|| CliError::Usage(format!("this expression needs --{name}")))
}

pub fn eval(expr: Expr, vars: &Vars) -> Result<f64, CliError> {
    let g = |n: &str| get(vars, n);
    Ok(match expr {
        Expr::Tail => an::max_drifted_bm_tail(g("x")?, g("v")?, g("t")?)?,
        Expr::HitProb => an::hit_prob_fixed(g("x")?, g("v")?, g("t")?)?,
        Expr::MeanHits => an::mean_fixed_hits(g("lambda")?, g("t")?)?,
        Expr::FirstHit => an::first_hit_density(g("t")?, g("x")?)?,
        Expr::Kernel => match vars.get("v") {
            Some(&v) => an::survivor_kernel_drift(g("t")?, g("x")?, g("y")?, v)?,
            None => an::survivor_kernel(g("t")?, g("x")?, g("y")?)?,
        },
        Expr::Psi => an::survivor_rate(g("t")?, g("y")?)?,
        Expr::TauDensity => an::tau_density(g("t")?, g("lambda")?)?,
        Expr::TauCdf => {
            let lambda = g("lambda")?;
            if !(lambda > 0.0) {
                return Err(CliError::Usage("density must be positive".into()));
            }
            an::tau_cdf(g("t")?, lambda)
        }
        Expr::TauMedian => an::tau_median(g("lambda")?)?,
        Expr::SigmaConst => an::sigma_constant(g("d")?)?,
        Expr::K0Mean => an::k0_mean(g("lambda")?, g("d")?, g("t")?)?,
        Expr::Speed => an::asymptotic_speed(g("lambda")?, g("delta")?, g("v")?)?,
        Expr::TruncationMass => {
            an::truncation_tail_mass_closed(g("frontier")?, g("level")?, g("horizon")?, g("v")?, g("lambda")?)?
        }
        Expr::Extinction => {
            let mu = g("mu")?;
            if !(mu >= 0.0 && mu.is_finite()) {
                return Err(CliError::Usage("mu must be nonnegative and finite".into()));
            }
            branching_extinction_probability(mu)
        }
    })
}

/// `x` with 15 significant digits; fixed notation for moderate magnitudes.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..15).contains(&e) {
        format!("{:.*}", (14 - e) as usize, x)
    } else {
        format!("{x:.14e}")
    }
}

/// Parses `VAR=START:STOP:COUNT` into a variable name and its grid.
pub fn parse_table(spec: &str) -> Result<(&'static str, Vec<f64>), CliError> {
    let bad = || CliError::Usage(format!("--table expects VAR=START:STOP:COUNT, got {spec:?}"));
    let (var, range) = spec.split_once('=').ok_or_else(bad)?;
    let name = VAR_NAMES
        .iter()
        .copied()
        .find(|&n| n == var.trim())
        .ok_or_else(|| CliError::Usage(format!("unknown table variable {var:?}; expected one of {}", VAR_NAMES.join(", "))))?;
    let parts: Vec<&str> = range.split(':').collect();
    let [a, b, n] = parts[..] else { return Err(bad()) };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    let grid = (0..n)
        .map(|i| if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 })
        .collect();
    Ok((name, grid))
}

/// Prints one value, or a CSV table, to `out`.
pub fn analytic<W: Write>(args: &AnalyticArgs, out: &mut W) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::io(std::path::Path::new("<stdout>"), e);
    let mut vars = args.vars();
    match &args.table {
        None => writeln!(out, "{}", fmt_sig(eval(args.expr, &vars)?)).map_err(io),
        Some(spec) => {
            let (name, grid) = parse_table(spec)?;
            writeln!(out, "{name},value").map_err(io)?;
            for x in grid {
                vars.insert(name, x);
                writeln!(out, "{x},{}", fmt_sig(eval(args.expr, &vars)?)).map_err(io)?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(1.0), "1.00000000000000");
        assert_eq!(fmt_sig(0.682689492137086), "0.682689492137086");
        assert_eq!(fmt_sig(1.5e-9), "1.50000000000000e-9");
        assert_eq!(fmt_sig(0.0), "0");
    }

    #[test]
    fn table_grid() {
        let (n, g) = parse_table("t=1:2:3").unwrap();
        assert_eq!(n, "t");
        assert_eq!(g, vec![1.0, 1.5, 2.0]);
        assert!(parse_table("q=1:2:3").is_err());
        assert!(parse_table("t=1:2").is_err());
        assert!(parse_table("t=1:2:0").is_err());
    }

    #[test]
    fn missing_variable_named() {
        let e = eval(Expr::Psi, &Vars::from([("t", 1.0)])).unwrap_err();
        assert!(e.to_string().contains("--y"));
    }
}
