use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lpplab::WeightLaw;
use num_rational::Rational64;

#[derive(Parser, Debug)]
#[command(name = "lpplab", version, about = "Last-passage percolation experiments")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Master seed; every stage derives its own streams from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for replica loops (0 = all cores). Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Exit with status 1 when the command's verdict fails.
    #[arg(long = "assert", global = true)]
    pub assert_verdict: bool,
    /// Flat key=value file mirroring flag names. Flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Monte Carlo estimate of g(x, 1-x) against the exponential shape.
    Shape(ShapeArgs),
    /// Entropy-versus-rate criterion for a weight law.
    Criterion(CriterionArgs),
    /// Closed-form phi for Bernoulli(p) on [0, smax].
    Phi(PhiArgs),
    /// The Bernoulli threshold p*.
    Pstar,
    /// Busemann increment statistics.
    Busemann(BusemannArgs),
    /// Coarse-grid path counting and modification checks.
    Coarse(CoarseArgs),
    /// Legendre duals of shape slices.
    Legendre(LegendreArgs),
    /// Moments and rate function of a weight law.
    Dist(DistArgs),
}

pub fn parse_law(s: &str) -> Result<WeightLaw, String> {
    s.parse().map_err(|e: lpplab::LabError| e.to_string())
}

/// `p/q`, an integer, or a terminating decimal, kept exact.
pub fn parse_ratio(s: &str) -> Result<Rational64, String> {
    let s = s.trim();
    let bad = || format!("expected a rational like 3/2 or 0.5, got {s:?}");
    if s.contains('/') {
        return s.parse().map_err(|_| bad());
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 15 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let den = 10i64.pow(frac.len() as u32);
    let whole: i64 = if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| bad())? };
    let part: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let sign = if int.starts_with('-') { -1 } else { 1 };
    Ok(Rational64::new(whole * den + sign * part, den))
}

#[derive(Args, Debug)]
pub struct ShapeArgs {
    #[arg(long, default_value = "exp:rate=1", value_parser = parse_law)]
    pub law: WeightLaw,
    /// System size.
    #[arg(long = "N", default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub replicas: usize,
    /// Number of interior x points, x = i/(grid+1).
    #[arg(long, default_value_t = 33)]
    pub grid: usize,
}

#[derive(Args, Debug)]
pub struct CriterionArgs {
    #[command(subcommand)]
    pub sub: Option<CriterionSub>,
    #[arg(long, default_value = "bernoulli:p=0.7", value_parser = parse_law)]
    pub law: WeightLaw,
    /// Grid resolution: s = i/grid for 0 < i < grid.
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
}

#[derive(Subcommand, Debug)]
pub enum CriterionSub {
    /// Same as the top-level `pstar`.
    Pstar,
    /// Same as the top-level `phi`.
    Phi(PhiArgs),
}

#[derive(Args, Debug)]
pub struct PhiArgs {
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub smax: f64,
    /// Number of steps of [0, smax].
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusemannMode {
    Adjacent,
    Downright,
    Means,
    Variance,
}

#[derive(Args, Debug)]
pub struct BusemannArgs {
    #[arg(long, value_enum, default_value_t = BusemannMode::Adjacent)]
    pub mode: BusemannMode,
    #[arg(long, default_value = "exp:rate=1", value_parser = parse_law)]
    pub law: WeightLaw,
    /// Direction (1, s) of the horizon.
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    /// Horizon scale.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub replicas: usize,
    /// Last down/right index for `downright`.
    #[arg(long, default_value_t = 4)]
    pub kmax: usize,
    /// Down/right path length for `variance`.
    #[arg(long = "path-length", default_value_t = 50)]
    pub path_length: usize,
}

#[derive(Args, Debug)]
pub struct CoarseArgs {
    #[command(subcommand)]
    pub sub: CoarseSub,
}

#[derive(Subcommand, Debug)]
pub enum CoarseSub {
    /// Exact admissible-path count against the entropy bound.
    Enumerate(CoarseSpecArgs),
    /// Randomized checks of the path modification.
    VerifyModify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CoarseSpecArgs {
    #[arg(long = "N", default_value_t = 8)]
    pub n: i64,
    #[arg(long, default_value = "1", value_parser = parse_ratio)]
    pub s: Rational64,
    #[arg(long, default_value = "1", value_parser = parse_ratio)]
    pub r: Rational64,
    /// Line spacing.
    #[arg(long = "M", default_value_t = 4)]
    pub m: i64,
    /// Free-zone width.
    #[arg(long = "L", default_value_t = 2)]
    pub l: i64,
    /// Weight clamp b_N.
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub spec: CoarseSpecArgs,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value = "uniform:lo=-1,hi=1", value_parser = parse_law)]
    pub law: WeightLaw,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegendreMode {
    /// Slice to dual, with the negative-covariance verdict.
    Dual,
    /// Dual (from --input) back to a slice.
    Slice,
    /// Slice, dual and slice again.
    Roundtrip,
    /// Monte Carlo slice against the exponential shape.
    Compare,
}

#[derive(Args, Debug)]
pub struct LegendreArgs {
    #[arg(long, value_enum, default_value_t = LegendreMode::Dual)]
    pub mode: LegendreMode,
    #[arg(long, default_value = "exp:rate=1", value_parser = parse_law)]
    pub law: WeightLaw,
    /// CSV input: `s,gamma` for dual mode, `a,f` for slice mode.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output grid size.
    #[arg(long, default_value_t = 400)]
    pub grid: usize,
    /// System size for compare mode.
    #[arg(long = "N", default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub replicas: usize,
}

#[derive(Args, Debug)]
pub struct DistArgs {
    #[arg(long, default_value = "exp:rate=1", value_parser = parse_law)]
    pub law: WeightLaw,
    /// Number of rate evaluation points.
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    /// Draws for an empirical mean (0 = none).
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios() {
        assert_eq!(parse_ratio("3/2").unwrap(), Rational64::new(3, 2));
        assert_eq!(parse_ratio("0.25").unwrap(), Rational64::new(1, 4));
        assert_eq!(parse_ratio("-1.5").unwrap(), Rational64::new(-3, 2));
        assert_eq!(parse_ratio("2").unwrap(), Rational64::from_integer(2));
        assert!(parse_ratio("x").is_err());
        assert!(parse_ratio("1.2e3").is_err());
    }
}
