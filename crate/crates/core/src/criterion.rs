//! The entropy-versus-rate criterion `φ(s) = ln4 · s/(1+s) - I(g_Exp(1,s)/(1+s))`
//! for general laws, its K-bound variant, and the closed-form Bernoulli analysis
//! with the threshold `s*(p)` and the root `p*`.

use serde::{Deserialize, Serialize};

use crate::distributions::WeightLaw;
use crate::error::{config, LabError, Result};
use crate::lpp::{g_exp, ExpShapeParams};
use crate::numeric::bisect;

pub use crate::numeric::binary_entropy as entropy;

const LN4: f64 = std::f64::consts::LN_2 * 2.0;

fn entropy_term(s: f64) -> f64 {
    LN4 * s / (1.0 + s)
}

fn check_s(s: f64) -> Result<()> {
    if !(s >= 0.0) || !s.is_finite() {
        return config(format!("direction s must be finite and nonnegative, got {s}"));
    }
    Ok(())
}

/// `ln4 · s/(1+s) - I(g_Exp(1,s)/(1+s))` with the law's own `m` and `σ`;
/// `-inf` where the rate is infinite.
pub fn phi_general(law: &WeightLaw, s: f64) -> Result<f64> {
    check_s(s)?;
    let a = g_exp(ExpShapeParams::from_law(law), 1.0, s) / (1.0 + s);
    let rate = law.rate(a)?.value;
    Ok(entropy_term(s) - rate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    /// `φ < 0` at every grid and refinement point.
    Holds,
    /// Points where `φ >= 0`.
    Fails { at: Vec<f64> },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub law: WeightLaw,
    pub s_grid: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub phi: Vec<f64>,
    /// Extra points evaluated near sign changes, as `(s, φ(s))`.
    pub refined: Vec<(f64, f64)>,
    pub verdict: Verdict,
    /// Point with the largest `φ`.
    pub worst_s: f64,
    pub worst_phi: f64,
}

const REFINE_POINTS: usize = 32;

/// Evaluates `φ` at `s = i/resolution`, `0 < i < resolution`, and refines
/// around points where `|φ|` is within ten grid steps of the local slope.
pub fn check_criterion(law: &WeightLaw, resolution: usize) -> Result<CriterionReport> {
    if resolution < 100 {
        return config(format!("criterion grid needs at least 100 intervals, got {resolution}"));
    }
    let params = ExpShapeParams::from_law(law);
    let h = 1.0 / resolution as f64;
    let s_grid: Vec<f64> = (1..resolution).map(|i| i as f64 * h).collect();
    let mut lhs = Vec::with_capacity(s_grid.len());
    let mut rhs = Vec::with_capacity(s_grid.len());
    for &s in &s_grid {
        lhs.push(entropy_term(s));
        rhs.push(law.rate(g_exp(params, 1.0, s) / (1.0 + s))?.value);
    }
    let phi: Vec<f64> = lhs.iter().zip(&rhs).map(|(l, r)| l - r).collect();

    let mut refined = Vec::new();
    for i in 0..phi.len() {
        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(phi.len() - 1));
        let slope = (phi[hi] - phi[lo]) / (s_grid[hi] - s_grid[lo]);
        let near = phi[i].is_finite() && phi[i].abs() < 10.0 * h * if slope.is_finite() { slope.abs() } else { 0.0 };
        // Sign changes and jumps to -inf also get a closer look.
        let jump = i + 1 < phi.len() && (phi[i] < 0.0) != (phi[i + 1] < 0.0);
        if near || jump {
            let (a, b) = (s_grid[i] - h, s_grid[i] + h);
            for k in 1..REFINE_POINTS {
                let s = a + (b - a) * k as f64 / REFINE_POINTS as f64;
                if s > 0.0 && s < 1.0 {
                    refined.push((s, phi_general(law, s)?));
                }
            }
        }
    }

    let all = s_grid.iter().copied().zip(phi.iter().copied()).chain(refined.iter().copied());
    let mut failing: Vec<f64> = Vec::new();
    let (mut worst_s, mut worst_phi) = (s_grid[0], f64::NEG_INFINITY);
    for (s, v) in all {
        if !(v < 0.0) {
            failing.push(s);
        }
        if v > worst_phi || worst_phi == f64::NEG_INFINITY && v.is_nan() {
            worst_s = s;
            worst_phi = v;
        }
    }
    failing.sort_by(f64::total_cmp);
    failing.dedup();
    let verdict = if failing.is_empty() { Verdict::Holds } else { Verdict::Fails { at: failing } };
    Ok(CriterionReport { law: *law, s_grid, lhs, rhs, phi, refined, verdict, worst_s, worst_phi })
}

/// `ln4 · s/(1+s) < I(K/(1+s))`; when true, `g(1,s) <= K`.
pub fn k_bound_check(law: &WeightLaw, s: f64, k: f64) -> Result<bool> {
    if !(s > 0.0) || !s.is_finite() {
        return config(format!("k-bound needs s > 0, got {s}"));
    }
    let m = law.moments().mean;
    if !(k > m) {
        return config(format!("k-bound needs K > m = {m}, got {k}"));
    }
    Ok(entropy_term(s) < law.rate(k / (1.0 + s))?.value)
}

/// `u_s = 2σ√s/(1+s)` for Bernoulli(p).
pub fn u_s(p: f64, s: f64) -> f64 {
    2.0 * (p * (1.0 - p)).sqrt() * s.sqrt() / (1.0 + s)
}

/// Closed form `ln4 · s/(1+s) + H(p+u_s) + u_s ln(p/(1-p)) - H(p)`, and `-inf`
/// once `p + u_s >= 1`.
pub fn phi_bernoulli(p: f64, s: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return config(format!("Bernoulli parameter must lie in (0, 1), got {p}"));
    }
    check_s(s)?;
    let u = u_s(p, s);
    if p + u >= 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(entropy_term(s) + entropy(p + u) + u * (p / (1.0 - p)).ln() - entropy(p))
}

/// The direction where `p + u_s` reaches 1:
/// `s*(p) = (1 - 3p + 2√(p(2p-1)))/(p - 1)` for `p` in `(1/2, 1)`.
pub fn s_star(p: f64) -> Result<f64> {
    if !(p > 0.5 && p < 1.0) {
        return Err(LabError::Domain(format!("s*(p) needs p in (1/2, 1), got {p}")));
    }
    Ok((1.0 - 3.0 * p + 2.0 * (p * (2.0 * p - 1.0)).sqrt()) / (p - 1.0))
}

/// `s*(p)` found by bisection on `p + u_s - 1` over `(0, 1]`.
pub fn s_star_bisect(p: f64) -> Result<f64> {
    s_star(p)?;
    bisect(|s| p + u_s(p, s) - 1.0, 0.0, 1.0, 1e-15)
}

fn threshold_map(p: f64) -> f64 {
    (1.0 + p) / (1.0 + s_star(p).unwrap_or(f64::NAN))
}

const MONOTONE_CHECK_POINTS: usize = 1000;

/// The unique root of `ln4 = (1+p)/(1+s*(p))` in `(1/2, 1)`. The map is
/// checked to be increasing on a fine grid before bisecting.
pub fn p_star() -> Result<f64> {
    let grid: Vec<f64> =
        (1..MONOTONE_CHECK_POINTS).map(|i| 0.5 + 0.5 * i as f64 / MONOTONE_CHECK_POINTS as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&p| threshold_map(p)).collect();
    if let Some(w) = vals.windows(2).position(|w| !(w[0] < w[1])) {
        return Err(LabError::Domain(format!("(1+p)/(1+s*(p)) is not increasing near p = {}", grid[w])));
    }
    bisect(|p| threshold_map(p) - LN4, grid[0], grid[grid.len() - 1], 1e-12)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliAnalysis {
    pub p: f64,
    /// `None` for `p <= 1/2`, where `p + u_s < 1` on all of `(0, 1)`.
    pub s_star: Option<f64>,
    pub phi_grid: Vec<(f64, f64)>,
    pub p_star: f64,
    /// `p > p*`: the proven regime.
    pub proven: bool,
    /// `φ < 0` at every interior grid point.
    pub grid_holds: bool,
}

/// `φ` for Bernoulli(p) on `points` uniform steps of `[0, s_max]`, with `s*` and `p*`.
pub fn bernoulli_analysis(p: f64, s_max: f64, points: usize) -> Result<BernoulliAnalysis> {
    if points < 2 || !(s_max > 0.0) {
        return config("phi grid needs at least 2 points and s_max > 0");
    }
    let phi_grid = (0..=points)
        .map(|i| {
            let s = s_max * i as f64 / points as f64;
            phi_bernoulli(p, s).map(|v| (s, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let ps = p_star()?;
    let grid_holds = phi_grid.iter().filter(|(s, _)| *s > 0.0 && *s < 1.0).all(|(_, v)| *v < 0.0);
    Ok(BernoulliAnalysis {
        p,
        s_star: s_star(p).ok(),
        phi_grid,
        p_star: ps,
        proven: p > ps,
        grid_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_term_at_one() {
        assert!((entropy_term(1.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn verdict_flag() {
        assert!(Verdict::Holds.holds());
        assert!(!Verdict::Fails { at: vec![0.5] }.holds());
    }
}
