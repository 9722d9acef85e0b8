//! Grid-based Legendre duality between `γ(s) = g(1, s)` and
//! `f(a) = sup_{s>0} (γ(s) - s a)`, the covariance formula
//! `-σ² + (f(a) - m)(a - m)`, and shape comparison on the quadrant.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::lpp::{g_exp, ExpShapeParams, ShapeEstimate};
use crate::numeric::parabola_vertex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic,
    MonteCarlo,
}

/// Samples of `γ(s)` on an increasing grid of positive `s`, plus the weight
/// mean `m = γ(0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSlice {
    pub s_grid: Vec<f64>,
    pub gamma: Vec<f64>,
    pub provenance: Provenance,
    pub mean: f64,
    /// Per-point standard errors for Monte Carlo slices.
    pub stderr: Option<Vec<f64>>,
}

/// Samples of the dual `f(a)` on an increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualFunction {
    pub a_grid: Vec<f64>,
    pub f_values: Vec<f64>,
    pub mean: f64,
}

/// `count` log-spaced points from `lo` to `hi` (both positive).
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (l, h) = (lo.ln(), hi.ln());
    (0..count).map(|i| (l + (h - l) * i as f64 / (count - 1).max(1) as f64).exp()).collect()
}

fn check_grid(name: &str, grid: &[f64], values: usize) -> Result<()> {
    if grid.len() != values {
        return config(format!("{name} grid has {} points but {values} values", grid.len()));
    }
    if grid.len() < 3 {
        return config(format!("{name} grid needs at least 3 points"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return config(format!("{name} grid must be strictly increasing"));
    }
    Ok(())
}

impl ShapeSlice {
    pub fn new(s_grid: Vec<f64>, gamma: Vec<f64>, provenance: Provenance, mean: f64) -> Result<Self> {
        check_grid("s", &s_grid, gamma.len())?;
        if s_grid[0] <= 0.0 {
            return config("slice grids must lie in s > 0");
        }
        Ok(Self { s_grid, gamma, provenance, mean, stderr: None })
    }

    /// `γ(s) = m(1 + s) + 2σ√s`.
    pub fn exp_analytic(params: ExpShapeParams, s_grid: Vec<f64>) -> Result<Self> {
        let gamma = s_grid.iter().map(|&s| g_exp(params, 1.0, s)).collect();
        Self::new(s_grid, gamma, Provenance::Analytic, params.m)
    }

    /// Converts a shape profile `g(x, 1-x)` into `γ(s)` with `s = (1-x)/x`
    /// and `γ(s) = (1 + s) g(x, 1-x)`.
    pub fn from_profile(est: &ShapeEstimate) -> Result<Self> {
        let mut rows: Vec<(f64, f64, f64)> = est
            .x_grid
            .iter()
            .zip(&est.mean_over_n)
            .zip(&est.stderr)
            .map(|((&x, &g), &se)| {
                let s = (1.0 - x) / x;
                (s, (1.0 + s) * g, (1.0 + s) * se)
            })
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut slice = Self::new(
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| r.1).collect(),
            Provenance::MonteCarlo,
            est.law.moments().mean,
        )?;
        slice.stderr = Some(rows.iter().map(|r| r.2).collect());
        Ok(slice)
    }

    /// Every interior point lies on or above the chord of its neighbors, up to `tol`.
    pub fn is_concave(&self, tol: f64) -> bool {
        (1..self.s_grid.len() - 1).all(|i| {
            let (s0, s1, s2) = (self.s_grid[i - 1], self.s_grid[i], self.s_grid[i + 1]);
            let chord = self.gamma[i - 1] + (self.gamma[i + 1] - self.gamma[i - 1]) * (s1 - s0) / (s2 - s0);
            self.gamma[i] >= chord - tol
        })
    }

    /// Least concave majorant evaluated on the same grid.
    pub fn concave_majorant(&self) -> ShapeSlice {
        let hull = upper_hull(&self.s_grid, &self.gamma);
        let mut gamma = self.gamma.clone();
        for w in hull.windows(2) {
            let (i, j) = (w[0], w[1]);
            for (k, g) in gamma.iter_mut().enumerate().take(j).skip(i + 1) {
                let t = (self.s_grid[k] - self.s_grid[i]) / (self.s_grid[j] - self.s_grid[i]);
                *g = self.gamma[i] + t * (self.gamma[j] - self.gamma[i]);
            }
        }
        ShapeSlice { gamma, ..self.clone() }
    }

    /// Linear interpolation inside the grid; `m` at `s = 0`; `None` elsewhere.
    pub fn value_at(&self, s: f64) -> Option<f64> {
        if s == 0.0 {
            return Some(self.mean);
        }
        let g = &self.s_grid;
        if s < g[0] || s > *g.last()? {
            return None;
        }
        let j = g.partition_point(|&v| v < s);
        if g[j] == s {
            return Some(self.gamma[j]);
        }
        let t = (s - g[j - 1]) / (g[j] - g[j - 1]);
        Some(self.gamma[j - 1] + t * (self.gamma[j] - self.gamma[j - 1]))
    }

    /// `g(x, y)` through homogeneity and symmetry: `max(x,y) γ(min/max)`.
    pub fn eval_homogeneous(&self, x: f64, y: f64) -> Option<f64> {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        if hi == 0.0 {
            return Some(0.0);
        }
        Some(hi * self.value_at(lo / hi)?)
    }

    /// A dual grid covering the slopes of this slice: `a - m` log-spaced
    /// between the slope at the right end and the slope at the left end.
    pub fn dual_grid(&self, count: usize) -> Vec<f64> {
        let n = self.s_grid.len();
        let slope = |i: usize, j: usize| (self.gamma[j] - self.gamma[i]) / (self.s_grid[j] - self.s_grid[i]);
        let lo = (slope(n - 2, n - 1) - self.mean).max(1e-12);
        let hi = (slope(0, 1) - self.mean).max(lo * 2.0);
        log_grid(lo, hi, count).into_iter().map(|d| self.mean + d).collect()
    }
}

/// Indices of the upper convex hull of the points `(xs[i], ys[i])`, xs increasing.
fn upper_hull(xs: &[f64], ys: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // Drop b when it lies on or below the segment a -> i.
            let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Extremum of `values` refined by a parabola through the discrete optimum and
/// its neighbors. `sign = 1` for a maximum, `-1` for a minimum.
fn refined_extremum(grid: &[f64], values: &[f64], sign: f64) -> f64 {
    let (mut best, mut idx) = (f64::NEG_INFINITY, 0);
    for (i, &v) in values.iter().enumerate() {
        if sign * v > best {
            best = sign * v;
            idx = i;
        }
    }
    if idx > 0 && idx + 1 < values.len() {
        let p = |i: usize| (grid[i], sign * values[i]);
        if let Some((x, y)) = parabola_vertex(p(idx - 1), p(idx), p(idx + 1)) {
            if x >= grid[idx - 1] && x <= grid[idx + 1] && y.is_finite() {
                best = best.max(y);
            }
        }
    }
    sign * best
}

/// `f(a) = sup_{s>0} (γ(s) - s a)` on `a_grid`; `+inf` for `a <= m`. Monte
/// Carlo slices are replaced by their concave majorant first.
pub fn dual_from_slice(slice: &ShapeSlice, a_grid: &[f64]) -> DualFunction {
    let reg;
    let slice = if slice.provenance == Provenance::MonteCarlo {
        reg = slice.concave_majorant();
        &reg
    } else {
        slice
    };
    let f_values = a_grid
        .iter()
        .map(|&a| {
            if a <= slice.mean {
                return f64::INFINITY;
            }
            let vals: Vec<f64> = slice.s_grid.iter().zip(&slice.gamma).map(|(&s, &g)| g - s * a).collect();
            // The limit s -> 0 contributes γ(0) = m.
            refined_extremum(&slice.s_grid, &vals, 1.0).max(slice.mean)
        })
        .collect();
    DualFunction { a_grid: a_grid.to_vec(), f_values, mean: slice.mean }
}

/// `γ(s) = inf_{a>m} (s a + f(a))` on `s_grid`; `γ(0) = m`.
pub fn slice_from_dual(dual: &DualFunction, s_grid: &[f64]) -> Result<ShapeSlice> {
    let finite: Vec<(f64, f64)> = dual
        .a_grid
        .iter()
        .zip(&dual.f_values)
        .filter(|(a, f)| **a > dual.mean && f.is_finite())
        .map(|(&a, &f)| (a, f))
        .collect();
    if finite.len() < 3 {
        return config("dual needs at least 3 finite points above the mean");
    }
    let (ag, fv): (Vec<f64>, Vec<f64>) = finite.into_iter().unzip();
    let gamma = s_grid
        .iter()
        .map(|&s| {
            if s == 0.0 {
                return dual.mean;
            }
            let vals: Vec<f64> = ag.iter().zip(&fv).map(|(&a, &f)| s * a + f).collect();
            refined_extremum(&ag, &vals, -1.0)
        })
        .collect();
    Ok(ShapeSlice {
        s_grid: s_grid.to_vec(),
        gamma,
        provenance: Provenance::Analytic,
        mean: dual.mean,
        stderr: None,
    })
}

/// `Cov(B(e2,0), B(0,e1))` expressed through the dual: `-σ² + (f(a) - m)(a - m)`.
pub fn cov_from_dual(m: f64, sigma: f64, f_a: f64, a: f64) -> f64 {
    -sigma * sigma + (f_a - m) * (a - m)
}

/// The exponential dual `m + σ²/(a - m)`.
pub fn exp_dual(m: f64, sigma: f64, a: f64) -> f64 {
    if a <= m {
        f64::INFINITY
    } else {
        m + sigma * sigma / (a - m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovSign {
    /// `f <= m + σ²/(a-m)` everywhere, strictly somewhere.
    Negative,
    /// Equality everywhere within tolerance.
    Boundary,
    /// The reversed inequality everywhere, strictly somewhere.
    Positive,
    /// Both strict inequalities occur.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub a: f64,
    pub f: f64,
    pub bound: f64,
    /// `f <= bound + tol`.
    pub le: bool,
    /// `f >= bound - tol`.
    pub ge: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegCovReport {
    pub points: Vec<BoundCheck>,
    pub verdict: CovSign,
}

/// Pointwise test of `f(a) <= m + σ²/(a - m)` and its reverse.
pub fn neg_cov_condition(dual: &DualFunction, m: f64, sigma: f64, tol: f64) -> NegCovReport {
    let points: Vec<BoundCheck> = dual
        .a_grid
        .iter()
        .zip(&dual.f_values)
        .filter(|(a, _)| **a > m)
        .map(|(&a, &f)| {
            let bound = exp_dual(m, sigma, a);
            BoundCheck { a, f, bound, le: f <= bound + tol, ge: f >= bound - tol }
        })
        .collect();
    let all_le = points.iter().all(|p| p.le);
    let all_ge = points.iter().all(|p| p.ge);
    let verdict = match (all_le, all_ge) {
        (true, true) => CovSign::Boundary,
        (true, false) => CovSign::Negative,
        (false, true) => CovSign::Positive,
        (false, false) => CovSign::Mixed,
    };
    NegCovReport { points, verdict }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    /// `γ1 <= γ2 + slack` at every grid point, hence `g1 <= g2` on the quadrant.
    pub dominates: bool,
    /// Largest `γ1 - γ2 - slack` over the grid.
    pub max_violation: f64,
    pub argmax_s: f64,
}

/// Checks `γ1(s) <= γ2(s)` on a common grid inside `(0, 1)`; by homogeneity
/// and symmetry this extends to `g1 <= g2` on the whole quadrant. `slack`
/// loosens each comparison (e.g. three standard errors of a Monte Carlo slice).
pub fn compare_shapes(slice1: &ShapeSlice, slice2: &ShapeSlice, slack: Option<&[f64]>) -> Result<Dominance> {
    if slice1.s_grid != slice2.s_grid {
        return config("slices must share the same s grid");
    }
    if slice1.s_grid.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
        return config("comparison grid must lie inside (0, 1)");
    }
    if let Some(sl) = slack {
        if sl.len() != slice1.s_grid.len() {
            return config("slack must have one entry per grid point");
        }
    }
    let (mut worst, mut at) = (f64::NEG_INFINITY, slice1.s_grid[0]);
    for (i, &s) in slice1.s_grid.iter().enumerate() {
        let v = slice1.gamma[i] - slice2.gamma[i] - slack.map_or(0.0, |sl| sl[i]);
        if v > worst {
            worst = v;
            at = s;
        }
    }
    Ok(Dominance { dominates: worst <= 0.0, max_violation: worst, argmax_s: at })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cov_arithmetic() {
        assert_eq!(cov_from_dual(1.0, 1.0, 3.0, 2.0), 1.0);
        assert_eq!(cov_from_dual(1.0, 2.0, 1.0, 5.0), -4.0);
    }

    #[test]
    fn hull_of_nonconcave_points() {
        let s = ShapeSlice::new(vec![1.0, 2.0, 3.0, 4.0], vec![0.0, -1.0, 1.0, 0.5], Provenance::MonteCarlo, 0.0).unwrap();
        let h = s.concave_majorant();
        assert_eq!(h.gamma, vec![0.0, 0.5, 1.0, 0.5]);
        assert!(h.is_concave(0.0));
        assert!(!s.is_concave(0.0));
    }

    #[test]
    fn linear_shape_has_flat_dual() {
        let grid = log_grid(1e-3, 1e3, 500);
        let gamma = grid.iter().map(|s| 0.7 * (1.0 + s)).collect();
        let slice = ShapeSlice::new(grid, gamma, Provenance::Analytic, 0.7).unwrap();
        let d = dual_from_slice(&slice, &[0.8, 1.5, 4.0]);
        assert!(d.f_values.iter().all(|&f| (f - 0.7).abs() < 1e-12));
        assert!(dual_from_slice(&slice, &[0.7]).f_values[0].is_infinite());
    }
}
