//! Finite-horizon Busemann increments `B_n(x, y) = G(x, t_n) - G(y, t_n)`.
//!
//! Coordinates are relative to the base point `0`. A field covers the
//! rectangle `[-margin_left, t.x] x [-margin_below, t.y]` where
//! `t = t_n = ([n/(1+s)], [ns/(1+s)])`. Weights are drawn one row at a time,
//! each row from its own stream, first for `x = 0..=t.x` and then for
//! `x = -1, -2, ...`; the weight at a given relative site therefore does not
//! depend on the margins, and fields with different margins agree wherever
//! they overlap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{Sampler, WeightLaw};
use crate::error::{config, Result};
use crate::lattice::{LatticePath, Point, Step};
use crate::lpp::cell_count;
use crate::rng::StreamFamily;

const LABEL: &str = "busemann";

/// `t_n` on the ray of slope `s`.
pub fn horizon_target(n: usize, s: f64) -> Point {
    let nf = n as f64;
    let x = (nf / (1.0 + s) + 1e-9).floor() as i64;
    let y = (nf * s / (1.0 + s) + 1e-9).floor() as i64;
    Point::new(x, y)
}

/// `v_k` of the staircase down/right path: `e1` on odd steps, `-e2` on even.
pub fn downright_vertex(k: usize) -> Point {
    Point::new(k.div_ceil(2) as i64, -((k / 2) as i64))
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    target: Point,
    margin_left: usize,
    margin_below: usize,
}

impl Geometry {
    fn width(&self) -> usize {
        self.target.x as usize + 1 + self.margin_left
    }

    fn height(&self) -> usize {
        self.target.y as usize + 1 + self.margin_below
    }
}

fn row_stream_index(y_rel: i64) -> u64 {
    (y_rel + (1i64 << 40)) as u64
}

/// Fills `buf` (local x order) with the weights of row `y_rel`.
fn draw_row(sampler: &Sampler, family: StreamFamily, geom: &Geometry, y_rel: i64, buf: &mut [f64]) {
    let mut rng = family.stream(row_stream_index(y_rel));
    let ml = geom.margin_left;
    for w in buf[ml..].iter_mut() {
        *w = sampler.draw(&mut rng);
    }
    for local in (0..ml).rev() {
        buf[local] = sampler.draw(&mut rng);
    }
}

/// Reverse DP for one row given the row above (`None` on the top row).
#[inline]
fn reverse_row(above: Option<&[f64]>, weights: &[f64], row: &mut [f64]) {
    let mut right = f64::NEG_INFINITY;
    for i in (0..weights.len()).rev() {
        let up = above.map_or(f64::NEG_INFINITY, |a| a[i]);
        let best = right.max(up);
        let v = weights[i] + if best == f64::NEG_INFINITY { 0.0 } else { best };
        row[i] = v;
        right = v;
    }
}

/// Rows `y_rel = -margin_below ..= keep_top` of `G(·, t)` (bottom first),
/// computed with O(width) working memory.
fn lean_rows(sampler: &Sampler, family: StreamFamily, geom: &Geometry, keep_top: i64) -> Vec<Vec<f64>> {
    let w = geom.width();
    let bottom = -(geom.margin_below as i64);
    let mut weights = vec![0.0; w];
    let mut above = vec![0.0; w];
    let mut row = vec![0.0; w];
    let mut kept = Vec::new();
    for y in (bottom..=geom.target.y).rev() {
        draw_row(sampler, family, geom, y, &mut weights);
        reverse_row((y < geom.target.y).then_some(&above[..]), &weights, &mut row);
        if y <= keep_top {
            kept.push(row.clone());
        }
        std::mem::swap(&mut above, &mut row);
    }
    kept.reverse();
    kept
}

/// Stored reverse passage values `G(x, t_n)` on the field rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct BusemannField {
    /// `None` for fields built from explicit weights.
    pub law: Option<WeightLaw>,
    pub s: f64,
    pub n: usize,
    pub seed: u64,
    pub target: Point,
    pub margin_left: usize,
    pub margin_below: usize,
    width: usize,
    weights: Vec<f64>,
    values: Vec<f64>,
}

fn check_direction(s: f64, n: usize) -> Result<Point> {
    if !(s > 0.0 && s.is_finite()) {
        return config(format!("direction s must be positive, got {s}"));
    }
    if n < 4 {
        return config(format!("horizon n must be at least 4, got {n}"));
    }
    let t = horizon_target(n, s);
    if t.x < 1 || t.y < 1 {
        return config(format!("horizon n = {n} too small for s = {s}: target {t}"));
    }
    Ok(t)
}

impl BusemannField {
    pub fn new(law: &WeightLaw, s: f64, n: usize, seed: u64) -> Result<Self> {
        Self::with_margins(law, s, n, seed, 0, 0)
    }

    /// Field extended `margin_left` columns left and `margin_below` rows below
    /// the base point.
    pub fn with_margins(
        law: &WeightLaw,
        s: f64,
        n: usize,
        seed: u64,
        margin_left: usize,
        margin_below: usize,
    ) -> Result<Self> {
        Self::replica(law, s, n, seed, 0, margin_left, margin_below)
    }

    /// The field of replica `r` as used by the covariance estimators
    /// (replica 0 is the field returned by [`BusemannField::new`]).
    pub fn replica(
        law: &WeightLaw,
        s: f64,
        n: usize,
        seed: u64,
        r: u64,
        margin_left: usize,
        margin_below: usize,
    ) -> Result<Self> {
        let target = check_direction(s, n)?;
        let geom = Geometry { target, margin_left, margin_below };
        let (w, h) = (geom.width(), geom.height());
        let mut weights = vec![0.0; cell_count(w, h)?];
        let sampler = law.sampler();
        let family = StreamFamily::new(seed, LABEL).replica(r);
        for local_y in 0..h {
            let y_rel = local_y as i64 - geom.margin_below as i64;
            draw_row(&sampler, family, &geom, y_rel, &mut weights[local_y * w..(local_y + 1) * w]);
        }
        let mut field = Self::assemble(geom, weights, s, n, seed);
        field.law = Some(*law);
        Ok(field)
    }

    /// Field over `[-margin_left, target.x] x [-margin_below, target.y]` with
    /// explicit weights.
    pub fn from_weights<F: Fn(Point) -> f64>(
        target: Point,
        margin_left: usize,
        margin_below: usize,
        weight: F,
    ) -> Result<Self> {
        if target.x < 0 || target.y < 0 {
            return config(format!("target {target} must lie in the first quadrant"));
        }
        let geom = Geometry { target, margin_left, margin_below };
        let (w, h) = (geom.width(), geom.height());
        cell_count(w, h)?;
        let mut weights = Vec::with_capacity(w * h);
        for ly in 0..h {
            for lx in 0..w {
                weights.push(weight(Point::new(lx as i64 - margin_left as i64, ly as i64 - margin_below as i64)));
            }
        }
        let n = (target.x + target.y) as usize;
        let s = if target.x > 0 { target.y as f64 / target.x as f64 } else { f64::INFINITY };
        Ok(Self::assemble(geom, weights, s, n, 0))
    }

    fn assemble(geom: Geometry, weights: Vec<f64>, s: f64, n: usize, seed: u64) -> Self {
        let (w, h) = (geom.width(), geom.height());
        let mut values = vec![0.0; w * h];
        for local_y in (0..h).rev() {
            let (lower, upper) = values.split_at_mut((local_y + 1) * w);
            let above = (local_y + 1 < h).then(|| &upper[..w]);
            reverse_row(above, &weights[local_y * w..(local_y + 1) * w], &mut lower[local_y * w..]);
        }
        Self {
            law: None,
            s,
            n,
            seed,
            target: geom.target,
            margin_left: geom.margin_left,
            margin_below: geom.margin_below,
            width: w,
            weights,
            values,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= -(self.margin_left as i64)
            && p.y >= -(self.margin_below as i64)
            && p.x <= self.target.x
            && p.y <= self.target.y
    }

    fn index(&self, p: Point) -> Option<usize> {
        self.contains(p).then(|| {
            let lx = (p.x + self.margin_left as i64) as usize;
            let ly = (p.y + self.margin_below as i64) as usize;
            ly * self.width + lx
        })
    }

    /// `G(p, t_n)`.
    pub fn g(&self, p: Point) -> Option<f64> {
        self.index(p).map(|i| self.values[i])
    }

    pub fn weight(&self, p: Point) -> Option<f64> {
        self.index(p).map(|i| self.weights[i])
    }

    /// `B_n(x, y) = G(x, t_n) - G(y, t_n)`.
    pub fn b(&self, x: Point, y: Point) -> Option<f64> {
        Some(self.g(x)? - self.g(y)?)
    }

    /// All sites of the rectangle.
    pub fn sites(&self) -> impl Iterator<Item = Point> + '_ {
        let (x0, y0) = (-(self.margin_left as i64), -(self.margin_below as i64));
        (y0..=self.target.y).flat_map(move |y| (x0..=self.target.x).map(move |x| Point::new(x, y)))
    }

    /// Arrow `α(x)`: the step whose Busemann increment is smaller, i.e. the
    /// successor with larger `G(·, t_n)`; ties go to `e1`. `None` at `t_n`.
    pub fn arrow(&self, p: Point) -> Option<Step> {
        if p == self.target || !self.contains(p) {
            return None;
        }
        if p.x == self.target.x {
            return Some(Step::Up);
        }
        if p.y == self.target.y {
            return Some(Step::Right);
        }
        let right = self.g(p.step(Step::Right))?;
        let up = self.g(p.step(Step::Up))?;
        Some(if right >= up { Step::Right } else { Step::Up })
    }
}

/// Up/right path from `start` to `t_n` following the arrows; a geodesic for
/// the realized weights.
pub fn follow_arrows(field: &BusemannField, start: Point) -> Result<LatticePath> {
    if !field.contains(start) {
        return config(format!("start {start} lies outside the field"));
    }
    let mut steps = Vec::new();
    let mut p = start;
    while let Some(step) = field.arrow(p) {
        steps.push(step);
        p = p.step(step);
    }
    Ok(LatticePath::new(start, steps))
}

/// Passage time of a path inside the field, summed from the far end so the
/// floating-point order matches the reverse DP.
pub fn path_passage_time(field: &BusemannField, path: &LatticePath) -> Option<f64> {
    let vs = path.vertices();
    let mut acc = 0.0;
    for (k, v) in vs.iter().rev().enumerate() {
        let w = field.weight(*v)?;
        acc = if k == 0 { w } else { w + acc };
    }
    Some(acc)
}

/// Covariance estimate between two Busemann increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementCovReport {
    pub pair: (String, String),
    /// Down/right path index, when the pair involves `B(v_k, v_{k+1})`.
    pub k: Option<usize>,
    pub cov: f64,
    /// Jackknife standard error; `+inf` with fewer than 3 replicas.
    pub stderr: f64,
    pub replicas: usize,
    pub n: usize,
    pub s: f64,
    /// `cov <= 3 * stderr`, reported only when `replicas >= 100`.
    pub consistent_nonpositive: Option<bool>,
}

/// Replica count below which no verdict is attached.
pub const MIN_VERDICT_REPLICAS: usize = 100;

/// Sample covariance with delete-one jackknife standard error.
pub fn covariance_jackknife(u: &[f64], v: &[f64]) -> (f64, f64) {
    let r = u.len();
    let rf = r as f64;
    let mu = u.iter().sum::<f64>() / rf;
    let mv = v.iter().sum::<f64>() / rf;
    // Centered sums keep the leave-one-out updates well conditioned.
    let du: Vec<f64> = u.iter().map(|x| x - mu).collect();
    let dv: Vec<f64> = v.iter().map(|x| x - mv).collect();
    let suv: f64 = du.iter().zip(&dv).map(|(a, b)| a * b).sum();
    let cov = suv / (rf - 1.0);
    if r < 3 {
        return (cov, f64::INFINITY);
    }
    let m = rf - 1.0;
    let loo: Vec<f64> = du
        .iter()
        .zip(&dv)
        .map(|(a, b)| {
            // Sums over the other m points: sum du = -a, sum dv = -b.
            let s = suv - a * b;
            (s - (-a) * (-b) / m) / (m - 1.0)
        })
        .collect();
    let mean_loo = loo.iter().sum::<f64>() / rf;
    let var = loo.iter().map(|c| (c - mean_loo) * (c - mean_loo)).sum::<f64>() * (rf - 1.0) / rf;
    (cov, var.sqrt())
}

fn cov_report(label: (&str, &str), k: Option<usize>, u: &[f64], v: &[f64], n: usize, s: f64) -> IncrementCovReport {
    let (cov, stderr) = covariance_jackknife(u, v);
    let replicas = u.len();
    IncrementCovReport {
        pair: (label.0.to_string(), label.1.to_string()),
        k,
        cov,
        stderr,
        replicas,
        n,
        s,
        consistent_nonpositive: (replicas >= MIN_VERDICT_REPLICAS).then_some(cov <= 3.0 * stderr),
    }
}

/// Per-replica rows `y = -margin_below ..= 1` of `G(·, t_n)`, replicas in order.
fn replica_rows(
    law: &WeightLaw,
    s: f64,
    n: usize,
    replicas: usize,
    seed: u64,
    margin_below: usize,
) -> Result<(Geometry, Vec<Vec<Vec<f64>>>)> {
    if replicas < 2 {
        return config(format!("need at least 2 replicas, got {replicas}"));
    }
    let target = check_direction(s, n)?;
    let geom = Geometry { target, margin_left: 0, margin_below };
    cell_count(geom.width(), 2)?;
    let sampler = law.sampler();
    let family = StreamFamily::new(seed, LABEL);
    let rows = (0..replicas)
        .into_par_iter()
        .map(|r| lean_rows(&sampler, family.replica(r as u64), &geom, 1))
        .collect();
    Ok((geom, rows))
}

/// `G(p, t_n)` from rows produced by [`replica_rows`].
fn row_value(rows: &[Vec<f64>], geom: &Geometry, p: Point) -> f64 {
    rows[(p.y + geom.margin_below as i64) as usize][(p.x + geom.margin_left as i64) as usize]
}

/// Covariance of `B_n(e2, 0)` and `B_n(0, e1)` over independent fields.
pub fn adjacent_cov(law: &WeightLaw, s: f64, n: usize, replicas: usize, seed: u64) -> Result<IncrementCovReport> {
    let (geom, rows) = replica_rows(law, s, n, replicas, seed, 0)?;
    let (e1, e2) = (Point::new(1, 0), Point::new(0, 1));
    let g = |r: &Vec<Vec<f64>>, p| row_value(r, &geom, p);
    let u: Vec<f64> = rows.iter().map(|r| g(r, e2) - g(r, Point::ORIGIN)).collect();
    let v: Vec<f64> = rows.iter().map(|r| g(r, Point::ORIGIN) - g(r, e1)).collect();
    Ok(cov_report(("B(e2,0)", "B(0,e1)"), None, &u, &v, n, s))
}

/// Covariances along the staircase down/right path: `B_n(e2, 0)` against
/// `B_n(v_k, v_{k+1})` for `k = 0..=k_max`, then `B_n(0, e1)` against the same
/// increments for `k = 1..=k_max`. Both families share the replicas.
pub fn downright_cov(
    law: &WeightLaw,
    s: f64,
    n: usize,
    k_max: usize,
    replicas: usize,
    seed: u64,
) -> Result<Vec<IncrementCovReport>> {
    if k_max < 1 {
        return config("k_max must be at least 1");
    }
    let margin_below = k_max.div_ceil(2);
    let (geom, rows) = replica_rows(law, s, n, replicas, seed, margin_below)?;
    if downright_vertex(k_max + 1).x > geom.target.x {
        return config(format!("down/right path of length {} does not fit the field", k_max + 1));
    }
    let g = |r: &Vec<Vec<f64>>, p| row_value(r, &geom, p);
    let (e1, e2) = (Point::new(1, 0), Point::new(0, 1));
    let a: Vec<f64> = rows.iter().map(|r| g(r, e2) - g(r, Point::ORIGIN)).collect();
    let b: Vec<f64> = rows.iter().map(|r| g(r, Point::ORIGIN) - g(r, e1)).collect();
    let inc = |k: usize| -> Vec<f64> {
        let (p, q) = (downright_vertex(k), downright_vertex(k + 1));
        rows.iter().map(|r| g(r, p) - g(r, q)).collect()
    };
    let mut out = Vec::new();
    for k in 0..=k_max {
        out.push(cov_report(("B(e2,0)", "B(v_k,v_k+1)"), Some(k), &a, &inc(k), n, s));
    }
    for k in 1..=k_max {
        out.push(cov_report(("B(0,e1)", "B(v_k,v_k+1)"), Some(k), &b, &inc(k), n, s));
    }
    Ok(out)
}

/// Empirical mean with its standard error and a comparison value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCheck {
    pub estimate: f64,
    pub stderr: f64,
    pub reference: f64,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let r = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / r;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (r - 1.0);
    (m, (var / r).sqrt())
}

/// Means of `B_n(0, e1)` and `B_n(0, e2)` against the gradient of the
/// exponential-type shape at `(1, s)`: `(m + σ√s, m + σ/√s)`. The reference
/// is exact only for exponential and geometric weights.
pub fn increment_mean_check(
    law: &WeightLaw,
    s: f64,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<(MeanCheck, MeanCheck)> {
    let (geom, rows) = replica_rows(law, s, n, replicas, seed, 0)?;
    let g = |r: &Vec<Vec<f64>>, p| row_value(r, &geom, p);
    let b1: Vec<f64> = rows.iter().map(|r| g(r, Point::ORIGIN) - g(r, Point::new(1, 0))).collect();
    let b2: Vec<f64> = rows.iter().map(|r| g(r, Point::ORIGIN) - g(r, Point::new(0, 1))).collect();
    let mom = law.moments();
    let (m1, s1) = mean_se(&b1);
    let (m2, s2) = mean_se(&b2);
    Ok((
        MeanCheck { estimate: m1, stderr: s1, reference: mom.mean + mom.sd * s.sqrt() },
        MeanCheck { estimate: m2, stderr: s2, reference: mom.mean + mom.sd / s.sqrt() },
    ))
}

/// Outcome of comparing `Var(B(0, v_N))` with `N Var(B(0, v_1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceBound {
    pub lhs: f64,
    pub rhs: f64,
    /// Jackknife standard error of `lhs / rhs`.
    pub ratio_stderr: f64,
    /// `lhs <= rhs * (1 + 3 * ratio_stderr)`.
    pub holds: bool,
}

pub fn variance_bound_check(
    law: &WeightLaw,
    s: f64,
    n: usize,
    path_length: usize,
    replicas: usize,
    seed: u64,
) -> Result<VarianceBound> {
    if path_length < 1 {
        return config("path length must be at least 1");
    }
    let margin_below = path_length / 2;
    let (geom, rows) = replica_rows(law, s, n, replicas, seed, margin_below)?;
    if downright_vertex(path_length).x > geom.target.x {
        return config(format!("down/right path of length {path_length} does not fit the field"));
    }
    let g = |r: &Vec<Vec<f64>>, p| row_value(r, &geom, p);
    let end = downright_vertex(path_length);
    let long: Vec<f64> = rows.iter().map(|r| g(r, Point::ORIGIN) - g(r, end)).collect();
    let short: Vec<f64> = rows.iter().map(|r| g(r, Point::ORIGIN) - g(r, Point::new(1, 0))).collect();
    let nv = path_length as f64;
    let (lhs, _) = covariance_jackknife(&long, &long);
    let (var1, _) = covariance_jackknife(&short, &short);
    let rhs = nv * var1;
    let ratio_stderr = ratio_jackknife(&long, &short, nv);
    Ok(VarianceBound { lhs, rhs, ratio_stderr, holds: lhs <= rhs * (1.0 + 3.0 * ratio_stderr) })
}

/// Jackknife standard error of `Var(a) / (scale Var(b))`.
fn ratio_jackknife(a: &[f64], b: &[f64], scale: f64) -> f64 {
    let r = a.len();
    if r < 3 {
        return f64::INFINITY;
    }
    let stats = |xs: &[f64]| {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let d: Vec<f64> = xs.iter().map(|x| x - m).collect();
        let ss: f64 = d.iter().map(|x| x * x).sum();
        (d, ss)
    };
    let (da, ssa) = stats(a);
    let (db, ssb) = stats(b);
    let m = (r - 1) as f64;
    // Leave-one-out sum of squares: ss - d_i^2 - d_i^2 / m.
    let loo: Vec<f64> = da
        .iter()
        .zip(&db)
        .map(|(x, y)| {
            let va = (ssa - x * x * (1.0 + 1.0 / m)) / (m - 1.0);
            let vb = (ssb - y * y * (1.0 + 1.0 / m)) / (m - 1.0);
            va / (scale * vb)
        })
        .collect();
    let rf = r as f64;
    let mean = loo.iter().sum::<f64>() / rf;
    (loo.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() * (rf - 1.0) / rf).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staircase_vertices() {
        let v: Vec<Point> = (0..5).map(downright_vertex).collect();
        assert_eq!(
            v,
            vec![Point::new(0, 0), Point::new(1, 0), Point::new(1, -1), Point::new(2, -1), Point::new(2, -2)]
        );
    }

    #[test]
    fn target_on_ray() {
        assert_eq!(horizon_target(1000, 1.0), Point::new(500, 500));
        assert_eq!(horizon_target(400, 3.0), Point::new(100, 300));
    }

    #[test]
    fn jackknife_matches_direct_leave_one_out() {
        let u = [1.0, 2.0, 4.0, 3.5, -1.0, 0.5];
        let v = [0.3, 2.2, 1.0, 3.0, -2.0, 1.5];
        let cov = |a: &[f64], b: &[f64]| {
            let n = a.len() as f64;
            let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
            a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
        };
        let loo: Vec<f64> = (0..6)
            .map(|i| {
                let a: Vec<f64> = u.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| *x).collect();
                let b: Vec<f64> = v.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| *x).collect();
                cov(&a, &b)
            })
            .collect();
        let m = loo.iter().sum::<f64>() / 6.0;
        let se = (loo.iter().map(|c| (c - m) * (c - m)).sum::<f64>() * 5.0 / 6.0).sqrt();
        let (c, s) = covariance_jackknife(&u, &v);
        assert!((c - cov(&u, &v)).abs() < 1e-12);
        assert!((s - se).abs() < 1e-12);
    }
}
