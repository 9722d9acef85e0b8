//! Weight fields and the up/right last-passage dynamic program.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::WeightLaw;
use crate::error::{config, LabError, Result};
use crate::lattice::Point;
use crate::rng::{stream, StreamFamily};

/// Largest number of cells a single dense table may hold (2 GiB of `f64`).
pub const MAX_CELLS: usize = 1 << 28;

pub const DEFAULT_REPLICAS: usize = 20;
pub const DEFAULT_GRID_POINTS: usize = 33;

pub(crate) fn cell_count(width: usize, height: usize) -> Result<usize> {
    match width.checked_mul(height) {
        Some(n) if n <= MAX_CELLS => Ok(n),
        _ => Err(LabError::Resource(format!(
            "{width} x {height} table exceeds the {MAX_CELLS}-cell limit"
        ))),
    }
}

/// Dense vertex weights, row-major: `weights[j * width + i]` is `ω_(i,j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGrid {
    pub width: usize,
    pub height: usize,
    pub weights: Vec<f64>,
    pub law: Option<WeightLaw>,
    pub seed: Option<u64>,
}

impl WeightGrid {
    pub fn from_weights(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return config("weight grid must be nonempty");
        }
        if cell_count(width, height)? != weights.len() {
            return config(format!(
                "expected {} weights for a {width} x {height} grid, got {}",
                width * height,
                weights.len()
            ));
        }
        Ok(Self { width, height, weights, law: None, seed: None })
    }

    /// I.i.d. weights drawn row-major from the `"grid"` stream of `seed`.
    pub fn sample(law: &WeightLaw, width: usize, height: usize, seed: u64) -> Result<Self> {
        if width == 0 || height == 0 {
            return config("weight grid must be nonempty");
        }
        let n = cell_count(width, height)?;
        let weights = law.sample(&mut stream(seed, "grid", 0), n);
        Ok(Self { width, height, weights, law: Some(*law), seed: Some(seed) })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[j * self.width + i]
    }

    pub fn at(&self, p: Point) -> Option<f64> {
        if p.x < 0 || p.y < 0 || p.x as usize >= self.width || p.y as usize >= self.height {
            return None;
        }
        Some(self.get(p.x as usize, p.y as usize))
    }
}

/// `G(0, (i, j))` for every cell of a grid, same layout as [`WeightGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PassageField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl PassageField {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.width + i]
    }

    /// Cells `(i, d - i)` inside the grid, in increasing `i`.
    pub fn antidiagonal(&self, d: usize) -> Vec<f64> {
        diag_range(self.width, self.height, d).map(|i| self.get(i, d - i)).collect()
    }
}

fn diag_range(width: usize, height: usize, d: usize) -> std::ops::Range<usize> {
    let lo = d.saturating_sub(height - 1);
    let hi = d.min(width - 1);
    if lo > hi {
        0..0
    } else {
        lo..hi + 1
    }
}

/// One DP row: `row[i] = w[i] + max(row[i-1], prev[i])` with missing
/// neighbors treated as `-inf`.
#[inline]
fn dp_row(prev: Option<&[f64]>, weights: &[f64], row: &mut [f64]) {
    let mut left = f64::NEG_INFINITY;
    for i in 0..weights.len() {
        let below = prev.map_or(f64::NEG_INFINITY, |p| p[i]);
        let best = left.max(below);
        let v = weights[i] + if best == f64::NEG_INFINITY { 0.0 } else { best };
        row[i] = v;
        left = v;
    }
}

/// Full last-passage table `G(0, ·)`.
pub fn passage_field(grid: &WeightGrid) -> Result<PassageField> {
    let (w, h) = (grid.width, grid.height);
    let mut values = vec![0.0; cell_count(w, h)?];
    for j in 0..h {
        let (done, rest) = values.split_at_mut(j * w);
        let prev = if j == 0 { None } else { Some(&done[(j - 1) * w..]) };
        dp_row(prev, &grid.weights[j * w..(j + 1) * w], &mut rest[..w]);
    }
    Ok(PassageField { width: w, height: h, values })
}

/// Antidiagonal slices of `G(0, ·)` computed with a single rolling row.
pub fn streaming_antidiagonals(grid: &WeightGrid, ds: &[usize]) -> Vec<Vec<f64>> {
    let (w, h) = (grid.width, grid.height);
    let mut out: Vec<Vec<f64>> = ds.iter().map(|_| Vec::new()).collect();
    let mut prev = vec![0.0; w];
    let mut row = vec![0.0; w];
    for j in 0..h {
        dp_row((j > 0).then_some(&prev[..]), &grid.weights[j * w..(j + 1) * w], &mut row);
        for (slot, &d) in out.iter_mut().zip(ds) {
            // Row j holds the entry with i = d - j; rows are visited in increasing j,
            // i.e. decreasing i, so entries are reversed at the end.
            if d >= j && d - j < w {
                slot.push(row[d - j]);
            }
        }
        std::mem::swap(&mut prev, &mut row);
    }
    for slot in &mut out {
        slot.reverse();
    }
    out
}

/// Passage time from `a` to `b` inclusive of both endpoints, or `None` when
/// `b` is not weakly up/right of `a` or either point is off the grid.
pub fn point_to_point(grid: &WeightGrid, a: Point, b: Point) -> Option<f64> {
    grid.at(a)?;
    grid.at(b)?;
    if b.x < a.x || b.y < a.y {
        return None;
    }
    let (w, h) = ((b.x - a.x + 1) as usize, (b.y - a.y + 1) as usize);
    let mut prev = vec![0.0; w];
    let mut row = vec![0.0; w];
    let mut weights = vec![0.0; w];
    for j in 0..h {
        for (i, slot) in weights.iter_mut().enumerate() {
            *slot = grid.get(a.x as usize + i, a.y as usize + j);
        }
        dp_row((j > 0).then_some(&prev[..]), &weights, &mut row);
        std::mem::swap(&mut prev, &mut row);
    }
    Some(prev[w - 1])
}

/// Parameters of the exponential-type shape `m(x + y) + 2σ√(xy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpShapeParams {
    pub m: f64,
    pub sigma: f64,
}

impl ExpShapeParams {
    pub fn from_law(law: &WeightLaw) -> Self {
        let mom = law.moments();
        Self { m: mom.mean, sigma: mom.sd }
    }
}

pub fn g_exp(params: ExpShapeParams, x: f64, y: f64) -> f64 {
    params.m * (x + y) + 2.0 * params.sigma * (x * y).sqrt()
}

/// Monte Carlo estimate of `g(x, 1 - x)` from `G(0, ([Nx], [N(1-x)])) / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeEstimate {
    pub n: usize,
    pub x_grid: Vec<f64>,
    pub mean_over_n: Vec<f64>,
    /// Sample sd over `sqrt(replicas)`; NaN with a single replica.
    pub stderr: Vec<f64>,
    pub replicas: usize,
    pub law: WeightLaw,
    pub seed: u64,
}

/// Interior grid `i / (points + 1)`, `i = 1..=points`.
pub fn default_x_grid(points: usize) -> Vec<f64> {
    (1..=points).map(|i| i as f64 / (points + 1) as f64).collect()
}

/// Lattice target `([Nx], [N(1-x)])`; a tiny offset absorbs rounding in `Nx`.
pub fn shape_target(n: usize, x: f64) -> (usize, usize) {
    let nf = n as f64;
    let i = ((nf * x + 1e-9).floor() as usize).min(n);
    let j = ((nf * (1.0 - x) + 1e-9).floor() as usize).min(n - i);
    (i, j)
}

/// Last-passage values at the given targets for one replica, with the DP
/// restricted to the triangle `i + j <= n` and weights drawn row by row.
fn triangle_replica(
    sampler: &crate::distributions::Sampler,
    n: usize,
    by_row: &[Vec<(usize, usize)>],
    family: StreamFamily,
    out_len: usize,
) -> Vec<f64> {
    let mut rng = family.stream(0);
    let mut out = vec![0.0; out_len];
    let mut prev = vec![0.0; n + 1];
    let mut row = vec![0.0; n + 1];
    let mut weights = vec![0.0; n + 1];
    for (j, slots) in by_row.iter().enumerate() {
        let len = n + 1 - j;
        for w in weights[..len].iter_mut() {
            *w = sampler.draw(&mut rng);
        }
        dp_row((j > 0).then_some(&prev[..len]), &weights[..len], &mut row[..len]);
        for &(slot, i) in slots {
            out[slot] = row[i];
        }
        std::mem::swap(&mut prev, &mut row);
    }
    out
}

/// Mean and standard error (sd / sqrt(count)) of each column, reduced in row order.
pub(crate) fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let r = rows.len() as f64;
    let k = rows.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; k];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= r);
    let mut se = vec![0.0; k];
    for row in rows {
        for ((s, v), m) in se.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    se.iter_mut().for_each(|s| *s = if rows.len() > 1 { (*s / (r - 1.0)).sqrt() / r.sqrt() } else { f64::NAN });
    (mean, se)
}

/// Estimates `g(x, 1 - x)` on `x_grid` from `replicas` independent fields.
///
/// Replica `r` draws its weights from stream family `(seed, "shape").replica(r)`,
/// so the output does not depend on how replicas are scheduled.
pub fn shape_profile(
    law: &WeightLaw,
    n: usize,
    x_grid: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<ShapeEstimate> {
    if n < 2 {
        return config(format!("N must be at least 2, got {n}"));
    }
    if replicas == 0 {
        return config("need at least one replica");
    }
    if x_grid.is_empty() || x_grid.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return config("x grid must be a nonempty subset of (0, 1)");
    }
    cell_count(n + 1, 4)?;
    let mut by_row = vec![Vec::new(); n + 1];
    for (slot, &x) in x_grid.iter().enumerate() {
        let (i, j) = shape_target(n, x);
        by_row[j].push((slot, i));
    }
    let sampler = law.sampler();
    let family = StreamFamily::new(seed, "shape");
    let rows: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            triangle_replica(&sampler, n, &by_row, family.replica(r as u64), x_grid.len())
                .into_iter()
                .map(|g| g / n as f64)
                .collect()
        })
        .collect();
    let (mean_over_n, stderr) = column_stats(&rows);
    Ok(ShapeEstimate {
        n,
        x_grid: x_grid.to_vec(),
        mean_over_n,
        stderr,
        replicas,
        law: *law,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_example() {
        let g = WeightGrid::from_weights(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let f = passage_field(&g).unwrap();
        assert_eq!(f.get(1, 1), 8.0);
        assert_eq!(f.antidiagonal(1), vec![4.0, 3.0]);
    }

    #[test]
    fn single_row_sums() {
        let g = WeightGrid::from_weights(5, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(passage_field(&g).unwrap().get(4, 0), 15.0);
    }

    #[test]
    fn size_errors() {
        assert!(WeightGrid::from_weights(2, 2, vec![1.0]).is_err());
        assert!(matches!(cell_count(1 << 20, 1 << 20), Err(LabError::Resource(_))));
    }

    #[test]
    fn g_exp_examples() {
        let unit = ExpShapeParams { m: 1.0, sigma: 1.0 };
        assert_eq!(g_exp(unit, 1.0, 1.0), 4.0);
        let b = ExpShapeParams::from_law(&WeightLaw::bernoulli(0.7).unwrap());
        assert_eq!(g_exp(b, 1.0, 0.0), b.m);
        assert!((g_exp(b, 1.0, 1.0) - 2.31652).abs() < 1e-5);
    }

    #[test]
    fn targets_stay_in_triangle() {
        for n in [2, 7, 100, 2000] {
            for x in default_x_grid(33) {
                let (i, j) = shape_target(n, x);
                assert!(i + j <= n);
            }
        }
        assert_eq!(shape_target(2000, 0.5), (1000, 1000));
    }
}
