//! Coarse graining of up/right paths: anti-diagonal lines `y = r(kM - x)`,
//! coarse crossing points spaced `L` apart in `x`, free zones above each line,
//! the path modification that reroutes a crossing through a coarse point, and
//! exact counting of the admissible path class on tiny boxes.
//!
//! Levels are kept in exact integer arithmetic: with `r = rn/rd` in lowest
//! terms, the scaled level of `(x, y)` is `x·rn + y·rd = rn·(x + y/r)`, and
//! line `k` is the scaled level `k·M·rn`.

use std::collections::HashMap;

use num_rational::Rational64;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::WeightLaw;
use crate::error::{config, LabError, Result};
use crate::lattice::{LatticePath, Point, Step};
use crate::numeric::ln_binomial;
use crate::rng::StreamFamily;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarseGridSpec {
    pub n: i64,
    pub s: Rational64,
    pub r: Rational64,
    pub m: i64,
    pub l: i64,
    /// Weight truncation level used by the weight-loss bound.
    pub b_n: f64,
}

fn ratio_f64(q: Rational64) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

impl CoarseGridSpec {
    /// Validates the divisibility conditions (`Mr`, `Lr`, `Ns` integral) and
    /// the geometric ones this implementation relies on: `2L <= M`, `r <= 1`,
    /// and an end point that does not sit strictly inside the band just
    /// above a line.
    pub fn new(n: i64, s: Rational64, r: Rational64, m: i64, l: i64, b_n: f64) -> Result<Self> {
        if n < 1 || m < 1 || l < 1 {
            return config(format!("N, M, L must be positive, got N={n}, M={m}, L={l}"));
        }
        let zero = Rational64::from_integer(0);
        if s <= zero || r <= zero {
            return config(format!("s and r must be positive, got s={s}, r={r}"));
        }
        if !(b_n > 0.0) {
            return config(format!("b_N must be positive, got {b_n}"));
        }
        if 2 * l > m {
            return config(format!("need 2L <= M so that neighbouring bands stay apart, got L={l}, M={m}"));
        }
        if r > Rational64::from_integer(1) {
            return config(format!("need r <= 1 so a detour needs at most L backward steps, got r={r}"));
        }
        for (name, v) in [("M r", r * m), ("L r", r * l), ("N s", s * n)] {
            if !v.is_integer() {
                return config(format!("{name} = {v} must be an integer"));
            }
        }
        let spec = Self { n, s, r, m, l, b_n };
        let rho = spec.end_level().rem_euclid(spec.line_spacing());
        if rho != 0 && rho < spec.zone_width() {
            return config(format!(
                "end point ({}, {}) lies strictly inside the free zone above a line; \
                 choose parameters with (N + Ns/r) mod M = 0 or >= L",
                n,
                spec.ns()
            ));
        }
        Ok(spec)
    }

    fn rn(&self) -> i64 {
        *self.r.numer()
    }

    fn rd(&self) -> i64 {
        *self.r.denom()
    }

    pub fn ns(&self) -> i64 {
        (self.s * self.n).to_integer()
    }

    pub fn lr(&self) -> i64 {
        (self.r * self.l).to_integer()
    }

    pub fn end(&self) -> Point {
        Point::new(self.n, self.ns())
    }

    /// Scaled level `x·rn + y·rd`.
    pub fn level(&self, p: Point) -> i64 {
        p.x * self.rn() + p.y * self.rd()
    }

    fn line_spacing(&self) -> i64 {
        self.m * self.rn()
    }

    fn zone_width(&self) -> i64 {
        self.l * self.rn()
    }

    pub fn end_level(&self) -> i64 {
        self.level(self.end())
    }

    /// Scaled level of line `k`.
    pub fn line_level(&self, k: i64) -> i64 {
        k * self.line_spacing()
    }

    /// Lines `k >= 1` strictly below the end point; these carry the coarse
    /// crossing constraint and a free zone.
    pub fn active_lines(&self) -> impl Iterator<Item = i64> + '_ {
        (1..).take_while(move |&k| self.line_level(k) < self.end_level())
    }

    /// Index of the free zone containing `p`: `kM <= x + y/r <= kM + L` for an
    /// active line `k`.
    pub fn zone_of(&self, p: Point) -> Option<i64> {
        let lv = self.level(p);
        let k = lv.div_euclid(self.line_spacing());
        let base = self.line_level(k);
        (k >= 1 && lv - base <= self.zone_width() && base < self.end_level()).then_some(k)
    }

    /// `p` lies on some line `k >= 0` at `x = kM - qL`, `q >= 0`.
    pub fn is_coarse(&self, p: Point) -> bool {
        let lv = self.level(p);
        if lv < 0 || lv % self.line_spacing() != 0 || p.y < 0 {
            return false;
        }
        let k = lv / self.line_spacing();
        let dx = k * self.m - p.x;
        dx >= 0 && dx % self.l == 0
    }

    /// `N(1+s) + 2L·N(r+s)/(Mr)`.
    pub fn length_bound(&self) -> f64 {
        let n = self.n as f64;
        n * (1.0 + ratio_f64(self.s)) + 2.0 * self.l as f64 * self.segments()
    }

    /// `4L·b_N·N(r+s)/(Mr)`.
    pub fn weight_loss_bound(&self) -> f64 {
        4.0 * self.l as f64 * self.b_n * self.segments()
    }

    /// `N(r+s)/(Mr)`, the number of line spacings between the origin and the end.
    pub fn segments(&self) -> f64 {
        ratio_f64(self.s * self.n + self.r * self.n) / ratio_f64(self.r * self.m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLine {
    pub k: i64,
    /// Coarse points of the line inside the box `[0,N] x [0,Ns]`, by decreasing `x`.
    pub coarse: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeZone {
    pub k: i64,
    /// Lattice points of the zone inside the box.
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseGrid {
    pub spec: CoarseGridSpec,
    /// Lines `k = 0, 1, ...` meeting the closed box.
    pub lines: Vec<GridLine>,
    pub zones: Vec<FreeZone>,
}

/// Explicit lines, coarse points and free zones inside the box.
pub fn build_grid(spec: &CoarseGridSpec) -> CoarseGrid {
    let (n, ns) = (spec.n, spec.ns());
    let in_box = |p: Point| p.x >= 0 && p.y >= 0 && p.x <= n && p.y <= ns;
    let lr = spec.lr();
    let lines = (0..)
        .take_while(|&k| spec.line_level(k) <= spec.end_level())
        .map(|k| {
            let coarse = (0..)
                .map(|q| Point::new(k * spec.m - q * spec.l, q * lr))
                .take_while(|p| p.x >= 0)
                .filter(|&p| in_box(p))
                .collect();
            GridLine { k, coarse }
        })
        .collect();
    let zones = spec
        .active_lines()
        .map(|k| {
            let points = (0..=ns)
                .flat_map(|y| (0..=n).map(move |x| Point::new(x, y)))
                .filter(|&p| spec.zone_of(p) == Some(k))
                .collect();
            FreeZone { k, points }
        })
        .collect();
    CoarseGrid { spec: *spec, lines, zones }
}

/// Why a path fails admissibility.
pub fn admissibility(path: &LatticePath, spec: &CoarseGridSpec) -> std::result::Result<(), String> {
    let v = path.vertices();
    if path.start != Point::ORIGIN {
        return Err(format!("path starts at {}", path.start));
    }
    if path.end() != spec.end() {
        return Err(format!("path ends at {} instead of {}", path.end(), spec.end()));
    }
    let mut seen = std::collections::HashSet::with_capacity(v.len());
    for &p in &v {
        if !seen.insert(p) {
            return Err(format!("vertex {p} visited twice"));
        }
        if p.x < 0 || p.y < 0 {
            return Err(format!("vertex {p} leaves the quadrant"));
        }
        if spec.level(p) > spec.end_level() {
            return Err(format!("vertex {p} lies beyond the end level"));
        }
        let lv = spec.level(p);
        if p != spec.end() && lv > 0 && lv % spec.line_spacing() == 0 && lv < spec.end_level() && !spec.is_coarse(p) {
            return Err(format!("vertex {p} meets a line away from the coarse grid"));
        }
    }
    let mut backward: HashMap<i64, i64> = HashMap::new();
    for w in v.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (la, lb) = (spec.level(a), spec.level(b));
        let (lo, hi) = (la.min(lb), la.max(lb));
        let next = (lo.div_euclid(spec.line_spacing()) + 1) * spec.line_spacing();
        if next < hi && next < spec.end_level() {
            return Err(format!("edge {a} -> {b} jumps across a line"));
        }
        if lb < la {
            match (spec.zone_of(a), spec.zone_of(b)) {
                (Some(ka), Some(kb)) if ka == kb => {
                    let used = backward.entry(ka).or_insert(0);
                    *used += 1;
                    if *used > spec.l {
                        return Err(format!("more than L backward steps in zone {ka}"));
                    }
                }
                _ => return Err(format!("backward step {a} -> {b} outside a free zone")),
            }
        }
    }
    Ok(())
}

pub fn is_admissible(path: &LatticePath, spec: &CoarseGridSpec) -> bool {
    admissibility(path, spec).is_ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modification {
    pub path: LatticePath,
    /// Lines whose crossing was rerouted.
    pub lines: Vec<i64>,
}

fn walk(out: &mut Vec<Point>, to: Point) {
    let mut p = *out.last().expect("walk needs a start");
    while p != to {
        let step = if to.x > p.x {
            Step::Right
        } else if to.x < p.x {
            Step::Left
        } else if to.y > p.y {
            Step::Up
        } else {
            Step::Down
        };
        p = p.step(step);
        out.push(p);
    }
}

fn internal(msg: &str) -> LabError {
    LabError::Domain(format!("path modification invariant violated: {msg}"))
}

/// Reroutes every non-coarse crossing of an up/right path from the origin to
/// `(N, Ns)` through a neighbouring coarse point, detouring inside the free
/// zone to rejoin the original path.
pub fn modify_path(gamma: &LatticePath, spec: &CoarseGridSpec) -> Result<Modification> {
    if gamma.start != Point::ORIGIN || gamma.end() != spec.end() || !gamma.is_up_right() {
        return config(format!("expected an up/right path from the origin to {}", spec.end()));
    }
    let v = gamma.vertices();
    let lr = spec.lr();
    let mut out = vec![v[0]];
    let mut last = 0usize;
    let mut lines = Vec::new();
    for k in spec.active_lines() {
        let target = spec.line_level(k);
        let i = v.iter().position(|&p| spec.level(p) >= target).ok_or_else(|| internal("line not reached"))?;
        if spec.level(v[i]) == target && spec.is_coarse(v[i]) {
            continue;
        }
        // Smallest coarse x to the right of the crossing point.
        let x0 = if spec.level(v[i]) > target && v[i].y == v[i - 1].y { v[i - 1].x + 1 } else { v[i].x };
        let q = (k * spec.m - x0).div_euclid(spec.l);
        let c2 = Point::new(k * spec.m - q * spec.l, q * lr);
        let c1 = Point::new(c2.x - spec.l, c2.y + lr);
        let c3 = Point::new(c2.x, c1.y);
        let in_lower = |p: Point| p.x >= c1.x && p.y >= c2.y && spec.level(p) <= target;
        let in_upper = |p: Point| p.x <= c2.x && p.y <= c1.y && spec.level(p) >= target;
        let a = (last..=i).find(|&j| in_lower(v[j])).ok_or_else(|| internal("no lower-triangle entry"))?;
        let b = (i..v.len()).take_while(|&j| in_upper(v[j])).last().ok_or_else(|| internal("no upper-triangle exit"))?;
        out.extend_from_slice(&v[last + 1..=a]);
        let (entry, exit) = (v[a], v[b]);
        if entry.y == c2.y {
            walk(&mut out, c2);
            if exit.x == c2.x {
                walk(&mut out, exit);
            } else if exit.y == c1.y {
                walk(&mut out, c3);
                walk(&mut out, exit);
            } else {
                return Err(internal("exit off the triangle sides"));
            }
        } else if entry.x == c1.x {
            walk(&mut out, c1);
            if exit.y == c1.y {
                walk(&mut out, exit);
            } else if exit.x == c2.x {
                walk(&mut out, c3);
                walk(&mut out, exit);
            } else {
                return Err(internal("exit off the triangle sides"));
            }
        } else {
            return Err(internal("entry off the triangle sides"));
        }
        last = b;
        lines.push(k);
    }
    out.extend_from_slice(&v[last + 1..]);
    Ok(Modification { path: LatticePath::from_vertices(&out)?, lines })
}

const ENUMERATION_WORK_LIMIT: u64 = 200_000_000;

struct Enumerator<'a> {
    spec: &'a CoarseGridSpec,
    memo: HashMap<Point, u128>,
    work: u64,
}

impl Enumerator<'_> {
    fn tick(&mut self) -> Result<()> {
        self.work += 1;
        if self.work > ENUMERATION_WORK_LIMIT {
            return Err(LabError::Resource(format!(
                "enumeration exceeded {ENUMERATION_WORK_LIMIT} steps; spec too large"
            )));
        }
        Ok(())
    }

    /// A step between two vertices that neither jumps a line nor lands on
    /// a line away from the coarse grid.
    fn edge_ok(&self, a: Point, b: Point) -> bool {
        let s = self.spec;
        if b.x < 0 || b.y < 0 {
            return false;
        }
        let (la, lb) = (s.level(a), s.level(b));
        if lb > s.end_level() {
            return false;
        }
        let (lo, hi) = (la.min(lb), la.max(lb));
        let next = (lo.div_euclid(s.line_spacing()) + 1) * s.line_spacing();
        if next < hi && next < s.end_level() {
            return false;
        }
        !(lb > 0 && lb % s.line_spacing() == 0 && lb < s.end_level() && !s.is_coarse(b))
    }

    /// Admissible completions from `v`, which was reached by a forward step
    /// from outside any zone, or is the origin.
    fn count(&mut self, v: Point) -> Result<u128> {
        if v == self.spec.end() {
            return Ok(1);
        }
        if let Some(&c) = self.memo.get(&v) {
            return Ok(c);
        }
        self.tick()?;
        let total = match self.spec.zone_of(v) {
            Some(k) => {
                let mut visited = vec![v];
                self.zone_walk(k, v, &mut visited, 0)?
            }
            None => {
                let mut t = 0u128;
                for step in [Step::Right, Step::Up] {
                    let w = v.step(step);
                    if self.edge_ok(v, w) {
                        t = checked(t, self.count(w)?)?;
                    }
                }
                t
            }
        };
        self.memo.insert(v, total);
        Ok(total)
    }

    fn zone_walk(&mut self, k: i64, v: Point, visited: &mut Vec<Point>, used: i64) -> Result<u128> {
        self.tick()?;
        if v == self.spec.end() {
            return Ok(1);
        }
        let mut total = 0u128;
        for step in [Step::Right, Step::Up, Step::Left, Step::Down] {
            let w = v.step(step);
            if visited.contains(&w) || !self.edge_ok(v, w) {
                continue;
            }
            if self.spec.zone_of(w) == Some(k) {
                let back = i64::from(!step.is_forward());
                if used + back > self.spec.l {
                    continue;
                }
                visited.push(w);
                let c = self.zone_walk(k, w, visited, used + back);
                visited.pop();
                total = checked(total, c?)?;
            } else if step.is_forward() {
                total = checked(total, self.count(w)?)?;
            }
        }
        Ok(total)
    }
}

fn checked(a: u128, b: u128) -> Result<u128> {
    a.checked_add(b).ok_or_else(|| LabError::Resource("path count overflows u128".into()))
}

/// Exact number of admissible paths, by memoized search over forward moves
/// and exhaustive self-avoiding walks inside each free zone.
pub fn enumerate_paths(spec: &CoarseGridSpec) -> Result<u128> {
    let mut e = Enumerator { spec, memo: HashMap::new(), work: 0 };
    e.count(Point::ORIGIN)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountBound {
    /// `ln(M/L) + ln C(n, n/2) + 2L ln 4` with `n = ceil(2Mr/(1+r))`.
    pub per_segment_log: f64,
    pub segments: f64,
    pub log_bound: f64,
    /// `(s+r)/(1+r) · ln 4`, the per-step exponential growth rate of the bound.
    pub asymptotic_rate: f64,
}

/// Logarithm of `(M/L · C(2Mr/(1+r), Mr/(1+r)) · 4^{2L})^{N(s+r)/(Mr)}`. A
/// non-integral `2Mr/(1+r)` is rounded up, which only weakens the bound.
pub fn count_bound_log(spec: &CoarseGridSpec) -> CountBound {
    let ln4 = 4f64.ln();
    let r = ratio_f64(spec.r);
    let top = ((spec.r * spec.m * 2) / (spec.r + 1)).ceil().to_integer() as f64;
    let per_segment_log =
        (spec.m as f64 / spec.l as f64).ln() + ln_binomial(top, top / 2.0) + 2.0 * spec.l as f64 * ln4;
    let segments = spec.segments();
    CountBound {
        per_segment_log,
        segments,
        log_bound: per_segment_log * segments,
        asymptotic_rate: (ratio_f64(spec.s) + r) / (1.0 + r) * ln4,
    }
}

/// `floor(N/M) + floor(Ns/(rM))`.
pub fn crossings(n: i64, s: Rational64, r: Rational64, m: i64) -> i64 {
    (Rational64::from_integer(n) / m).floor().to_integer() + (s * n / (r * m)).floor().to_integer()
}

/// A staircase from the origin to `(N, Ns)` that stays as close as possible
/// to the straight segment.
pub fn staircase(n: i64, ns: i64) -> LatticePath {
    let mut steps = Vec::with_capacity((n + ns) as usize);
    let (mut x, mut y) = (0i64, 0i64);
    while x < n || y < ns {
        // Step right when on or above the segment, up when below it.
        if y == ns || (x < n && y * n - x * ns >= 0) {
            steps.push(Step::Right);
            x += 1;
        } else {
            steps.push(Step::Up);
            y += 1;
        }
    }
    LatticePath::new(Point::ORIGIN, steps)
}

/// Number of lines `k >= 1` met by the staircase from the origin to
/// `(N, Ns)`, counted by exact level comparisons along its edges.
pub fn geometric_crossings(spec: &CoarseGridSpec) -> i64 {
    let path = staircase(spec.n, spec.ns());
    let v = path.vertices();
    let spacing = spec.line_spacing();
    let mut met = std::collections::BTreeSet::new();
    for &p in &v {
        let lv = spec.level(p);
        if lv > 0 && lv % spacing == 0 {
            met.insert(lv / spacing);
        }
    }
    for w in v.windows(2) {
        let (la, lb) = (spec.level(w[0]), spec.level(w[1]));
        for k in la.div_euclid(spacing) + 1..=lb.div_euclid(spacing) {
            if k >= 1 && k * spacing > la && k * spacing < lb {
                met.insert(k);
            }
        }
    }
    met.len() as i64
}

/// `c N² s e^{-λ b_N}`.
pub fn good_tail_bound(n: f64, s: f64, b_n: f64, c: f64, lambda: f64) -> f64 {
    c * n * n * s * (-lambda * b_n).exp()
}

/// Fraction of replicas with some `|ω| > b_N` on `[0,N] x [0,Ns]`.
pub fn good_complement_frequency(
    law: &WeightLaw,
    n: usize,
    ns: usize,
    b_n: f64,
    replicas: usize,
    seed: u64,
) -> Result<f64> {
    if replicas == 0 {
        return config("need at least one replica");
    }
    let sites = crate::lpp::cell_count(n + 1, ns + 1)?;
    let family = StreamFamily::new(seed, "good");
    let sampler = law.sampler();
    let bad = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = family.stream(r);
            (0..sites).any(|_| sampler.draw(&mut rng).abs() > b_n)
        })
        .filter(|&b| b)
        .count();
    Ok(bad as f64 / replicas as f64)
}

/// Exponents for `b_N = N^γ`, `L ≈ N^α`, `M ≈ N^β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSchedule {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ExponentSchedule {
    /// Requires positive exponents with `α + γ < β < 1`.
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && gamma > 0.0 && alpha + gamma < beta && beta < 1.0) {
            return config(format!("need 0 < α, γ and α + γ < β < 1, got α={alpha}, β={beta}, γ={gamma}"));
        }
        Ok(Self { alpha, beta, gamma })
    }

    /// `(b_N, L, M)`: `L` and `M` are the smallest integers above
    /// `floor(N^α)` and `floor(N^β)` with `Lr` and `Mr` integral.
    pub fn parameters(&self, n: i64, r: Rational64) -> (f64, i64, i64) {
        let nf = n as f64;
        let next = |base: f64| {
            let mut v = base.floor() as i64 + 1;
            while !(r * v).is_integer() {
                v += 1;
            }
            v
        };
        (nf.powf(self.gamma), next(nf.powf(self.alpha)), next(nf.powf(self.beta)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifyReport {
    pub spec: CoarseGridSpec,
    pub trials: usize,
    pub admissible: usize,
    pub length_ok: usize,
    pub weight_ok: usize,
    /// Trials where every added vertex lies within distance `L` of a rerouted line.
    pub local_ok: usize,
    pub trials_passed: usize,
    pub max_length: usize,
    pub length_bound: f64,
    /// Smallest `W(Γ') - W(Γ) + weight_loss_bound` over the trials.
    pub min_weight_margin: f64,
    pub first_failure: Option<String>,
}

/// A uniformly random up/right path from the origin to `(N, Ns)`.
pub fn random_up_right<R: Rng + ?Sized>(n: i64, ns: i64, rng: &mut R) -> LatticePath {
    let mut steps: Vec<Step> = std::iter::repeat_n(Step::Right, n as usize)
        .chain(std::iter::repeat_n(Step::Up, ns as usize))
        .collect();
    steps.shuffle(rng);
    LatticePath::new(Point::ORIGIN, steps)
}

struct TrialOutcome {
    admissible: bool,
    length_ok: bool,
    weight_ok: bool,
    local_ok: bool,
    length: usize,
    margin: f64,
    failure: Option<String>,
}

/// Randomized check of the modification on `trials` random up/right paths,
/// with weights drawn from `law` and clamped to `[-b_N, b_N]`.
pub fn verify_modify(spec: &CoarseGridSpec, law: &WeightLaw, trials: usize, seed: u64) -> Result<ModifyReport> {
    let family = StreamFamily::new(seed, "coarse-modify");
    let sampler = law.sampler();
    // Detours can leave the box by less than L on the right and top.
    let (w, h) = ((spec.n + spec.l + 1) as usize, (spec.ns() + spec.l + 1) as usize);
    crate::lpp::cell_count(w, h)?;
    let b = spec.b_n;
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<TrialOutcome> {
            let fam = family.replica(t);
            let mut rng = fam.stream(0);
            let gamma = random_up_right(spec.n, spec.ns(), &mut rng);
            let mut wrng = fam.stream(1);
            let weights: Vec<f64> = (0..w * h).map(|_| sampler.draw(&mut wrng).clamp(-b, b)).collect();
            let weight = |p: Point| weights[p.y as usize * w + p.x as usize];
            let m = modify_path(&gamma, spec)?;
            let verdict = admissibility(&m.path, spec);
            let length = m.path.len();
            let length_ok = length as f64 <= spec.length_bound() + 1e-9;
            let margin = m.path.weight(weight) - gamma.weight(weight) + spec.weight_loss_bound();
            let original: std::collections::HashSet<Point> = gamma.vertices().into_iter().collect();
            let local_ok = m.path.vertices().iter().filter(|p| !original.contains(p)).all(|&p| {
                let lv = spec.level(p);
                m.lines.iter().any(|&k| (lv - spec.line_level(k)).abs() <= spec.zone_width())
            });
            let failure = match &verdict {
                Err(e) => Some(format!("trial {t}: {e}")),
                Ok(()) if !length_ok => Some(format!("trial {t}: length {length} over bound")),
                Ok(()) if margin < -1e-9 => Some(format!("trial {t}: weight loss over bound")),
                Ok(()) if !local_ok => Some(format!("trial {t}: detour outside the bands")),
                Ok(()) => None,
            };
            Ok(TrialOutcome {
                admissible: verdict.is_ok(),
                length_ok,
                weight_ok: margin >= -1e-9,
                local_ok,
                length,
                margin,
                failure,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let count = |f: fn(&TrialOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count();
    Ok(ModifyReport {
        spec: *spec,
        trials,
        admissible: count(|o| o.admissible),
        length_ok: count(|o| o.length_ok),
        weight_ok: count(|o| o.weight_ok),
        local_ok: count(|o| o.local_ok),
        trials_passed: count(|o| o.failure.is_none()),
        max_length: outcomes.iter().map(|o| o.length).max().unwrap_or(0),
        length_bound: spec.length_bound(),
        min_weight_margin: outcomes.iter().map(|o| o.margin).fold(f64::INFINITY, f64::min),
        first_failure: outcomes.iter().find_map(|o| o.failure.clone()),
    })
}
