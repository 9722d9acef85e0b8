//! Small scalar routines: bracketed root finding, golden-section search,
//! adaptive quadrature, and a few entropy/log helpers.

use crate::error::{LabError, Result};

/// Bisection on `[lo, hi]`; `f(lo)` and `f(hi)` must have opposite signs (a
/// zero endpoint is returned directly). Stops when the bracket is narrower
/// than `tol` or stops shrinking in floating point.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo.signum() != f_hi.signum()) || f_lo.is_nan() || f_hi.is_nan() {
        return Err(LabError::Domain(format!(
            "bisection bracket [{lo}, {hi}] does not straddle a root (f = {f_lo}, {f_hi})"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if c >= d {
            break;
        }
    }
    let (t, ft) = if fc >= fd { (c, fc) } else { (d, fd) };
    let (fa, fb) = (f(a), f(b));
    if fa > ft && fa >= fb {
        (a, fa)
    } else if fb > ft {
        (b, fb)
    } else {
        (t, ft)
    }
}

/// Maximum of a concave `f` over `t >= 0` (when `ascending`) or `t <= 0`.
/// The bracket grows geometrically from `|t| = 1` until the objective stops
/// increasing, then golden-section refines it. `f` may return `-inf` outside
/// its effective domain; the domain edge is then located by bisection so no
/// part of the domain is dropped. Returns `+inf` when the objective keeps
/// increasing past `|t| = 1e12`.
pub fn concave_sup_halfline<F: Fn(f64) -> f64>(f: F, ascending: bool, tol: f64) -> f64 {
    let dir = if ascending { 1.0 } else { -1.0 };
    let g = |u: f64| f(dir * u);
    // Largest finite point of [inside, outside], given g(inside) finite.
    let edge = |mut inside: f64, mut outside: f64| {
        while outside - inside > tol * inside.abs().max(1.0) {
            let mid = 0.5 * (inside + outside);
            if g(mid).is_finite() {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let g0 = g(0.0);
    let (mut prev, mut cur) = (0.0, 1.0);
    let mut g_cur = g(cur);
    if !g_cur.is_finite() {
        let hi = edge(0.0, cur);
        return golden_max(g, 0.0, hi, tol).1.max(g0).max(g(hi));
    }
    if !(g_cur > g0) {
        return golden_max(g, 0.0, cur, tol).1.max(g0);
    }
    loop {
        let mut next = cur * 2.0;
        let mut g_next = g(next);
        if !g_next.is_finite() {
            next = edge(cur, next);
            g_next = g(next);
            if g_next > g_cur {
                // Increasing all the way to the domain edge.
                return golden_max(g, cur, next, tol).1.max(g_next);
            }
        }
        if !(g_next > g_cur) {
            return golden_max(g, prev, next, tol).1.max(g_cur);
        }
        prev = cur;
        cur = next;
        g_cur = g_next;
        if cur > 1e12 {
            return f64::INFINITY;
        }
    }
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `x * ln(x / y)` with the convention `0 * ln 0 = 0`.
pub fn xlogy_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// Binary entropy `H(p) = -p ln p - (1-p) ln(1-p)`, with `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q == 0.0 { 0.0 } else { -q * q.ln() };
    term(p) + term(1.0 - p)
}

/// `ln(n choose k)` through the log-gamma function.
pub fn ln_binomial(n: f64, k: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// Exact binomial coefficient; `None` on `u128` overflow.
pub fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(acc)
}

/// Parabola through three points; returns the vertex `(x, y)` when the points
/// are not collinear.
pub fn parabola_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> Option<(f64, f64)> {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    // Newton divided differences.
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    if curv == 0.0 || !curv.is_finite() {
        return None;
    }
    // y(x) = y0 + d01 (x - x0) + curv (x - x0)(x - x1)
    let xv = 0.5 * (x0 + x1) - d01 / (2.0 * curv);
    let yv = y0 + d01 * (xv - x0) + curv * (xv - x0) * (xv - x1);
    Some((xv, yv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert_abs_diff_eq!(r, 2f64.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn bisect_rejects_bad_bracket() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn golden_finds_parabola_top() {
        let (x, y) = golden_max(|t| -(t - 0.3) * (t - 0.3) + 2.0, -1.0, 4.0, 1e-10);
        // value comparisons near a flat top resolve the argmax only to ~sqrt(eps)
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-7);
        assert_abs_diff_eq!(y, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn halfline_sup_handles_domain_edge() {
        // sup_{t<1} (2t + ln(1 - t)) attained at t = 1/2.
        let f = |t: f64| if t < 1.0 { 2.0 * t + (1.0 - t).ln() } else { f64::NEG_INFINITY };
        let v = concave_sup_halfline(f, true, 1e-12);
        assert_abs_diff_eq!(v, 1.0 - 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn halfline_sup_reports_unbounded() {
        assert!(concave_sup_halfline(|t| t, true, 1e-10).is_infinite());
    }

    #[test]
    fn simpson_integrates_exp() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-12);
        assert_abs_diff_eq!(v, std::f64::consts::E - 1.0, epsilon = 1e-11);
    }

    #[test]
    fn entropy_values() {
        assert_abs_diff_eq!(binary_entropy(0.5), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert_abs_diff_eq!(binary_entropy(0.2), binary_entropy(0.8), epsilon = 1e-15);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial_u128(16, 8), Some(12870));
        assert_eq!(binomial_u128(4, 2), Some(6));
        assert_eq!(binomial_u128(3, 5), Some(0));
        assert_abs_diff_eq!(ln_binomial(16.0, 8.0), 12870f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn vertex_of_exact_parabola() {
        let f = |x: f64| 3.0 - 2.0 * (x - 1.5) * (x - 1.5);
        let (x, y) = parabola_vertex((1.0, f(1.0)), (1.2, f(1.2)), (2.5, f(2.5))).unwrap();
        assert_abs_diff_eq!(x, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(y, 3.0, epsilon = 1e-12);
    }
}
