//! Weight laws: sampling, moments, log-MGFs, Cramér rate functions and the
//! stop-loss transform used to probe the increasing convex order.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp, Geometric, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::function::{erf::erfc, gamma::gamma_ur};

use crate::error::{config, LabError, Result};
use crate::numeric::{adaptive_simpson, concave_sup_halfline, xlogy_ratio};

/// Tolerance (in `t`) for the numeric Legendre transform.
pub const RATE_TOL: f64 = 1e-10;

/// An i.i.d. vertex-weight distribution.
///
/// `TwoPoint { a, b, p }` puts mass `p` on `b` and `1 - p` on `a`.
/// `Geometric { p }` counts failures before the first success, so its support
/// is `{0, 1, 2, ...}` and its mean is `(1 - p) / p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightLaw {
    Bernoulli { p: f64 },
    TwoPoint { a: f64, b: f64, p: f64 },
    Exponential { rate: f64 },
    Geometric { p: f64 },
    Uniform { lo: f64, hi: f64 },
    LogNormal { mu: f64, sigma: f64 },
    ChiSquared { k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    pub sd: f64,
}

/// One evaluation of the rate function. `finite_domain` is the closure of the
/// interval on which `I` can be finite (the convex hull of the support).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEvaluation {
    pub a: f64,
    pub value: f64,
    pub finite_domain: (f64, f64),
}

fn open_prob(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        config(format!("{name} must lie in (0, 1), got {p}"))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        config(format!("{name} must be finite, got {v}"))
    }
}

impl WeightLaw {
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::Bernoulli { p }.validated()
    }

    pub fn two_point(a: f64, b: f64, p: f64) -> Result<Self> {
        Self::TwoPoint { a, b, p }.validated()
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::Exponential { rate }.validated()
    }

    pub fn geometric(p: f64) -> Result<Self> {
        Self::Geometric { p }.validated()
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::Uniform { lo, hi }.validated()
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::LogNormal { mu, sigma }.validated()
    }

    pub fn chi_squared(k: f64) -> Result<Self> {
        Self::ChiSquared { k }.validated()
    }

    /// Checks parameter ranges and nondegeneracy.
    pub fn validated(self) -> Result<Self> {
        match self {
            Self::Bernoulli { p } | Self::Geometric { p } => open_prob("p", p)?,
            Self::TwoPoint { a, b, p } => {
                open_prob("p", p)?;
                finite("a", a)?;
                finite("b", b)?;
                if a == b {
                    return config("two-point law needs a != b");
                }
            }
            Self::Exponential { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return config(format!("rate must be positive, got {rate}"));
                }
            }
            Self::Uniform { lo, hi } => {
                finite("lo", lo)?;
                finite("hi", hi)?;
                if lo >= hi {
                    return config(format!("uniform law needs lo < hi, got [{lo}, {hi}]"));
                }
            }
            Self::LogNormal { mu, sigma } => {
                finite("mu", mu)?;
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return config(format!("sigma must be positive, got {sigma}"));
                }
            }
            Self::ChiSquared { k } => {
                if !(k > 0.0 && k.is_finite()) {
                    return config(format!("k must be positive, got {k}"));
                }
            }
        }
        Ok(self)
    }

    /// Laws without a rate function in this crate (heavy right tail).
    pub fn is_sampling_only(&self) -> bool {
        matches!(self, Self::LogNormal { .. } | Self::ChiSquared { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Bernoulli { .. } => "bernoulli",
            Self::TwoPoint { .. } => "twopoint",
            Self::Exponential { .. } => "exp",
            Self::Geometric { .. } => "geometric",
            Self::Uniform { .. } => "uniform",
            Self::LogNormal { .. } => "lognormal",
            Self::ChiSquared { .. } => "chisq",
        }
    }

    /// Convex hull of the support.
    pub fn support_hull(&self) -> (f64, f64) {
        match *self {
            Self::Bernoulli { .. } => (0.0, 1.0),
            Self::TwoPoint { a, b, .. } => (a.min(b), a.max(b)),
            Self::Exponential { .. } | Self::Geometric { .. } => (0.0, f64::INFINITY),
            Self::Uniform { lo, hi } => (lo, hi),
            Self::LogNormal { .. } | Self::ChiSquared { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn sampler(&self) -> Sampler {
        match *self {
            Self::Bernoulli { p } => Sampler::TwoPoint { a: 0.0, b: 1.0, p },
            Self::TwoPoint { a, b, p } => Sampler::TwoPoint { a, b, p },
            Self::Exponential { rate } => Sampler::Exp(Exp::new(rate).expect("validated rate")),
            Self::Geometric { p } => Sampler::Geometric(Geometric::new(p).expect("validated p")),
            Self::Uniform { lo, hi } => Sampler::Uniform { lo, width: hi - lo },
            Self::LogNormal { mu, sigma } => {
                Sampler::LogNormal(LogNormal::new(mu, sigma).expect("validated sigma"))
            }
            Self::ChiSquared { k } => Sampler::ChiSquared(ChiSquared::new(k).expect("validated k")),
        }
    }

    /// `count` i.i.d. draws from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        let s = self.sampler();
        (0..count).map(|_| s.draw(rng)).collect()
    }

    pub fn moments(&self) -> MomentSummary {
        let (mean, variance) = match *self {
            Self::Bernoulli { p } => (p, p * (1.0 - p)),
            Self::TwoPoint { a, b, p } => (a + (b - a) * p, (b - a) * (b - a) * p * (1.0 - p)),
            Self::Exponential { rate } => (1.0 / rate, 1.0 / (rate * rate)),
            Self::Geometric { p } => ((1.0 - p) / p, (1.0 - p) / (p * p)),
            Self::Uniform { lo, hi } => (0.5 * (lo + hi), (hi - lo) * (hi - lo) / 12.0),
            Self::LogNormal { mu, sigma } => {
                let s2 = sigma * sigma;
                ((mu + 0.5 * s2).exp(), s2.exp_m1() * (2.0 * mu + s2).exp())
            }
            Self::ChiSquared { k } => (k, 2.0 * k),
        };
        MomentSummary { mean, variance, sd: variance.sqrt() }
    }

    /// `log E[e^{tX}]`, or `+inf` where the expectation diverges.
    pub fn log_mgf(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        match *self {
            Self::Bernoulli { p } => two_point_log_mgf(0.0, 1.0, p, t),
            Self::TwoPoint { a, b, p } => two_point_log_mgf(a, b, p, t),
            Self::Exponential { rate } => {
                if t < rate {
                    -(-t / rate).ln_1p()
                } else {
                    f64::INFINITY
                }
            }
            Self::Geometric { p } => {
                let q = 1.0 - p;
                if t < -q.ln() {
                    p.ln() - (-q * t.exp()).ln_1p()
                } else {
                    f64::INFINITY
                }
            }
            Self::Uniform { lo, hi } => {
                let tw = t * (hi - lo);
                if t > 0.0 {
                    t * hi + (-(-tw).exp_m1() / tw).ln()
                } else {
                    t * lo + (tw.exp_m1() / tw).ln()
                }
            }
            Self::LogNormal { mu, sigma } => {
                if t > 0.0 {
                    f64::INFINITY
                } else {
                    // E exp(t e^{mu + sigma z}) against the standard normal density.
                    let integrand = |z: f64| {
                        (t * (mu + sigma * z).exp() - 0.5 * z * z).exp()
                            / (2.0 * std::f64::consts::PI).sqrt()
                    };
                    adaptive_simpson(&integrand, -12.0, 12.0, 1e-13).ln()
                }
            }
            Self::ChiSquared { k } => {
                if t < 0.5 {
                    -0.5 * k * (-2.0 * t).ln_1p()
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Cramér rate function `I(a) = sup_t (a t - log M(t))`.
    ///
    /// Closed forms for Bernoulli, two-point, exponential and geometric laws;
    /// numeric Legendre transform for the uniform law. Sampling-only laws are
    /// rejected.
    pub fn rate(&self, a: f64) -> Result<RateEvaluation> {
        if self.is_sampling_only() {
            return Err(LabError::Unsupported(format!(
                "no rate function for sampling-only law {self}"
            )));
        }
        let value = match *self {
            Self::Bernoulli { p } => bernoulli_rate(p, a),
            Self::TwoPoint { a: lo, b: hi, p } => bernoulli_rate(p, (a - lo) / (hi - lo)),
            Self::Exponential { rate } => {
                if a > 0.0 {
                    let x = rate * a;
                    x - 1.0 - x.ln()
                } else {
                    f64::INFINITY
                }
            }
            Self::Geometric { p } => {
                if a >= 0.0 {
                    let q = 1.0 - p;
                    xlogy_ratio(a, q * (1.0 + a)) - p.ln() - a.ln_1p()
                } else {
                    f64::INFINITY
                }
            }
            _ => numeric_rate(self, a),
        };
        Ok(RateEvaluation { a, value, finite_domain: self.support_hull() })
    }

    /// Rate of the affine image `a + (b - a) X` of `X ~ Bernoulli(p)` at `s`;
    /// only defined for two-point laws with `b > a`.
    pub fn affine_rate(&self, s: f64) -> Result<f64> {
        match *self {
            Self::TwoPoint { a, b, p } => {
                if b <= a {
                    return config(format!("affine rate needs b > a, got a = {a}, b = {b}"));
                }
                Ok(bernoulli_rate(p, (s - a) / (b - a)))
            }
            _ => config(format!("affine rate is defined for two-point laws, got {self}")),
        }
    }

    /// Stop-loss transform `E (X - t)^+`.
    pub fn stop_loss(&self, t: f64) -> f64 {
        let m = self.moments().mean;
        match *self {
            Self::Bernoulli { p } => p * (1.0 - t).max(0.0) + (1.0 - p) * (-t).max(0.0),
            Self::TwoPoint { a, b, p } => p * (b - t).max(0.0) + (1.0 - p) * (a - t).max(0.0),
            Self::Exponential { rate } => {
                if t <= 0.0 {
                    m - t
                } else {
                    (-rate * t).exp() / rate
                }
            }
            Self::Geometric { p } => {
                if t < 0.0 {
                    m - t
                } else {
                    // Memorylessness: given X >= n, X - n has the original law.
                    let q = 1.0 - p;
                    let n = t.floor() + 1.0;
                    q.powf(n) * (n - t + q / p)
                }
            }
            Self::Uniform { lo, hi } => {
                if t <= lo {
                    m - t
                } else if t >= hi {
                    0.0
                } else {
                    (hi - t) * (hi - t) / (2.0 * (hi - lo))
                }
            }
            Self::LogNormal { mu, sigma } => {
                if t <= 0.0 {
                    m - t
                } else {
                    let d1 = (mu + sigma * sigma - t.ln()) / sigma;
                    m * normal_cdf(d1) - t * normal_cdf(d1 - sigma)
                }
            }
            Self::ChiSquared { k } => {
                if t <= 0.0 {
                    m - t
                } else {
                    // E[X; X > t] = k P(chi2_{k+2} > t).
                    k * gamma_ur(0.5 * k + 1.0, 0.5 * t) - t * gamma_ur(0.5 * k, 0.5 * t)
                }
            }
        }
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn two_point_log_mgf(a: f64, b: f64, p: f64, t: f64) -> f64 {
    let u = (1.0 - p).ln() + t * a;
    let v = p.ln() + t * b;
    let hi = u.max(v);
    hi + ((u - hi).exp() + (v - hi).exp()).ln()
}

/// Closed-form Bernoulli(p) rate, `x ln(x/p) + (1-x) ln((1-x)/(1-p))` on
/// `[0, 1]` and `+inf` outside.
pub fn bernoulli_rate(p: f64, x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return f64::INFINITY;
    }
    xlogy_ratio(x, p) + xlogy_ratio(1.0 - x, 1.0 - p)
}

/// Numeric Legendre transform of `log_mgf` by golden-section ascent on the
/// half-line pointing away from the mean. Valid for any law with a finite
/// log-MGF near 0; `+inf` outside the closed support hull.
pub fn numeric_rate(law: &WeightLaw, a: f64) -> f64 {
    let (lo, hi) = law.support_hull();
    if a < lo || a > hi || !a.is_finite() {
        return f64::INFINITY;
    }
    let m = law.moments().mean;
    let objective = |t: f64| {
        let l = law.log_mgf(t);
        if l.is_finite() {
            a * t - l
        } else {
            f64::NEG_INFINITY
        }
    };
    concave_sup_halfline(objective, a >= m, RATE_TOL).max(0.0)
}

/// Increasing-convex-order gap `E_F (X - t)^+ - E_G (X - t)^+`.
pub fn icx_gap(f: &WeightLaw, g: &WeightLaw, t: f64) -> f64 {
    f.stop_loss(t) - g.stop_loss(t)
}

/// Two-point law with prescribed mean, variance and upper-atom mass `p`.
pub fn two_point_matching(mean: f64, variance: f64, p: f64) -> Result<WeightLaw> {
    // b - a = sd / sqrt(p (1 - p)), a = mean - p (b - a).
    let w = (variance / (p * (1.0 - p))).sqrt();
    WeightLaw::two_point(mean - p * w, mean - p * w + w, p)
}

/// A prepared sampler; cheap to copy into worker threads.
#[derive(Debug, Clone, Copy)]
pub enum Sampler {
    TwoPoint { a: f64, b: f64, p: f64 },
    Exp(Exp<f64>),
    Geometric(Geometric),
    Uniform { lo: f64, width: f64 },
    LogNormal(LogNormal<f64>),
    ChiSquared(ChiSquared<f64>),
}

impl Sampler {
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::TwoPoint { a, b, p } => {
                if rng.random::<f64>() < *p {
                    *b
                } else {
                    *a
                }
            }
            Sampler::Exp(d) => d.sample(rng),
            Sampler::Geometric(d) => d.sample(rng) as f64,
            Sampler::Uniform { lo, width } => lo + width * rng.random::<f64>(),
            Sampler::LogNormal(d) => d.sample(rng),
            Sampler::ChiSquared(d) => d.sample(rng),
        }
    }
}

impl fmt::Display for WeightLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Bernoulli { p } => write!(f, "bernoulli:p={p}"),
            Self::TwoPoint { a, b, p } => write!(f, "twopoint:a={a},b={b},p={p}"),
            Self::Exponential { rate } => write!(f, "exp:rate={rate}"),
            Self::Geometric { p } => write!(f, "geometric:p={p}"),
            Self::Uniform { lo, hi } => write!(f, "uniform:lo={lo},hi={hi}"),
            Self::LogNormal { mu, sigma } => write!(f, "lognormal:mu={mu},sigma={sigma}"),
            Self::ChiSquared { k } => write!(f, "chisq:k={k}"),
        }
    }
}

impl FromStr for WeightLaw {
    type Err = LabError;

    /// Parses `name:key=value,...`, e.g. `bernoulli:p=0.7` or
    /// `uniform:lo=0,hi=1`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params: Vec<(String, f64)> = Vec::new();
        for item in rest.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| LabError::Config(format!("expected key=value in law, got {item:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| LabError::Config(format!("bad number {v:?} in law {s:?}")))?;
            params.push((k.trim().to_ascii_lowercase(), v));
        }
        let take = |keys: &[&str]| -> Result<Vec<f64>> {
            for (k, _) in &params {
                if !keys.contains(&k.as_str()) {
                    return config(format!("unknown parameter {k:?} for law {name:?}"));
                }
            }
            keys.iter()
                .map(|key| {
                    params
                        .iter()
                        .find(|(k, _)| k == key)
                        .map(|&(_, v)| v)
                        .ok_or_else(|| LabError::Config(format!("law {name:?} needs parameter {key}")))
                })
                .collect()
        };
        match name.to_ascii_lowercase().as_str() {
            "bernoulli" => {
                let v = take(&["p"])?;
                Self::bernoulli(v[0])
            }
            "twopoint" => {
                let v = take(&["a", "b", "p"])?;
                Self::two_point(v[0], v[1], v[2])
            }
            "exp" | "exponential" => {
                let v = take(&["rate"])?;
                Self::exponential(v[0])
            }
            "geometric" => {
                let v = take(&["p"])?;
                Self::geometric(v[0])
            }
            "uniform" => {
                let v = take(&["lo", "hi"])?;
                Self::uniform(v[0], v[1])
            }
            "lognormal" => {
                let v = take(&["mu", "sigma"])?;
                Self::log_normal(v[0], v[1])
            }
            "chisq" => {
                let v = take(&["k"])?;
                Self::chi_squared(v[0])
            }
            other => config(format!("unknown law {other:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grammar_round_trips() {
        for s in [
            "bernoulli:p=0.7",
            "exp:rate=1",
            "uniform:lo=0,hi=1",
            "twopoint:a=2,b=5,p=0.7",
            "geometric:p=0.5",
            "lognormal:mu=0,sigma=1",
            "chisq:k=0.5",
        ] {
            let law: WeightLaw = s.parse().unwrap();
            assert_eq!(law.to_string(), s);
        }
        assert!("bernoulli:p=1.5".parse::<WeightLaw>().is_err());
        assert!("bernoulli:q=0.5".parse::<WeightLaw>().is_err());
        assert!("cauchy:x=1".parse::<WeightLaw>().is_err());
        assert!("uniform:lo=1,hi=1".parse::<WeightLaw>().is_err());
    }

    #[test]
    fn sampling_is_seeded() {
        let law = WeightLaw::exponential(1.0).unwrap();
        assert_eq!(law.sample(&mut stream(3, "t", 0), 5), law.sample(&mut stream(3, "t", 0), 5));
        let tp = WeightLaw::two_point(2.0, 5.0, 0.5).unwrap();
        assert!(tp.sample(&mut stream(1, "t", 0), 4).iter().all(|&v| v == 2.0 || v == 5.0));
    }

    #[test]
    fn moments_closed_form() {
        let m = WeightLaw::bernoulli(0.75).unwrap().moments();
        assert_eq!((m.mean, m.variance), (0.75, 0.1875));
        let m = WeightLaw::uniform(0.0, 1.0).unwrap().moments();
        assert_abs_diff_eq!(m.variance, 1.0 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn log_mgf_examples() {
        let e = WeightLaw::exponential(1.0).unwrap();
        assert_abs_diff_eq!(e.log_mgf(0.5), 2f64.ln(), epsilon = 1e-15);
        assert!(e.log_mgf(1.0).is_infinite());
        assert_eq!(WeightLaw::bernoulli(0.5).unwrap().log_mgf(0.0), 0.0);
        // Lognormal at negative t against a direct sample-free check: M(t) < 1.
        let ln = WeightLaw::log_normal(0.0, 1.0).unwrap();
        assert!(ln.log_mgf(-1.0) < 0.0 && ln.log_mgf(1.0).is_infinite());
    }

    #[test]
    fn rate_examples() {
        let b = WeightLaw::bernoulli(0.5).unwrap();
        let want = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert_abs_diff_eq!(b.rate(0.75).unwrap().value, want, epsilon = 1e-15);
        assert_abs_diff_eq!(want, 0.130812, epsilon = 1e-6);
        let e = WeightLaw::exponential(1.0).unwrap();
        assert_abs_diff_eq!(numeric_rate(&e, 2.0), 1.0 - 2f64.ln(), epsilon = 1e-9);
        assert!(matches!(
            WeightLaw::chi_squared(0.5).unwrap().rate(1.0),
            Err(LabError::Unsupported(_))
        ));
    }

    #[test]
    fn affine_rate_examples() {
        let tp = WeightLaw::two_point(2.0, 5.0, 0.7).unwrap();
        assert_abs_diff_eq!(tp.affine_rate(4.1).unwrap(), 0.0, epsilon = 1e-14);
        let tp = WeightLaw::two_point(0.0, 2.0, 0.5).unwrap();
        assert_abs_diff_eq!(tp.affine_rate(1.5).unwrap(), 0.130812, epsilon = 1e-6);
        let down = WeightLaw::TwoPoint { a: 5.0, b: 2.0, p: 0.7 };
        assert!(down.affine_rate(3.0).is_err());
    }

    #[test]
    fn icx_example() {
        let f = WeightLaw::bernoulli(0.5).unwrap();
        let h = 3f64.sqrt() / 2.0;
        let g = WeightLaw::uniform(0.5 - h, 0.5 + h).unwrap();
        assert_abs_diff_eq!(icx_gap(&f, &g, 0.5), 0.25 - 0.375 / 3f64.sqrt(), epsilon = 1e-15);
        assert!(icx_gap(&f, &g, 1.2) < 0.0);
    }
}
