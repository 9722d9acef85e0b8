use std::path::Path;

use lpplab::busemann::{adjacent_cov, downright_cov, increment_mean_check, variance_bound_check, IncrementCovReport};
use lpplab::coarsegrain::{
    count_bound_log, crossings, enumerate_paths, geometric_crossings, verify_modify, CoarseGridSpec,
};
use lpplab::criterion::{bernoulli_analysis, check_criterion, p_star, s_star, Verdict};
use lpplab::legendre::{
    compare_shapes, dual_from_slice, exp_dual, log_grid, neg_cov_condition, slice_from_dual, DualFunction, Provenance,
    ShapeSlice,
};
use lpplab::lpp::{default_x_grid, g_exp, shape_profile, ExpShapeParams};
use lpplab::rng::stream;
use serde_json::json;

use crate::args::*;
use crate::emit::{num, Artifact};
use crate::CliError;

/// An artifact and, for commands that have one, a pass/fail verdict.
pub type Outcome = (Artifact, Option<bool>);

const LN4: f64 = std::f64::consts::LN_2 * 2.0;
/// Sup-norm accuracy of the numeric dual, used as the verdict tolerance.
const DUAL_TOL: f64 = 1e-4;

pub fn shape(a: &ShapeArgs, seed: u64) -> Result<Outcome, CliError> {
    let est = shape_profile(&a.law, a.n, &default_x_grid(a.grid), a.replicas, seed)?;
    let params = ExpShapeParams::from_law(&a.law);
    let header = ["x", "g_hat", "stderr", "g_exp", "N", "replicas", "law", "seed"];
    let mut art = Artifact::new("shape-v1", &header, &est)?;
    let mut below = true;
    for i in 0..est.x_grid.len() {
        let x = est.x_grid[i];
        let ge = g_exp(params, x, 1.0 - x);
        below &= est.mean_over_n[i] <= ge + 3.0 * est.stderr[i];
        art.row(vec![
            num(x),
            num(est.mean_over_n[i]),
            num(est.stderr[i]),
            num(ge),
            a.n.to_string(),
            a.replicas.to_string(),
            a.law.to_string(),
            seed.to_string(),
        ]);
    }
    art.note("below_g_exp_3se", below);
    Ok((art, Some(below)))
}

pub fn criterion(a: &CriterionArgs) -> Result<Outcome, CliError> {
    let rep = check_criterion(&a.law, a.grid)?;
    let mut art = Artifact::new("criterion-v1", &["s", "lhs", "rhs", "phi"], &rep)?;
    let holds = rep.verdict.holds();
    art.note("verdict", if holds { "holds" } else { "fails" });
    if let Verdict::Fails { at } = &rep.verdict {
        art.note("failing_points", at.len());
    }
    art.note("worst_s", rep.worst_s);
    art.note("worst_phi", rep.worst_phi);
    art.note("refined_points", rep.refined.len());
    for i in 0..rep.s_grid.len() {
        art.row(vec![num(rep.s_grid[i]), num(rep.lhs[i]), num(rep.rhs[i]), num(rep.phi[i])]);
    }
    Ok((art, Some(holds)))
}

/// The verdict is `φ < 0` on the interior grid points below `min(1, s*)`.
pub fn phi(a: &PhiArgs) -> Result<Outcome, CliError> {
    let an = bernoulli_analysis(a.p, a.smax, a.grid)?;
    let mut art = Artifact::new("phi-v1", &["s", "phi"], &an)?;
    let cut = an.s_star.unwrap_or(1.0).min(1.0);
    let negative = an.phi_grid.iter().filter(|(s, _)| *s > 0.0 && *s < cut).all(|(_, v)| *v < 0.0);
    art.note("p", a.p);
    art.note("s_star", an.s_star.map_or("none".to_string(), num));
    art.note("p_star", an.p_star);
    art.note("negative_below_s_star", negative);
    for &(s, v) in &an.phi_grid {
        art.row(vec![num(s), num(v)]);
    }
    Ok((art, Some(negative)))
}

pub fn pstar() -> Result<Outcome, CliError> {
    let p = p_star()?;
    let st = s_star(p)?;
    let residual = LN4 - (1.0 + p) / (1.0 + st);
    let result = json!({ "p_star": p, "residual": residual, "s_star": st });
    let mut art = Artifact::new("pstar-v1", &["p_star", "residual", "s_star"], &result)?;
    art.row(vec![num(p), num(residual), num(st)]);
    Ok((art, Some(residual.abs() <= 1e-8)))
}

fn cov_rows(art: &mut Artifact, reps: &[IncrementCovReport]) {
    for r in reps {
        art.row(vec![
            r.pair.0.clone(),
            r.pair.1.clone(),
            r.k.map_or(String::new(), |k| k.to_string()),
            num(r.cov),
            num(r.stderr),
            r.replicas.to_string(),
            r.n.to_string(),
            num(r.s),
            r.consistent_nonpositive.map_or(String::new(), |b| b.to_string()),
        ]);
    }
}

const COV_HEADER: [&str; 9] = ["pair_a", "pair_b", "k", "cov", "stderr", "replicas", "n", "s", "consistent_nonpositive"];

pub fn busemann(a: &BusemannArgs, seed: u64) -> Result<Outcome, CliError> {
    const SCHEMA: &str = "busemann-v1";
    match a.mode {
        BusemannMode::Adjacent | BusemannMode::Downright => {
            let reps = if a.mode == BusemannMode::Adjacent {
                vec![adjacent_cov(&a.law, a.s, a.n, a.replicas, seed)?]
            } else {
                downright_cov(&a.law, a.s, a.n, a.kmax, a.replicas, seed)?
            };
            let mut art = Artifact::new(SCHEMA, &COV_HEADER, &reps)?;
            cov_rows(&mut art, &reps);
            let verdict = reps.iter().map(|r| r.consistent_nonpositive).collect::<Option<Vec<bool>>>();
            let verdict = verdict.map(|v| v.iter().all(|&b| b));
            Ok((art, verdict))
        }
        BusemannMode::Means => {
            let (m1, m2) = increment_mean_check(&a.law, a.s, a.n, a.replicas, seed)?;
            let result = json!({ "b_0_e1": m1, "b_0_e2": m2 });
            let mut art = Artifact::new(SCHEMA, &["increment", "estimate", "stderr", "reference"], &result)?;
            let mut ok = true;
            for (name, m) in [("B(0,e1)", m1), ("B(0,e2)", m2)] {
                ok &= (m.estimate - m.reference).abs() <= 3.0 * m.stderr;
                art.row(vec![name.into(), num(m.estimate), num(m.stderr), num(m.reference)]);
            }
            art.note("within_3se", ok);
            Ok((art, Some(ok)))
        }
        BusemannMode::Variance => {
            let v = variance_bound_check(&a.law, a.s, a.n, a.path_length, a.replicas, seed)?;
            let mut art = Artifact::new(SCHEMA, &["lhs", "rhs", "ratio_stderr", "holds"], &v)?;
            art.row(vec![num(v.lhs), num(v.rhs), num(v.ratio_stderr), v.holds.to_string()]);
            Ok((art, Some(v.holds)))
        }
    }
}

fn spec_of(a: &CoarseSpecArgs) -> Result<CoarseGridSpec, CliError> {
    Ok(CoarseGridSpec::new(a.n, a.s, a.r, a.m, a.l, a.b)?)
}

fn kv_rows(art: &mut Artifact) {
    if let Some(obj) = art.json.as_object() {
        let rows: Vec<Vec<String>> = obj
            .iter()
            .map(|(k, v)| vec![k.clone(), v.as_str().map_or_else(|| v.to_string(), str::to_string)])
            .collect();
        for r in rows {
            art.row(r);
        }
    }
}

pub fn coarse(a: &CoarseArgs, seed: u64) -> Result<Outcome, CliError> {
    match &a.sub {
        CoarseSub::Enumerate(sa) => {
            let spec = spec_of(sa)?;
            let count = enumerate_paths(&spec)?;
            let bound = count_bound_log(&spec);
            let within = (count as f64).ln() <= bound.log_bound;
            let result = json!({
                "exact_count": count,
                "bound_log": bound.log_bound,
                "crossings": crossings(spec.n, spec.s, spec.r, spec.m),
                "geometric_crossings": geometric_crossings(&spec),
                "within_bound": within,
            });
            let mut art = Artifact::new("coarse-v1", &["key", "value"], &result)?;
            kv_rows(&mut art);
            Ok((art, Some(within)))
        }
        CoarseSub::VerifyModify(va) => {
            let spec = spec_of(&va.spec)?;
            let rep = verify_modify(&spec, &va.law, va.trials, seed)?;
            let result = json!({
                "bound_log": count_bound_log(&spec).log_bound,
                "crossings": crossings(spec.n, spec.s, spec.r, spec.m),
                "geometric_crossings": geometric_crossings(&spec),
                "trials": rep.trials,
                "trials_passed": rep.trials_passed,
                "admissible": rep.admissible,
                "length_ok": rep.length_ok,
                "weight_ok": rep.weight_ok,
                "max_length": rep.max_length,
                "length_bound": rep.length_bound,
                "min_weight_margin": rep.min_weight_margin,
                "first_failure": rep.first_failure,
            });
            let mut art = Artifact::new("coarse-v1", &["key", "value"], &result)?;
            kv_rows(&mut art);
            Ok((art, Some(rep.trials_passed == rep.trials)))
        }
    }
}

/// Reads two numeric columns by name from a CSV file (`#` lines skipped).
fn read_columns(path: &Path, x: &str, y: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let bad = |e: String| CliError::Config(format!("{}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| bad(format!("no column {name:?}")));
    let (ix, iy) = (col(x)?, col(y)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let get = |i: usize| -> Result<f64, CliError> {
            rec.get(i).unwrap_or("").trim().parse().map_err(|_| bad(format!("bad number in row {rec:?}")))
        };
        xs.push(get(ix)?);
        ys.push(get(iy)?);
    }
    Ok((xs, ys))
}

fn dual_artifact(dual: &DualFunction, sigma: f64) -> Result<Outcome, CliError> {
    let rep = neg_cov_condition(dual, dual.mean, sigma, DUAL_TOL);
    let mut art = Artifact::new("legendre-dual-v1", &["a", "f", "exp_bound"], dual)?;
    art.note("cov_sign", format!("{:?}", rep.verdict).to_lowercase());
    for (&a, &f) in dual.a_grid.iter().zip(&dual.f_values) {
        art.row(vec![num(a), num(f), num(exp_dual(dual.mean, sigma, a))]);
    }
    Ok((art, None))
}

pub fn legendre(a: &LegendreArgs, seed: u64) -> Result<Outcome, CliError> {
    let params = ExpShapeParams::from_law(&a.law);
    if a.grid < 3 {
        return Err(CliError::Config("legendre grid needs at least 3 points".into()));
    }
    match a.mode {
        LegendreMode::Dual => {
            let slice = match &a.input {
                Some(p) => {
                    let (s, g) = read_columns(p, "s", "gamma")?;
                    ShapeSlice::new(s, g, Provenance::MonteCarlo, params.m)?.concave_majorant()
                }
                None => ShapeSlice::exp_analytic(params, log_grid(1e-4, 1e5, 4000))?,
            };
            let dual = dual_from_slice(&slice, &slice.dual_grid(a.grid));
            dual_artifact(&dual, params.sigma)
        }
        LegendreMode::Slice => {
            let p = a.input.as_ref().ok_or_else(|| CliError::Config("slice mode needs --input".into()))?;
            let (av, fv) = read_columns(p, "a", "f")?;
            let dual = DualFunction { a_grid: av, f_values: fv, mean: params.m };
            let slice = slice_from_dual(&dual, &log_grid(1e-3, 1e3, a.grid))?;
            let mut art = Artifact::new("legendre-slice-v1", &["s", "gamma"], &slice)?;
            for (&s, &g) in slice.s_grid.iter().zip(&slice.gamma) {
                art.row(vec![num(s), num(g)]);
            }
            Ok((art, None))
        }
        LegendreMode::Roundtrip => {
            let s_grid = log_grid(0.01, 10.0, a.grid);
            let slice = ShapeSlice::exp_analytic(params, s_grid.clone())?;
            // The dual grid must reach the tangent slopes at both ends of the slice.
            let wide = ShapeSlice::exp_analytic(params, log_grid(1e-4, 1e3, 400))?;
            let dual = dual_from_slice(&slice, &wide.dual_grid(4000));
            let back = slice_from_dual(&dual, &s_grid)?;
            let err: Vec<f64> = slice.gamma.iter().zip(&back.gamma).map(|(x, y)| (x - y).abs()).collect();
            let max_err = err.iter().copied().fold(0.0, f64::max);
            let result = json!({ "s": s_grid, "gamma": slice.gamma, "gamma_back": back.gamma, "max_error": max_err });
            let mut art = Artifact::new("legendre-roundtrip-v1", &["s", "gamma", "gamma_back", "error"], &result)?;
            art.note("max_error", max_err);
            for i in 0..s_grid.len() {
                art.row(vec![num(s_grid[i]), num(slice.gamma[i]), num(back.gamma[i]), num(err[i])]);
            }
            Ok((art, Some(max_err <= 1e-4)))
        }
        LegendreMode::Compare => {
            // x in (1/2, 1) maps to s = (1-x)/x in (0, 1).
            let x_grid: Vec<f64> = (1..=a.grid).map(|i| 0.5 + 0.5 * i as f64 / (a.grid + 1) as f64).collect();
            let est = shape_profile(&a.law, a.n, &x_grid, a.replicas, seed)?;
            let mc = ShapeSlice::from_profile(&est)?;
            let exp = ShapeSlice::exp_analytic(params, mc.s_grid.clone())?;
            let slack: Vec<f64> = mc.stderr.as_ref().map_or(vec![0.0; mc.s_grid.len()], |se| {
                se.iter().map(|v| 3.0 * v).collect()
            });
            let dom = compare_shapes(&mc, &exp, Some(&slack))?;
            let mut art = Artifact::new("legendre-compare-v1", &["s", "gamma_mc", "stderr", "gamma_exp"], &dom)?;
            art.note("dominates", dom.dominates);
            art.note("max_violation", dom.max_violation);
            art.note("argmax_s", dom.argmax_s);
            for (i, sl) in slack.iter().enumerate() {
                art.row(vec![num(mc.s_grid[i]), num(mc.gamma[i]), num(sl / 3.0), num(exp.gamma[i])]);
            }
            Ok((art, Some(dom.dominates)))
        }
    }
}

pub fn dist(a: &DistArgs, seed: u64) -> Result<Outcome, CliError> {
    let mom = a.law.moments();
    let mut result = json!({ "law": a.law.to_string(), "moments": mom });
    let mut art;
    if a.law.is_sampling_only() {
        art = Artifact::new("dist-v1", &["a", "rate"], &result)?;
        art.note("rate", "unsupported for this law");
    } else {
        if a.grid < 2 {
            return Err(CliError::Config("dist grid needs at least 2 points".into()));
        }
        let (lo, hi) = a.law.support_hull();
        let (from, to) = ((mom.mean - 3.0 * mom.sd).max(lo), (mom.mean + 3.0 * mom.sd).min(hi));
        let mut rates = Vec::with_capacity(a.grid);
        for i in 0..a.grid {
            let x = from + (to - from) * i as f64 / (a.grid - 1) as f64;
            rates.push((x, a.law.rate(x)?.value));
        }
        result["rate"] = json!(rates);
        art = Artifact::new("dist-v1", &["a", "rate"], &result)?;
        for (x, v) in rates {
            art.row(vec![num(x), num(v)]);
        }
    }
    art.note("mean", mom.mean);
    art.note("variance", mom.variance);
    art.note("sd", mom.sd);
    if a.samples > 0 {
        let mut rng = stream(seed, "dist", 0);
        let mean = a.law.sample(&mut rng, a.samples).iter().sum::<f64>() / a.samples as f64;
        art.note("sample_mean", mean);
        if let Some(obj) = art.json.as_object_mut() {
            obj.insert("sample_mean".into(), json!(mean));
        }
    }
    Ok((art, None))
}
