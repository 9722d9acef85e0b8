use std::path::Path;
use std::process::{Command, Output};

fn lpplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpplab")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Data rows (no `#` lines) split into cells, header first.
fn table(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = rows[0].iter().position(|h| h == name).unwrap();
    rows[1..].iter().map(|r| r[i].parse().unwrap()).collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pstar_prints_threshold_and_residual() {
    let out = lpplab(&["pstar"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = table(&stdout(&out));
    assert_eq!(rows[0], ["p_star", "residual", "s_star"]);
    assert!((column(&rows, "p_star")[0] - 0.6504).abs() <= 5e-4);
    assert!(column(&rows, "residual")[0].abs() <= 1e-8);
    let nested = lpplab(&["criterion", "pstar"]);
    assert_eq!(table(&stdout(&nested)), rows);
}

#[test]
fn phi_quarter_is_positive_somewhere() {
    let out = lpplab(&["phi", "--p", "0.25", "--grid", "500"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = table(&stdout(&out));
    assert_eq!(rows[0], ["s", "phi"]);
    assert_eq!(rows.len(), 502);
    assert!(column(&rows, "phi").iter().any(|&v| v > 0.0));
    assert_eq!(lpplab(&["phi", "--p", "0.25", "--grid", "500", "--assert"]).status.code(), Some(1));
    assert_eq!(lpplab(&["phi", "--p", "0.75", "--assert"]).status.code(), Some(0));
}

#[test]
fn shape_reruns_are_byte_identical() {
    let args = ["shape", "--law", "exp:rate=1", "--N", "200", "--replicas", "4", "--grid", "5", "--seed", "1"];
    let a = lpplab(&args);
    let b = lpplab(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let rows = table(&stdout(&a));
    assert_eq!(rows[0], ["x", "g_hat", "stderr", "g_exp", "N", "replicas", "law", "seed"]);
    assert_eq!(rows.len(), 6);
    // Thread count is recorded but never changes the numbers.
    let mut more = args.to_vec();
    more.extend(["--threads", "3"]);
    let c = lpplab(&more);
    assert_eq!(table(&stdout(&c)), rows);
    assert_ne!(a.stdout, c.stdout);
    let other_seed = lpplab(&["shape", "--N", "200", "--replicas", "4", "--grid", "5", "--seed", "2"]);
    assert_ne!(table(&stdout(&other_seed)), rows);
}

#[test]
fn configuration_errors_exit_with_two() {
    assert_eq!(lpplab(&["shape", "--law", "cauchy:x=1"]).status.code(), Some(2));
    assert_eq!(lpplab(&["shape", "--law", "bernoulli:p=1.5"]).status.code(), Some(2));
    assert_eq!(lpplab(&["shape", "--bogus", "1"]).status.code(), Some(2));
    assert_eq!(lpplab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(lpplab(&["shape", "--N", "1"]).status.code(), Some(2));
    // 2L > M.
    assert_eq!(lpplab(&["coarse", "enumerate", "--M", "3", "--L", "2"]).status.code(), Some(2));
    assert_eq!(lpplab(&["criterion", "--grid", "10"]).status.code(), Some(2));
    assert_eq!(lpplab(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "## shape run\nseed=5\nN = 150\nreplicas=3\ngrid=3\n").unwrap();
    let from_file = stdout(&lpplab(&["shape", "--config", path_str(&cfg)]));
    assert!(from_file.contains("# seed=5\n") && from_file.contains("# N=150\n"));
    let flag_wins = stdout(&lpplab(&["shape", "--config", path_str(&cfg), "--seed", "6"]));
    assert!(flag_wins.contains("# seed=6\n") && flag_wins.contains("# N=150\n"));
    let defaults = stdout(&lpplab(&["shape", "--N", "150", "--replicas", "3", "--grid", "3"]));
    assert!(defaults.contains("# seed=0\n"));

    std::fs::write(&cfg, "colour=blue\n").unwrap();
    assert_eq!(lpplab(&["shape", "--config", path_str(&cfg)]).status.code(), Some(2));
    std::fs::write(&cfg, "seed five\n").unwrap();
    assert_eq!(lpplab(&["shape", "--config", path_str(&cfg)]).status.code(), Some(2));
    let missing = dir.path().join("missing.cfg");
    assert_eq!(lpplab(&["shape", "--config", path_str(&missing)]).status.code(), Some(2));
}

#[test]
fn artifacts_reexecute_from_embedded_config() {
    let dir = tempfile::tempdir().unwrap();
    for (file, format) in [("shape.csv", "csv"), ("shape.json", "json")] {
        let out = dir.path().join(file);
        let args = ["shape", "--N", "120", "--replicas", "3", "--grid", "4", "--seed", "9", "--format", format];
        let mut first = args.to_vec();
        first.extend(["--out", path_str(&out)]);
        assert_eq!(lpplab(&first).status.code(), Some(0));
        let before = std::fs::read(&out).unwrap();
        assert_eq!(lpplab(&["shape", "--config", path_str(&out)]).status.code(), Some(0));
        assert_eq!(std::fs::read(&out).unwrap(), before, "{format}");
    }
    // A config recorded for another command is refused.
    let out = dir.path().join("shape.csv");
    assert_eq!(lpplab(&["pstar", "--config", path_str(&out)]).status.code(), Some(2));
}

#[test]
fn json_documents() {
    let out = lpplab(&["busemann", "--n", "40", "--replicas", "120", "--seed", "3", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["schema"], "busemann-v1");
    assert_eq!(doc["config"]["n"], "40");
    assert_eq!(doc["config"]["command"], "busemann");
    assert!(doc["result"][0]["cov"].is_number());

    let out = lpplab(&["coarse", "enumerate", "--N", "8", "--M", "4", "--L", "2", "--format", "json", "--assert"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let r = &doc["result"];
    assert!(r["exact_count"].as_u64().unwrap() > 0);
    assert!((r["exact_count"].as_u64().unwrap() as f64).ln() <= r["bound_log"].as_f64().unwrap());
    assert_eq!(r["crossings"], 4);
    assert_eq!(r["geometric_crossings"], 4);

    let out = lpplab(&["coarse", "verify-modify", "--trials", "50", "--seed", "7", "--format", "json", "--assert"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["trials_passed"], 50);
}

#[test]
fn legendre_modes() {
    assert_eq!(lpplab(&["legendre", "--mode", "roundtrip", "--grid", "200", "--assert"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let dual = dir.path().join("dual.csv");
    let out = lpplab(&["legendre", "--grid", "300", "--out", path_str(&dual)]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&dual).unwrap();
    assert!(text.contains("## cov_sign: boundary\n"));
    let rows = table(&text);
    let (f, bound) = (column(&rows, "f"), column(&rows, "exp_bound"));
    assert!(f.iter().zip(&bound).all(|(x, y)| (x - y).abs() < 1e-4));

    let out = lpplab(&["legendre", "--mode", "slice", "--input", path_str(&dual), "--grid", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = table(&stdout(&out));
    for (s, g) in column(&rows, "s").into_iter().zip(column(&rows, "gamma")) {
        // Exp(1): γ(s) = 1 + s + 2√s, reachable only over the slopes the dual grid covers.
        if (0.01..=10.0).contains(&s) {
            assert!((g - (1.0 + s + 2.0 * s.sqrt())).abs() < 1e-2, "s={s} gamma={g}");
        }
    }
    assert_eq!(lpplab(&["legendre", "--mode", "slice"]).status.code(), Some(2));
}

#[test]
fn dist_reports_moments_and_rate() {
    let out = lpplab(&["dist", "--law", "bernoulli:p=0.7", "--grid", "5"]);
    let text = stdout(&out);
    assert!(text.contains("## mean: 0.7\n"));
    let rows = table(&text);
    let (a, rate) = (column(&rows, "a"), column(&rows, "rate"));
    for (x, v) in a.into_iter().zip(rate) {
        // Bernoulli relative entropy.
        let want = x * (x / 0.7).ln() + (1.0 - x) * ((1.0 - x) / 0.3).ln();
        let want = if x == 0.0 { -(0.3f64).ln() } else if x == 1.0 { -(0.7f64).ln() } else { want };
        assert!((v - want).abs() < 1e-9, "a={x}");
    }
    let ln = stdout(&lpplab(&["dist", "--law", "lognormal:mu=0,sigma=1"]));
    assert!(ln.contains("## rate: unsupported"));
}
