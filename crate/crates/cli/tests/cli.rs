//! End-to-end checks of the command-line surface: exit codes, report shape,
//! determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_specdisc"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn specdisc")
}

#[test]
fn analyze_linear_killing_reports_discrete_min() {
    let out = run(&[
        "analyze",
        "--model",
        fixture("linear_killing.json").to_str().unwrap(),
        "--mode",
        "min",
        "--n-max",
        "20000",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let body = String::from_utf8(out.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["verdict"], "DiscreteMin");
    assert_eq!(v["series_flags"]["mu_h2"]["status"], "divergent");
    assert_eq!(v["series_flags"]["inv_hh_mu_b"]["status"], "convergent");
    assert!(v["min_side"]["trace"].as_array().unwrap().len() > 10);
}

#[test]
fn analyze_is_byte_deterministic() {
    let model = fixture("power_min_g3.json");
    let args = [
        "analyze",
        "--model",
        model.to_str().unwrap(),
        "--mode",
        "min",
        "--n-max",
        "5000",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "identical inputs must give identical bytes");
}

#[test]
fn invalid_model_exits_2() {
    let out = run(&[
        "analyze",
        "--model",
        fixture("bad_b0.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("b[0]"), "stderr: {err}");

    let out = run(&["analyze", "--model", "/nonexistent/x.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn harmonic_csv_columns() {
    let out = run(&[
        "harmonic",
        "--model",
        fixture("linear_killing.json").to_str().unwrap(),
        "--n-max",
        "50",
    ]);
    assert!(out.status.success());
    let body = String::from_utf8(out.stdout).unwrap();
    let mut lines = body.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,r_n,log_h_n,bound_b01,bound_applicable"
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0");
    let r0: f64 = first[1].parse().unwrap();
    assert!((r0 - 4.0 / 13.0).abs() < 1e-12);
    assert_eq!(body.lines().count(), 52);
}

#[test]
fn poisson_on_lower_and_discrete_models() {
    let out = run(&[
        "poisson",
        "--model",
        fixture("lower5.json").to_str().unwrap(),
        "--f",
        "n/10",
        "--g0",
        "1.0",
        "--n-max",
        "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let body = String::from_utf8(out.stdout).unwrap();
    assert!(body.starts_with("n,g_n\n"));
    assert_eq!(body.lines().count(), 6);

    // tridiagonal path with f = 0, g0 = 1 gives the harmonic sequence
    let out = run(&[
        "poisson",
        "--model",
        fixture("linear_killing.json").to_str().unwrap(),
        "--f",
        "0",
        "--g0",
        "1.0",
        "--n-max",
        "3",
    ]);
    assert!(out.status.success());
    let body = String::from_utf8(out.stdout).unwrap();
    let g1: f64 = body.lines().nth(2).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((g1 - 3.25).abs() < 1e-12, "g_1 = {g1} should be h_1 = 13/4");
}

#[test]
fn dual_reports_identities_and_similarity() {
    let out = run(&[
        "dual",
        "--model",
        fixture("power_min_g3.json").to_str().unwrap(),
        "--n-max",
        "2000",
        "--similarity-n",
        "30",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(v["identities"]["nu_hat_vs_mu_star"].as_f64().unwrap() < 1e-13);
    assert!(v["similarity"]["block_deviation"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["dual"]["kind"], "discrete");

    // killing -> explicit rejection pointing at the transform
    let out = run(&["dual", "--model", fixture("linear_killing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("harmonic transform"));
}

#[test]
fn continuous_gamma_family_discrete_min() {
    let out = run(&[
        "continuous",
        "--model",
        fixture("gamma3.json").to_str().unwrap(),
        "--mode",
        "min",
        "--x-max",
        "100",
        "--h",
        "(1+x)^0.3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(v["verdict"], "DiscreteMin");
    assert_eq!(v["branch"], "Part1");
}

#[test]
fn oracle_csv_and_counts() {
    let out = run(&[
        "oracle",
        "--model",
        fixture("linear_killing.json").to_str().unwrap(),
        "--truncations",
        "50,100",
        "--num-eigs",
        "3",
        "--lambda",
        "5.0",
    ]);
    assert!(out.status.success());
    let body = String::from_utf8(out.stdout).unwrap();
    assert!(body.starts_with("N,k,lambda_k\n"));
    assert!(body.contains("\nN,count_below_5\n"));
    assert!(body.contains("stabilized,true"));
    // lambda_0(50) for the linear-killing model sits on the > 0.1 plateau
    let l0: f64 = body
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!(l0 > 0.1);
}

#[test]
fn examples_gallery_subset_passes() {
    let out = run(&["examples", "--name", "linear-killing"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let body = String::from_utf8(out.stdout).unwrap();
    assert!(body.contains("linear-killing"));
    assert!(body.contains("pass"));
    assert!(!body.contains("FAIL"));
}
