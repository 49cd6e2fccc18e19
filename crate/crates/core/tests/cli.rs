use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bayeserr::cli::commands::generate;
use bayeserr::cli::io::{read_dataset, Dataset};
use bayeserr::synthdata::{CorruptionSpec, PosteriorModel};
use bayeserr::Seed;
use serde_json::Value;

fn bayeserr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bayeserr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = bayeserr(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn estimate_trivial_files() {
    let dir = tempfile::tempdir().unwrap();
    let soft = write(dir.path(), "s.csv", &format!("eta\n{}", "0.5\n".repeat(20)));
    let r = ok_json(&["estimate", "--input", &soft, "--method", "clean"]);
    assert_eq!(r["schema"], "bayeserr-report/1");
    assert_eq!(f(&r["results"][0]["point_estimate"]), 0.5);
    assert_eq!(r["inputs"][0]["rows"], 20);

    let counts = write(
        dir.path(),
        "c.csv",
        &format!("pos,total\n{}", "0,50\n".repeat(20)),
    );
    let r = ok_json(&["estimate", "--input", &counts, "--method", "hard"]);
    assert_eq!(f(&r["results"][0]["point_estimate"]), 0.0);
}

#[test]
fn generated_isotonic_estimate_tracks_clean() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let out = out.to_str().unwrap();
    let g = ok_json(&[
        "gen",
        "--n",
        "10000",
        "--corruption",
        "beta",
        "--a",
        "2",
        "--b",
        "0.7",
        "--seed",
        "0",
        "--out",
        out,
    ]);
    let clean = f(&g["results"]["clean_estimate"]);
    assert!(clean > 0.0 && clean < 0.5);
    let paired = format!("{out}/paired.csv");
    let r = ok_json(&["estimate", "--input", &paired, "--method", "isotonic"]);
    let iso = f(&r["results"][0]["point_estimate"]);
    assert!((iso - clean).abs() <= 0.01, "{iso} vs {clean}");
}

#[test]
fn gen_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let out_s = out.to_str().unwrap();
    ok_json(&[
        "gen",
        "--n",
        "777",
        "--m",
        "7",
        "--corruption",
        "logit-gaussian",
        "--sigma",
        "0.3",
        "--seed",
        "42",
        "--out",
        out_s,
    ]);

    let model = PosteriorModel::preset("benchmark").unwrap();
    let spec = CorruptionSpec::LogitGaussian {
        a: 2.0,
        b: 0.7,
        sigma: 0.3,
    };
    let mem = generate(&model, 777, Some(7), Some(&spec), Seed(42)).unwrap();

    match read_dataset(&out.join("soft.csv"), None).unwrap().0 {
        Dataset::Soft(s) => assert_eq!(s, mem.soft),
        other => panic!("{other:?}"),
    }
    match read_dataset(&out.join("counts.csv"), None).unwrap().0 {
        Dataset::Counts(c) => assert_eq!(c, mem.counts.unwrap()),
        other => panic!("{other:?}"),
    }
    match read_dataset(&out.join("paired.csv"), None).unwrap().0 {
        Dataset::Paired(p) => assert_eq!(p, mem.paired.unwrap()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn gen_label_flip_reports_exact_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lf");
    let r = ok_json(&[
        "gen",
        "--dist",
        "label-flip",
        "--nu",
        "0.1",
        "--n",
        "100",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(f(&r["results"]["exact_bayes_error"]), 0.1);
}

#[test]
fn bias_bound_examples() {
    let r = ok_json(&["bias-bound", "--n", "10000", "--m", "50", "--E", "0.0005"]);
    assert!(f(&r["results"]["computable_bound"]["value"]) <= 0.00276);
    assert!((f(&r["results"]["ishida_bound"]) - 0.557).abs() <= 0.001);

    let r = ok_json(&["bias-bound", "--c", "0.4", "--m", "50"]);
    assert!((f(&r["results"]["separated_bound"]) - 0.00225).abs() < 1e-15);
}

#[test]
fn usage_errors_exit_2_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = bayeserr(&[
        "bias-bound",
        "--n",
        "100",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no bound is computable"));
    assert!(!report.exists());

    let gen_dir = dir.path().join("g");
    let out = bayeserr(&[
        "gen",
        "--corruption",
        "sideways",
        "--out",
        gen_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!gen_dir.exists());

    let out = bayeserr(&[
        "gen",
        "--dist",
        "gauss-mix",
        "--theta",
        "1.5",
        "--out",
        gen_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!gen_dir.exists());

    let soft = write(dir.path(), "s.csv", "eta\n0.2\n0.4\n");
    let out = bayeserr(&[
        "estimate",
        "--input",
        &soft,
        "--method",
        "isotonic",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("paired"));
    assert!(!report.exists());

    assert_eq!(bayeserr(&["estimate"]).status.code(), Some(2));
    assert_eq!(bayeserr(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bayeserr(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "eta\n0.2\n1.7\n");
    let out = bayeserr(&["estimate", "--input", &bad]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"));
    let missing = dir.path().join("nope.csv");
    assert_eq!(
        bayeserr(&["estimate", "--input", missing.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn report_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = bayeserr(&[
        "bias-bound",
        "--m",
        "10",
        "--c",
        "0.3",
        "--json",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read(&report).unwrap(), out.stdout);
    assert_eq!(out.stdout.iter().filter(|&&b| b == b'\n').count(), 1);
}

#[test]
fn feebee_tables() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g");
    let g_s = g.to_str().unwrap();
    ok_json(&["gen", "--n", "4000", "--corruption", "beta", "--out", g_s]);
    let paired = format!("{g_s}/paired.csv");

    let r = ok_json(&[
        "feebee", "--input", &paired, "--method", "isotonic", "--E", "0.09", "--N", "1",
    ]);
    let rows = r["results"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["rho_grid"].as_array().unwrap().len(), 2);

    let r = ok_json(&["feebee", "--input", &paired, "--E", "0.09", "--N", "20"]);
    let rows = r["results"].as_array().unwrap();
    assert_eq!(rows[0]["method"], "isotonic");
    assert_eq!(rows[1]["method"], "corrupted");
    assert!(f(&rows[0]["score"]) <= f(&rows[1]["score"]));
}

#[test]
fn order_break_starts_at_full_agreement() {
    let r = ok_json(&[
        "order-break",
        "--sigma-list",
        "0,0.2,1,3",
        "--n",
        "3000",
        "--method",
        "isotonic,corrupted",
    ]);
    let rows = r["results"]["rows"].as_array().unwrap();
    assert_eq!(f(&rows[0]["tau"]), 1.0);
    assert_eq!(f(&rows[0]["order_break_probability"]), 0.0);
    let taus: Vec<f64> = rows.iter().map(|row| f(&row["tau"])).collect();
    assert!(taus.windows(2).all(|w| w[1] <= w[0]), "{taus:?}");
}

#[test]
fn simulate_bias_table() {
    let r = ok_json(&[
        "simulate-bias",
        "--dist",
        "b",
        "--m-list",
        "10,100",
        "--n",
        "300",
        "--repeats",
        "30",
    ]);
    let rows = r["results"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert!(f(&row["bias"]) <= f(&row["thm21_bound"]) + 3.0 * f(&row["stderr"]));
    }
    assert!(r["results"]["slope"]["slope"].is_number());
    assert_eq!(r["results"]["plot"]["x"].as_array().unwrap().len(), 2);
    assert_eq!(
        bayeserr(&["simulate-bias", "--repeats", "1"]).status.code(),
        Some(2)
    );
}

#[test]
fn estimate_with_interval_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g");
    let g_s = g.to_str().unwrap();
    ok_json(&[
        "gen",
        "--n",
        "1500",
        "--corruption",
        "beta",
        "--out",
        g_s,
        "--seed",
        "9",
    ]);
    let paired = format!("{g_s}/paired.csv");
    let args = [
        "estimate",
        "--input",
        &paired,
        "--method",
        "isotonic",
        "--ci",
        "--resamples",
        "200",
        "--seed",
        "1",
    ];
    let a = bayeserr(&args);
    let b = bayeserr(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let r: Value = serde_json::from_slice(&a.stdout).unwrap();
    let ci = &r["results"][0]["ci"];
    assert_eq!(ci["method"], "bca");
    assert!(f(&ci["lower"]) <= f(&ci["upper"]));
    assert_eq!(r["seed"], 1);
}

#[test]
fn bins_flag_sets_plain_hist() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g");
    let g_s = g.to_str().unwrap();
    ok_json(&["gen", "--n", "2000", "--corruption", "beta", "--out", g_s]);
    let paired = format!("{g_s}/paired.csv");
    let a = ok_json(&[
        "estimate", "--input", &paired, "--method", "hist", "--bins", "7",
    ]);
    let b = ok_json(&["estimate", "--input", &paired, "--method", "hist-7"]);
    assert_eq!(a["results"][0]["method"], "hist-7");
    assert_eq!(
        a["results"][0]["point_estimate"],
        b["results"][0]["point_estimate"]
    );
    assert_eq!(
        bayeserr(&["estimate", "--input", &paired, "--method", "hist", "--bins", "0"])
            .status
            .code(),
        Some(2)
    );
}
