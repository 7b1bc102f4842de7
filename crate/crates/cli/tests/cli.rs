use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn matprod(args: &[&str]) -> Output {
    matprod_env(args, None)
}

fn matprod_env(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_matprod"));
    cmd.args(args).env_remove("MATPROD_SEED");
    if let Some(s) = seed {
        cmd.env("MATPROD_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn simulate(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec!["simulate", "--out", out];
    args.extend_from_slice(extra);
    matprod(&args)
}

fn keys(v: &Value) -> Vec<&str> {
    v.as_object().unwrap().keys().map(String::as_str).collect()
}

#[test]
fn bounds_reports_admissible_point() {
    let out = matprod(&[
        "bounds", "--L", "0.5", "--n", "10000", "--d", "2", "--delta", "0.1",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["restriction_ok"], true);
    assert_eq!(v["restriction_failure"], Value::Null);
    let g1 = v["gamma"][0].as_f64().unwrap();
    assert!((g1 - 0.5 * 0.0768).abs() < 1e-4, "{g1}");
    assert!(v["theorem_bound"].as_f64().unwrap() > 0.0);
}

#[test]
fn bounds_names_failing_inequality() {
    let args = [
        "bounds", "--L", "0.5", "--n", "2", "--d", "2", "--delta", "0.1",
    ];
    let out = matprod(&args);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["restriction_ok"], false);
    assert_eq!(v["restriction_failure"], "left inequality");
    assert_eq!(v["theorem_bound"], Value::Null);

    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(code(&matprod(&strict)), 3);
}

#[test]
fn bounds_usage_errors() {
    let out = matprod(&["bounds", "--L", "0.5", "--n", "100", "--d", "2"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(
        code(&matprod(&[
            "bounds", "--L", "x", "--n", "100", "--d", "2", "--delta", "0.1"
        ])),
        2
    );
    assert_eq!(
        code(&matprod(&[
            "bounds", "--L", "1", "--n", "100", "--d", "2", "--delta", "0.9"
        ])),
        2
    );
}

#[test]
fn baranyai_families() {
    let out = matprod(&["baranyai", "--N", "4", "--k", "2"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(keys(&v), ["N", "k", "classes", "class_count", "verified"]);
    assert_eq!(v["class_count"], 3);
    assert_eq!(v["verified"], true);
    assert_eq!(v["classes"].as_array().unwrap().len(), 3);

    let v = json(&matprod(&["baranyai", "--N", "6", "--k", "6"]));
    assert_eq!(v["class_count"], 1);
    assert_eq!(v["classes"][0][0], serde_json::json!([1, 2, 3, 4, 5, 6]));

    let v = json(&matprod(&["baranyai", "--N", "9", "--k", "3"]));
    assert_eq!(v["class_count"], 28);
    assert_eq!(v["verified"], true);

    assert_eq!(code(&matprod(&["baranyai", "--N", "5", "--k", "2"])), 2);
    assert_eq!(code(&matprod(&["baranyai", "--N", "60", "--k", "30"])), 2);
}

#[test]
fn simulate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let flags = ["--n", "8,16", "--trials", "6", "--seed", "11"];
    assert_eq!(code(&simulate(&a, &flags)), 0);
    assert_eq!(
        code(&matprod(&[
            "--threads",
            "1",
            "simulate",
            "--out",
            b.to_str().unwrap(),
            "--n",
            "8,16",
            "--trials",
            "6",
            "--seed",
            "11"
        ])),
        0
    );
    let ra = fs::read(a.join("records.csv")).unwrap();
    assert_eq!(ra, fs::read(b.join("records.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("summary.json")).unwrap(),
        fs::read(b.join("summary.json")).unwrap()
    );
    let c = tmp.path().join("c");
    simulate(&c, &["--n", "8,16", "--trials", "6", "--seed", "12"]);
    assert_ne!(ra, fs::read(c.join("records.csv")).unwrap());
}

#[test]
fn records_schema() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&simulate(
            tmp.path(),
            &["--n", "4,8", "--trials", "3", "--k", "3"]
        )),
        0
    );
    let text = fs::read_to_string(tmp.path().join("records.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,trial,err_total,err_mean_part,err_exp_part,term_err_1,term_err_2,term_err_3"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    for row in &rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 8);
        for cell in &cells[2..] {
            let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.len(), 18, "{cell}");
            cell.parse::<f64>().unwrap();
        }
    }
    assert!(rows[0].starts_with("4,0,") && rows[5].starts_with("8,2,"));
}

#[test]
fn summary_and_manifest_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let out = matprod(&[
        "rate",
        "--out",
        tmp.path().to_str().unwrap(),
        "--n",
        "16,32,64",
        "--trials",
        "30",
        "--k",
        "2",
    ]);
    assert_eq!(code(&out), 0);
    let fit = json(&out);
    assert_eq!(
        keys(&fit),
        ["slope", "intercept", "r_squared", "per_n_median"]
    );

    let s: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(
        keys(&s),
        [
            "command",
            "ensemble",
            "L",
            "d",
            "delta",
            "depth",
            "trials",
            "master_seed",
            "per_n",
            "rate_fit"
        ]
    );
    assert_eq!(s["command"], "rate");
    let point = &s["per_n"][0];
    assert_eq!(
        keys(point),
        [
            "n",
            "trials",
            "err_total",
            "err_mean_part",
            "err_exp_part",
            "lemma_exp_bound",
            "restriction_ok",
            "restriction_failure",
            "theorem_bound",
            "theorem_exceedance",
            "theorem_allowed",
            "expectation_bound",
            "terms"
        ]
    );
    assert_eq!(
        keys(&point["err_total"]),
        ["mean", "min", "p05", "p50", "p95", "max"]
    );
    assert_eq!(
        keys(&point["terms"][0]),
        [
            "k",
            "k_condition",
            "gamma",
            "exceedance",
            "allowed",
            "wilson_half_width"
        ]
    );
    assert_eq!(s["rate_fit"]["slope"], fit["slope"]);

    let m: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(
        keys(&m),
        [
            "command",
            "config_digest",
            "tool_version",
            "timestamp",
            "master_seed"
        ]
    );
    assert_eq!(m["config_digest"].as_str().unwrap().len(), 64);
    assert_eq!(m["tool_version"], env!("CARGO_PKG_VERSION"));
    let ts = m["timestamp"].as_str().unwrap();
    assert!(
        ts.len() == 20 && ts.ends_with('Z') && &ts[10..11] == "T",
        "{ts}"
    );
}

#[test]
fn constant_ensemble_has_zero_mean_part() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("zero.cfg");
    fs::write(
        &cfg,
        "ensemble = two_point\na = 0, 0; 0, 0\nb = 0 0; 0 0\nn_grid = 5, 10\ntrials = 4\n",
    )
    .unwrap();
    let out = simulate(&tmp.path().join("o"), &["--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("o/records.csv")).unwrap();
    for row in text.lines().skip(1) {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[3].parse::<f64>().unwrap(), 0.0);
        assert_eq!(cells[2].parse::<f64>().unwrap(), 0.0);
    }

    fs::write(&cfg, "ensemble = two_point\na = 0.3, 0.1; 0, -0.2\nb = 0.3, 0.1; 0, -0.2\nn_grid = 5, 10\ntrials = 4\n").unwrap();
    simulate(&tmp.path().join("p"), &["--config", cfg.to_str().unwrap()]);
    let text = fs::read_to_string(tmp.path().join("p/records.csv")).unwrap();
    for row in text.lines().skip(1) {
        let mean_part: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert!(mean_part < 1e-14, "{mean_part}");
    }
}

#[test]
fn seed_precedence_and_digest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "n_grid = 8\ntrials = 2\nseed = 5\n").unwrap();
    let reformatted = tmp.path().join("run2.cfg");
    fs::write(
        &reformatted,
        "# same run\nseed=5   # file seed\n\ntrials   = 2\nn_grid = 8\n",
    )
    .unwrap();
    let run = |name: &str, file: &Path, env: Option<&str>, extra: &[&str]| -> Value {
        let dir = tmp.path().join(name);
        let mut args = vec![
            "simulate",
            "--out",
            dir.to_str().unwrap(),
            "--config",
            file.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        assert_eq!(code(&matprod_env(&args, env)), 0);
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
    };
    let file = run("file", &cfg, None, &[]);
    assert_eq!(file["master_seed"], 5);
    assert_eq!(
        run("fmt", &reformatted, None, &[])["config_digest"],
        file["config_digest"]
    );
    let env = run("env", &cfg, Some("9"), &[]);
    assert_eq!(env["master_seed"], 9);
    assert_ne!(env["config_digest"], file["config_digest"]);
    assert_eq!(
        run("flag", &cfg, Some("9"), &["--seed", "3"])["master_seed"],
        3
    );
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("o");
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "trials = 3\nwidth = 4\n").unwrap();
    let out = simulate(&out_dir, &["--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let missing = tmp.path().join("absent.cfg");
    assert_eq!(
        code(&simulate(
            &out_dir,
            &["--config", missing.to_str().unwrap()]
        )),
        2
    );
    assert_eq!(code(&simulate(&out_dir, &["--trials", "0"])), 2);
    assert_eq!(
        code(&matprod_env(
            &["simulate", "--out", out_dir.to_str().unwrap()],
            Some("abc")
        )),
        2
    );
}

#[test]
fn simulate_strict_restriction() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&simulate(
            tmp.path(),
            &["--n", "8", "--trials", "2", "--strict"]
        )),
        3
    );
    assert!(tmp.path().join("summary.json").exists());
}

#[test]
fn scalar_floor_output() {
    let out = matprod_env(
        &["scalar-floor", "--n", "100,400", "--trials", "50"],
        Some("4"),
    );
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let pts = v.as_array().unwrap();
    assert_eq!(pts.len(), 2);
    assert_eq!(keys(&pts[0]), ["n", "median_scaled_error"]);
    assert!(pts
        .iter()
        .all(|p| p["median_scaled_error"].as_f64().unwrap() > 0.1));
    assert_eq!(
        json(&matprod_env(
            &[
                "scalar-floor",
                "--n",
                "100,400",
                "--trials",
                "50",
                "--seed",
                "4"
            ],
            None
        )),
        v
    );
}
