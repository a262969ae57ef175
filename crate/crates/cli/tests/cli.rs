use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use surveydp_core::auditor::exact_effective_epsilon;
use surveydp_core::population::load_population;
use surveydp_core::{AuditOptions, MechanismSpec, Record, SamplingDesign, Within};

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surveydp"))
        .args(args)
        .env_remove("SURVEYDP_BUDGET")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .unwrap();
    reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect()
}

fn example(name: &str) -> String {
    examples().join(name).display().to_string()
}

#[test]
fn bounds_poisson_prints_value() {
    let out = run(&["bounds", "poisson", "--eps", "1", "--rate", "0.5"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "0.6201145");
}

#[test]
fn bounds_lists_form_a_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let out = run(&[
        "bounds",
        "poisson",
        "--eps",
        "0.5,1",
        "--rate",
        "0,0.5,1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&path);
    assert_eq!(rows[0], ["kind", "eps", "rate", "b", "n", "gs", "value"]);
    assert_eq!(rows.len(), 7);
    // rate 1 keeps everything: the base epsilon
    assert_eq!(rows[6][6].parse::<f64>().unwrap(), 1.0);
    assert_eq!(rows[1][6].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn bounds_missing_parameter_is_config_error() {
    let out = run(&["bounds", "cluster", "--eps", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--b"));
}

#[test]
fn cluster_degradation_audit_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eq.csv");
    let out = run(&[
        "audit",
        "--config",
        &example("cluster_degradation.toml"),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = csv_rows(&path);
    assert_eq!(
        rows[0],
        [
            "scenario",
            "eps_base",
            "design",
            "eps_add",
            "eps_remove",
            "eps_effective",
            "witness",
            "method"
        ]
    );
    let eps: f64 = rows[1][5].parse().unwrap();
    assert!((eps - 0.988_565_420_571_308).abs() < 1e-6);
    assert_eq!(rows[1][7], "exact");

    let csv = fs::read_to_string(examples().join("two_clusters_b5.csv")).unwrap();
    let pair = load_population::<f64>(&csv)
        .unwrap()
        .add_record(Record::new(1, 1, 0.0));
    let design = SamplingDesign::Cluster {
        choose: 1,
        within: Within::Census,
    };
    let direct = exact_effective_epsilon(
        &design,
        &MechanismSpec::count(1.0).unwrap(),
        &pair,
        &AuditOptions::default(),
    )
    .unwrap();
    assert_eq!(eps, direct.eps_effective);
}

#[test]
fn json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("r.csv");
    let json_path = dir.path().join("r.json");
    let config = example("poisson_amplification.toml");
    assert!(run(&[
        "audit",
        "--config",
        &config,
        "--out",
        csv_path.to_str().unwrap()
    ])
    .status
    .success());
    assert!(run(&[
        "audit",
        "--config",
        &config,
        "--format",
        "json",
        "--out",
        json_path.to_str().unwrap()
    ])
    .status
    .success());
    let rows = csv_rows(&csv_path);
    let json: Vec<serde_json::Map<String, serde_json::Value>> =
        serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(json.len(), rows.len() - 1);
    for (obj, row) in json.iter().zip(&rows[1..]) {
        let keys: Vec<&String> = obj.keys().collect();
        assert_eq!(keys.len(), rows[0].len());
        assert_eq!(obj["scenario"], row[0].as_str());
        let csv_eps: f64 = row[5].parse().unwrap();
        assert_eq!(obj["eps_effective"].as_f64().unwrap(), csv_eps);
    }
    let per: Vec<f64> = json[1..]
        .iter()
        .map(|o| o["eps_effective"].as_f64().unwrap())
        .collect();
    assert!((per[0] - 0.158_565_078_740_429).abs() < 1e-9);
    assert!((per[1] - 0.620_114_506_958_277).abs() < 1e-9);
}

#[test]
fn missing_config_exits_2_and_names_file() {
    let out = run(&["audit", "--config", "missing.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing.toml"));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[design]\ndesign = \"poisson\"\n").unwrap();
    let out = run(&["audit", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bad.toml"));
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(
        run(&["bounds", "poisson", "--eps", "1", "--bogus"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn budget_exceeded_exits_3() {
    let config = example("parity_degradation.toml");
    let out = run(&["audit", "--config", &config, "--budget", "4"]);
    assert_eq!(out.status.code(), Some(3));
    let out = Command::new(env!("CARGO_BIN_EXE_surveydp"))
        .args(["audit", "--config", &config])
        .env("SURVEYDP_BUDGET", "4")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains('9'), "{}", stderr(&out));
}

#[test]
fn parity_scan_doubles_epsilon() {
    let out = run(&["audit", "--config", &example("parity_degradation.toml")]);
    assert!(out.status.success());
    assert!(
        stdout(&out).contains("eps_effective 2 "),
        "{}",
        stdout(&out)
    );
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec![
            "audit".into(),
            "--config".into(),
            example("poisson_monte_carlo.toml"),
        ],
        vec![
            "random-dp".into(),
            "--n".into(),
            "16".into(),
            "--trials".into(),
            "50".into(),
        ],
        vec![
            "alloc-scan".into(),
            "--rule".into(),
            "huntington_hill".into(),
            "--k".into(),
            "2".into(),
            "--max-size".into(),
            "6".into(),
            "--total".into(),
            "3,4".into(),
        ],
    ];
    for (i, case) in cases.iter().enumerate() {
        for format in ["csv", "json"] {
            let mut outputs = Vec::new();
            for rep in 0..2 {
                let path = dir.path().join(format!("{i}-{format}-{rep}"));
                let mut args: Vec<&str> = case.iter().map(String::as_str).collect();
                args.extend([
                    "--seed",
                    "5",
                    "--format",
                    format,
                    "--out",
                    path.to_str().unwrap(),
                ]);
                let out = run(&args);
                assert!(out.status.success(), "{}", stderr(&out));
                outputs.push(fs::read(&path).unwrap());
            }
            assert_eq!(outputs[0], outputs[1], "case {i} {format}");
        }
    }
}

#[test]
fn seed_changes_monte_carlo_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = example("poisson_monte_carlo.toml");
    let mut reports = Vec::new();
    for seed in ["1", "2"] {
        let path = dir.path().join(seed);
        assert!(run(&[
            "audit",
            "--config",
            &config,
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap()
        ])
        .status
        .success());
        let rows = csv_rows(&path);
        let eps: f64 = rows[1][5].parse().unwrap();
        assert!(eps <= 0.620_114_506_958_277_5 && eps > 0.5);
        reports.push(eps);
    }
    assert_ne!(reports[0], reports[1]);
}

#[test]
fn alloc_scan_reports_hamilton_witness() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let out = run(&[
        "alloc-scan",
        "--rule",
        "proportional_hamilton",
        "--k",
        "3",
        "--max-size",
        "4",
        "--total",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("observed GS 2"), "{}", stdout(&out));
    let rows = csv_rows(&path);
    assert_eq!(
        rows[0],
        [
            "rule",
            "sizes",
            "stratum",
            "before",
            "after",
            "l1_change",
            "feasible"
        ]
    );
    // the empty base has no allocation of a positive total
    assert_eq!(rows.len() - 1, 5 * 5 * 5 * 3 - 3);
    assert!(stdout(&out).contains("(3 skipped)"));
}

#[test]
fn conjecture_table_has_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let out = run(&["conjecture", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let rows = csv_rows(&path);
    assert_eq!(rows.len(), 1 + 3 * 3 * 5);
    // eps 1, r 0.5: sizes 2..6 all give ln((1+e)/2)
    for row in rows.iter().filter(|r| r[0] == "1.0" && r[1] == "0.5") {
        assert!((row[3].parse::<f64>().unwrap() - 0.620_114_506_958_277_5).abs() < 1e-9);
    }
}
