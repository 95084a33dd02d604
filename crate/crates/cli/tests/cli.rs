use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riesz-pileup"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(mode: &str, config: &Path, out: &Path, workers: usize) -> Output {
    bin()
        .arg(mode)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--workers", &workers.to_string()])
        .output()
        .unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(str::to_string).collect()).collect()
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap()
}

const SWEEP: &str = r#"{"potential":{"kind":"power","p":2.0},"n":[32,64],"alpha":[2,4,32]}"#;

#[test]
fn sweep_records_skips_and_parallel_output_matches_serial() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SWEEP);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = run("sweep", &cfg, &a, 1);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(run("sweep", &cfg, &b, 4).status.success());
    assert_eq!(std::fs::read(a.join("bounds.csv")).unwrap(), std::fs::read(b.join("bounds.csv")).unwrap());

    // alpha = 32 exceeds sqrt(n) for both n and must be listed, not dropped
    let m = manifest(&a);
    let skipped = m["skipped"].as_array().unwrap();
    assert_eq!(skipped.len(), 2);
    let statuses: Vec<_> = csv_rows(&a.join("instances.csv")).into_iter().map(|r| r[5].clone()).collect();
    assert_eq!(statuses.len(), 6);
    assert_eq!(statuses.iter().filter(|s| *s == "skipped").count(), 2);
    assert_eq!(csv_rows(&a.join("bounds.csv")).len(), 4);
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SWEEP);
    let a = dir.path().join("a");
    assert!(run("verify", &cfg, &a, 2).status.success());
    let re = dir.path().join("re");
    let o = run("verify", &a.join("manifest.json"), &re, 1);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(a.join("bounds.csv")).unwrap(), std::fs::read(re.join("bounds.csv")).unwrap());
    // output and workers come from the command line
    let strip = |mut v: serde_json::Value| {
        let o = v["config"].as_object_mut().unwrap();
        o.remove("output");
        o.remove("workers");
        v["config"].take()
    };
    assert_eq!(strip(manifest(&a)), strip(manifest(&re)));
}

#[test]
fn plot_data_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SWEEP);
    let a = dir.path().join("a");
    assert!(run("verify", &cfg, &a, 2).status.success());
    let o = bin().arg("plot-data").arg(&a).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let dens = csv_rows(&a.join("plots/density.csv"));
    let mut by_alpha = std::collections::BTreeMap::<String, Vec<(f64, f64)>>::new();
    for r in &dens {
        by_alpha.entry(r[0].clone()).or_default().push((r[1].parse().unwrap(), r[2].parse().unwrap()));
    }
    assert_eq!(by_alpha.len(), 3);
    for rows in by_alpha.values() {
        let h = rows[1].0 - rows[0].0;
        let mass: f64 = rows.iter().map(|r| r.1).sum::<f64>() * h;
        assert!((mass - 1.0).abs() <= 1e-8, "{mass}");
    }

    let ratios = csv_rows(&a.join("plots/ratios.csv"));
    let mut keys: Vec<(String, String)> = ratios.iter().map(|r| (r[0].clone(), r[1].clone())).collect();
    let total = keys.len();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), total);
    assert_eq!(total, csv_rows(&a.join("bounds.csv")).len());

    let pos = csv_rows(&a.join("plots/positions.csv"));
    let expected: usize = csv_rows(&a.join("bounds.csv")).iter().map(|r| r[0].parse::<usize>().unwrap()).sum();
    assert_eq!(pos.len(), expected);
}

#[test]
fn plot_data_names_missing_artifact() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SWEEP);
    let a = dir.path().join("a");
    assert!(run("verify", &cfg, &a, 2).status.success());
    std::fs::remove_file(a.join("bounds.csv")).unwrap();
    let o = bin().arg("plot-data").arg(&a).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("bounds.csv"));
}

#[test]
fn robin_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "r.json", r#"{"potential":{"kind":"power","p":2.0},"n":[64]}"#);
    let out = dir.path().join("o");
    let o = run("robin", &cfg, &out, 1);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("robin.csv"));
    assert_eq!(rows.len(), 1);
    let lower: f64 = rows[0][5].parse().unwrap();
    let upper: f64 = rows[0][6].parse().unwrap();
    assert!(lower <= upper);
    assert_eq!(rows[0][7], "true");
}

#[test]
fn assumption_failure_is_named_and_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"potential":{"kind":"shifted","base":{"kind":"power","p":2.0},"dy":0.5},"n":[64],"beta":[1]}"#,
    );
    let o = run("check-assumptions", &cfg, &dir.path().join("o"), 1);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("normalization"));
}

#[test]
fn config_errors_exit_three_with_field_path() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (r#"{"potential":{"kind":"power","p":2.0},"n":[64],"alpha":[4],"tolerances":{"ratio_spread":0}}"#, "ratio_spread"),
        (r#"{"potential":{"kind":"power","p":2.0},"n":[64],"alpha":[4],"tolerances":{"nope":1}}"#, "tolerances"),
        (r#"{"potential":{"kind":"power","p":2.0},"n":[64]}"#, "alpha"),
        (r#"{"potential":{"kind":"power","p":2.0},"n":[1],"alpha":[4]}"#, "n"),
    ];
    for (i, (body, field)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("b{i}.json"), body);
        let o = run("verify", &cfg, &dir.path().join(format!("o{i}")), 1);
        assert_eq!(o.status.code(), Some(3), "case {i}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(field), "case {i}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run("verify", &dir.path().join("absent.json"), &dir.path().join("x"), 1);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn appendix_check_without_config() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let o = bin().arg("appendix-check").arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&out.join("appendix.csv")).len(), 45);
}

#[test]
fn solve_modes_write_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "d.json", r#"{"potential":{"kind":"gap"},"n":[32],"beta":[1,4]}"#);
    for (mode, table) in [("solve-discrete", "discrete.csv"), ("solve-continuum", "continuum.csv")] {
        let out = dir.path().join(mode);
        let o = run(mode, &cfg, &out, 2);
        assert!(o.status.success(), "{mode}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(csv_rows(&out.join(table)).len(), 2);
    }
}
