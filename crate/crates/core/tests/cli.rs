use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn rydex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydex")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = rydex(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn assert_identical_runs(args: &[&str]) {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let mut full = args.to_vec();
        full.extend(["--out", dir.to_str().unwrap()]);
        run_ok(&full);
    }
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        if name != "manifest.json" {
            assert!(bytes == &fb[name], "{args:?}: {name} differs");
        }
    }
    let (mut ma, mut mb) = (manifest(&a), manifest(&b));
    for m in [&mut ma, &mut mb] {
        m.as_object_mut().unwrap().remove("timestamp_unix");
    }
    assert_eq!(ma, mb);
    let listed = ma["artifacts"].as_object().unwrap();
    for name in fa.keys().filter(|n| *n != "manifest.json") {
        assert!(listed.contains_key(name), "{name} missing from manifest");
    }
}

#[test]
fn simulate_is_deterministic_and_complete() {
    let cfg = configs().join("hexagon.toml");
    assert_identical_runs(&["--config", cfg.to_str().unwrap(), "simulate"]);

    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    run_ok(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "simulate"]);
    let f = files(&out);
    for name in ["trajectory.csv", "top_k.json", "g2.csv", "summary.json", "config.toml", "manifest.json"] {
        assert!(f.contains_key(name), "{name}");
    }
    let g2 = String::from_utf8(f["g2.csv"].clone()).unwrap();
    assert!(g2.starts_with("i,j,value\n"));
    assert_eq!(g2.lines().count(), 1 + 36);
    let top: serde_json::Value = serde_json::from_slice(&f["top_k.json"]).unwrap();
    let labels: Vec<&str> = top["states"].as_array().unwrap()[..2].iter().map(|s| s["state_label"].as_str().unwrap()).collect();
    assert!(labels.contains(&"020202") && labels.contains(&"202020"), "{labels:?}");
    let summary: serde_json::Value = serde_json::from_slice(&f["summary.json"]).unwrap();
    assert_eq!(summary["inputs_hash"], manifest(&out)["inputs_hash"]);
}

#[test]
fn sample_and_stats_are_deterministic() {
    let cfg = configs().join("pentagon.toml");
    assert_identical_runs(&["--config", cfg.to_str().unwrap(), "sample"]);
    assert_identical_runs(&["--config", cfg.to_str().unwrap(), "--seed", "99", "sample"]);
    assert_identical_runs(&["stats", "all"]);

    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("hist");
    run_ok(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "sample"]);
    let hist = std::fs::read_to_string(out.join("histogram.csv")).unwrap();
    let mut rows = hist.lines();
    assert_eq!(rows.next(), Some("eta,excitons_detected,count"));
    let mut per_eta: BTreeMap<String, u64> = BTreeMap::new();
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        *per_eta.entry(cols[0].to_owned()).or_default() += cols[2].parse::<u64>().unwrap();
    }
    assert_eq!(per_eta.len(), 6);
    assert!(per_eta.values().all(|&c| c == 2000), "{per_eta:?}");
    let samples = std::fs::read_to_string(out.join("samples.jsonl")).unwrap();
    assert_eq!(samples.lines().count(), 2000);
}

#[test]
fn stats_prints_extrapolation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("stats");
    let o = run_ok(&["--out", out.to_str().unwrap(), "stats", "scaling"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("scaling.p_at_50"), "{text}");
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("stats.json")).unwrap()).unwrap();
    let p50 = json["scaling"]["p"].as_f64().unwrap();
    assert!((3.1e-8..=3.5e-8).contains(&p50), "{p50:e}");
}

#[test]
fn optimize_and_mis_write_their_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.toml");
    std::fs::write(
        &cfg,
        "[geometry]\ntype = \"polygon\"\nn_sites = 5\n[optimize]\nn_sites = 5\nbudget = 15\nrestarts = 2\n[mis]\nruns = 500\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    assert_identical_runs(&["--config", cfg, "optimize"]);
    assert_identical_runs(&["--config", cfg, "mis"]);

    let out = tmp.path().join("opt");
    run_ok(&["--config", cfg, "--out", out.to_str().unwrap(), "optimize"]);
    let result: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("optimize.json")).unwrap()).unwrap();
    let best = result["best_probability"].as_f64().unwrap();
    assert!(best >= result["initial_probability"].as_f64().unwrap());
    let block = std::fs::read_to_string(out.join("schedule.toml")).unwrap();
    let reuse = tmp.path().join("reuse.toml");
    std::fs::write(&reuse, format!("[geometry]\ntype = \"polygon\"\nn_sites = 5\n{block}")).unwrap();
    run_ok(&["--config", reuse.to_str().unwrap(), "--out", tmp.path().join("sim").to_str().unwrap(), "simulate"]);

    let out = tmp.path().join("mis");
    run_ok(&["--config", cfg, "--out", out.to_str().unwrap(), "mis"]);
    let solution: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("solution.json")).unwrap()).unwrap();
    assert_eq!(solution["size"], 2);
    assert_eq!(solution["certified"], true);
}

#[test]
fn failures_report_json_on_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[drive]\nomga_ghz = 1.0\n").unwrap();
    let out = rydex(&["--config", bad.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "UnknownKey");

    let missing = tmp.path().join("nope.toml");
    let out = rydex(&["--config", missing.to_str().unwrap(), "stats"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(serde_json::from_slice::<serde_json::Value>(out.stderr.trim_ascii()).unwrap()["error"].is_string());

    assert_eq!(rydex(&["frobnicate"]).status.code(), Some(2));
}
