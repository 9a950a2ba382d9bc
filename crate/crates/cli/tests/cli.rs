use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use quietvoyage_core::interface_hub::fixtures::{strait_scenario, validation_tl_settings, write_strait};
use quietvoyage_core::interface_hub::{parse_scenario, Engine};
use quietvoyage_service::{serve, AppState, JobState, JobStatus};
use serde_json::Value;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quietvoyage")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "{}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
}

/// Strait data with a cut-down scenario and a fitted cache.
fn prepared() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    write_strait(dir.path()).unwrap();
    let mut cfg = strait_scenario();
    cfg.tl = validation_tl_settings();
    cfg.planner.batch_size = 60;
    cfg.planner.max_batches = 6;
    cfg.ga.population = 60;
    cfg.ga.max_generations = 15;
    cfg.legs = 8;
    let path = dir.path().join("small.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    let p = path.to_str().unwrap();
    ok(&bin(&["precompute-tl", p], dir.path()));
    ok(&bin(&["fit-rbf", p], dir.path()));
    (dir, path)
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn same_seed_same_files() {
    let (dir, cfg) = prepared();
    let c = cfg.to_str().unwrap();
    for out in ["a", "b"] {
        ok(&bin(&["simulate", c, "--seed", "5", "--out-dir", out, "--log-level", "warn"], dir.path()));
    }
    let (a, b) = (files(&dir.path().join("a")), files(&dir.path().join("b")));
    assert!(a.iter().any(|(n, _)| n == "optimized_log.csv"));
    assert!(!a.iter().any(|(n, _)| n.starts_with("baseline")));
    assert_eq!(a, b);

    ok(&bin(&["simulate", c, "--seed", "6", "--out-dir", "c"], dir.path()));
    let other = files(&dir.path().join("c"));
    assert_ne!(a, other);
}

#[test]
fn compare_writes_delta_column() {
    let (dir, cfg) = prepared();
    let out = bin(&["compare", cfg.to_str().unwrap(), "--out-dir", "cmp"], dir.path());
    ok(&out);
    let csv = std::fs::read_to_string(dir.path().join("cmp/comparison.csv")).unwrap();
    assert!(csv.lines().next().unwrap().split(',').any(|h| h == "delta_js_db"), "{csv}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("J_s"));

    let out = bin(&["plan", cfg.to_str().unwrap(), "--out-dir", "plan"], dir.path());
    ok(&out);
    for f in ["plan_route.csv", "plan_profile.csv", "plan_batches.csv", "scenario.json"] {
        assert!(dir.path().join("plan").join(f).exists(), "{f}");
    }
}

#[test]
fn exit_codes() {
    let (dir, cfg) = prepared();
    let c = cfg.to_str().unwrap();

    let out = bin(&["simulate", c, "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(bin(&["--help"], dir.path()).status.code(), Some(0));

    let mut no_ais = parse_scenario(&cfg).unwrap();
    no_ais.data.ais_track = None;
    std::fs::write(dir.path().join("no_ais.json"), no_ais.to_json()).unwrap();
    let out = bin(&["simulate", "no_ais.json", "--baseline"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ais_track"));

    let mut no_cache = parse_scenario(&cfg).unwrap();
    no_cache.data.tl_cache = "elsewhere".into();
    std::fs::write(dir.path().join("no_cache.json"), no_cache.to_json()).unwrap();
    let out = bin(&["simulate", "no_cache.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("precompute-tl"));

    let out = bin(&["plan", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[tokio::test(flavor = "multi_thread")]
async fn api_numbers_equal_cli_files() {
    let (dir, cfg) = prepared();
    ok(&bin(&["compare", cfg.to_str().unwrap(), "--out-dir", "cli"], dir.path()));
    let cli: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("cli/result.json")).unwrap()).unwrap();

    let state = AppState::new(dir.path().to_path_buf());
    state.insert_engine("default", Engine::load(parse_scenario(&cfg).unwrap()).unwrap());
    let (tx, rx) = tokio::sync::oneshot::channel();
    tokio::spawn(serve(state, "127.0.0.1:0".parse().unwrap(), Some(tx)));
    let base = format!("http://{}", rx.await.unwrap());
    let client = reqwest::Client::new();
    let v: Value = client.post(format!("{base}/scenarios/default/optimize")).send().await.unwrap().json().await.unwrap();
    let job = v["job_id"].as_str().unwrap();
    loop {
        let s: JobStatus = client.get(format!("{base}/jobs/{job}")).send().await.unwrap().json().await.unwrap();
        match s.state {
            JobState::Done => break,
            JobState::Failed => panic!("{:?}", s.error),
            _ => tokio::time::sleep(std::time::Duration::from_millis(100)).await,
        }
    }
    let api: Value = client.get(format!("{base}/scenarios/default/result")).send().await.unwrap().json().await.unwrap();
    for key in ["metadata", "mammals", "optimized", "baseline", "comparison"] {
        assert_eq!(api[key], cli[key], "{key}");
    }

    // the CSV text carries the same bits
    let csv = std::fs::read_to_string(dir.path().join("cli/comparison.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "delta_js_db").unwrap();
    let from_csv: f64 = row[col].parse().unwrap();
    assert_eq!(from_csv.to_bits(), api["comparison"]["delta_js_db"].as_f64().unwrap().to_bits());
}
