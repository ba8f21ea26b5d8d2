use std::path::Path;
use std::process::{Command, Output};

use uplift_core::metalearners::default_candidates;
use uplift_core::pipeline::PipelineConfig;

fn uplift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uplift")).args(args).output().unwrap()
}

/// Small but complete run: two linear candidates, few replicates.
fn write_config(dir: &Path) -> String {
    let mut c = PipelineConfig {
        out_dir: dir.join("out"),
        candidates: default_candidates(3).into_iter().filter(|c| c.name.starts_with("OLS/")).collect(),
        bootstrap: 10,
        seed: 3,
        ..PipelineConfig::default()
    };
    c.generator.n_customers = 6000;
    let path = dir.join("config.json");
    std::fs::write(&path, c.to_json().unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout_lines(o: &Output) -> Vec<String> {
    String::from_utf8_lossy(&o.stdout).lines().map(str::to_string).collect()
}

#[test]
fn simulate_recommend_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());

    let sim = uplift(&["simulate", "--config", &cfg]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let portfolio = dir.path().join("out/portfolio.csv");
    let text = std::fs::read_to_string(&portfolio).unwrap();
    assert_eq!(text.lines().count(), 6001);

    let rec = uplift(&["recommend", "--config", &cfg, "--policy", "cl-cvar-fl"]);
    assert!(rec.status.success(), "{}", String::from_utf8_lossy(&rec.stderr));
    assert!(dir.path().join("out/decisions_cl-cvar-fl.csv").exists());
    assert!(!dir.path().join("out/decisions_cl.csv").exists());

    let ev = uplift(&["evaluate", "--config", &cfg, "--policy", "cl-cvar-fl"]);
    assert!(ev.status.success(), "{}", String::from_utf8_lossy(&ev.stderr));
    let written = stdout_lines(&ev);
    assert_eq!(written.len(), 3, "{written:?}");
    for p in &written {
        assert!(Path::new(p).exists(), "{p}");
    }
}

#[test]
fn missing_portfolio_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let o = uplift(&["recommend", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("portfolio"));
}

#[test]
fn missing_config_file_and_bad_flags() {
    let o = uplift(&["select", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config"));

    let o = uplift(&["select", "--policy", "greedy"]);
    assert_eq!(o.status.code(), Some(2));
    let o = uplift(&["teleport"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let o = uplift(&["simulate", "--config", &cfg, "--p", "1.5"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let mut runs = Vec::new();
    for _ in 0..2 {
        let o = uplift(&["all", "--config", &cfg]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path().join("out"))
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        runs.push(files);
        std::fs::remove_dir_all(dir.path().join("out")).unwrap();
    }
    assert!(runs[0].len() >= 10);
    assert_eq!(runs[0], runs[1]);
}
