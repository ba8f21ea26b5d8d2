use super::*;
use crate::metalearners::CateMethod;

fn small_config(dir: &Path) -> PipelineConfig {
    let mut c = PipelineConfig {
        out_dir: dir.to_path_buf(),
        bootstrap: 5,
        folds: 3,
        seed: 11,
        ..PipelineConfig::default()
    };
    c.generator.n_customers = 3000;
    c.candidates = vec![
        CateMethodSpec::new("OLS/L1", CateMethod::Direct, LearnerSpec::linear()),
        CateMethodSpec::new("OLS/L2", CateMethod::TwoModel, LearnerSpec::linear()),
    ];
    c.forward = LearnerSpec::gbm(30, 0.2, 3);
    c
}

#[test]
fn config_round_trips() {
    let c = PipelineConfig::default();
    assert_eq!(PipelineConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
    let mut e = c.clone();
    e.ccf = CcfSetting::Estimate {
        estimate_from: "d.csv".into(),
    };
    assert_eq!(PipelineConfig::from_json(&e.to_json().unwrap()).unwrap(), e);
    assert!(matches!(PipelineConfig::from_json("{\"sed\": 1}"), Err(Error::Config(_))));
    let partial = PipelineConfig::from_json("{\"seed\": 3, \"cvar_p\": 0.9}").unwrap();
    assert_eq!((partial.seed, partial.cvar_p), (3, 0.9));
}

#[test]
fn invalid_settings_rejected() {
    for f in [
        |c: &mut PipelineConfig| c.trim_eps = 0.5,
        |c: &mut PipelineConfig| c.cvar_p = 1.0,
        |c: &mut PipelineConfig| c.bootstrap = 0,
        |c: &mut PipelineConfig| c.levels = vec![0],
        |c: &mut PipelineConfig| c.candidates.truncate(1),
    ] {
        let mut c = PipelineConfig::default();
        f(&mut c);
        assert!(matches!(Pipeline::new(c), Err(Error::Config(_))));
    }
}

#[test]
fn missing_portfolio_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(small_config(dir.path())).unwrap();
    match p.run(Stage::Discretize) {
        Err(Error::Config(m)) => assert!(m.starts_with("portfolio"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn full_run_is_replayable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    Pipeline::new(small_config(a.path())).unwrap().run(Stage::All).unwrap();
    Pipeline::new(small_config(b.path())).unwrap().run(Stage::All).unwrap();
    for c in Criterion::ALL {
        let f = decisions_file(c);
        assert_eq!(fs::read(a.path().join(&f)).unwrap(), fs::read(b.path().join(&f)).unwrap(), "{f}");
    }
    let report = fs::read_to_string(a.path().join(REPORT_FILE)).unwrap();
    assert_eq!(report, fs::read_to_string(b.path().join(REPORT_FILE)).unwrap());
    assert!(report.matches("|---|").count() >= 4, "{report}");
    assert!(!report.contains("Missing artifacts"));
}

#[test]
fn selection_only_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(small_config(dir.path())).unwrap();
    p.run(Stage::Simulate).unwrap();
    p.run(Stage::Select).unwrap();
    let md = p.report_markdown().unwrap();
    assert!(md.contains("## Model selection"));
    assert!(!md.contains("## Scenario evaluation"));
    assert!(md.contains("Missing artifacts: decisions_*.csv, scenarios.json"));
}

#[test]
fn ccf_estimation_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("defaults.csv");
    fs::write(&path, "balance_ref,limit_ref,balance_at_default\n0,100,40\n50,100,100\n10,20,12\n").unwrap();
    let mut c = small_config(dir.path());
    c.ccf = CcfSetting::Estimate {
        estimate_from: path.clone(),
    };
    assert_eq!(c.profit().unwrap().ccf, 0.4);
    c.ccf = CcfSetting::Estimate {
        estimate_from: dir.path().join("none.csv"),
    };
    assert!(matches!(c.profit(), Err(Error::Config(_))));
}
