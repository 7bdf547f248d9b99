use std::fs;
use std::path::Path;
use std::process::Command;

use portfolio_select_cli::config::{CaseStudy, ExperimentConfig, Scale};
use portfolio_select_cli::featurize::{cmd_featurize, FeatureTable};
use portfolio_select_cli::generate::{cmd_generate, load_graph_entries, Split};
use portfolio_select_cli::train::{cmd_train, configured_preset, train_model, TrainedModel};
use portfolio_select_cli::workspace::{sha256_file, Workspace};
use portfolio_select_cli::{cmd_reproduce, evaluate};

fn smoke(case: CaseStudy, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_scale(case, Scale::Smoke).with_seed(seed);
    cfg.repetitions = 1;
    cfg
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn simplex_smoke_run_is_deterministic() {
    let cfg = smoke(CaseStudy::Simplex, 3);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = cmd_reproduce(a.path(), &cfg).unwrap();
    let rb = cmd_reproduce(b.path(), &cfg).unwrap();
    assert_eq!(ra.checks, rb.checks);
    assert!(ra.passed());
    let wa = Workspace::at(a.path(), &cfg);
    let wb = Workspace::at(b.path(), &cfg);
    let mut files = vec![wa.dataset_path().strip_prefix(&wa.root).unwrap().to_path_buf()];
    for s in &cfg.schemas {
        files.push(wa.features_path(s).strip_prefix(&wa.root).unwrap().to_path_buf());
    }
    for p in &cfg.presets {
        files.push(wa.model_path(p, 0).strip_prefix(&wa.root).unwrap().to_path_buf());
    }
    files.push("reports/eval.json".into());
    files.push("reports/instances.csv".into());
    for f in files {
        assert_eq!(read(&wa.root.join(&f)), read(&wb.root.join(&f)), "{} differs", f.display());
    }
}

#[test]
fn interrupted_generation_resumes_to_the_same_bytes() {
    let cfg = smoke(CaseStudy::Simplex, 5);
    let full = tempfile::tempdir().unwrap();
    let cut = tempfile::tempdir().unwrap();
    let wf = Workspace::init(full.path(), &cfg).unwrap();
    cmd_generate(&wf, &cfg).unwrap();
    let reference = read(&wf.dataset_path());

    let wc = Workspace::init(cut.path(), &cfg).unwrap();
    cmd_generate(&wc, &cfg).unwrap();
    let text = String::from_utf8(read(&wc.dataset_path())).unwrap();
    let keep: usize = text.split_inclusive('\n').take(30).map(str::len).sum();
    let torn = &text[keep..keep + 40];
    fs::write(wc.dataset_path(), format!("{}{torn}", &text[..keep])).unwrap();
    let _ = fs::remove_file(wc.failures_path());

    let s = cmd_generate(&wc, &cfg).unwrap();
    assert_eq!(s.resumed, 30);
    assert_eq!(read(&wc.dataset_path()), reference);
    assert!(wf.failures_path().exists() == wc.failures_path().exists());
}

#[test]
fn featurize_is_idempotent_and_tracked_in_the_manifest() {
    let cfg = smoke(CaseStudy::Apsp, 1);
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::init(dir.path(), &cfg).unwrap();
    cmd_generate(&ws, &cfg).unwrap();
    cmd_featurize(&ws, &cfg, &cfg.schemas).unwrap();
    let first: Vec<Vec<u8>> = cfg.schemas.iter().map(|s| read(&ws.features_path(s))).collect();
    cmd_featurize(&ws, &cfg, &cfg.schemas).unwrap();
    let manifest = ws.manifest().unwrap();
    for (s, bytes) in cfg.schemas.iter().zip(&first) {
        let path = ws.features_path(s);
        assert_eq!(&read(&path), bytes);
        let key = path.strip_prefix(&ws.root).unwrap().to_string_lossy().into_owned();
        assert_eq!(manifest.artifacts[&key].sha256, sha256_file(&path).unwrap());
        let t = FeatureTable::read(&ws, s).unwrap();
        assert_eq!(t.rows(Split::Train).len(), cfg.train);
        assert_eq!(t.rows(Split::Test).len(), cfg.test);
    }
}

#[test]
fn stored_models_reproduce_fresh_predictions() {
    let cfg = smoke(CaseStudy::Apsp, 2);
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::init(dir.path(), &cfg).unwrap();
    cmd_generate(&ws, &cfg).unwrap();
    cmd_featurize(&ws, &cfg, &cfg.schemas).unwrap();
    let names = ["apsp-gbdt-svd".to_string(), "apsp-nn-degree".to_string()];
    cmd_train(&ws, &cfg, &names, 1).unwrap();
    for name in &names {
        let stored = TrainedModel::load(&ws, name, 0).unwrap();
        let table = FeatureTable::read(&ws, &stored.schema_id).unwrap();
        let sha = sha256_file(&ws.features_path(&stored.schema_id)).unwrap();
        let fresh = train_model(&table, &configured_preset(&cfg, name, 0).unwrap(), 0, &sha).unwrap();
        let rows = table.vectors(&table.rows(Split::Test));
        let a = stored.model.predict_features(&rows).unwrap();
        let b = fresh.model.predict_features(&rows).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn apsp_smoke_run_reports_every_policy() {
    let cfg = smoke(CaseStudy::Apsp, 7);
    let dir = tempfile::tempdir().unwrap();
    let rep = cmd_reproduce(dir.path(), &cfg).unwrap();
    let r = rep.evaluation.primary();
    assert_eq!(r.instances, cfg.test);
    for p in &r.policies {
        assert!(p.total_cost >= r.oracle.total_cost - 1e-12, "{} beats the oracle", p.name);
        assert_eq!(p.choices.len(), cfg.test);
    }
    let ws = Workspace::at(dir.path(), &cfg);
    let graphs = load_graph_entries(&ws).unwrap();
    assert_eq!(graphs.len(), cfg.total());
    assert!(graphs.iter().all(|g| g.record.pops.peng <= g.record.pops.dijkstra));
    let text = evaluate::cmd_report(&ws, &cfg).unwrap();
    assert!(text.contains("apsp-gbdt-degree"));
    assert!(ws.reports_dir().join("gains/apsp-gbdt-degree.csv").exists());
}

#[test]
fn workspace_refuses_a_different_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke(CaseStudy::Simplex, 1);
    Workspace::init(dir.path(), &cfg).unwrap();
    assert!(Workspace::init(dir.path(), &cfg).is_ok());
    assert!(Workspace::init(dir.path(), &cfg.clone().with_seed(2)).is_err());
}

#[test]
fn binary_runs_smoke_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_portfolio-select"))
        .args(["reproduce", "--case", "simplex", "--scale", "smoke", "--repetitions", "1", "--out"])
        .arg(dir.path())
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("criterion 4"));
    assert!(dir.path().join("simplex/reports/acceptance.json").exists());

    let bad = Command::new(env!("CARGO_BIN_EXE_portfolio-select"))
        .args(["evaluate", "--case", "simplex", "--seed", "9", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
