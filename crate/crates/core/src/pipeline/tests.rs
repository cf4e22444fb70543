use super::*;

fn small(out: &Path, workers: usize) -> RunConfig {
    let text = format!(
        r#"
        seed = 11
        workers = {workers}
        out = "{}"
        tasks = ["cc", "lp"]
        [synthetic]
        node_count = 90
        community_count = 3
        seed = 5
        min_draws = 8
        max_draws = 20
        [[networks]]
        name = "knn"
        kind = "knn"
        rho = 360
        [[networks]]
        name = "th"
        kind = "threshold"
        density = "dense"
        [weights]
        kinds = ["cluster", "bfs", "degree_flat"]
        [evaluation]
        k_grid = [5, 10]
        replicates = 3
        max_labels = 2
        [predictor]
        kind = "forest"
        [predictor.forest]
        trees = 3
        max_depth = 4
        "#,
        out.display()
    );
    RunConfig::from_toml(&text).unwrap()
}

fn csvs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut m = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "csv") {
            m.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
        }
    }
    m
}

#[test]
fn two_networks_three_weightings_give_six_models() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), 1);
    assert_eq!(cfg.models().len(), 6);
}

#[test]
fn full_run_then_cache_then_stale() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), 1);
    let m = run_pipeline(cfg.clone(), false).unwrap();
    assert!(m.cached.is_empty());
    for f in ["perf.csv", "rank.csv", "efficiency.csv", "scores.csv"] {
        assert!(m.report_files.iter().any(|r| r == f), "{f} missing from {:?}", m.report_files);
        assert!(dir.path().join(f).exists());
    }
    let eval: Evaluation = read_artifact(dir.path(), "evaluation").unwrap();
    // 6 CC models + 2 LP models, each on validation and testing
    assert_eq!(eval.scores.len(), 16);
    let first = csvs(dir.path());

    let again = run_pipeline(cfg.clone(), false).unwrap();
    for s in ["synth", "infer", "evaluate", "select", "significance", "noise"] {
        assert!(again.cached.iter().any(|c| c == s), "{s} not cached: {:?}", again.cached);
    }
    assert_eq!(csvs(dir.path()), first);

    // a single stage under a changed config must not reuse old upstream artifacts
    let mut changed = cfg.clone();
    changed.evaluation.replicates = 4;
    let mut p = Pipeline::new(changed.clone(), false).unwrap();
    let err = p.run_stage(Stage::Select).unwrap_err();
    assert!(matches!(err, Error::Stale { .. }), "{err}");
    let mut p = Pipeline::new(changed, true).unwrap();
    p.run_stage(Stage::Select).unwrap();
}

#[test]
fn edited_artifact_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), 1);
    let mut p = Pipeline::new(cfg.clone(), false).unwrap();
    p.run_stage(Stage::Synth).unwrap();
    let path = store::artifact_path(dir.path(), "dataset");
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.push(0);
    std::fs::write(&path, bytes).unwrap();
    let mut p = Pipeline::new(cfg, false).unwrap();
    assert!(matches!(p.run_stage(Stage::Infer), Err(Error::Stale { .. })));
}

#[test]
fn stagewise_matches_run_all_and_workers_do_not_matter() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(small(a.path(), 1), false).unwrap();
    let mut p = Pipeline::new(small(b.path(), 4), false).unwrap();
    for s in [
        Stage::Synth,
        Stage::Infer,
        Stage::Evaluate,
        Stage::Select,
        Stage::Significance,
        Stage::Noise,
        Stage::Report,
    ] {
        p.run_stage(s).unwrap();
    }
    let (ca, cb) = (csvs(a.path()), csvs(b.path()));
    assert!(!ca.is_empty());
    assert_eq!(ca, cb);
}

#[test]
fn wrong_source_stage_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = Pipeline::new(small(dir.path(), 1), false).unwrap();
    assert!(p.run_stage(Stage::Ingest).unwrap_err().is_config_error());
}

