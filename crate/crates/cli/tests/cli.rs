use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
seed = 2
out = "out"
tasks = ["cc"]

[synthetic]
node_count = 80
community_count = 2
seed = 9
min_draws = 8
max_draws = 16

[[networks]]
name = "knn"
kind = "knn"
rho = 320

[weights]
kinds = ["cluster", "bfs", "random", "activity_flat"]

[evaluation]
k_grid = [5, 10]
replicates = 2
max_labels = 1

[predictor]
kind = "forest"

[predictor.forest]
trees = 3
max_depth = 3
"#;

fn netsel(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_netsel"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn csvs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn run_then_stages_match() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    let o = netsel(dir.path(), &["run", "--config", "run.toml"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let all = csvs(&dir.path().join("out"));
    assert!(all.contains_key("perf.csv") && all.contains_key("efficiency.csv"));

    for stage in ["synth", "infer", "evaluate", "select", "significance", "noise", "report"] {
        let o = netsel(dir.path(), &[stage, "--config", "run.toml", "--out", "staged", "--workers", "2"]);
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(dir.path().join("staged/networks/knn.tsv").exists());
    assert_eq!(csvs(&dir.path().join("staged")), all);
}

#[test]
fn stale_upstream_exits_one_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    assert!(netsel(dir.path(), &["synth", "--config", "run.toml"]).status.success());
    let o = netsel(dir.path(), &["infer", "--config", "run.toml", "--seed", "77"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stale"));
    let o = netsel(dir.path(), &["infer", "--config", "run.toml", "--seed", "77", "--force"]);
    assert!(o.status.success());
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "seed = 1\nunknown_key = 3\n").unwrap();
    assert_eq!(netsel(dir.path(), &["run", "--config", "bad.toml"]).status.code(), Some(2));
    assert_eq!(netsel(dir.path(), &["run", "--config", "missing.toml"]).status.code(), Some(2));
    assert_eq!(netsel(dir.path(), &["run"]).status.code(), Some(2));
    let o = netsel(dir.path(), &["ingest", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
}
