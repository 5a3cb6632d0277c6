use std::process::Command;

fn fedwatch() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fedwatch"))
}

fn write_config(dir: &std::path::Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("exp.toml");
    std::fs::write(&p, body).unwrap();
    p
}

const TINY: &str = r#"
seed = 2
[dataset.synthetic]
samples = 300
input_dim = 5
classes = 3
[federation]
total_clients = 6
clients_per_round = 3
abnormal_fraction = 0.34
warmup_rounds = 1
rounds = 1
aggregation_method = "credit_score"
[federation.train]
epochs = 1
[model]
hidden_sizes = [4]
[autoencoder]
epochs = 2
hidden_sizes = [4, 2, 4]
"#;

#[test]
fn run_honours_output_env_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let out = tmp.path().join("out");
    let status = fedwatch()
        .args(["run", cfg.to_str().unwrap(), "--federation.rounds", "2"])
        .env("FEDWATCH_OUT", &out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let runs: Vec<_> = std::fs::read_dir(&out).unwrap().collect();
    assert_eq!(runs.len(), 1);
    let dir = runs[0].as_ref().unwrap().path();
    let csv = std::fs::read_to_string(dir.join("rounds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);

    let inspect = fedwatch().arg("inspect").arg(&dir).output().unwrap();
    assert!(inspect.status.success());
    assert!(String::from_utf8_lossy(&inspect.stdout).contains("credit_score"));
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let bad_key = fedwatch().args(["validate", cfg.to_str().unwrap(), "--federation.roundz", "3"]).output().unwrap();
    assert_eq!(bad_key.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_key.stderr).contains("federation.roundz"));
    let bad_value = fedwatch()
        .args(["run", cfg.to_str().unwrap(), "--federation.abnormal_fraction", "1.0"])
        .output()
        .unwrap();
    assert_eq!(bad_value.status.code(), Some(1));
    let missing = fedwatch().args(["run", "/nonexistent/exp.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fedwatch().arg("inspect").arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    // an image dataset that does not exist fails at run time, not at load
    let cfg = write_config(tmp.path(), "[dataset]\nsource = \"image\"\npath = \"/nonexistent.bin\"\n");
    let run = fedwatch().args(["run", cfg.to_str().unwrap()]).env("FEDWATCH_OUT", tmp.path()).output().unwrap();
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn validate_prints_the_normalized_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let out = fedwatch().args(["validate", cfg.to_str().unwrap(), "--seed=5"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("seed = 5"));
    assert!(text.contains("[detection]"));
}
