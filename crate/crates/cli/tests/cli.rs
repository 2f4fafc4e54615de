use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "experiment = \"tiny\"\nn = 64\niterations = 5\ntrials = 3\nseed = 11\n";

fn oamp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oamp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn oamp")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn run_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL);
    let out = oamp(dir.path(), &["run", "c.toml", "--out", "res", "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("res/tiny_oamp-w.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "experiment,algorithm,iter,trial,gs_mse,raw_mse,se_mse,ortho_corr,kurtosis,seed"
    );
    assert_eq!(csv.lines().count(), 1 + 5 + 15);
    let json = std::fs::read_to_string(dir.path().join("res/tiny_oamp-w.json")).unwrap();
    assert!(json.contains("\"trial_seeds\""));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL);
    assert!(oamp(dir.path(), &["run", "c.toml", "--out", "a"]).status.success());
    assert!(oamp(dir.path(), &["run", "c.toml", "--out", "b", "--seed", "12"]).status.success());
    assert!(oamp(dir.path(), &["run", "c.toml", "--out", "c", "--seed", "11"]).status.success());
    let read = |d: &str| std::fs::read(dir.path().join(d).join("tiny_oamp-w.csv")).unwrap();
    assert_ne!(read("a"), read("b"));
    assert_eq!(read("a"), read("c"));
}

#[test]
fn se_subcommand_emits_only_se_rows() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL);
    let out = oamp(dir.path(), &["se", "c.toml", "--out", "res"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("res/tiny_oamp-w.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.split(',').nth(3) == Some("SE")));
}

#[test]
fn compare_identical_runs() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL);
    assert!(oamp(dir.path(), &["run", "c.toml", "--out", "res"]).status.success());
    let out = oamp(dir.path(), &["compare", "res/tiny_oamp-w.csv", "res/tiny_oamp-w.csv", "--out", "cmp"]);
    assert!(out.status.success());
    let table = std::fs::read_to_string(dir.path().join("cmp/comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 5);
    for line in table.lines().skip(1) {
        let ratio: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(ratio, 0.0);
    }
}

#[test]
fn compare_rejects_empty_csv() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "empty.csv", "");
    let out = oamp(dir.path(), &["compare", "empty.csv", "empty.csv"]);
    assert!(!out.status.success());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.toml", "n = 0\n");
    write(dir.path(), "unknown.toml", "colour = 3\n");
    assert_eq!(oamp(dir.path(), &["run", "bad.toml"]).status.code(), Some(2));
    assert_eq!(oamp(dir.path(), &["run", "unknown.toml"]).status.code(), Some(2));
    assert_eq!(oamp(dir.path(), &["run", "missing.toml"]).status.code(), Some(2));
}

#[test]
fn divergence_exits_3() {
    // AMP with a linear denoiser: the Onsager term doubles the error every step
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "amp.toml",
        "experiment = \"blowup\"\nn = 256\nkappa = 1000\nm_over_n = 0.5\nalgorithm = \"amp\"\ndenoiser = \"identity\"\niterations = 60\ntrials = 2\n",
    );
    let out = oamp(dir.path(), &["run", "amp.toml", "--out", "res"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn shipped_desk_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let cfg = oamp_core::ExperimentConfig::from_file(&path).unwrap();
    assert_eq!(cfg, oamp_core::ExperimentConfig::default());
}
