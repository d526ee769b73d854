use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn disdf() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_disdf"));
    cmd.env_remove("DISDF_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    disdf().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

/// Two separated clusters with a header row and string labels.
fn write_toy(dir: &Path) -> PathBuf {
    let mut text = String::from("x,y,label\n");
    for i in 0..30 {
        let (offset, label) = if i % 2 == 0 { (0.0, "neg") } else { (10.0, "pos") };
        text.push_str(&format!("{},{},{label}\n", offset + (i % 7) as f64 * 0.1, offset + (i % 5) as f64 * 0.1));
    }
    let path = dir.join("toy.csv");
    fs::write(&path, text).unwrap();
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn train_then_predict_reproduces_training_labels() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write_toy(dir.path());
    let model = dir.path().join("toy.model");
    let out = run(&["train", "--data", p(&toy), "--label-col", "3", "--trees", "5", "--seed", "1", "--out", p(&model)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("level(s)"));

    let preds = dir.path().join("preds.txt");
    let out = run(&["predict", "--model", p(&model), "--data", p(&toy), "--label-col", "label", "--out", p(&preds)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let got: Vec<String> = fs::read_to_string(&preds).unwrap().lines().map(String::from).collect();
    let expected: Vec<String> = (0..30).map(|i| (i % 2).to_string()).collect();
    assert_eq!(got, expected);
}

#[test]
fn ecoli_example_command() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.model");
    let out = run(&[
        "train", "--data", p(&data("ecoli.csv")), "--label-col", "8", "--mode", "disdf", "--trees", "10", "--seed",
        "7", "--fw-iterations", "200", "--out", p(&model),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(model.exists());
}

#[test]
fn same_seed_same_model_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write_toy(dir.path());
    let (a, b) = (dir.path().join("a.model"), dir.path().join("b.model"));
    for path in [&a, &b] {
        let out = run(&["train", "--data", p(&toy), "--trees", "4", "--seed", "3", "--out", p(path)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write_toy(dir.path());
    let (a, b) = (dir.path().join("a.model"), dir.path().join("b.model"));
    let out = run(&["--threads", "1", "train", "--data", p(&toy), "--trees", "4", "--seed", "3", "--out", p(&a)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = disdf()
        .env("DISDF_THREADS", "2")
        .args(["train", "--data", p(&toy), "--trees", "4", "--seed", "3", "--out", p(&b)])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write_toy(dir.path());
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\ntrees = 3\nmode = baseline\ntau = 0\n").unwrap();
    let model = dir.path().join("m.model");
    // tau = 0 in the file is invalid, the flag repairs it
    let out = run(&["train", "--data", p(&toy), "--config", p(&cfg), "--out", p(&model)]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let out = run(&["train", "--data", p(&toy), "--config", p(&cfg), "--tau", "0.4", "--out", p(&model)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("baseline mode"));
}

#[test]
fn missing_data_file_exits_2_with_path() {
    let out = run(&["train", "--data", "/no/such/file.csv", "--out", "/tmp/unused.model"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("/no/such/file.csv"));
}

#[test]
fn non_positive_tau_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write_toy(dir.path());
    let out = run(&["train", "--data", p(&toy), "--tau", "-1", "--out", p(&dir.path().join("m"))]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("tau"));
}

#[test]
fn predict_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write_toy(dir.path());
    let model = dir.path().join("m.model");
    assert_eq!(code(&run(&["train", "--data", p(&toy), "--trees", "3", "--out", p(&model)])), 0);

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = run(&["predict", "--model", p(&model), "--data", p(&empty)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(out.stdout.is_empty());

    let wide = dir.path().join("wide.csv");
    fs::write(&wide, "1,2,3\n4,5,6\n").unwrap();
    let out = run(&["predict", "--model", p(&model), "--data", p(&wide)]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("expected 2, got 3"), "{}", stderr(&out));

    let garbage = dir.path().join("garbage.model");
    fs::write(&garbage, "not a model").unwrap();
    let out = run(&["predict", "--model", p(&garbage), "--data", p(&toy), "--label-col", "last"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn bench_smoke_run_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write_toy(dir.path());
    let out_dir = dir.path().join("results");
    let out = run(&[
        "bench", "--data", p(&toy), "--N-list", "9,12", "--T-list", "1,2", "--reps", "1", "--out-dir", p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("gcF") && stdout.contains("DisDF"));
    let reps = fs::read_to_string(out_dir.join("reps.csv")).unwrap();
    assert_eq!(reps.lines().count(), 1 + 2 * 2 * 2);
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("dataset,N,T,mode,reps,mean,std\ntoy,9,1,baseline,1,"));
}

#[test]
fn bench_rejects_n_beyond_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write_toy(dir.path());
    let out = run(&["bench", "--data", p(&toy), "--N-list", "20", "--T-list", "1", "--reps", "1"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("cannot draw"));
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(code(&run(&["train"])), 3);
    assert_eq!(code(&run(&["frobnicate"])), 3);
    assert_eq!(code(&run(&["--help"])), 0);
}
