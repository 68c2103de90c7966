use std::path::Path;
use std::process::{Command, Output};

use trace_completion::io::{load_model, load_tensor, save_tensor};
use trace_completion::pipeline::{synth_generate, SynthConfig};

fn tracecomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracecomp")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_data(dir: &Path) -> (String, String) {
    let data = synth_generate(&SynthConfig::new(vec![6, 6, 5], vec![2, 2, 2], 0.6, 1)).unwrap();
    let (train, test) = (dir.join("train.txt"), dir.join("test.txt"));
    save_tensor(&train, &data.train).unwrap();
    save_tensor(&test, &data.test).unwrap();
    (train.to_str().unwrap().into(), test.to_str().unwrap().into())
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = write_data(dir.path());
    let model = dir.path().join("model.txt");
    let m = model.to_str().unwrap();
    let o = tracecomp(&["train", "--train", &train, "--test", &test, "--rank", "2,2,2", "--lambda", "1", "--out", m]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("test rmse"));
    let trace = std::fs::read_to_string(format!("{m}.trace.csv")).unwrap();
    assert!(trace.starts_with("iter,cost,gradnorm,radius,rho,tcg_reason,seconds\n"));
    assert_eq!(load_model(&model).unwrap().ranks, vec![2, 2, 2]);

    let pred = dir.path().join("pred.txt");
    let o = tracecomp(&["predict", "--model", m, "--test", &test, "--out", pred.to_str().unwrap(), "--task", "rmse"]);
    assert!(o.status.success());
    let p = load_tensor(&pred).unwrap();
    assert!(p.support().same_as(load_tensor(&test).unwrap().support()));
}

#[test]
fn train_with_grid_writes_cv_table_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = write_data(dir.path());
    let run = |name: &str| {
        let m = dir.path().join(name);
        let o = tracecomp(&[
            "train", "--train", &train, "--rank", "2,2,2", "--formulation", "ls", "--cv-grid", "0.1:10:1", "--folds", "3",
            "--max-iters", "15", "--seed", "3", "--out", m.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("cv selected lambda"));
        let cv = std::fs::read_to_string(format!("{}.cv.csv", m.display())).unwrap();
        assert_eq!(cv.lines().count(), 4);
        std::fs::read(&m).unwrap()
    };
    assert_eq!(run("a.txt"), run("b.txt"));
}

#[test]
fn cv_subcommand_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = write_data(dir.path());
    let out = dir.path().join("cv.csv");
    let o = tracecomp(&[
        "cv", "--train", &train, "--rank", "2,2,2", "--cv-grid", "0.1:1:1", "--folds", "2", "--max-iters", "10", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("lambda,mean_rmse,std_rmse,fold1,fold2\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = write_data(dir.path());
    let out = dir.path().join("m.txt");
    let out = out.to_str().unwrap();
    // neither lambda nor grid
    assert_eq!(tracecomp(&["train", "--train", &train, "--rank", "2,2,2", "--out", out]).status.code(), Some(2));
    // both
    let both = ["train", "--train", &train, "--rank", "2,2,2", "--lambda", "1", "--cv-grid", "1:10:1", "--out", out];
    assert_eq!(tracecomp(&both).status.code(), Some(2));
    // rank count mismatch
    assert_eq!(tracecomp(&["train", "--train", &train, "--rank", "2,2", "--lambda", "1", "--out", out]).status.code(), Some(2));
    // malformed data
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "dims 2 2\n1 x 3\n").unwrap();
    let o = tracecomp(&["train", "--train", bad.to_str().unwrap(), "--rank", "1,1", "--lambda", "1", "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    // missing file
    let o = tracecomp(&["predict", "--model", "/nonexistent/model", "--test", &train, "--out", out]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn selftest_passes() {
    let o = tracecomp(&["selftest"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).contains("[FAIL]"));
}

#[test]
fn bench_reports_exponent() {
    let o = tracecomp(&["bench", "--dims", "30,30,30", "--rank", "2,2,2", "--sizes", "200,800", "--repeats", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("fitted exponent"));
}
