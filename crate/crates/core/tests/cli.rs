use std::path::Path;
use std::process::{Command, Output};

fn plasmode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plasmode"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn synth(dir: &Path) -> String {
    let path = dir.join("data.csv");
    let o = plasmode(&[
        "synth",
        "--n",
        "90",
        "--p",
        "4",
        "--seed",
        "1",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    path.to_str().unwrap().to_string()
}

#[test]
fn missing_input_exits_one_with_schema() {
    let o = plasmode(&["select-m"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("configuration keys"), "{err}");
}

#[test]
fn unknown_flag_and_bad_values_exit_one() {
    assert_eq!(code(&plasmode(&["run", "--bogus"])), 1);
    let tmp = tempfile::tempdir().unwrap();
    let input = synth(tmp.path());
    let base = ["run", "--input", &input, "--outcome", "y", "--id-column"];
    for extra in [
        &["--scheme", "jackknife"][..],
        &["--m", "lots"],
        &["--models", "ridge_cv,forest"],
    ] {
        let args: Vec<&str> = base.iter().copied().chain(extra.iter().copied()).collect();
        assert_eq!(code(&plasmode(&args)), 1, "{extra:?}");
    }
    // m above n without replacement is a configuration error caught before any stage.
    let out = tmp.path().join("big_m");
    let o = plasmode(&[
        "run",
        "--input",
        &input,
        "--outcome",
        "y",
        "--id-column",
        "--scheme",
        "without_replacement",
        "--m",
        "1000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_ne!(code(&o), 0);
}

#[test]
fn missing_file_and_wrong_outcome_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = plasmode(&["ingest", "--input", "/nonexistent/x.csv", "--outcome", "y"]);
    assert_eq!(code(&o), 1);
    let input = synth(tmp.path());
    let out = tmp.path().join("o");
    let o = plasmode(&[
        "ingest",
        "--input",
        &input,
        "--outcome",
        "nope",
        "--id-column",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&plasmode(&["--help"])), 0);
    assert_eq!(code(&plasmode(&["run", "--help"])), 0);
}

#[test]
fn small_run_then_report_from_out_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let input = synth(tmp.path());
    let out = tmp.path().join("run");
    let o = plasmode(&[
        "run",
        "--input",
        &input,
        "--outcome",
        "y",
        "--id-column",
        "--m",
        "60",
        "-N",
        "8",
        "--models",
        "ridge_cv,lmm_reml,lasso_cv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    for m in ["ridge_cv", "lmm_reml", "lasso_cv"] {
        assert!(stdout.contains(m), "{stdout}");
    }
    std::fs::remove_file(out.join("report").join("boxplot_mab.svg")).unwrap();
    assert_eq!(code(&plasmode(&["report", "--out", out.to_str().unwrap()])), 0);
    assert!(out.join("report").join("boxplot_mab.svg").exists());
}
