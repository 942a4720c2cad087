use std::path::Path;
use std::process::{Command, Output};

fn cht(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cht")).args(args).env_remove("CHT_THREADS").output().expect("run cht")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_data(dir: &Path) -> String {
    let path = dir.join("data.csv");
    let csv = stdout(&cht(&["simulate", "--experiment", "data", "--n", "80", "--p", "30", "--n-main", "3", "--ints-per-main", "4", "--seed", "2"]));
    std::fs::write(&path, csv).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn test_subcommand_emits_main_and_pair_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out = stdout(&cht(&["--json", "test", "--input", &data, "--top", "5"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["main"].as_array().unwrap().len(), 30);
    let pairs = v["interaction"].as_array().unwrap();
    assert_eq!(pairs.len(), 5);
    for p in pairs {
        let (a, b, prime) = (p["lambda_jk"].as_f64().unwrap(), p["lambda_kj"].as_f64().unwrap(), p["lambda_prime"].as_f64().unwrap());
        assert_eq!(prime, a.max(b));
    }
}

#[test]
fn output_flag_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let target = dir.path().join("stats.tsv");
    let direct = stdout(&cht(&["test", "--input", &data]));
    stdout(&cht(&["test", "--input", &data, "-o", target.to_str().unwrap()]));
    assert_eq!(std::fs::read_to_string(target).unwrap(), direct);
}

#[test]
fn thread_count_from_environment_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let args = ["fdr", "--input", data.as_str(), "--permutations", "15"];
    let a = stdout(&cht(&args));
    let b = Command::new(env!("CARGO_BIN_EXE_cht")).args(args).env("CHT_THREADS", "3").output().unwrap();
    assert_eq!(a, stdout(&b));
}

#[test]
fn path_reports_worked_example() {
    let out = stdout(&cht(&["--json", "path", "--w", "0.5", "--z", "2,1", "--points", "10", "--lambda-max", "1.5"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["knots"]["lam4"].as_f64().unwrap() - 1.25).abs() < 1e-12);
}

#[test]
fn errors_have_a_tagged_prefix_and_exit_code() {
    let missing = cht(&["test", "--input", "/definitely/not/here.csv"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("cht: error[io]: "));

    let usage = cht(&["simulate", "--experiment", "nope"]);
    assert_eq!(usage.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&usage.stderr).starts_with("cht: error[usage]: "));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "class,a,b\n1,0.5,1\n3,0.1,2\n").unwrap();
    let label = cht(&["test", "--input", bad.to_str().unwrap()]);
    assert_eq!(label.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&label.stderr).starts_with("cht: error[label]: "));
}

#[test]
fn oracle_check_passes_on_a_small_run() {
    let out = stdout(&cht(&["oracle-check", "--instances", "30", "--seed", "4"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["failures"].as_array().unwrap().is_empty());
}
