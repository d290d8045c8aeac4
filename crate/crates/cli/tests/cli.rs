use std::path::Path;
use std::process::{Command, Output};

fn zakai(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zakai"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn zakai")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = zakai(dir.path(), &["mlmc", "--set", "rho=0.1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));
}

#[test]
fn bad_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "levels = many\n").unwrap();
    let o = zakai(dir.path(), &["table1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unstable_parameters_get_their_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = zakai(dir.path(), &["mlmc", "--set", "rho_x=0.9", "--set", "rho_y=0.9", "--eps", "0.05"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn degenerate_pilot_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = zakai(dir.path(), &["mlmc", "--eps", "0.05", "--pilot-samples", "1"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn repeated_run_writes_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["mlmc", "--eps", "0.01", "--alpha", "0.1", "--seed", "1"];
    let mut files = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let o = zakai(&out, &args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        files.push(std::fs::read_to_string(out.join("mlmc.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let mut lines = files[0].lines();
    assert!(lines.next().unwrap().starts_with("# seed=1 config="));
    assert_eq!(lines.next().unwrap(), "level,mean,variance,samples,cost");
}

#[test]
fn single_tolerance_gives_one_row_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let o = zakai(dir.path(), &["compare-cost", "--eps", "0.05"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("cost.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 4);
    for m in ["full-mc", "sparse-mc", "full-mlmc", "sparse-mlmc"] {
        assert_eq!(rows.iter().filter(|r| r.starts_with(&format!("{m},"))).count(), 1);
    }
}

#[test]
fn tolerances_must_descend() {
    let dir = tempfile::tempdir().unwrap();
    let o = zakai(dir.path(), &["compare-cost", "--eps", "0.02,0.05"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nlevel = 1\nk = 0.25\nsamples = 8\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(zakai(&a, &["sparse-mc", "--config", cfg]).status.success());
    assert!(zakai(&b, &["sparse-mc", "--config", cfg, "--samples", "16"]).status.success());
    let rows = |d: &Path| {
        let t = std::fs::read_to_string(d.join("sparse-mc.csv")).unwrap();
        t.lines().nth(2).unwrap().split(',').nth(3).unwrap().to_string()
    };
    assert_eq!(rows(&a), "8");
    assert_eq!(rows(&b), "16");
}

#[test]
fn oracle_check_writes_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let o = zakai(dir.path(), &["oracle-check", "--set", "n=10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    assert_eq!(text.lines().count(), 2 + 100);
    assert_eq!(text.lines().nth(1).unwrap(), "xi,eta,abs_mean_amp,second_moment,bound_ratio");
}
