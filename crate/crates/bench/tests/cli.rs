use std::process::Command;

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spbfgs-bench"))
}

#[test]
fn list_problems_succeeds() {
    let out = bench().arg("list-problems").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("ROSENBR"));
    assert!(text.contains("QUADILL"));
}

#[test]
fn missing_config_is_a_config_error() {
    let out = bench().args(["run", "/nonexistent/none.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[experiment]\nseed = x\n").unwrap();
    let out = bench().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("bad.cfg:2:"));
}

#[test]
fn run_writes_outputs_and_cli_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    std::fs::write(
        &cfg,
        "[experiment]\nseed = 3\nreplicates = 2\nbudget_evals = 200\nout_dir = from_file\n\
         [problems]\nnames = ROSENBR, BEALE\n[noise]\ncells = 0:1e-2\n\
         [method.sp]\nkind = spbfgs\n[method.bfgs]\nkind = bfgs\n",
    )
    .unwrap();
    let out_dir = dir.path().join("cli");
    let out = bench()
        .arg("run")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .args(["--replicates", "3", "--trace"])
        .env("SPBFGS_OUT_DIR", dir.path().join("env"))
        .env("SPBFGS_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.lines().skip(1).all(|l| l.split(',').nth(4) == Some("3")));
    assert!(out_dir.join("runs.csv").exists());
    assert!(out_dir.join("traces.csv").exists());
    assert!(!dir.path().join("env").exists());
    assert!(!dir.path().join("from_file").exists());
}

#[test]
fn env_out_dir_beats_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    std::fs::write(
        &cfg,
        "[experiment]\nreplicates = 1\nbudget_iters = 5\nout_dir = from_file\n\
         [problems]\nnames = BEALE\n[noise]\ncells = 0:0\n[method.bfgs]\nkind = bfgs\n",
    )
    .unwrap();
    let out = bench().arg("run").arg(&cfg).env("SPBFGS_OUT_DIR", dir.path().join("env")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("env/summary.csv").exists());
    assert!(!dir.path().join("from_file").exists());
}

#[test]
fn verify_passes() {
    let out = bench().arg("verify").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(!text.contains("FAIL"));
}
