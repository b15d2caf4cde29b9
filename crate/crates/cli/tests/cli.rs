//! End-to-end tests of the `lookaround` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lookaround")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary should launch")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .unwrap();
    for rec in rdr.records() {
        rows.push(rec.unwrap().iter().map(|s| s.to_string()).collect());
    }
    rows
}

#[test]
fn quad_fixed_points_default_verifies_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("qfp");
    let t0 = Instant::now();
    let res = run(&["quad-fixed-points", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert!(t0.elapsed().as_secs_f64() < 10.0);

    let rows = read_csv(&out.join("fixed_points.csv"));
    assert_eq!(rows[0][0], "method");
    let mut checked = 0;
    for row in &rows[1..] {
        if !row[4].is_empty() {
            assert!(row[4].parse::<f64>().unwrap() <= 1e-10, "{row:?}");
            checked += 1;
        }
    }
    assert!(checked >= 8, "expected sgd and lookaround rows with rel_err");
}

#[test]
fn refuses_existing_out_dir_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("qfp");
    let args = ["quad-fixed-points", "--seed", "1", "--out", out.to_str().unwrap()];
    assert!(run(&args).status.success());
    let second = run(&args);
    assert!(!second.status.success());
    assert!(stderr(&second).contains("--force"), "{}", stderr(&second));

    let mut forced = args.to_vec();
    forced.push("--force");
    assert!(run(&forced).status.success());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "schema_version = 1\nkind = \"quad-fixed-points\"\nseed = 1\n[params]\nlr = 0.1\n",
    )
    .unwrap();
    let res = run(&[
        "quad-fixed-points",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(stderr(&res).contains("lr"), "{}", stderr(&res));
}

#[test]
fn alpha_violation_names_its_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("alpha.toml");
    std::fs::write(
        &cfg,
        "schema_version = 1\nkind = \"quad-fixed-points\"\nseed = 1\n[params]\nalpha = 1.5\n",
    )
    .unwrap();
    let res = run(&["quad-fixed-points", "--config", cfg.to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(stderr(&res).contains("α ∈ (0, 1]"), "{}", stderr(&res));
}

#[test]
fn checked_in_rate_sweep_config_runs_and_respects_the_floor() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rates");
    let res = run(&[
        "rate-sweep",
        "--config",
        repo_config("rate-sweep.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));

    let rows = read_csv(&out.join("rates.csv"));
    assert_eq!(rows[0], ["kappa", "method", "rate", "gamma_best", "note"]);
    assert_eq!(rows.len(), 1 + 13 * 3);
    for row in &rows[1..] {
        let kappa: f64 = row[0].parse().unwrap();
        let rate: f64 = row[2].parse().unwrap();
        let floor = (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0);
        assert!(rate >= floor - 1e-9, "{row:?} below floor {floor}");
        if row[1] == "lookaround" {
            assert_eq!(row[4], "historical-average approximation");
        }
    }
    assert!(out.join("rates.svg").exists());
}

fn tiny_train_config() -> String {
    "schema_version = 1\nkind = \"train\"\nseed = 3\n[params]\n\
     n_train = 30\nn_test = 20\nepochs = 2\nbatch_size = 10\nhidden = [4]\nk = 2\nd = 2\n"
        .to_string()
}

#[test]
fn snapshot_round_trips_through_parse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("train.toml");
    std::fs::write(&cfg, tiny_train_config()).unwrap();
    let out1 = dir.path().join("a");
    let res = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out1.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));

    // Re-run from the echoed snapshot: it must parse and reproduce the same
    // resolved parameters.
    let snapshot = out1.join("config.toml");
    let out2 = dir.path().join("b");
    let res2 = run(&[
        "train",
        "--config",
        snapshot.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(res2.status.success(), "{}", stderr(&res2));

    let t1: toml::Value =
        toml::from_str(&std::fs::read_to_string(&snapshot).unwrap()).unwrap();
    let t2: toml::Value =
        toml::from_str(&std::fs::read_to_string(out2.join("config.toml")).unwrap()).unwrap();
    assert_eq!(t1.get("params"), t2.get("params"));
    assert_eq!(t1.get("seed"), t2.get("seed"));

    // Identical snapshot params + seed ⇒ identical run log.
    assert_eq!(
        std::fs::read(out1.join("runlog.csv")).unwrap(),
        std::fs::read(out2.join("runlog.csv")).unwrap()
    );
}

#[test]
fn seed_flag_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("train.toml");
    std::fs::write(&cfg, tiny_train_config()).unwrap();
    let out = dir.path().join("o");
    let res = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "99",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let snap: toml::Value =
        toml::from_str(&std::fs::read_to_string(out.join("config.toml")).unwrap()).unwrap();
    assert_eq!(snap.get("seed").and_then(|v| v.as_integer()), Some(99));
}

#[test]
fn missing_seed_is_an_error() {
    let res = run(&["quad-fixed-points"]);
    assert!(!res.status.success());
    assert!(stderr(&res).contains("seed"), "{}", stderr(&res));
}

#[test]
fn env_var_overrides_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let res = Command::new(bin())
        .args(["quad-fixed-points", "--seed", "5"])
        .env("LOOKAROUND_OUT_ROOT", dir.path())
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", stderr(&res));
    assert!(dir
        .path()
        .join("quad-fixed-points-seed5")
        .join("fixed_points.csv")
        .exists());
}
