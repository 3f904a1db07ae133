use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ifdm::io::{read_field, read_primal};

fn ifdm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifdm"))
        .args(args)
        .current_dir(dir)
        .env("IFDM_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn constant_forward_run_is_bitwise_stationary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[grid]\nn = 8\n[time]\nT = 0.2\ndt = 0.01\n[forward]\nsample_every = 5\n[scenario]\nname = \"constant\"\n[io]\noutput_dir = \"out\"\n",
    );
    let out = ifdm(&["forward", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let first = read_field(&dir.path().join("out/snap_00000.ifdm")).unwrap();
    let last = read_field(&dir.path().join("out/snap_00004.ifdm")).unwrap();
    assert_eq!(first.field, last.field);
    assert_eq!(last.time, 0.2);
    let energy = csv_column(&dir.path().join("out/diagnostics.csv"), "energy");
    assert_eq!(energy.len(), 5);
}

#[test]
fn seeded_runs_are_bitwise_reproducible() {
    let body = "[grid]\nn = 8\n[time]\nT = 0.05\ndt = 0.005\n[forward]\nsample_every = 5\n[scenario]\nname = \"random_smooth\"\nseed = 17\n[io]\noutput_dir = \"out\"\n";
    let runs: Vec<tempfile::TempDir> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let cfg = write_config(dir.path(), "c.toml", body);
            let out = ifdm(&["forward", "--config", cfg.to_str().unwrap()], dir.path());
            assert_eq!(code(&out), 0, "{}", stderr(&out));
            dir
        })
        .collect();
    for name in ["snap_00000.ifdm", "snap_00001.ifdm", "snap_00002.ifdm", "diagnostics.csv"] {
        let a = std::fs::read(runs[0].path().join("out").join(name)).unwrap();
        let b = std::fs::read(runs[1].path().join("out").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn alfven_forward_run_keeps_helicity_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[grid]\nn = 32\n[time]\nT = 0.5\ndt = 0.005\n[forward]\nsample_every = 10\n[scenario]\nname = \"beltrami_alfven\"\n[io]\noutput_dir = \"out\"\n",
    );
    let out = ifdm(&["forward", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let h = csv_column(&dir.path().join("out/diagnostics.csv"), "helicity_total");
    assert_eq!(h.len(), 11);
    for x in &h {
        assert!((x - h[0]).abs() <= 1e-6 * h[0].abs(), "{x} vs {}", h[0]);
    }
}

#[test]
fn dual_on_exact_constant_base_is_already_optimal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[grid]\nn = 4\n[time]\nT = 0.5\nnt = 4\n[scenario]\nname = \"constant\"\n[io]\noutput_dir = \"out\"\n",
    );
    let out = ifdm(&["dual", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = dir.path().join("out/solve_report.csv");
    let grad = csv_column(&report, "grad_norm");
    assert!(grad.len() <= 2);
    assert!(grad.last().unwrap() <= &1e-13);
    for k in 0..=4 {
        assert!(dir.path().join(format!("out/dstar_{k:05}.ifdm")).exists());
    }
    let (t, uhat) = read_primal(&dir.path().join("out/uhat_00000.ifdm")).unwrap();
    assert_eq!(t, 0.0625);
    assert_eq!(uhat.v.comp(0)[0], 1.0);
}

#[test]
fn dual_on_perturbed_alfven_base_ascends_monotonically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[grid]\nn = 8\n[time]\nT = 0.5\nnt = 4\n[dual]\nmax_iter = 25\n[scenario]\nname = \"beltrami_alfven\"\nperturbation = 1e-3\n[io]\noutput_dir = \"out\"\n",
    );
    let out = ifdm(&["dual", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let s = csv_column(&dir.path().join("out/solve_report.csv"), "S");
    assert!(s.len() > 2);
    for w in s.windows(2) {
        assert!(w[1] >= w[0], "{w:?}");
    }
}

#[test]
fn dual_from_trajectory_base() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[grid]\nn = 4\n[time]\nT = 0.1\nnt = 2\ndt = 0.01\n[dual]\nmax_iter = 5\n[scenario]\nname = \"random_smooth\"\nseed = 3\n[io]\noutput_dir = \"out\"\n",
    );
    let out = ifdm(&["dual", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("out/uhat_00001.ifdm").exists());

    // A step count that does not split into the dual intervals is a config error.
    let bad = write_config(
        dir.path(),
        "bad.toml",
        "[grid]\nn = 4\n[time]\nT = 0.1\nnt = 3\ndt = 0.01\n[scenario]\nname = \"random_smooth\"\n",
    );
    let out = ifdm(&["dual", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_base_file_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[grid]\nn = 4\n[time]\nnt = 2\n[scenario]\nname = \"from_file\"\npath = \"no_such_base.ifdm\"\n",
    );
    let out = ifdm(&["dual", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no_such_base.ifdm"), "{}", stderr(&out));
}

#[test]
fn dual_from_file_base_round_trips_a_forward_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let fwd = write_config(
        dir.path(),
        "f.toml",
        "[grid]\nn = 4\n[time]\nT = 0.01\ndt = 0.01\n[scenario]\nname = \"constant\"\n[io]\noutput_dir = \"fwd\"\n",
    );
    assert_eq!(code(&ifdm(&["forward", "--config", fwd.to_str().unwrap()], dir.path())), 0);
    let dual = write_config(
        dir.path(),
        "d.toml",
        "[grid]\nn = 4\n[time]\nnt = 2\n[scenario]\nname = \"from_file\"\npath = \"fwd/snap_00001.ifdm\"\n[io]\noutput_dir = \"dual\"\n",
    );
    let out = ifdm(&["dual", "--config", dual.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(csv_column(&dir.path().join("dual/solve_report.csv"), "grad_norm")[0], 0.0);

    let wrong = write_config(
        dir.path(),
        "w.toml",
        "[grid]\nn = 8\n[time]\nnt = 2\n[scenario]\nname = \"from_file\"\npath = \"fwd/snap_00001.ifdm\"\n",
    );
    assert_eq!(code(&ifdm(&["dual", "--config", wrong.to_str().unwrap()], dir.path())), 2);
}

#[test]
fn config_errors_exit_2_with_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[grid]\nn = 8\n\n[dual]\na_p = 0\n");
    let out = ifdm(&["forward", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 5"), "{}", stderr(&out));

    let out = ifdm(&["forward", "--config", "absent.toml"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("absent.toml"));
}

#[test]
fn cfl_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[grid]\nn = 16\n[time]\nT = 0.5\ndt = 0.25\n[scenario]\nname = \"beltrami_alfven\"\n",
    );
    let out = ifdm(&["forward", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("CFL"));
}

#[test]
fn check_suites_and_table_dump() {
    let dir = tempfile::tempdir().unwrap();
    let out = ifdm(&["check", "--suite", "algebra"], dir.path());
    assert_eq!(code(&out), 0);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("PASS") && !table.contains("FAIL"));
    assert_eq!(code(&ifdm(&["check", "--suite", "nonsense"], dir.path())), 2);

    let out = ifdm(&["dump-tables", "--out", "tables"], dir.path());
    assert_eq!(code(&out), 0);
    let m = std::fs::read_to_string(dir.path().join("tables/M.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("tables/B.csv")).unwrap();
    assert_eq!(m.lines().count(), 19);
    assert_eq!(b.lines().count(), 133);
    assert!(b.contains("G12,0,v1,1,v2,-1"));
}

#[test]
fn invalid_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ifdm"))
        .args(["check", "--suite", "algebra"])
        .env("IFDM_THREADS", "zero")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}
