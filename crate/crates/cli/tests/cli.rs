use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_soliton-lab"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("soliton-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn status(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

const SHORT: [&str; 4] = ["--override", "integrator.t_final=0.2", "--override", "integrator.stride=20"];

#[test]
fn passing_run_exits_zero_and_writes_report() {
    let out = scratch("pass");
    let code = status(bin().args(["phase", "--out"]).arg(&out).args(SHORT));
    assert_eq!(code, 0);
    for f in ["config.txt", "summary.json", "timings.json", "phase.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"status\": \"pass\""));
    assert!(!summary.contains("total"), "timings stay out of the summary");
    let _ = fs::remove_dir_all(&out);
}

#[test]
fn configuration_errors_exit_two() {
    let out = scratch("config");
    assert_eq!(status(bin().args(["simulate", "--override", "physics.speed=0.5", "--out"]).arg(&out)), 2);
    assert_eq!(status(bin().args(["simulate", "--override", "physics.c=0", "--out"]).arg(&out)), 2);
    assert_eq!(
        status(bin().args(["modulate", "--override", "perturbation.kind=random", "--out"]).arg(&out)),
        2,
        "a random perturbation needs a seed"
    );
    assert_eq!(status(bin().args(["simulate", "--config", "/nonexistent/x.conf"])), 2);
    let output = bin()
        .args(["simulate", "--override", "integrator.dt=-1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("integrator.dt"));
    assert!(!out.exists());
}

#[test]
fn failed_hard_check_exits_one() {
    // the numerical essential-edge estimate misses the closed form (see README)
    let out = scratch("fail");
    let code = status(
        bin()
            .args(["spectrum", "--out"])
            .arg(&out)
            .args(["--override", "spectrum.edge_half_length=40", "--override", "spectrum.edge_points=256"])
            .args(["--override", "spectrum.restarts=1", "--override", "spectrum.random_pairs=2"]),
    );
    assert_eq!(code, 1);
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"status\": \"fail\""));
    let _ = fs::remove_dir_all(&out);
}

#[test]
fn config_file_and_overrides_compose() {
    let dir = scratch("file");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.conf");
    fs::write(
        &path,
        "# short phase run\nphysics.c = 0.5\nintegrator.t_final = 0.1\nintegrator.stride = 10\n",
    )
    .unwrap();
    let out = dir.join("out");
    let code = status(
        bin()
            .args(["phase", "--config"])
            .arg(&path)
            .args(["--override", "physics.c=0.7", "--seed", "9", "--out"])
            .arg(&out),
    );
    assert_eq!(code, 0);
    let echo = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(echo.contains("physics.c = 7e-1"));
    assert!(echo.contains("integrator.t_final = 1e-1"));
    assert!(echo.contains("perturbation.seed = 9"));
    let _ = fs::remove_dir_all(&dir);
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "timings.json" {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    for out in [&a, &b] {
        let code = status(
            bin()
                .args(["simulate", "--seed", "5", "--out"])
                .arg(out)
                .args(["--override", "perturbation.kind=random"])
                .args(SHORT),
        );
        assert_eq!(code, 0);
    }
    assert_eq!(files(&a), files(&b));
    let _ = fs::remove_dir_all(&a);
    let _ = fs::remove_dir_all(&b);
}

#[test]
fn sweep_output_does_not_depend_on_worker_count() {
    let (a, b) = (scratch("sweep-1"), scratch("sweep-3"));
    for (out, workers) in [(&a, "1"), (&b, "3")] {
        let code = status(
            bin()
                .args(["sweep", "--workers", workers, "--out"])
                .arg(out)
                .args(["--override", "experiment=phase", "--override", "sweep.speeds=0.4,0,0.6"])
                .args(SHORT),
        );
        // the c = 0 cell is invalid
        assert_eq!(code, 2);
    }
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa, fb);
    let table = String::from_utf8(fa.iter().find(|(n, _)| n == "sweep.csv").unwrap().1.clone()).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("0,4e-1,pass"));
    assert!(rows[2].starts_with("1,0e0,invalid"));
    assert!(rows[3].starts_with("2,6e-1,pass"));
    assert!(a.join("run-001/invalid.txt").exists());
    let _ = fs::remove_dir_all(&a);
    let _ = fs::remove_dir_all(&b);
}
