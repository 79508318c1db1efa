//! The `inloop` binary: exit codes, diagnostics, manifests and byte-level reproducibility.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn inloop() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_inloop"));
    c.env_remove("INLOOP_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    inloop().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[test]
fn rates_report_both_models() {
    let o = run(&["rates", "--eta", "0.8", "--eps", "0.95", "--g", "-19"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let f = |p: &str| v.pointer(p).and_then(|x| x.as_f64()).unwrap();
    assert!((f("/feedback/gamma_x") - 0.12).abs() < 1e-12);
    assert!((f("/feedback/gamma_y") - 0.5).abs() < 1e-12);
    assert!((f("/feedback/S") - 0.05).abs() < 1e-12);
    assert!((f("/free/gamma_y") - 8.1).abs() < 1e-12);

    let o = run(&["rates", "--eta", "0.8", "--L", "0.05"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v.pointer("/free/gamma_x").unwrap().as_f64().unwrap() - 0.12).abs() < 1e-12);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();

    let o = run(&["loop-spectrum", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));

    let o = run(&["loop-spectrum", "--config", "/nonexistent/loop.conf", "--out", out]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let bad = write(dir.path(), "bad.conf", "g = -4\neps = 0.9\neta = 0.8\ntau = 0.1\nbogus = 1\n");
    let o = run(&["loop-spectrum", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("bad.conf:5:"), "{}", stderr(&o));

    let domain = write(dir.path(), "domain.conf", "g = -4\neps = 0.9\neta = 1.5\ntau = 0.1\n");
    let o = run(&["loop-spectrum", "--config", domain.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
    assert!(stderr(&o).contains("eta"));

    let o = run(&["rates", "--eta", "0.8", "--eps", "0.95", "--g", "-19", "--lambda", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unstable_loops_exit_before_writing() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write(dir.path(), "pos.conf", "g = 2\neps = 0.9\neta = 0.8\ntau = 0.1\n");
    let o = run(&["loop-spectrum", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6), "{}", stderr(&o));
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none());

    let traj = write(
        dir.path(),
        "traj.conf",
        "g = 2\neps = 0.9\neta = 0.8\ntau = 0.01\ndt = 1e-3\nduration = 0.1\nn_traj = 2\n",
    );
    let o = run(&["trajectories", "--config", traj.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6), "{}", stderr(&o));
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none());

    // a runtime drive-guard trip is an instability too
    let guard = write(
        dir.path(),
        "guard.conf",
        "g = -19\neps = 0.95\neta = 0.8\ntau = 0.01\ndt = 1e-3\nduration = 0.5\nn_traj = 2\ndrive_guard = 1.0\n",
    );
    let o = run(&["trajectories", "--config", guard.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6), "{}", stderr(&o));
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn seed_flag_must_match_config() {
    let dir = TempDir::new().unwrap();
    let o = run(&[
        "trajectories",
        "--config",
        data("small_trajectories.conf").to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn fixed_seed_trajectories_match_golden_file() {
    let dir = TempDir::new().unwrap();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let o = inloop()
            .env("RAYON_NUM_THREADS", threads)
            .args(["trajectories", "--config", data("small_trajectories.conf").to_str().unwrap(), "--seed", "42"])
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        let got = fs::read(out.join("trajectories_means.csv")).unwrap();
        let want = fs::read(data("small_trajectories_means.csv")).unwrap();
        assert!(got == want, "means differ from the golden file with {threads} thread(s)");
    }
}

fn round_trip(sub: &str, config_name: &str, config: &str, manifest: &str, extra: &[&str]) {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), config_name, config);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = inloop()
        .args([sub, "--config", cfg.to_str().unwrap()])
        .args(extra)
        .arg("--out")
        .arg(&a)
        .output()
        .unwrap();
    assert!(first.status.success(), "{sub}: {}", stderr(&first));
    let second = inloop()
        .args([sub, "--config"])
        .arg(a.join(manifest))
        .args(extra)
        .arg("--out")
        .arg(&b)
        .output()
        .unwrap();
    assert!(second.status.success(), "{sub} replay: {}", stderr(&second));
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.len(), fb.len());
    for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ca == cb, "{sub}: {na} differs after replaying the manifest");
    }
}

#[test]
fn manifests_replay_byte_identical_outputs() {
    round_trip(
        "loop-spectrum",
        "loop.conf",
        "g = -19\neps = 0.95\neta = 0.8\nfilter = exponential\ntau = 0.01\ntime_constant = 0.003\npoints = 64\n",
        "loop_spectrum_manifest.json",
        &[],
    );
    round_trip(
        "loop-sim",
        "sim.conf",
        "g = -4\neps = 0.9\neta = 0.8\ntau = 1.0\ndt = 0.05\nduration = 10000\nwrite_record = true\n",
        "loop_sim_manifest.json",
        &["--seed", "9"],
    );
    round_trip(
        "spectrum",
        "spec.conf",
        "model = feedback\neta = 0.8\neps = 0.95\ng = -19\npoints = 41\n",
        "spectrum_manifest.json",
        &[],
    );
    round_trip("fig2", "fig2.conf", "eta = 0.8\neps = 0.95\n", "fig2_manifest.json", &[]);
    round_trip(
        "trajectories",
        "traj.conf",
        "g = -4\neps = 0.9\neta = 0.8\ntau = 0.01\ndt = 1e-3\nduration = 0.3\nn_traj = 8\nrecord_every = 10\n",
        "trajectories_manifest.json",
        &["--seed", "3"],
    );
}

#[test]
fn json_and_key_value_configs_agree() {
    let dir = TempDir::new().unwrap();
    let kv = write(dir.path(), "a.conf", "# loop\ng = -19\neps = 0.95   # detector\neta = 0.8\ntau = 0.01\npoints = 32\n");
    let js = write(dir.path(), "b.json", r#"{"g": -19, "eps": 0.95, "eta": 0.8, "tau": 0.01, "points": 32}"#);
    for (cfg, out) in [(&kv, "a"), (&js, "b")] {
        let o = inloop()
            .args(["loop-spectrum", "--config", cfg.to_str().unwrap()])
            .arg("--out")
            .arg(dir.path().join(out))
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(files(&dir.path().join("a")), files(&dir.path().join("b")));
}

#[test]
fn output_directory_defaults_to_environment() {
    let dir = TempDir::new().unwrap();
    let o = inloop()
        .env("INLOOP_OUT_DIR", dir.path())
        .args(["fig2"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("fig2.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "omega,P_inloop,P_free,P_natural");
    assert_eq!(rows.len(), 1 + 1201);
    assert!(text.starts_with("# P_natural = "));
    // both spectra peak at ω = 0
    let centre: Vec<f64> = rows[601].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(centre[0], 0.0);
    for row in &rows[1..] {
        let v: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(v[1] <= centre[1] && v[2] <= centre[2]);
    }
}
