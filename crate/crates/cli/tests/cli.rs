use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ddxy");

fn ddxy(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("DDXY_WORKERS").output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const MODEL: &str = "[model]\nhopping = 2.0\ndrive = 1.0\ndetuning = 0.5\n";

fn run_kind(kind: &str, body: &str) -> (tempfile::TempDir, Output) {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &format!("kind = \"{kind}\"\nseed = 4\n{body}"));
    let out = tmp.path().join("out");
    let o = ddxy(&[kind, "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "1"]);
    assert!(o.status.success(), "{kind} failed: {}", stderr(&o));
    (tmp, o)
}

fn table(dir: &Path, name: &str) -> Vec<Vec<String>> {
    let text = fs::read_to_string(dir.join("out").join(name)).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn oracle_matches_reflection_symmetry_and_writes_manifest() {
    let (tmp, _) = run_kind("oracle", &format!("{MODEL}[lattice]\nchain = 3\n"));
    let t = table(tmp.path(), "profile.csv");
    assert_eq!(t[0], ["site", "n"]);
    let n1: f64 = t[1][1].parse().unwrap();
    let n3: f64 = t[3][1].parse().unwrap();
    assert!((n1 - n3).abs() < 1e-10);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["kind"], "oracle");
    assert_eq!(m["seed"], 4);
    assert!(tmp.path().join("out/timing.json").exists());
}

#[test]
fn manifest_is_reproducible_and_hash_tracks_config() {
    let body = format!("{MODEL}[lattice]\nchain = 3\n[sweep]\npoints = [0.0, 0.5, 1.0]\n");
    let (a, _) = run_kind("mf-sweep", &body);
    let (b, _) = run_kind("mf-sweep", &body);
    let read = |d: &Path, f: &str| fs::read_to_string(d.join("out").join(f)).unwrap();
    assert_eq!(read(a.path(), "manifest.json"), read(b.path(), "manifest.json"));
    assert_eq!(read(a.path(), "sweep.csv"), read(b.path(), "sweep.csv"));
    let (c, _) = run_kind("mf-sweep", &body.replace("drive = 1.0", "drive = 1.1"));
    assert_ne!(read(a.path(), "sweep.csv").lines().next(), read(c.path(), "sweep.csv").lines().next());

    let t = table(a.path(), "sweep.csv");
    assert_eq!(t[0], ["delta_over_gamma", "direction", "n_c", "converged"]);
    assert_eq!(t.len(), 1 + 6);
    assert_eq!(t[1][1], "L-R");
    assert_eq!(t[4][1], "R-L");
    assert!(t[1][0].contains('e'));
}

#[test]
fn trajectories_and_mps_trajectories_run() {
    let ens = "[ensemble]\nt_total = 2.0\ndt = 0.01\nn_traj = 4\nbins = 10\n";
    let (tmp, _) = run_kind("mf-traj", &format!("{MODEL}[lattice]\nchain = 3\n{ens}"));
    assert_eq!(table(tmp.path(), "averages.csv").len(), 1 + 4);
    assert_eq!(table(tmp.path(), "histogram.csv").len(), 1 + 10);
    let (tmp, _) = run_kind("mps-traj", &format!("{MODEL}[lattice]\nchain = 4\n{ens}chi = 4\n"));
    assert_eq!(table(tmp.path(), "ensemble.csv").len(), 2);
}

#[test]
fn mpo_ness_checkpoint_and_sweep() {
    let tebd = "[tebd]\ndt = 0.1\nchi_max = 8\nmax_distance = 2\ncheckpoint = true\n[tebd.ness]\ntol = 1e-4\nt_max = 30.0\n";
    let (tmp, _) = run_kind("mpo-ness", &format!("{MODEL}[lattice]\nchain = 4\n{tebd}"));
    let names: Vec<String> = fs::read_dir(tmp.path().join("out")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(names.iter().any(|n| n.starts_with("ness-") && n.ends_with(".json")), "{names:?}");
    let t = table(tmp.path(), "ness.csv");
    assert_eq!(t[0][..5], ["delta_over_gamma", "direction", "n_c", "C1", "C2"]);

    let sweep = "[sweep]\npoints = [0.0, 0.5]\ndirections = [\"R-L\"]\n";
    let (tmp, _) = run_kind("mpo-sweep", &format!("{MODEL}[lattice]\nchain = 4\n{}{sweep}", tebd.replace("checkpoint = true\n", "")));
    let t = table(tmp.path(), "mpo_sweep.csv");
    assert_eq!(t.len(), 3);
    assert_eq!(t[1][1], "R-L");
}

#[test]
fn circuit_comparison_runs() {
    let body = "[circuit]\nqubit_detuning = 0.0333333333333\ncavity_detunings = [30.0, 20.0]\ncouplings = [1.0, 0.816496580928]\ndrive = 0.0333333333333\nmode = \"ferromagnetic\"\nn_max = 1\nt_end = 30.0\nsamples = 11\n";
    let (tmp, _) = run_kind("cqed-compare", body);
    let t = table(tmp.path(), "cqed.csv");
    let dev: f64 = t[1][4].parse().unwrap();
    assert!(dev < 0.05, "{dev}");
}

#[test]
fn unknown_field_is_a_config_error_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &format!("kind = \"oracle\"\n{MODEL}speed = 1\n[lattice]\nchain = 3\n"));
    let o = ddxy(&["oracle", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("speed") && e.contains("line"), "{e}");
}

#[test]
fn validation_errors_and_warnings() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.toml", &format!("kind = \"mpo-ness\"\n{MODEL}[lattice]\nrect = [2, 2]\n[tebd]\nchi_max = 0\n"));
    let o = ddxy(&["validate", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("chain lattice") && e.contains("tebd"), "{e}");

    let mismatched = ddxy(&["oracle", "--config", &bad]);
    assert_eq!(mismatched.status.code(), Some(2));

    let coarse = write(
        tmp.path(),
        "coarse.toml",
        &format!("kind = \"mf-traj\"\n{MODEL}[lattice]\nchain = 3\n[ensemble]\ndt = 0.1\n"),
    );
    let o = ddxy(&["validate", "--config", &coarse]);
    assert!(o.status.success());
    let e = stderr(&o);
    assert!(e.contains("warning") && e.contains("info"), "{e}");
}

#[test]
fn dry_run_reports_derived_seed_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &format!("kind = \"oracle\"\n{MODEL}[lattice]\nchain = 3\n"));
    let out = tmp.path().join("out");
    let run = || ddxy(&["oracle", "--config", &cfg, "--out", out.to_str().unwrap(), "--dry-run"]);
    let (a, b) = (run(), run());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stdout).contains("(derived)"));
    assert!(!out.exists());
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let o = ddxy(&["validate", "--config", p.to_str().unwrap()]);
            assert!(o.status.success(), "{}: {}", p.display(), stderr(&o));
            n += 1;
        }
    }
    assert!(n >= 5);
}
