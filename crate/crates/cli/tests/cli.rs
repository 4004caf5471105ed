use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kerrsim::reduction::ReducedSystem;
use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn kerrsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kerrsim"))
        .args(args)
        .env_remove("KERRSIM_WORKERS")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn cell(dir: &TempDir, kind: &str, e: &str) -> PathBuf {
    let path = dir.path().join(format!("{kind}.net"));
    let o = kerrsim(&["cell", kind, "--ehigh", e, "-o", p(&path)]);
    assert!(o.status.success(), "{}", stderr(&o));
    path
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const RESONATOR: &str = "comp r resonator delta=5 chi=0 kappa=4,6 in=input:src,vacuum\noutput y from r.1\noutput refl from r.0\n";

#[test]
fn check_counts_counter_components() {
    let dir = TempDir::new().unwrap();
    let net = cell(&dir, "counter4", "50");
    let o = kerrsim(&["check", p(&net)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    for n in ["88", "240", "176", "233", "72"] {
        assert!(out.contains(n), "{n} missing from\n{out}");
    }
}

#[test]
fn bad_flag_is_usage_error() {
    let o = kerrsim(&["simulate", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[usage]: "), "{}", stderr(&o));
}

#[test]
fn unknown_cell_is_usage_error() {
    let o = kerrsim(&["cell", "nand"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_drive_is_validation_error() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "r.net", RESONATOR);
    let out = dir.path().join("run");
    let o = kerrsim(&["simulate", p(&net), "--tmax", "1", "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.starts_with("error[validation]: ") && err.contains("src"), "{err}");
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn syntax_error_is_validation_error() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "bad.net", "comp r resonator delta=oops\n");
    let o = kerrsim(&["check", p(&net)]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn reduce_writes_parsable_system() {
    let dir = TempDir::new().unwrap();
    let net = cell(&dir, "and", "50");
    let out = dir.path().join("and.sys");
    let o = kerrsim(&["reduce", p(&net), "-o", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sys = ReducedSystem::from_text(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(sys.output_index("y").is_some());
    assert!(sys.input_index("a").is_some() && sys.input_index("b").is_some());
}

#[test]
fn simulate_is_reproducible_and_manifest_hashes_match() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "r.net", RESONATOR);
    let drives = write(&dir, "d.txt", "src const 3\n");
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = kerrsim(&[
            "simulate", p(&net), "--drives", p(&drives), "--tmax", "2", "--seed", "9",
            "--trajectories", "3", "--workers", workers, "--trace", "y,r", "-o", p(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let a = run("a", "1");
    let b = run("b", "2");
    for k in 0..3 {
        let f = format!("traj_{k:04}.csv");
        assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("traj_0000.csv")).unwrap(), fs::read(a.join("traj_0001.csv")).unwrap());

    let m = manifest(&a);
    assert_eq!(m["config"]["seed"], 9);
    assert_eq!(m["config"]["trajectories"], 3);
    assert!(m["runtime_seconds"].as_f64().unwrap() >= 0.0);
    let outputs = m["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 3);
    for o in outputs {
        let bytes = fs::read(o["path"].as_str().unwrap()).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
    let header = fs::read_to_string(a.join("traj_0000.csv")).unwrap();
    assert!(header.starts_with("time,r.re,r.im,y.re,y.im\n"), "{}", &header[..40]);
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "r.net", RESONATOR);
    let drives = write(&dir, "d.txt", "src const 1\n");
    let cfg = write(&dir, "run.toml", &format!("tmax = 1.0\nseed = 4\ndrives = \"{}\"\nnoiseless = true\n", p(&drives)));
    let out = dir.path().join("run");
    let o = kerrsim(&["simulate", p(&net), "--config", p(&cfg), "--tmax", "0.5", "-o", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["config"]["t_max"], 0.5);
    assert_eq!(m["config"]["seed"], 4);
    assert_eq!(m["config"]["noise"], false);
    assert!(m["config_file"]["sha256"].is_string());

    let bad = write(&dir, "bad.toml", "tmax = 1.0\nspeed = 3\n");
    let o = kerrsim(&["simulate", p(&net), "--config", p(&bad), "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn analyze_reports_on_simulated_trace() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "r.net", RESONATOR);
    let drives = write(&dir, "d.txt", "src const 0\n");
    let out = dir.path().join("run");
    let o = kerrsim(&[
        "simulate", p(&net), "--drives", p(&drives), "--tmax", "200", "--seed", "2", "--dt", "0.005",
        "--trace", "r", "-o", p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = out.join("traj_0000.csv");

    // vacuum fluctuations of a linear resonator relax at κ/2 = 5
    let o = kerrsim(&["analyze", p(&csv), "--autocorr", "r"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let rate = v["rate"].as_f64().unwrap();
    assert!((rate - 5.0).abs() < 0.5, "{v}");

    let hist = dir.path().join("hist.dat");
    let o = kerrsim(&["analyze", p(&csv), "--hist", "r", "--range", "-2,2,-2,2", "--bins", "8", "--log", "-o", p(&hist)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&hist).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 9);
    assert!(text.starts_with("8 -1.75 "), "{text}");

    let o = kerrsim(&["analyze", p(&csv), "--jumps", "r"]);
    assert_eq!(o.status.code(), Some(2));
    let o = kerrsim(&["analyze", p(&csv), "--autocorr", "nope"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn analyze_jumps_and_delay_on_handmade_csv() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("time,x.re,x.im,y.re,y.im\n");
    for i in 0..1000 {
        let t = i as f64 * 0.01;
        let x = if (i / 100) % 2 == 1 { 1.0 } else { 0.0 };
        let y = if i >= 100 && ((i - 20) / 100) % 2 == 1 { 2.0 } else { 0.0 };
        csv.push_str(&format!("{t:?},{x:?},0.0,{y:?},0.0\n"));
    }
    let path = write(&dir, "t.csv", &csv);

    let o = kerrsim(&["analyze", p(&path), "--jumps", "x", "--levels", "0,1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((v["n_up"].as_u64(), v["n_down"].as_u64()), (Some(5), Some(4)));

    let o = kerrsim(&["analyze", p(&path), "--delay", "x,y", "--quantity", "re"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let edges = v["edges"].as_array().unwrap();
    assert_eq!(edges.len(), 9);
    for e in edges {
        assert!((e["delay"].as_f64().unwrap() - 0.2).abs() < 1e-9, "{e}");
    }
}

#[test]
fn sweep_rejects_other_cells() {
    let o = kerrsim(&["sweep", "--cell", "and", "--ehigh-list", "20"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_rate_table() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("rates.csv");
    let o = kerrsim(&["sweep", "--ehigh-list", "14,16", "--tmax", "20", "--seed", "3", "-o", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "e_high,rate,rate_error,n_up,n_down,observed_time,level_low,level_high");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("14.0,"));
}

/// Full counter run at the design amplitude.
#[test]
fn simulate_counter() {
    let dir = TempDir::new().unwrap();
    let net = cell(&dir, "counter4", "50");
    let drives = write(&dir, "clk.txt", "clk square low=0 high=50 period=10 duty=0.5 offset=0\n");
    let out = dir.path().join("run");
    let o = kerrsim(&[
        "simulate", p(&net), "--drives", p(&drives), "--tmax", "160", "--seed", "11", "--avg", "0.1",
        "-o", p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&out);
    assert!(m["runtime_seconds"].as_f64().unwrap() > 0.0);
    let csv = out.join("traj_0000.csv");
    let o = kerrsim(&["analyze", p(&csv), "--counter", "--ehigh", "50", "--drives", p(&drives), "--startup", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["errors"], 0, "{v}");
}
