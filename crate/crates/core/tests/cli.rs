use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn nbe(args: &[&str], config: &Path, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nbe"));
    cmd.args(args).arg("--config").arg(config);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &TempDir, body: &str) -> PathBuf {
    let out = dir.path().join("out");
    let path = dir.path().join("run.toml");
    std::fs::write(&path, format!("{body}\n[output]\ndir = \"{}\"\n", out.display())).unwrap();
    path
}

fn out_dir(dir: &TempDir) -> PathBuf {
    dir.path().join("out")
}

const FULL2: &str = "[system]\nalphabet = 2\nkind = \"full\"\n";

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[system]\nkind = \"full\"\n");
    let o = nbe(&["entropy"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out_dir(&dir).exists());
}

#[test]
fn missing_measure_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, FULL2);
    let o = nbe(&["katok"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out_dir(&dir).exists());
}

#[test]
fn empty_subset_exits_3_with_a_record() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &format!("{FULL2}[subset]\nkind = \"empty\"\n[compute]\nn_min = 5\nn_max = 20\n"));
    let o = nbe(&["entropy"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(3));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir(&dir).join("entropy.json")).unwrap()).unwrap();
    assert_eq!(json["exit_code"], 3);
    assert!(json["records"].as_array().unwrap().iter().any(|r| r["error"].is_string()));
}

#[test]
fn entropy_csv_has_the_fixed_header_and_display_base_rescales() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &format!("{FULL2}[compute]\nepsilon = [0.2]\nn_min = 20\nn_max = 80\n"));
    assert_eq!(nbe(&["entropy"], &cfg, &[]).status.code(), Some(0));
    let nats = std::fs::read_to_string(out_dir(&dir).join("entropy.csv")).unwrap();
    assert_eq!(nats.lines().next().unwrap(), "quantity,epsilon,delta,n_min,n_max,value,lo,hi,converged");

    assert_eq!(nbe(&["entropy", "--display-base", "2"], &cfg, &[]).status.code(), Some(0));
    let bits = std::fs::read_to_string(out_dir(&dir).join("entropy.csv")).unwrap();
    let value = |text: &str| -> f64 {
        let row = text.lines().nth(1).unwrap();
        row.split(',').nth(5).unwrap().parse().unwrap()
    };
    assert!((value(&bits) - value(&nats) / 2f64.ln()).abs() < 1e-9);
}

#[test]
fn sidecar_replays_to_the_same_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        &format!("{FULL2}[subset]\nkind = \"cylinder-union\"\ncylinders = [[0, 1]]\n[compute]\nepsilon = [0.3]\nn_min = 10\nn_max = 60\n"),
    );
    assert_eq!(nbe(&["entropy"], &cfg, &[]).status.code(), Some(0));
    let first = std::fs::read(out_dir(&dir).join("entropy.csv")).unwrap();
    let sidecar = out_dir(&dir).join("entropy.json");
    let replay = dir.path().join("replay");
    let o = nbe(&["entropy", "--out", replay.to_str().unwrap()], &sidecar, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(replay.join("entropy.csv")).unwrap(), first);
}

#[test]
fn sweep_rows_are_sorted_and_thread_count_invariant() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        &format!(
            "{FULL2}[compute]\nn_max = 60\n[sweep]\nquantity = \"entropy\"\nepsilon = [0.3, 0.1, 0.2]\nn_min = [20, 10, 15]\n"
        ),
    );
    assert_eq!(nbe(&["sweep"], &cfg, &[("NBE_THREADS", "1")]).status.code(), Some(0));
    let serial = std::fs::read_to_string(out_dir(&dir).join("sweep.csv")).unwrap();
    assert_eq!(nbe(&["sweep"], &cfg, &[("NBE_THREADS", "4")]).status.code(), Some(0));
    let parallel = std::fs::read_to_string(out_dir(&dir).join("sweep.csv")).unwrap();
    assert_eq!(serial, parallel);

    let keys: Vec<(f64, usize)> = serial
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    assert_eq!(keys.len(), 9);
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(keys, sorted);
}

#[test]
fn oracle_check_agrees() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &format!("{FULL2}[compute]\nseed = 3\nsamples = 20\n"));
    let o = nbe(&["oracle-check"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("20/20"));
}
