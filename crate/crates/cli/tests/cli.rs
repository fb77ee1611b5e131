use std::path::Path;
use std::process::{Command, Output};

fn cdpath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdpath")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|x| x.unwrap().iter().map(String::from).collect()));
    rows
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[1..].iter().map(|r| r[i].clone()).collect()
}

#[test]
fn missing_kind_exits_two_and_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nn = 4\n");
    let out = cdpath(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.kind"));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nkind = \"short_range_ising\"\nn = 4\n[protocol]\nsteps = = 3\n");
    let out = cdpath(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));
}

#[test]
fn slow_bare_annealing_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[model]\nkind = \"short_range_ising\"\nn = 4\n[protocol]\nell = 0\nmode = \"finite_time\"\ntau = 100.0\nsteps = 10000\n",
    );
    let out_dir = dir.path().join("out");
    let out = cdpath(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&out_dir.join("run.csv"));
    let f: f64 = column(&rows, "fidelity")[0].parse().unwrap();
    assert!(f > 0.999, "{f}");

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    let keys: Vec<&str> = manifest.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    for k in ["version", "config", "git_describe", "started", "finished", "rows"] {
        assert!(keys.contains(&k), "manifest lacks {k}");
    }
    assert_eq!(manifest["rows"][0]["run_id"], column(&rows, "run_id")[0].as_str());
}

#[test]
fn sweep_is_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[model]\nkind = \"short_range_ising\"\nn = [4, 6]\n[protocol]\nell = [1, 2]\nsteps = 300\n\
         [controls]\nset = \"named\"\nnamed = [\"yy\", \"zxz\"]\n[optimizer]\nrestarts = 2\nstep_doublings = 2\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(cdpath(&["sweep", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(cdpath(&["sweep", "--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "3"]).status.success());
    let ta = std::fs::read(a.join("sweep.csv")).unwrap();
    assert_eq!(ta, std::fs::read(b.join("sweep.csv")).unwrap());
    let rows = read_csv(&a.join("sweep.csv"));
    assert_eq!(&rows[0][..], &["run_id", "n", "ell", "tau", "path", "fidelity", "log_infidelity", "betas"]);
    assert_eq!(rows.len(), 1 + 8);
    let paths = column(&rows, "path");
    let fids: Vec<f64> = column(&rows, "fidelity").iter().map(|f| f.parse().unwrap()).collect();
    for i in (0..8).step_by(2) {
        assert_eq!((paths[i].as_str(), paths[i + 1].as_str()), ("naive", "augmented"));
        assert!(fids[i + 1] >= fids[i]);
    }
}

#[test]
fn tiny_fidelities_use_scientific_notation() {
    let dir = tempfile::tempdir().unwrap();
    // fast limit without AGP leaves the initial state frozen; overlap is 2^-(N-1)
    let cfg = write_config(dir.path(), "[model]\nkind = \"collective_spin\"\nn = 20\n[protocol]\nell = 0\nsteps = 2\n");
    let out_dir = dir.path().join("out");
    assert!(cdpath(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]).status.success());
    let f = column(&read_csv(&out_dir.join("run.csv")), "fidelity")[0].clone();
    assert!(f.contains('e'), "{f}");
    assert!((f.parse::<f64>().unwrap() - 2f64.powi(-19)).abs() < 1e-12);
}

#[test]
fn floquet_spectrum_iterate_scan() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let cfg = write_config(
        base,
        "[model]\nkind = \"short_range_ising\"\nn = 2\nbasis = \"full\"\n[floquet]\nperiods = [1e-2, 1e-3, 1e-4]\n",
    );
    let out = base.join("floquet");
    assert!(cdpath(&["floquet-check", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let errors: Vec<f64> =
        column(&read_csv(&out.join("floquet.csv")), "error").iter().map(|e| e.parse().unwrap()).collect();
    assert_eq!(errors.len(), 3);
    assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");

    let cfg = write_config(base, "[model]\nkind = \"short_range_ising\"\nn = 6\n[protocol]\nell = 2\n");
    let out = base.join("spectrum");
    assert!(cdpath(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap(), "--lambda", "0.5"])
        .status
        .success());
    assert!(read_csv(&out.join("spectrum.csv")).len() > 1);
    assert_eq!(read_csv(&out.join("curve.csv")).len(), 201);

    let cfg = write_config(
        base,
        "[model]\nkind = \"long_range_ising\"\nalpha = 2.0\nn = 6\n[protocol]\nell = 2\nsteps = 300\n",
    );
    let out = base.join("iterate");
    assert!(cdpath(&["iterate", "--config", &cfg, "--out", out.to_str().unwrap(), "--max-iters", "3"])
        .status
        .success());
    let rows = read_csv(&out.join("iterate.csv"));
    assert!(rows.len() >= 3 && rows.len() <= 4);
    assert_eq!(column(&rows, "iteration")[0], "0");

    let cfg = write_config(
        base,
        "[model]\nkind = \"short_range_ising\"\nn = 4\n[protocol]\nsteps = 200\n[controls]\nset = \"commutator\"\n[optimizer]\nstep_doublings = 3\n[scan]\npoints = 3\n",
    );
    let out = base.join("scan");
    assert!(cdpath(&["scan", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    assert_eq!(read_csv(&out.join("scan.csv")).len(), 10);
}

#[test]
fn optimize_needs_controls() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nkind = \"short_range_ising\"\nn = 4\n");
    let out = cdpath(&["optimize", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
