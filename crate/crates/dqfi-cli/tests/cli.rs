use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dqfi"))
}

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn dqfi")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Header plus data rows, metadata stripped.
fn rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let data = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, data)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn missing_model_exits_2() {
    let o = run(&["spectrum", "--model", "/nonexistent/x.model"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn parse_error_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.model");
    std::fs::write(&p, "[hamiltonian]\nH = 0.5* * Z\n").unwrap();
    let o = run(&["spectrum", "--model", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("2:10"), "{err}");
}

#[test]
fn bad_grid_exits_2() {
    let m = models_dir().join("spin_flip.model");
    let o = run(&["dqfi", "--model", m.to_str().unwrap(), "--t0", "3", "--t1", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn spin_flip_spectrum() {
    let m = models_dir().join("spin_flip.model");
    let o = run(&["spectrum", "--model", m.to_str().unwrap()]);
    assert!(o.status.success());
    let (h, r) = rows(&stdout(&o));
    assert_eq!(r.len(), 4);
    assert!(f(&r[0][col(&h, "re")]).abs() < 1e-12);
    assert!(f(&r[0][col(&h, "im")]).abs() < 1e-12);
    assert!(r.iter().all(|row| row[col(&h, "ep_flag")] == "0"));
}

#[test]
fn ep_flagged_at_critical_damping() {
    let m = models_dir().join("spin_flip.model");
    let o = run(&["spectrum", "--model", m.to_str().unwrap(), "--set", "gamma_x=1"]);
    assert!(o.status.success());
    let (h, r) = rows(&stdout(&o));
    let flagged = r.iter().filter(|row| row[col(&h, "ep_flag")] == "1").count();
    assert_eq!(flagged, 2);
}

#[test]
fn output_independent_of_thread_count() {
    let m = models_dir().join("field_angle.model");
    let args = |j: &str| {
        let o = run(&["sweep", "--model", m.to_str().unwrap(), "--params", "0.1,0.5,1.2", "--nt", "17", "--set", "kappa=0.2", "--jobs", j]);
        assert!(o.status.success());
        o.stdout
    };
    assert_eq!(args("1"), args("4"));
}

#[test]
fn zero_time_row() {
    let m = models_dir().join("spin_flip.model");
    let o = run(&["dqfi", "--model", m.to_str().unwrap(), "--t1", "1", "--nt", "5"]);
    assert!(o.status.success());
    let (h, r) = rows(&stdout(&o));
    assert_eq!(r.len(), 5);
    assert_eq!(f(&r[0][col(&h, "dqfi")]), 0.0);
    assert_eq!(r[0][col(&h, "crb")], "inf");
    for row in &r[1..] {
        assert!(f(&row[col(&h, "dqfi")]) > 0.0);
    }
}

#[test]
fn generator_dimension() {
    let m = models_dir().join("spin_flip.model");
    let o = run(&["generator", "--model", m.to_str().unwrap(), "--t", "1.5", "--route", "quadrature"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("# route: quadrature"));
    assert_eq!(rows(&text).1.len(), 16);
}

#[test]
fn reproduce_writes_figures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("figs");
    let o = run(&["reproduce", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let (h, r) = rows(&std::fs::read_to_string(out.join("fig1.csv")).unwrap());
    assert_eq!(r.len(), 251 * 4);
    let res = col(&h, "pipeline_residual");
    assert!(r.iter().all(|row| f(&row[res]) < 1e-6));
    let ep: Vec<_> = r.iter().filter(|row| row[col(&h, "ep_flag")] == "1").collect();
    assert_eq!(ep.len(), 2);
    assert!((f(&ep[0][0]) - 1.0).abs() < 1e-12);

    let (h, r) = rows(&std::fs::read_to_string(out.join("fig2.csv")).unwrap());
    assert_eq!(r.len(), 5 * 2501);
    let (g, d, a) = (col(&h, "gamma_x"), col(&h, "dqfi"), col(&h, "analytic_dqfi"));
    let lep: Vec<f64> = r.iter().filter(|row| f(&row[g]) == 1.0).map(|row| f(&row[d])).collect();
    assert!(lep.iter().all(|x| x.is_finite()));
    for row in &r {
        let (x, y) = (f(&row[d]), f(&row[a]));
        assert!((x - y).abs() <= 1e-6 * y.abs().max(1.0), "{row:?}");
    }

    let (h, r) = rows(&std::fs::read_to_string(out.join("fig3.csv")).unwrap());
    assert!(h.contains(&"cqfi".to_string()));
    assert_eq!(r.len(), 5 * 2501);
}

#[test]
fn unwritable_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let o = run(&["reproduce", "--figure", "1", "--out", file.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
