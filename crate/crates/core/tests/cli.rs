use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qlfem::io::read_gmsh;
use qlfem::mesh::build_connectivity;

fn qlfem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlfem")).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn no_arguments_prints_usage_and_fails() {
    let o = qlfem(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(qlfem(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qlfem(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_failures_exit_with_two() {
    assert_eq!(qlfem(&["info", "--config", "/nonexistent/config.json"]).status.code(), Some(2));
}

#[test]
fn validate_map_on_tube_reports_min_j() {
    let cfg = configs().join("tube.json");
    let o = qlfem(&["validate-map", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o).lines().find(|l| l.starts_with("min J")).unwrap().to_string();
    let v: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
    assert!((v - 0.95).abs() < 1e-9, "{line}");
}

#[test]
fn converge_writes_table_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = qlfem(&[
        "converge",
        "--case",
        "manufactured-2d",
        "--levels",
        "2",
        "--output",
        dir.path().to_str().unwrap(),
        "--deterministic",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("convergence_manufactured-2d.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0][5].is_empty());
    let ratio: f64 = rows[1][5].parse().unwrap();
    assert!(ratio > 2.0, "{csv}");
}

fn write_config(dir: &Path) -> PathBuf {
    let text = r#"{
        "mesh": {"type": "box", "divisions": [4, 4], "extents": [[0, 1], [0, 1]]},
        "map": {"kind": "axis-scaling", "scales": ["1 + 0.2*t", "1/(1 + 0.2*t)"]},
        "physics": {"nu": 0.1},
        "time": {"dt": 0.1, "t_end": 0.3},
        "bcs": [{"label": "noslip"}],
        "initial_velocity": ["sin(3.14159265*x1)^2*sin(6.2831853*x2)", "-sin(6.2831853*x1)*sin(3.14159265*x2)^2"],
        "output": {"directory": "out", "vtk_every": 1}
    }"#;
    let path = dir.join("run.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn deterministic_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = qlfem(&["run", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--deterministic"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["state_00000.vtk", "state_00003.vtk", "diagnostics.csv", "final.qlck"] {
        let (x, y) = (std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
        assert!(x == y, "{name} differs between runs");
    }
    let csv = std::fs::read_to_string(a.join("diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn mesh_gen_output_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tube.msh");
    let cfg = configs().join("tube.json");
    let o = qlfem(&["mesh-gen", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let mesh = build_connectivity(read_gmsh::<f64>(&out, &BTreeMap::new()).unwrap()).unwrap();
    assert_eq!(mesh.num_cells(), 324);
    assert_eq!(mesh.boundary_labels().len(), 3);
}
