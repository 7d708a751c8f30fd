use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use super::*;
use crate::analysis::CaseKind;
use crate::fem::TaylorHoodSpace;
use crate::map::SpaceTimeMap;
use crate::mesh::{build_connectivity, generate_box, generate_tube, BoundaryLabel, BoxLabels, TubeLabels};
use crate::solver::{FlowState, Solver};

const MINIMAL: &str = r#"{
    "mesh": {"type": "box", "divisions": [2, 2], "extents": [[0, 1], [0, 1]]},
    "map": {"kind": "identity"},
    "physics": {"nu": 1.0},
    "time": {"dt": 0.1, "t_end": 0.1},
    "bcs": [{"label": "noslip"}]
}"#;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn config_error(text: &str) -> String {
    let dir = tempfile::tempdir().unwrap();
    match load_config(&write(dir.path(), "c.json", text)) {
        Err(IoError::Config { path, .. }) => path,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn minimal_config_loads_and_builds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(&write(dir.path(), "c.json", MINIMAL)).unwrap();
    assert_eq!(cfg.time.unwrap().steps(), 1);
    assert_eq!(cfg.output.directory, dir.path().join("output"));
    let setup = build_run::<f64>(&cfg).unwrap();
    assert_eq!(setup.steps, 1);
    assert_eq!(setup.problem.space.mesh().num_cells(), 8);
    let mut solver = Solver::new(setup.problem, setup.solver).unwrap();
    let (next, _) = solver.advance(&setup.initial, None, setup.dt).unwrap();
    assert!(next.u.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn zero_time_step_names_the_field() {
    assert_eq!(config_error(&MINIMAL.replace("\"dt\": 0.1", "\"dt\": 0")), "time.dt");
    assert_eq!(config_error(&MINIMAL.replace("\"dt\": 0.1", "\"dt\": \"fast\"")), "time.dt");
    assert_eq!(config_error(&MINIMAL.replace("\"t_end\": 0.1", "\"t_end\": 0.05")), "time.t_end");
}

#[test]
fn schema_violations_report_paths() {
    assert_eq!(config_error(&MINIMAL.replace("\"nu\": 1.0", "\"nu\": 1.0, \"rho\": 2")), "physics.rho");
    assert_eq!(config_error(&MINIMAL.replace("\"nu\": 1.0", "\"nu\": -1.0")), "physics.nu");
    assert_eq!(config_error(&MINIMAL.replace("\"identity\"", "\"twist\"")), "map.kind");
    assert_eq!(config_error(&MINIMAL.replace("\"noslip\"", "\"wall\"")), "bcs[0].label");
}

#[test]
fn every_mesh_label_needs_boundary_data() {
    let text = MINIMAL.replace(
        "\"extents\": [[0, 1], [0, 1]]",
        "\"extents\": [[0, 1], [0, 1]], \"labels\": [\"noslip\", \"neumann:0\", \"noslip\", \"dirichlet:1\"]",
    );
    assert_eq!(config_error(&text), "bcs");
    let text = text.replace(
        "[{\"label\": \"noslip\"}]",
        r#"[{"label": "noslip"}, {"label": "neumann:0"}, {"label": "dirichlet:1", "velocity": ["x2*(1-x2)", "0"]}]"#,
    );
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(&write(dir.path(), "c.json", &text)).unwrap();
    assert!(build_run::<f64>(&cfg).is_ok());
    let bad = text.replace("\"x2*(1-x2)\"", "\"x2*(1-\"");
    assert_eq!(config_error(&bad), "bcs[2].velocity[0]");
}

#[test]
fn dangling_file_references_are_rejected() {
    let text = MINIMAL.replace(
        r#"{"type": "box", "divisions": [2, 2], "extents": [[0, 1], [0, 1]]}"#,
        r#"{"type": "gmsh", "path": "missing.msh"}"#,
    );
    assert_eq!(config_error(&text), "mesh.path");
    let text = MINIMAL.replace(r#"{"kind": "identity"}"#, r#"{"kind": "mesh-sequence", "directory": "frames"}"#);
    assert_eq!(config_error(&text), "map.directory");
}

#[test]
fn benchmark_config_selects_study_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(&write(dir.path(), "c.json", r#"{"benchmark": {"case": "tube", "levels": 3}}"#)).unwrap();
    let b = cfg.benchmark.as_ref().unwrap();
    assert!(cfg.is_benchmark());
    assert_eq!((b.case, b.levels), (CaseKind::Tube, 3));
    assert_eq!(config_error(r#"{"benchmark": {"case": "tube", "levels": 1}}"#), "benchmark.levels");
}

#[test]
fn config_round_trips() {
    let text = r#"{
        "mesh": {"type": "tube", "axial_divisions": 4, "radial_divisions": 2,
                 "radius": "exp(0.5*(y/4 + 1))", "y_range": [-4, 4],
                 "labels": {"inlet": "dirichlet:1"}},
        "map": {"kind": "tube-shrink"},
        "physics": {"nu": 0.04, "stress": "full-gradient", "smagorinsky": {"cs": 0.1},
                    "forcing": ["0", "1", "0"]},
        "time": {"dt": 0.04, "t_end": 0.2, "scheme": "bdf2"},
        "bcs": [{"label": "noslip"}, {"label": "dirichlet:1", "velocity": ["0", "2", "0"]},
                {"label": "neumann:0", "traction": ["0", "-n2", "0"]}],
        "output": {"directory": "out", "vtk_every": 0, "csv": false},
        "solver": {"type": "gmres", "tolerance": 1e-9}
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(&write(dir.path(), "c.json", text)).unwrap();
    let again = parse_config(&serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    assert_eq!(cfg, again);
    let sc = cfg.solver_config();
    assert_eq!(sc.smagorinsky, Some(0.1));
    assert_eq!(sc.tolerance, Some(1e-9));
}

const TWO_TETS: &str = "$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
5
1 0 0 0
2 1 0 0
3 0 1 0
4 0 0 1
5 1 1 1
$EndNodes
$Elements
10
1 15 2 9 1 1
2 2 2 1 1 1 3 2
3 2 2 1 1 1 2 4
4 2 2 1 1 1 4 3
5 2 2 2 2 2 3 5
6 2 2 2 2 2 5 4
7 2 2 2 2 3 4 5
8 4 2 5 5 1 2 3 4
9 4 2 5 5 2 3 4 5
10 1 2 7 7 1 2
$EndElements
";

#[test]
fn gmsh_fixture_gives_two_cells_with_labels() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "two.msh", TWO_TETS);
    let tags = BTreeMap::from([(1, BoundaryLabel::NoSlip), (2, BoundaryLabel::Neumann(0))]);
    let raw = read_gmsh::<f64>(&path, &tags).unwrap();
    assert_eq!((raw.dim, raw.vertices.len(), raw.cells.len(), raw.facets.len()), (3, 5, 2, 6));
    let mesh = build_connectivity(raw).unwrap();
    let count = |l| mesh.facets().iter().filter(|f| f.label == l).count();
    assert_eq!(count(BoundaryLabel::NoSlip), 3);
    assert_eq!(count(BoundaryLabel::Neumann(0)), 3);

    let partial = BTreeMap::from([(1, BoundaryLabel::NoSlip)]);
    assert!(matches!(read_gmsh::<f64>(&path, &partial), Err(IoError::Parse { line: 18, .. })));
}

#[test]
fn gmsh_version_four_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "v4.msh", &TWO_TETS.replace("2.2 0 8", "4.1 0 8"));
    match read_gmsh::<f64>(&path, &BTreeMap::new()) {
        Err(IoError::Parse { line: 2, message, .. }) => assert!(message.contains("4.1")),
        other => panic!("{other:?}"),
    }
    let path = write(dir.path(), "bin.msh", &TWO_TETS.replace("2.2 0 8", "2.2 1 8"));
    assert!(read_gmsh::<f64>(&path, &BTreeMap::new()).is_err());
}

#[test]
fn gmsh_writer_round_trips_labels() {
    let labels = BoxLabels([
        BoundaryLabel::NoSlip,
        BoundaryLabel::Neumann(0),
        BoundaryLabel::Dirichlet(1),
        BoundaryLabel::NoSlip,
        BoundaryLabel::NoSlip,
        BoundaryLabel::NoSlip,
    ]);
    let mesh = generate_box::<f64>(3, &[2, 2, 2], &[(0.0, 1.0), (0.0, 2.0), (0.0, 1.0)], labels).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("box.msh");
    write_gmsh(&path, &mesh).unwrap();
    let back = build_connectivity(read_gmsh::<f64>(&path, &BTreeMap::new()).unwrap()).unwrap();
    assert_eq!(back.num_cells(), mesh.num_cells());
    assert_eq!(back.num_vertices(), mesh.num_vertices());
    assert_eq!(back.boundary_labels(), mesh.boundary_labels());
    for l in mesh.boundary_labels() {
        let n = |m: &crate::mesh::SimplicialMesh<f64>| m.facets().iter().filter(|f| f.label == l).count();
        assert_eq!(n(&back), n(&mesh));
    }
}

fn box_space(dim: usize) -> Arc<TaylorHoodSpace<f64>> {
    let ext = vec![(0.0, 1.0); dim];
    let mesh = generate_box::<f64>(dim, &vec![2; dim], &ext, BoxLabels::default()).unwrap();
    Arc::new(TaylorHoodSpace::new(Arc::new(mesh), 1).unwrap())
}

#[test]
fn vtk_identity_keeps_reference_points_and_reads_back() {
    let sp = box_space(3);
    let st = FlowState::zero(&sp, 0.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.vtk");
    write_vtk(&path, &sp, &SpaceTimeMap::identity(3), 0.0, &st.u, &st.p, true).unwrap();
    let g = read_vtk(&path).unwrap();
    assert_eq!(g.points.len(), sp.mesh().num_vertices());
    assert_eq!(g.cells.len(), sp.mesh().num_cells());
    assert!(g.cell_types.iter().all(|&t| t == 10));
    for (p, v) in g.points.iter().zip(sp.mesh().vertices()) {
        assert_eq!(p, v);
    }
    assert!(g.vector("u").is_some() && g.scalar("p").is_some() && g.scalar("q_criterion").is_some());
}

#[test]
fn vtk_tube_radii_shrink() {
    let mesh = generate_tube::<f64>(2, 2, |y| (0.5 * (y / 4.0 + 1.0)).exp(), (-4.0, 4.0), TubeLabels::default())
        .unwrap();
    let sp = Arc::new(TaylorHoodSpace::new(Arc::new(mesh), 1).unwrap());
    let st = FlowState::zero(&sp, 0.2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.vtk");
    write_vtk(&path, &sp, &SpaceTimeMap::tube_shrink(3), 0.2, &st.u, &st.p, false).unwrap();
    let g = read_vtk(&path).unwrap();
    let s = 0.95f64.sqrt();
    for (p, v) in g.points.iter().zip(sp.mesh().vertices()) {
        let (r, r0) = (p[0].hypot(p[2]), v[0].hypot(v[2]));
        assert!((r - s * r0).abs() < 1e-12, "{r} vs {}", s * r0);
        assert_eq!(p[1], v[1]);
    }
}

#[test]
fn rigid_rotation_has_positive_q() {
    let sp = box_space(2);
    let u = sp.interpolate_velocity(|_, x| [-(x[1] - 0.5), x[0] - 0.5, 0.0]).unwrap();
    let p = vec![0.0; sp.num_pressure_dofs()];
    let f = vertex_fields(&sp, &SpaceTimeMap::identity(2), 0.0, &u, &p, true).unwrap();
    for q in f.q.unwrap() {
        assert!((q - 1.0).abs() < 1e-12, "{q}");
    }
    let strain = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0; 3]];
    assert!(q_criterion(&strain) < 0.0);
}

#[test]
fn vtk_output_is_byte_stable() {
    let sp = box_space(2);
    let u = sp.interpolate_velocity(|_, x| [x[1].sin(), x[0] * x[0], 0.0]).unwrap();
    let p = sp.interpolate_pressure(|x| x[0] - x[1]).unwrap();
    let map = SpaceTimeMap::axis_scaling(&["1 + 0.1*t", "1/(1 + 0.1*t)"]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.vtk"), dir.path().join("b.vtk"));
    write_vtk(&a, &sp, &map, 0.3, &u, &p, true).unwrap();
    write_vtk(&b, &sp, &map, 0.3, &u, &p, true).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn checkpoint_round_trips_exactly() {
    let st = FlowState { step: 7, time: 0.35, u: vec![1.0, -2.5, 1e-300, 3.0], p: vec![0.125, f64::MIN_POSITIVE] };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.qlck");
    write_checkpoint(&path, 2, &st).unwrap();
    let (dim, back) = read_checkpoint::<f64>(&path).unwrap();
    assert_eq!(dim, 2);
    assert_eq!(back, st);

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(read_checkpoint::<f64>(&path), Err(IoError::Checkpoint { .. })));
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    std::fs::write(&path, &wrong).unwrap();
    assert!(matches!(read_checkpoint::<f64>(&path), Err(IoError::Checkpoint { .. })));
}

#[test]
fn diagnostics_header_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let w = DiagnosticsWriter::create(&path).unwrap();
    w.finish().unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(
        text.trim(),
        "step,time,kinetic_energy,divergence_residual,linear_iterations,linear_residual,kinetic_rate,\
         dissipation,wall_work,open_boundary_power,forcing_power"
    );
}
