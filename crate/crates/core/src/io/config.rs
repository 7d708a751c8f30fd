//! JSON run configuration: schema, validation and construction of the
//! mesh, map and problem it describes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::gmsh::read_gmsh;
use super::IoError;
use crate::analysis::{CaseKind, Pairing};
use crate::expr::{parse, parse_list, Expr};
use crate::fem::{StressForm, TaylorHoodSpace};
use crate::map::{parse_map_expressions, read_frame_directory, SpaceTimeMap};
use crate::mesh::{
    build_connectivity, generate_box, generate_tube, refine_uniform, BoundaryLabel, BoxLabels, SimplicialMesh,
    TubeLabels,
};
use crate::scalar::{Real, Vec3};
use crate::solver::{
    BoundaryConditionSet, FlowState, ForcingFn, LinearSolverKind, Problem, SolverConfig, TimeScheme,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physics: Option<PhysicsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bcs: Vec<BcConfig>,
    /// Initial velocity components in physical coordinates `x1 .. xd`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_velocity: Option<Vec<String>>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeshConfig {
    Box {
        divisions: Vec<usize>,
        extents: Vec<[f64; 2]>,
        /// One label for every face, or one per face in the order
        /// `x_min, x_max, y_min, y_max[, z_min, z_max]`.
        #[serde(default = "default_box_labels")]
        labels: Vec<BoundaryLabel>,
        #[serde(default)]
        refine: usize,
    },
    Tube {
        axial_divisions: usize,
        radial_divisions: usize,
        /// Radius as an expression in `y`.
        radius: String,
        y_range: [f64; 2],
        #[serde(default)]
        labels: TubeLabelConfig,
        #[serde(default)]
        refine: usize,
    },
    Gmsh {
        path: PathBuf,
        /// Physical tag to boundary label.
        #[serde(default)]
        tags: BTreeMap<u32, BoundaryLabel>,
        #[serde(default)]
        refine: usize,
    },
}

fn default_box_labels() -> Vec<BoundaryLabel> {
    vec![BoundaryLabel::NoSlip]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TubeLabelConfig {
    pub lateral: BoundaryLabel,
    pub inlet: BoundaryLabel,
    pub outlet: BoundaryLabel,
}

impl Default for TubeLabelConfig {
    fn default() -> Self {
        let d = TubeLabels::default();
        TubeLabelConfig { lateral: d.lateral, inlet: d.inlet, outlet: d.outlet }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MapConfig {
    Identity,
    /// One expression in `t` per axis.
    AxisScaling { scales: Vec<String> },
    TubeShrink,
    /// Semicolon-separated components in `x1 .. xd, t`.
    Expression { components: String },
    /// Directory of frame files over the configured mesh.
    MeshSequence { directory: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub nu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smagorinsky: Option<SmagorinskyConfig>,
    #[serde(default)]
    pub stress: StressForm,
    /// Body force components in `x1 .. xd, t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmagorinskyConfig {
    pub cs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub scheme: TimeScheme,
}

impl TimeConfig {
    /// Number of steps, `round(T / dt)`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Boundary data for one label. Dirichlet velocity components are
/// expressions in `x1 .. xd, t`; Neumann tractions may also use the outward
/// normal `n1 .. nd`. A Neumann label without traction is do-nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcConfig {
    pub label: BoundaryLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traction: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Write a VTK file every this many steps; 0 disables VTK output.
    pub vtk_every: usize,
    pub csv: bool,
    /// Write a binary checkpoint of the final state.
    pub checkpoint: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: PathBuf::from("output"), vtk_every: 1, csv: true, checkpoint: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    #[serde(rename = "type")]
    pub kind: LinearSolverKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub temam: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature_degree: Option<usize>,
    pub gmres_restart: usize,
    pub max_iterations: usize,
    pub deterministic: bool,
    pub flux_correction: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            kind: d.linear_solver,
            tolerance: d.tolerance,
            temam: d.temam,
            quadrature_degree: d.quadrature_degree,
            gmres_restart: d.gmres_restart,
            max_iterations: d.max_iterations,
            deterministic: d.deterministic,
            flux_correction: d.flux_correction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub case: CaseKind,
    pub levels: usize,
    #[serde(default)]
    pub pairing: Pairing,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::Config { path: path.into(), message: message.into() }
}

fn coordinate_names(dim: usize) -> &'static [&'static str] {
    if dim == 2 {
        &["x1", "x2", "t"]
    } else {
        &["x1", "x2", "x3", "t"]
    }
}

fn traction_names(dim: usize) -> &'static [&'static str] {
    if dim == 2 {
        &["x1", "x2", "t", "n1", "n2"]
    } else {
        &["x1", "x2", "x3", "t", "n1", "n2", "n3"]
    }
}

fn parse_components(path: &str, sources: &[String], vars: &[&str], dim: usize) -> Result<Vec<Expr>, IoError> {
    if sources.len() != dim {
        return Err(invalid(path, format!("expected {dim} components, found {}", sources.len())));
    }
    sources
        .iter()
        .enumerate()
        .map(|(i, s)| parse(s, vars).map_err(|e| invalid(format!("{path}[{i}]"), e.to_string())))
        .collect()
}

/// Reads, resolves and validates a configuration file. Relative paths in
/// the file are taken relative to its directory.
pub fn load_config(path: &Path) -> Result<RunConfig, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::File { path: path.to_path_buf(), source: e })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut config = parse_config(&text)?;
    config.resolve_paths(&base);
    config.validate()?;
    Ok(config)
}

/// Parses configuration text; schema errors name the offending field.
pub fn parse_config(text: &str) -> Result<RunConfig, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        invalid(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })
}

impl MeshConfig {
    pub fn refine(&self) -> usize {
        match self {
            MeshConfig::Box { refine, .. } | MeshConfig::Tube { refine, .. } | MeshConfig::Gmsh { refine, .. } => {
                *refine
            }
        }
    }
}

impl RunConfig {
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(MeshConfig::Gmsh { path, .. }) = &mut self.mesh {
            fix(path);
        }
        if let Some(MapConfig::MeshSequence { directory }) = &mut self.map {
            fix(directory);
        }
        fix(&mut self.output.directory);
    }

    pub fn is_benchmark(&self) -> bool {
        self.benchmark.is_some()
    }

    /// Checks value ranges, expressions, file references and boundary
    /// coverage.
    pub fn validate(&self) -> Result<(), IoError> {
        if let Some(b) = &self.benchmark {
            if b.levels < 2 {
                return Err(invalid("benchmark.levels", "a convergence study needs at least 2 levels"));
            }
        }
        if let Some(t) = &self.time {
            if !(t.dt > 0.0 && t.dt.is_finite()) {
                return Err(invalid("time.dt", format!("time step must be positive, got {}", t.dt)));
            }
            if !(t.t_end >= t.dt) {
                return Err(invalid("time.t_end", format!("end time {} is shorter than one step", t.t_end)));
            }
        }
        if let Some(p) = &self.physics {
            if !(p.nu > 0.0 && p.nu.is_finite()) {
                return Err(invalid("physics.nu", format!("viscosity must be positive, got {}", p.nu)));
            }
            if let Some(s) = &p.smagorinsky {
                if !(s.cs >= 0.0) {
                    return Err(invalid("physics.smagorinsky.cs", "constant must be non-negative"));
                }
            }
        }
        if self.solver.tolerance.is_some_and(|t| !(t > 0.0)) {
            return Err(invalid("solver.tolerance", "tolerance must be positive"));
        }
        if self.benchmark.is_some() && self.mesh.is_none() {
            return Ok(());
        }
        let mesh = self.mesh.as_ref().ok_or_else(|| invalid("mesh", "missing section"))?;
        let map = self.map.as_ref().ok_or_else(|| invalid("map", "missing section"))?;
        let physics = self.physics.as_ref().ok_or_else(|| invalid("physics", "missing section"))?;
        if self.time.is_none() {
            return Err(invalid("time", "missing section"));
        }
        let (dim, labels) = self.mesh_layout(mesh)?;
        self.validate_map(map, dim)?;
        if let Some(f) = &physics.forcing {
            parse_components("physics.forcing", f, coordinate_names(dim), dim)?;
        }
        if let Some(v) = &self.initial_velocity {
            parse_components("initial_velocity", v, coordinate_names(dim), dim)?;
        }
        let mut seen = BTreeSet::new();
        for (i, bc) in self.bcs.iter().enumerate() {
            let path = format!("bcs[{i}]");
            if !seen.insert(bc.label) {
                return Err(invalid(path, format!("label {} listed twice", bc.label)));
            }
            match bc.label {
                BoundaryLabel::NoSlip => {
                    if bc.velocity.is_some() || bc.traction.is_some() {
                        return Err(invalid(path, "no-slip boundaries take no data"));
                    }
                }
                BoundaryLabel::Dirichlet(_) => {
                    let v = bc.velocity.as_ref().ok_or_else(|| invalid(&path, "Dirichlet label needs 'velocity'"))?;
                    if bc.traction.is_some() {
                        return Err(invalid(path, "Dirichlet label takes no traction"));
                    }
                    parse_components(&format!("{path}.velocity"), v, coordinate_names(dim), dim)?;
                }
                BoundaryLabel::Neumann(_) => {
                    if bc.velocity.is_some() {
                        return Err(invalid(path, "Neumann label takes no velocity"));
                    }
                    if let Some(g) = &bc.traction {
                        parse_components(&format!("{path}.traction"), g, traction_names(dim), dim)?;
                    }
                }
            }
        }
        for l in &labels {
            if !seen.contains(l) {
                return Err(invalid("bcs", format!("mesh boundary label {l} has no entry")));
            }
        }
        Ok(())
    }

    /// Dimension and boundary labels of the configured mesh.
    fn mesh_layout(&self, mesh: &MeshConfig) -> Result<(usize, BTreeSet<BoundaryLabel>), IoError> {
        match mesh {
            MeshConfig::Box { divisions, extents, labels, .. } => {
                let dim = divisions.len();
                if dim != 2 && dim != 3 {
                    return Err(invalid("mesh.divisions", "a box needs 2 or 3 division counts"));
                }
                if extents.len() != dim {
                    return Err(invalid("mesh.extents", format!("expected {dim} intervals")));
                }
                if divisions.contains(&0) {
                    return Err(invalid("mesh.divisions", "divisions must be at least 1"));
                }
                if extents.iter().any(|[a, b]| !(b > a)) {
                    return Err(invalid("mesh.extents", "empty interval"));
                }
                box_labels(labels, dim)?;
                Ok((dim, labels.iter().copied().collect()))
            }
            MeshConfig::Tube { axial_divisions, radial_divisions, radius, y_range, labels, .. } => {
                if *axial_divisions == 0 || *radial_divisions == 0 {
                    return Err(invalid("mesh", "tube divisions must be at least 1"));
                }
                if !(y_range[1] > y_range[0]) {
                    return Err(invalid("mesh.y_range", "empty interval"));
                }
                parse(radius, &["y"]).map_err(|e| invalid("mesh.radius", e.to_string()))?;
                Ok((3, [labels.lateral, labels.inlet, labels.outlet].into_iter().collect()))
            }
            MeshConfig::Gmsh { path, tags, .. } => {
                if !path.is_file() {
                    return Err(invalid("mesh.path", format!("{} does not exist", path.display())));
                }
                let raw = read_gmsh::<f64>(path, tags)?;
                Ok((raw.dim, raw.facets.iter().map(|f| f.1).collect()))
            }
        }
    }

    fn validate_map(&self, map: &MapConfig, dim: usize) -> Result<(), IoError> {
        match map {
            MapConfig::Identity | MapConfig::MeshSequence { .. } => {}
            MapConfig::TubeShrink => {
                if dim != 3 {
                    return Err(invalid("map.kind", "the tube-shrink map needs a 3D mesh"));
                }
            }
            MapConfig::AxisScaling { scales } => {
                if scales.len() != dim {
                    return Err(invalid("map.scales", format!("expected {dim} scale functions")));
                }
                for (i, s) in scales.iter().enumerate() {
                    parse(s, &["t"]).map_err(|e| invalid(format!("map.scales[{i}]"), e.to_string()))?;
                }
            }
            MapConfig::Expression { components } => {
                parse_list(components, coordinate_names(dim), dim)
                    .map_err(|e| invalid("map.components", e.to_string()))?;
            }
        }
        if let MapConfig::MeshSequence { directory } = map {
            if !directory.is_dir() {
                return Err(invalid("map.directory", format!("{} is not a directory", directory.display())));
            }
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        let physics = self.physics.as_ref();
        SolverConfig {
            linear_solver: s.kind,
            tolerance: s.tolerance,
            scheme: self.time.map(|t| t.scheme).unwrap_or_default(),
            smagorinsky: physics.and_then(|p| p.smagorinsky).map(|c| c.cs),
            stress: physics.map(|p| p.stress).unwrap_or_default(),
            temam: s.temam,
            quadrature_degree: s.quadrature_degree,
            gmres_restart: s.gmres_restart,
            max_iterations: s.max_iterations,
            deterministic: s.deterministic,
            flux_correction: s.flux_correction,
        }
    }
}

fn box_labels(labels: &[BoundaryLabel], dim: usize) -> Result<BoxLabels, IoError> {
    match labels.len() {
        1 => Ok(BoxLabels::uniform(labels[0])),
        n if n == 2 * dim => {
            let mut l = [BoundaryLabel::NoSlip; 6];
            l[..n].copy_from_slice(labels);
            Ok(BoxLabels(l))
        }
        n => Err(invalid("mesh.labels", format!("expected 1 or {} labels, found {n}", 2 * dim))),
    }
}

/// Builds the reference mesh of a mesh section.
pub fn build_mesh<T: Real>(config: &MeshConfig) -> Result<SimplicialMesh<T>, IoError> {
    let mut mesh = match config {
        MeshConfig::Box { divisions, extents, labels, .. } => {
            let dim = divisions.len();
            let ext: Vec<(T, T)> = extents.iter().map(|[a, b]| (T::of(*a), T::of(*b))).collect();
            generate_box(dim, divisions, &ext, box_labels(labels, dim)?)?
        }
        MeshConfig::Tube { axial_divisions, radial_divisions, radius, y_range, labels, .. } => {
            let r = parse(radius, &["y"]).map_err(|e| invalid("mesh.radius", e.to_string()))?;
            let labels = TubeLabels { lateral: labels.lateral, inlet: labels.inlet, outlet: labels.outlet };
            generate_tube(
                *axial_divisions,
                *radial_divisions,
                |y: T| r.eval(&[y]),
                (T::of(y_range[0]), T::of(y_range[1])),
                labels,
            )?
        }
        MeshConfig::Gmsh { path, tags, .. } => build_connectivity(read_gmsh(path, tags)?)?,
    };
    for _ in 0..config.refine() {
        mesh = refine_uniform(&mesh);
    }
    Ok(mesh)
}

/// Builds the space-time map of a map section over `mesh`.
pub fn build_map<T: Real>(config: &MapConfig, mesh: &Arc<SimplicialMesh<T>>) -> Result<SpaceTimeMap<T>, IoError> {
    let dim = mesh.dim();
    Ok(match config {
        MapConfig::Identity => SpaceTimeMap::identity(dim),
        MapConfig::TubeShrink => SpaceTimeMap::tube_shrink(dim),
        MapConfig::AxisScaling { scales } => {
            let s: Vec<&str> = scales.iter().map(String::as_str).collect();
            SpaceTimeMap::axis_scaling(&s)?
        }
        MapConfig::Expression { components } => parse_map_expressions(components, dim)?,
        MapConfig::MeshSequence { directory } => SpaceTimeMap::mesh_sequence(read_frame_directory(directory, mesh.clone())?),
    })
}

fn vector_fn<T: Real>(exprs: Vec<Expr>, dim: usize) -> impl Fn(&Vec3<T>, T) -> Vec3<T> + Send + Sync {
    move |x, t| {
        let mut vars = [T::zero(); 4];
        vars[..dim].copy_from_slice(&x[..dim]);
        vars[dim] = t;
        let mut v = [T::zero(); 3];
        for (k, e) in exprs.iter().enumerate() {
            v[k] = e.eval(&vars[..=dim]);
        }
        v
    }
}

/// Everything needed to start a run from a configuration.
pub struct RunSetup<T> {
    pub problem: Problem<T>,
    pub solver: SolverConfig,
    pub initial: FlowState<T>,
    pub dt: T,
    pub steps: usize,
}

/// Builds mesh, map, boundary data and the initial state of a validated
/// (non-benchmark) configuration.
pub fn build_run<T: Real>(config: &RunConfig) -> Result<RunSetup<T>, IoError> {
    let missing = |s: &str| invalid(s, "missing section");
    let mesh = Arc::new(build_mesh::<T>(config.mesh.as_ref().ok_or_else(|| missing("mesh"))?)?);
    let map = build_map(config.map.as_ref().ok_or_else(|| missing("map"))?, &mesh)?;
    let physics = config.physics.as_ref().ok_or_else(|| missing("physics"))?;
    let time = config.time.ok_or_else(|| missing("time"))?;
    let dim = mesh.dim();
    let space = Arc::new(TaylorHoodSpace::new(mesh, 1)?);

    let mut bcs = BoundaryConditionSet::new();
    for (i, bc) in config.bcs.iter().enumerate() {
        let path = format!("bcs[{i}]");
        match bc.label {
            BoundaryLabel::NoSlip => {}
            BoundaryLabel::Dirichlet(patch) => {
                let src = bc.velocity.as_ref().ok_or_else(|| invalid(&path, "Dirichlet label needs 'velocity'"))?;
                let e = parse_components(&format!("{path}.velocity"), src, coordinate_names(dim), dim)?;
                bcs = bcs.dirichlet(patch, Arc::new(vector_fn(e, dim)));
            }
            BoundaryLabel::Neumann(patch) => {
                let g = match &bc.traction {
                    Some(src) => {
                        let e = parse_components(&format!("{path}.traction"), src, traction_names(dim), dim)?;
                        let f = move |x: &Vec3<T>, t: T, n: &Vec3<T>| {
                            let mut vars = [T::zero(); 7];
                            vars[..dim].copy_from_slice(&x[..dim]);
                            vars[dim] = t;
                            vars[dim + 1..2 * dim + 1].copy_from_slice(&n[..dim]);
                            let mut v = [T::zero(); 3];
                            for (k, ek) in e.iter().enumerate() {
                                v[k] = ek.eval(&vars[..2 * dim + 1]);
                            }
                            v
                        };
                        Some(Arc::new(f) as crate::solver::NeumannFn<T>)
                    }
                    None => None,
                };
                bcs = bcs.neumann(patch, g);
            }
        }
    }
    let forcing: Option<ForcingFn<T>> = match &physics.forcing {
        Some(src) => {
            let e = parse_components("physics.forcing", src, coordinate_names(dim), dim)?;
            Some(Arc::new(vector_fn(e, dim)))
        }
        None => None,
    };

    let mut initial = FlowState::zero(&space, T::zero());
    if let Some(src) = &config.initial_velocity {
        let f = vector_fn(parse_components("initial_velocity", src, coordinate_names(dim), dim)?, dim);
        let err = std::cell::RefCell::new(None);
        initial.u = space.interpolate_velocity(|n, x| match map.evaluate_in_cell(space.node_cell(n), x, T::zero()) {
            Ok(s) => f(&s.position, T::zero()),
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                [T::zero(); 3]
            }
        })?;
        if let Some(e) = err.into_inner() {
            return Err(e.into());
        }
    }

    let steps = time.steps();
    let dt = T::of(time.t_end) / T::of_usize(steps);
    Ok(RunSetup {
        problem: Problem { space, map, nu: T::of(physics.nu), forcing, bcs },
        solver: config.solver_config(),
        initial,
        dt,
        steps,
    })
}
