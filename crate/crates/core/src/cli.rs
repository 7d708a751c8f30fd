//! Command-line front end.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::analysis::{
    convergence_study, energy_balance_terms, k_norm, BenchmarkCase, CaseKind, Pairing,
};
use crate::fem::Assembler;
use crate::io::{
    build_map, build_mesh, build_run, load_config, write_checkpoint, write_gmsh, write_vtk, DiagnosticsWriter,
    IoError, MapConfig, MeshConfig, RunConfig,
};
use crate::map::{validate_assumptions, MapThresholds};
use crate::solver::{run, FlowState, Observer, Solver, SolverConfig, StepReport};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "qlfem", version, about = "Navier-Stokes flow in moving domains, solved on the reference domain")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the simulation described by a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Serial assembly and factorization for reproducible output.
        #[arg(long)]
        deterministic: bool,
    },
    /// Run a convergence study of a built-in benchmark case.
    Converge {
        #[arg(long)]
        config: Option<PathBuf>,
        /// tube or manufactured-2d
        #[arg(long)]
        case: Option<CaseKind>,
        #[arg(long)]
        levels: Option<usize>,
        /// dt-h2 or dt-h
        #[arg(long)]
        pairing: Option<Pairing>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        deterministic: bool,
    },
    /// Check the configured map against the geometric assumptions.
    ValidateMap {
        #[arg(long)]
        config: PathBuf,
        /// Number of sample times in [0, T].
        #[arg(long, default_value_t = 21)]
        samples: usize,
    },
    /// Write the configured reference mesh (.msh or .vtk).
    MeshGen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Print a summary of a configuration.
    Info {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Runs the command line `args` (including the program name) and returns
/// the process exit code: 0 on success, 1 on usage errors, 2 on failures.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, output, deterministic } => {
            let mut cfg = load_config(&config)?;
            if let Some(dir) = output {
                cfg.output.directory = dir;
            }
            cfg.solver.deterministic |= deterministic;
            if cfg.is_benchmark() {
                let b = cfg.benchmark.clone().unwrap();
                let dir = cfg.output.directory.clone();
                return converge(b.case, b.levels, b.pairing, &dir, &cfg.solver_config());
            }
            run_simulation(&cfg)
        }
        Command::Converge { config, case, levels, pairing, output, deterministic } => {
            let cfg = config.as_deref().map(load_config).transpose()?;
            let bench = cfg.as_ref().and_then(|c| c.benchmark.clone());
            let case = case
                .or(bench.as_ref().map(|b| b.case))
                .ok_or_else(|| Error::Input("converge needs --case or a benchmark section".into()))?;
            let levels = levels.or(bench.as_ref().map(|b| b.levels)).unwrap_or(3);
            let pairing = pairing.or(bench.as_ref().map(|b| b.pairing)).unwrap_or_default();
            let dir = output
                .or(cfg.as_ref().map(|c| c.output.directory.clone()))
                .unwrap_or_else(|| PathBuf::from("output"));
            let mut solver = cfg.as_ref().map(|c| c.solver_config()).unwrap_or_default();
            solver.deterministic |= deterministic;
            converge(case, levels, pairing, &dir, &solver)
        }
        Command::ValidateMap { config, samples } => validate_map(&load_config(&config)?, samples),
        Command::MeshGen { config, output } => mesh_gen(&load_config(&config)?, &output),
        Command::Info { config } => info(&load_config(&config)?),
    }
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| IoError::File { path: dir.to_path_buf(), source: e }.into())
}

fn run_simulation(cfg: &RunConfig) -> Result<(), Error> {
    let setup = build_run::<f64>(cfg)?;
    let out = &cfg.output;
    create_dir(&out.directory)?;
    let space = setup.problem.space.clone();
    let map = setup.problem.map.clone();
    let nu = setup.problem.nu;
    let forcing = setup.problem.forcing.clone();
    let stress = setup.solver.stress;
    let diag_asm = Assembler::new(space.clone(), setup.solver.quadrature_degree)?;
    let vtk_path = |step: usize| out.directory.join(format!("state_{step:05}.vtk"));
    if out.vtk_every > 0 {
        write_vtk(&vtk_path(0), &space, &map, setup.initial.time, &setup.initial.u, &setup.initial.p, true)?;
    }
    let mut diagnostics = if out.csv { Some(DiagnosticsWriter::create(&out.directory.join("diagnostics.csv"))?) } else { None };
    let mut solver = Solver::new(setup.problem, setup.solver)?;
    log::info!(
        "{} cells, {} velocity and {} pressure dofs, {} steps of {}",
        space.mesh().num_cells(),
        space.num_velocity_dofs(),
        space.num_pressure_dofs(),
        setup.steps,
        setup.dt
    );

    let mut observe = |prev: &FlowState<f64>, next: &FlowState<f64>, report: &StepReport<f64>| -> Result<(), String> {
        let mut inner = || -> Result<(), Error> {
            if let Some(w) = diagnostics.as_mut() {
                let f = forcing.as_deref().map(|f| f as &(dyn Fn(&[f64; 3], f64) -> [f64; 3] + Sync));
                let balance = energy_balance_terms(&diag_asm, &map, prev, next, nu, stress, f)?;
                let k = k_norm(&diag_asm, &map, next.time, &next.u)?;
                w.record(report, 0.5 * k * k, &balance)?;
            }
            if out.vtk_every > 0 && next.step % out.vtk_every == 0 {
                write_vtk(&vtk_path(next.step), &space, &map, next.time, &next.u, &next.p, true)?;
            }
            log::info!("step {} t = {:.6} |Bu| = {:.3e}", report.step, report.time, report.divergence_residual);
            Ok(())
        };
        inner().map_err(|e| e.to_string())
    };
    let observers: &mut [Observer<'_, f64>] = &mut [&mut observe];
    let summary = run(&mut solver, setup.initial, setup.dt, setup.steps, observers)?;
    if let Some(w) = diagnostics {
        w.finish()?;
    }
    if out.checkpoint {
        write_checkpoint(&out.directory.join("final.qlck"), space.dim(), &summary.final_state)?;
    }
    println!(
        "completed {} steps to t = {}; output in {}",
        summary.reports.len(),
        summary.final_state.time,
        out.directory.display()
    );
    Ok(())
}

fn converge(case: CaseKind, levels: usize, pairing: Pairing, dir: &Path, solver: &SolverConfig) -> Result<(), Error> {
    let bench = BenchmarkCase::<f64>::new(case);
    let (table, results) = convergence_study(&bench, levels, pairing, solver)?;
    create_dir(dir)?;
    let path = dir.join(format!("convergence_{case}.csv"));
    std::fs::write(&path, table.to_csv()).map_err(|e| IoError::File { path: path.clone(), source: e })?;
    print!("{table}");
    let div = results.iter().map(|r| r.max_divergence_ratio).fold(0.0, f64::max);
    println!("max divergence residual / (tolerance |u|): {div:.3e}");
    println!("wrote {}", path.display());
    Ok(())
}

fn sample_times(cfg: &RunConfig, samples: usize) -> Result<Vec<f64>, Error> {
    let t = cfg.time.ok_or_else(|| Error::Input("the configuration has no time section".into()))?;
    let n = samples.max(2) - 1;
    Ok((0..=n).map(|i| t.t_end * i as f64 / n as f64).collect())
}

fn setup_mesh_map(cfg: &RunConfig) -> Result<(Arc<crate::Mesh>, crate::Map), Error> {
    let mesh_cfg = cfg.mesh.as_ref().ok_or_else(|| Error::Input("the configuration has no mesh section".into()))?;
    let map_cfg = cfg.map.as_ref().ok_or_else(|| Error::Input("the configuration has no map section".into()))?;
    let mesh = Arc::new(build_mesh::<f64>(mesh_cfg)?);
    let map = build_map(map_cfg, &mesh)?;
    Ok((mesh, map))
}

fn validate_map(cfg: &RunConfig, samples: usize) -> Result<(), Error> {
    let (mesh, map) = setup_mesh_map(cfg)?;
    let times = sample_times(cfg, samples)?;
    let report = validate_assumptions(&map, &mesh, &times, MapThresholds::default())?;
    println!("{report}");
    if report.passed {
        Ok(())
    } else {
        Err(Error::Input("the map violates the geometric assumptions".into()))
    }
}

fn mesh_gen(cfg: &RunConfig, output: &Path) -> Result<(), Error> {
    let mesh_cfg = cfg.mesh.as_ref().ok_or_else(|| Error::Input("the configuration has no mesh section".into()))?;
    let mesh = Arc::new(build_mesh::<f64>(mesh_cfg)?);
    match output.extension().and_then(|e| e.to_str()) {
        Some("msh") => write_gmsh(output, &mesh)?,
        Some("vtk") => {
            let space = crate::fem::TaylorHoodSpace::new(mesh.clone(), 1)?;
            let st = FlowState::zero(&space, 0.0);
            let map = crate::map::SpaceTimeMap::identity(mesh.dim());
            write_vtk(output, &space, &map, 0.0, &st.u, &st.p, false)?;
        }
        _ => return Err(Error::Input(format!("{}: expected a .msh or .vtk file name", output.display()))),
    }
    let q = mesh.quality();
    println!(
        "wrote {}: {} cells, {} vertices, h in [{:.4}, {:.4}]",
        output.display(),
        q.cell_count,
        q.vertex_count,
        q.h_min,
        q.h_max
    );
    Ok(())
}

fn info(cfg: &RunConfig) -> Result<(), Error> {
    if let Some(b) = &cfg.benchmark {
        let case = BenchmarkCase::<f64>::new(b.case);
        println!("benchmark      {} ({} levels, {} pairing)", b.case, b.levels, config_name(&b.pairing));
        println!("dimension      {}", case.dim);
        println!("viscosity      {}", case.nu);
        println!("end time       {}", case.t_end);
        for level in 0..b.levels {
            let (dt, n) = crate::analysis::level_time_step(&case, level, b.pairing);
            println!("level {level}        h = {:.5}, dt = {dt:.5}, N = {n}", case.h(level));
        }
        if cfg.mesh.is_none() {
            return Ok(());
        }
    }
    let (mesh, _) = setup_mesh_map(cfg)?;
    let q = mesh.quality();
    let kind = match cfg.mesh.as_ref().unwrap() {
        MeshConfig::Box { .. } => "box",
        MeshConfig::Tube { .. } => "tube",
        MeshConfig::Gmsh { .. } => "gmsh",
    };
    println!("mesh           {kind}, {}D, {} cells, {} vertices, {} edges", mesh.dim(), q.cell_count, q.vertex_count, q.edge_count);
    println!("mesh size      h in [{:.4}, {:.4}], shape regularity {:.3}", q.h_min, q.h_max, q.shape_regularity);
    let d = mesh.dim();
    println!("dofs           {} velocity, {} pressure", (q.vertex_count + q.edge_count) * d, q.vertex_count);
    let map = match cfg.map.as_ref().unwrap() {
        MapConfig::Identity => "identity".to_string(),
        MapConfig::AxisScaling { scales } => format!("axis-scaling [{}]", scales.join(", ")),
        MapConfig::TubeShrink => "tube-shrink".to_string(),
        MapConfig::Expression { components } => format!("expression {components}"),
        MapConfig::MeshSequence { directory } => format!("mesh-sequence {}", directory.display()),
    };
    println!("map            {map}");
    if let Some(p) = &cfg.physics {
        println!("viscosity      {} ({} stress)", p.nu, config_name(&p.stress));
        if let Some(s) = p.smagorinsky {
            println!("smagorinsky    C_s = {}", s.cs);
        }
    }
    if let Some(t) = cfg.time {
        println!("time           dt = {}, T = {}, {} steps, {}", t.dt, t.t_end, t.steps(), config_name(&t.scheme));
    }
    for bc in &cfg.bcs {
        let data = bc.velocity.as_ref().or(bc.traction.as_ref()).map(|v| v.join(", ")).unwrap_or_default();
        println!("boundary       {} {}", bc.label, data);
    }
    println!("solver         {}, tolerance {:e}", config_name(&cfg.solver.kind), cfg.solver_config().tolerance::<f64>());
    println!("output         {}", cfg.output.directory.display());
    Ok(())
}

/// Spelling of an enum value in configuration files.
fn config_name<S: serde::Serialize>(value: &S) -> String {
    serde_json::to_value(value).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}
