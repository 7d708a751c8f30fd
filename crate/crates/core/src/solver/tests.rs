use super::*;
use crate::mesh::{generate_box, BoundaryLabel, BoxLabels};

const L: f64 = 4.0;

fn cavity(n: usize) -> Arc<TaylorHoodSpace<f64>> {
    let m = generate_box(2, &[n, n], &[(0.0, 1.0), (0.0, 1.0)], BoxLabels::default()).unwrap();
    Arc::new(TaylorHoodSpace::new(Arc::new(m), 1).unwrap())
}

/// Channel `[0, L] x [0, 1]`: inlet Dirichlet(1) at x = 0, do-nothing
/// outlet at x = L, no-slip walls.
fn channel(nx: usize, ny: usize) -> Arc<TaylorHoodSpace<f64>> {
    let labels = BoxLabels([
        BoundaryLabel::Dirichlet(1),
        BoundaryLabel::Neumann(0),
        BoundaryLabel::NoSlip,
        BoundaryLabel::NoSlip,
        BoundaryLabel::NoSlip,
        BoundaryLabel::NoSlip,
    ]);
    let m = generate_box(2, &[nx, ny], &[(0.0, L), (0.0, 1.0)], labels).unwrap();
    Arc::new(TaylorHoodSpace::new(Arc::new(m), 1).unwrap())
}

fn problem(space: Arc<TaylorHoodSpace<f64>>, map: SpaceTimeMap<f64>, nu: f64, bcs: BoundaryConditionSet<f64>) -> Problem<f64> {
    Problem { space, map, nu, forcing: None, bcs }
}

fn kinetic(space: &TaylorHoodSpace<f64>, asm: &Assembler<f64>, u: &[f64]) -> f64 {
    // Identity-map mass matrix: mass_prev of a zero-step block assembly.
    let zero = vec![0.0; u.len()];
    let data = StepData {
        t_k: 0.0,
        dt: 1.0,
        advection: &zero,
        u_prev: &zero,
        u_prev2: None,
        viscosity: Viscosity::Constant(1.0),
        forcing: None,
        traction: None,
        stress: StressForm::Symmetric,
        temam: true,
    };
    let blocks = asm.assemble_blocks(&SpaceTimeMap::identity(space.dim()), &data).unwrap();
    0.5 * blocks.mass.form(u, u)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn rest_state_is_preserved() {
    let sp = cavity(4);
    let mut s = Solver::new(problem(sp.clone(), SpaceTimeMap::identity(2), 0.1, BoundaryConditionSet::new()), SolverConfig::default()).unwrap();
    let summary = run(&mut s, FlowState::zero(&sp, 0.0), 0.1, 3, &mut []).unwrap();
    assert!(summary.final_state.u.iter().all(|v| v.abs() < 1e-14));
    assert!(summary.final_state.p.iter().all(|v| v.abs() < 1e-14));
    assert_eq!(summary.reports.len(), 3);
    assert!((summary.final_state.time - 0.3).abs() < 1e-14);
}

fn poiseuille_bcs(amp: fn(f64) -> f64) -> BoundaryConditionSet<f64> {
    BoundaryConditionSet::new()
        .dirichlet(1, Arc::new(move |x: &Vec3<f64>, t| [amp(t) * x[1] * (1.0 - x[1]), 0.0, 0.0]))
        .neumann(0, None)
}

#[test]
fn poiseuille_is_a_fixed_point() {
    let nu = 0.7;
    let sp = channel(8, 3);
    let cfg = SolverConfig { stress: StressForm::FullGradient, ..Default::default() };
    let mut s = Solver::new(problem(sp.clone(), SpaceTimeMap::identity(2), nu, poiseuille_bcs(|_| 1.0)), cfg).unwrap();
    let u0 = sp.interpolate_velocity(|_, x| [x[1] * (1.0 - x[1]), 0.0, 0.0]).unwrap();
    let p_exact = sp.interpolate_pressure(|x| 2.0 * nu * (L - x[0])).unwrap();
    let init = FlowState { step: 0, time: 0.0, u: u0.clone(), p: vec![0.0; sp.num_pressure_dofs()] };
    let summary = run(&mut s, init, 0.05, 2, &mut []).unwrap();
    assert!(max_diff(&summary.final_state.u, &u0) < 1e-10);
    assert!(max_diff(&summary.final_state.p, &p_exact) < 1e-9);
    assert_eq!(summary.reports[0].c_perp, 0.0);
}

#[test]
fn bdf2_is_exact_for_quadratic_in_time_flow() {
    // u = a(t) (y(1-y), 0), p = 2 nu a (L - x), f = (a' y(1-y), 0).
    let nu = 0.5;
    let a = |t: f64| 1.0 + t * t;
    let da = |t: f64| 2.0 * t;
    let sp = channel(6, 3);
    let exact_u = |t: f64| sp.interpolate_velocity(|_, x| [a(t) * x[1] * (1.0 - x[1]), 0.0, 0.0]).unwrap();
    let exact_p = |t: f64| sp.interpolate_pressure(|x| 2.0 * nu * a(t) * (L - x[0])).unwrap();
    let state = |k: usize, t: f64| FlowState { step: k, time: t, u: exact_u(t), p: exact_p(t) };
    let mut prob = problem(sp.clone(), SpaceTimeMap::identity(2), nu, poiseuille_bcs(|t| 1.0 + t * t));
    prob.forcing = Some(Arc::new(move |x: &Vec3<f64>, t| [da(t) * x[1] * (1.0 - x[1]), 0.0, 0.0]));
    let dt = 0.1;
    let errors = |scheme| {
        let cfg = SolverConfig { stress: StressForm::FullGradient, scheme, ..Default::default() };
        let mut s = Solver::new(prob.clone(), cfg).unwrap();
        let (mut s2, mut s1) = (state(0, 0.0), state(1, dt));
        for _ in 0..4 {
            let (next, _) = s.advance(&s1, Some(&s2), dt).unwrap();
            s2 = std::mem::replace(&mut s1, next);
        }
        (max_diff(&s1.u, &exact_u(s1.time)), max_diff(&s1.p, &exact_p(s1.time)))
    };
    let (eu, ep) = errors(TimeScheme::Bdf2);
    assert!(eu < 1e-10 && ep < 1e-8, "bdf2 errors {eu:e} {ep:e}");
    let (eu_be, _) = errors(TimeScheme::BackwardEuler);
    assert!(eu_be > 1e-4, "backward Euler error {eu_be:e}");
}

fn swirl(sp: &TaylorHoodSpace<f64>) -> Vec<f64> {
    use std::f64::consts::PI;
    // Curl of sin^2(pi x) sin^2(pi y): divergence free, zero on the boundary.
    sp.interpolate_velocity(|_, x| {
        let (sx, cx, sy, cy) = ((PI * x[0]).sin(), (PI * x[0]).cos(), (PI * x[1]).sin(), (PI * x[1]).cos());
        [2.0 * PI * sx * sx * sy * cy, -2.0 * PI * sx * cx * sy * sy, 0.0]
    })
    .unwrap()
}

#[test]
fn kinetic_energy_decays_without_forcing() {
    let sp = cavity(5);
    for temam in [true, false] {
        let cfg = SolverConfig { temam, ..Default::default() };
        let mut s = Solver::new(problem(sp.clone(), SpaceTimeMap::identity(2), 0.01, BoundaryConditionSet::new()), cfg).unwrap();
        let asm = s.assembler().clone();
        let init = FlowState { step: 0, time: 0.0, u: swirl(&sp), p: vec![0.0; sp.num_pressure_dofs()] };
        let mut energies = vec![kinetic(&sp, &asm, &init.u)];
        let mut obs = |_: &FlowState<f64>, next: &FlowState<f64>, _: &StepReport<f64>| {
            energies.push(kinetic(&sp, &asm, &next.u));
            Ok(())
        };
        run(&mut s, init, 0.05, 6, &mut [&mut obs]).unwrap();
        assert_eq!(energies.len(), 7);
        for w in energies.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "temam={temam}: {energies:?}");
        }
        assert!(energies[6] < energies[0]);
    }
}

#[test]
fn gmres_matches_direct() {
    let sp = cavity(4);
    let init = FlowState { step: 0, time: 0.0, u: swirl(&sp), p: vec![0.0; sp.num_pressure_dofs()] };
    let map = SpaceTimeMap::axis_scaling(&["1 + 0.1*t", "1/(1 + 0.1*t)"]).unwrap();
    let solve = |kind| {
        let cfg = SolverConfig { linear_solver: kind, tolerance: Some(1e-11), ..Default::default() };
        let mut s = Solver::new(problem(sp.clone(), map.clone(), 0.05, BoundaryConditionSet::new()), cfg).unwrap();
        s.advance(&init, None, 0.05).unwrap()
    };
    let (d, _) = solve(LinearSolverKind::Direct);
    let (g, rep) = solve(LinearSolverKind::Gmres);
    assert!(rep.linear_iterations > 0);
    assert!(max_diff(&d.u, &g.u) < 1e-8);
    assert!(max_diff(&d.p, &g.p) < 1e-7);
}

#[test]
fn moving_walls_carry_the_map_velocity() {
    let sp = cavity(4);
    let map = SpaceTimeMap::axis_scaling(&["1 + 0.1*t", "1/(1 + 0.1*t)"]).unwrap();
    let mut s = Solver::new(problem(sp.clone(), map.clone(), 0.1, BoundaryConditionSet::new()), SolverConfig::default()).unwrap();
    let (next, rep) = s.advance(&FlowState::zero(&sp, 0.0), None, 0.1).unwrap();
    // Area-preserving motion: the wall velocity already carries zero flux.
    assert!(rep.c_perp.abs() < 1e-12, "c_perp = {}", rep.c_perp);
    for n in sp.constrained_nodes() {
        let xt = map.evaluate(&sp.node_coords(n), 0.1).unwrap().xi_t;
        assert!((next.u[2 * n] - xt[0]).abs() < 1e-12 && (next.u[2 * n + 1] - xt[1]).abs() < 1e-12);
    }
    assert!(rep.divergence_residual < 1e-9, "|Bu| = {}", rep.divergence_residual);
    assert!(rep.gauge_multiplier.abs() < 1e-9);
}

#[test]
fn flux_correction_removes_boundary_flux() {
    // Uniform expansion of a closed box: raw wall data carries flux.
    let sp = cavity(4);
    let map = SpaceTimeMap::axis_scaling(&["1 + 0.2*t", "1 + 0.2*t"]).unwrap();
    let mut s = Solver::new(problem(sp.clone(), map.clone(), 0.1, BoundaryConditionSet::new()), SolverConfig::default()).unwrap();
    let (next, rep) = s.advance(&FlowState::zero(&sp, 0.0), None, 0.1).unwrap();
    assert!(rep.c_perp.abs() > 1e-3);
    let flux = crate::fem::boundary_flux(s.assembler(), &map, 0.1, &next.u).unwrap();
    assert!(flux.abs() < 1e-12, "flux {flux}");
}

#[test]
fn elimination_keeps_symmetry() {
    let sp = cavity(3);
    let asm = Assembler::new(sp.clone(), None).unwrap();
    let zero = vec![0.0; sp.num_velocity_dofs()];
    let data = StepData {
        t_k: 0.1,
        dt: 0.1,
        advection: &zero,
        u_prev: &zero,
        u_prev2: None,
        viscosity: Viscosity::Constant(0.3),
        forcing: None,
        traction: None,
        stress: StressForm::Symmetric,
        temam: true,
    };
    let step = asm.assemble(&SpaceTimeMap::identity(2), &data).unwrap();
    let wall = vec![0.5; sp.num_velocity_dofs()];
    let values = boundary_values(&sp, &SpaceTimeMap::identity(2), &BoundaryConditionSet::new(), 0.1, &wall, None).unwrap();
    let gauge = vec![1.0; sp.num_pressure_dofs()];
    let sys = apply_boundary_conditions(&step, &values, Some(&gauge));
    assert!(sys.matrix.max_asymmetry() <= 1e-12);
    assert_eq!(sys.matrix.nrows(), sp.num_velocity_dofs() + sp.num_pressure_dofs() + 1);
}

#[test]
fn missing_boundary_data_is_rejected() {
    let sp = channel(2, 2);
    let err = Solver::new(problem(sp, SpaceTimeMap::identity(2), 1.0, BoundaryConditionSet::new()), SolverConfig::default());
    assert!(matches!(err, Err(SolverError::MissingBoundaryCondition(_))));
}

#[test]
fn config_round_trips_through_json() {
    let cfg = SolverConfig { scheme: TimeScheme::Bdf2, smagorinsky: Some(0.1), ..Default::default() };
    let s = serde_json::to_string(&cfg).unwrap();
    assert!(s.contains("\"bdf2\""));
    let back: SolverConfig = serde_json::from_str(&s).unwrap();
    assert_eq!(back, cfg);
    assert!(serde_json::from_str::<SolverConfig>("{\"bogus\": 1}").is_err());
}
