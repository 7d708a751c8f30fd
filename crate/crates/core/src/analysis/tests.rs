use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fem::{Assembler, StepData, StressForm, TaylorHoodSpace, Viscosity};
use crate::linalg::Mat3;
use crate::map::SpaceTimeMap;
use crate::mesh::{generate_box, BoundaryLabel, BoxLabels};
use crate::scalar::Vec3;
use crate::solver::{BoundaryConditionSet, FlowState, Problem, Solver, SolverConfig};

fn unit_box(dim: usize, n: usize, labels: BoxLabels) -> Arc<TaylorHoodSpace<f64>> {
    let m = generate_box(dim, &vec![n; dim], &vec![(0.0, 1.0); dim], labels).unwrap();
    Arc::new(TaylorHoodSpace::new(Arc::new(m), 1).unwrap())
}

fn random_field(sp: &TaylorHoodSpace<f64>, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sp.num_velocity_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn k_norm_identity_is_plain_l2() {
    let sp = unit_box(2, 3, BoxLabels::default());
    let asm = Assembler::new(sp.clone(), None).unwrap();
    let u = random_field(&sp, 3);
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
        temam: false,
    };
    let mass = asm.assemble_blocks(&SpaceTimeMap::identity(2), &data).unwrap().mass;
    let k = k_norm(&asm, &SpaceTimeMap::identity(2), 0.0, &u).unwrap();
    assert!((k * k - mass.form(&u, &u)).abs() < 1e-12);
    assert_eq!(k_norm(&asm, &SpaceTimeMap::identity(2), 0.0, &zero).unwrap(), 0.0);
}

#[test]
fn k_norm_of_constant_under_tube_map() {
    let sp = unit_box(3, 2, BoxLabels::default());
    let asm = Assembler::new(sp.clone(), None).unwrap();
    let c = [0.3, -1.2, 0.4];
    let u = sp.interpolate_velocity(|_, _| c).unwrap();
    let k = k_norm(&asm, &SpaceTimeMap::tube_shrink(3), 0.2, &u).unwrap();
    let norm_c = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    assert!((k - norm_c * 0.95f64.sqrt()).abs() < 1e-12);
    let kf = k_norm_fn(&asm, &SpaceTimeMap::tube_shrink(3), 0.2, |_| c).unwrap();
    assert!((kf - k).abs() < 1e-12);
}

struct Quadratic;

impl ExactVelocity<f64> for Quadratic {
    fn velocity(&self, x: &Vec3<f64>, t: f64) -> Vec3<f64> {
        [x[1] * x[1] + t, x[0] * x[1] - 0.5 * x[0] * x[0], 0.0]
    }
    fn gradient(&self, x: &Vec3<f64>, _: f64) -> Mat3<f64> {
        [[0.0, 2.0 * x[1], 0.0], [x[1] - x[0], x[0], 0.0], [0.0; 3]]
    }
}

/// Interpolants of the quadratic field composed with an affine map.
fn exact_trajectory(sp: &TaylorHoodSpace<f64>, map: &SpaceTimeMap<f64>, steps: usize, dt: f64) -> Vec<FlowState<f64>> {
    (1..=steps)
        .map(|k| {
            let t = k as f64 * dt;
            FlowState {
                step: k,
                time: t,
                u: sp.interpolate_velocity(|_, x| Quadratic.velocity(&map.evaluate(x, t).unwrap().position, t)).unwrap(),
                p: vec![0.0; sp.num_pressure_dofs()],
            }
        })
        .collect()
}

#[test]
fn energy_error_vanishes_for_interpolated_quadratics() {
    let sp = unit_box(2, 3, BoxLabels::default());
    let asm = Assembler::new(sp.clone(), None).unwrap();
    let traj = exact_trajectory(&sp, &SpaceTimeMap::identity(2), 3, 0.1);
    let r = energy_error(&asm, &SpaceTimeMap::identity(2), &traj, 0.1, 1.0, &Quadratic).unwrap();
    assert!(r.l2.iter().all(|e| *e < 1e-12), "{:?}", r.l2);
    assert!(r.deformation.iter().all(|e| *e < 1e-12));
    assert!(r.combined < 1e-11);
}

#[test]
fn energy_error_is_homogeneous_and_checks_steps() {
    let sp = unit_box(2, 2, BoxLabels::default());
    let asm = Assembler::new(sp.clone(), None).unwrap();
    let map = SpaceTimeMap::axis_scaling(&["1 + t", "1"]).unwrap();
    let exact = exact_trajectory(&sp, &map, 2, 0.1);
    // u_h = exact + e and u_h = exact + 2e.
    let e = random_field(&sp, 9);
    let perturb = |s: f64| -> Vec<FlowState<f64>> {
        exact
            .iter()
            .map(|st| {
                let mut st = st.clone();
                for (u, d) in st.u.iter_mut().zip(&e) {
                    *u += s * d;
                }
                st
            })
            .collect()
    };
    // Error of the interpolant itself is zero, so the report is linear in e.
    let r1 = energy_error(&asm, &map, &perturb(1.0), 0.1, 0.5, &Quadratic).unwrap();
    let r2 = energy_error(&asm, &map, &perturb(2.0), 0.1, 0.5, &Quadratic).unwrap();
    assert!((r2.combined - 2.0 * r1.combined).abs() < 1e-10 * r1.combined);
    assert!((r2.energy_norm - 2.0 * r1.energy_norm).abs() < 1e-10 * r1.energy_norm);
    assert!(r1.combined >= r1.l2.iter().cloned().fold(0.0, f64::max));
    let mut gap = perturb(1.0);
    gap.remove(0);
    assert!(matches!(
        energy_error(&asm, &map, &gap, 0.1, 0.5, &Quadratic),
        Err(AnalysisError::MissingSteps { expected: 1, found: 2 })
    ));
}

#[test]
fn energy_report_formulas() {
    let r = EnergyErrorReport::from_components(vec![0.1, 0.3], vec![1.0, 2.0], 0.5, 0.25);
    assert!((r.combined - (0.3 + (0.5f64 * 5.0).sqrt())).abs() < 1e-15);
    assert!((r.energy_norm - (0.09 + 0.5 * 0.5 * 5.0f64).sqrt()).abs() < 1e-15);
    let z = EnergyErrorReport::from_components(vec![0.0; 3], vec![0.0; 3], 0.1, 1.0);
    assert_eq!((z.combined, z.energy_norm), (0.0, 0.0));
}

#[test]
fn energy_balance_of_rest_and_static_states() {
    let sp = unit_box(2, 3, BoxLabels::default());
    let asm = Assembler::new(sp.clone(), None).unwrap();
    let rest = FlowState::zero(&sp, 0.0);
    let mut next = rest.clone();
    next.time = 0.1;
    let b = energy_balance_terms(&asm, &SpaceTimeMap::identity(2), &rest, &next, 1.0, StressForm::Symmetric, None).unwrap();
    assert_eq!(b, EnergyBalance::default());
    next.u = random_field(&sp, 4);
    next.p = vec![1.0; sp.num_pressure_dofs()];
    let b = energy_balance_terms(&asm, &SpaceTimeMap::identity(2), &rest, &next, 1.0, StressForm::Symmetric, None).unwrap();
    assert_eq!(b.wall_work, 0.0);
    assert!(b.dissipation > 0.0 && b.kinetic_rate > 0.0);
}

#[test]
fn poiseuille_dissipation_balances_inflow_power() {
    let nu = 0.3;
    let labels = BoxLabels([
        BoundaryLabel::Dirichlet(1),
        BoundaryLabel::Neumann(0),
        BoundaryLabel::NoSlip,
        BoundaryLabel::NoSlip,
        BoundaryLabel::NoSlip,
        BoundaryLabel::NoSlip,
    ]);
    let m = generate_box(2, &[8, 4], &[(0.0, 2.0), (0.0, 1.0)], labels).unwrap();
    let sp = Arc::new(TaylorHoodSpace::new(Arc::new(m), 1).unwrap());
    let bcs = BoundaryConditionSet::new()
        .dirichlet(1, Arc::new(|x: &Vec3<f64>, _| [x[1] * (1.0 - x[1]), 0.0, 0.0]))
        .neumann(0, None);
    let problem = Problem { space: sp.clone(), map: SpaceTimeMap::identity(2), nu, forcing: None, bcs };
    let cfg = SolverConfig { stress: StressForm::FullGradient, ..Default::default() };
    let mut solver = Solver::new(problem, cfg).unwrap();
    let u0 = sp.interpolate_velocity(|_, x| [x[1] * (1.0 - x[1]), 0.0, 0.0]).unwrap();
    let init = FlowState { step: 0, time: 0.0, u: u0, p: vec![0.0; sp.num_pressure_dofs()] };
    let (next, _) = solver.advance(&init, None, 0.1).unwrap();
    let b = energy_balance_terms(solver.assembler(), &SpaceTimeMap::identity(2), &init, &next, nu, StressForm::FullGradient, None)
        .unwrap();
    // Analytic: nu L / 3 both ways.
    let expected = nu * 2.0 / 3.0;
    assert!((b.dissipation - expected).abs() < 0.05 * expected, "{b:?}");
    assert!((b.open_boundary_power - b.dissipation).abs() < 0.05 * expected, "{b:?}");
    assert!(b.kinetic_rate.abs() < 1e-8);
}

fn sample_tube(rng: &mut ChaCha8Rng, t_max: f64) -> (Vec3<f64>, f64) {
    let y = rng.gen_range(-4.0..4.0);
    let t = rng.gen_range(0.0..t_max);
    let rmax = ((y / 4.0 + 1.0f64).exp() * (1.0 - t / 4.0)).sqrt();
    let r = rng.gen_range(0.0..rmax);
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    ([r * phi.cos(), y, r * phi.sin()], t)
}

#[test]
fn tube_exact_solution_properties() {
    let case = tube_benchmark::<f64>();
    assert!((case.exact.velocity(&[0.0, 1.3, 0.0], 0.0)[1] - 2.0).abs() < 1e-15);
    assert_eq!(case.exact.velocity(&[0.0, -2.0, 0.0], 0.1)[0], 0.0);
    assert!(case.exact.pressure(&[0.7, 4.0, 0.2], 0.13).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let (x, t) = sample_tube(&mut rng, 0.2);
        let g = case.exact.gradient(&x, t);
        assert!((g[0][0] + g[1][1] + g[2][2]).abs() < 1e-10);
        // Gradient against central differences of the velocity.
        for j in 0..3 {
            let (mut a, mut b) = (x, x);
            a[j] += 1e-6;
            b[j] -= 1e-6;
            let (ua, ub) = (case.exact.velocity(&a, t), case.exact.velocity(&b, t));
            for i in 0..3 {
                assert!(((ua[i] - ub[i]) / 2e-6 - g[i][j]).abs() < 1e-7);
            }
        }
        assert!(momentum_residual(&*case.exact, 3, case.nu, &x, t) < 1e-8);
    }
}

#[test]
fn tube_wall_moves_with_the_fluid() {
    // On the lateral wall the exact velocity equals the map velocity.
    let case = tube_benchmark::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let y: f64 = rng.gen_range(-4.0..4.0);
        let phi: f64 = rng.gen_range(0.0..6.0);
        let r0 = (0.5 * (y / 4.0 + 1.0)).exp();
        let xr = [r0 * phi.cos(), y, r0 * phi.sin()];
        let s = case.map.evaluate(&xr, 0.15).unwrap();
        let u = case.exact.velocity(&s.position, 0.15);
        for k in 0..3 {
            assert!((u[k] - s.xi_t[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn manufactured_solution_properties() {
    let case = manufactured_2d::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let x = [rng.gen_range(0.0..1.1), rng.gen_range(0.0..1.0), 0.0];
        let t = rng.gen_range(0.0..0.5);
        let g = case.exact.gradient(&x, t);
        assert!((g[0][0] + g[1][1]).abs() < 1e-12);
        assert!(momentum_residual(&*case.exact, 2, case.nu, &x, t) < 1e-8);
        let v = case.exact.velocity(&x, std::f64::consts::FRAC_PI_2);
        assert!(v[0].abs() < 1e-15 && v[1].abs() < 1e-15);
        let s = case.map.evaluate(&x, t).unwrap();
        assert!((s.j - 1.0).abs() < 1e-14);
    }
}

#[test]
fn manufactured_pressure_has_zero_mean() {
    let case = manufactured_2d::<f64>();
    let sp = unit_box(2, 8, BoxLabels::default());
    let asm = Assembler::new(sp.clone(), Some(10)).unwrap();
    let t = 0.3;
    let mut mean = 0.0;
    super::norms::for_each_point(&sp, asm.rule(), &case.map, t, |_, _, w, s| {
        mean += w * s.j * case.exact.pressure(&s.position, t);
    })
    .unwrap();
    assert!(mean.abs() < 1e-10, "mean {mean}");
}

#[test]
fn convergence_table_ratios_and_guard() {
    let t = ConvergenceTable::from_levels(&[(1.0, 10, 0.1, 1, 0.4), (0.5, 40, 0.025, 4, 0.1), (0.25, 160, 0.00625, 16, 0.025)])
        .unwrap();
    assert_eq!(t.rows[0].ratio, None);
    assert!((t.rows[1].ratio.unwrap() - 4.0).abs() < 1e-12);
    assert!((t.final_order().unwrap() - 2.0).abs() < 1e-12);
    let csv = t.to_csv();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("mesh_step_size,elements,time_step,steps,error,ratio,observed_order"));
    for bad in [f64::NAN, 0.0, -1.0, f64::INFINITY] {
        assert!(ConvergenceTable::from_levels(&[(1.0, 1, 0.1, 1, 0.2), (0.5, 1, 0.1, 1, bad)]).is_err());
    }
}

#[test]
fn level_time_steps() {
    let tube = tube_benchmark::<f64>();
    let steps: Vec<usize> = (0..3).map(|l| level_time_step(&tube, l, Pairing::DtH2).1).collect();
    assert_eq!(steps, vec![5, 10, 20]);
    let m = manufactured_2d::<f64>();
    assert_eq!(level_time_step(&m, 2, Pairing::DtH2).1, 160);
    assert_eq!(level_time_step(&m, 2, Pairing::DtH).1, 40);
    assert_eq!(tube.mesh(0).unwrap().num_cells(), 6 * 3 * 3 * 6);
}

proptest! {
    #[test]
    fn orders_invariant_under_error_scaling(e in proptest::collection::vec(1e-6f64..1.0, 3), s in 1e-3f64..1e3) {
        let lv = |k: f64| -> Vec<(f64, usize, f64, usize, f64)> {
            e.iter().enumerate().map(|(i, v)| (0.5f64.powi(i as i32), 1, 0.1, 1, v * k)).collect()
        };
        let a = ConvergenceTable::from_levels(&lv(1.0)).unwrap();
        let b = ConvergenceTable::from_levels(&lv(s)).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            if let (Some(p), Some(q)) = (x.order, y.order) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }
    }
}
