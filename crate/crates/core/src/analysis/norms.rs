//! J-weighted norms, the energy error and the discrete energy-balance terms.

use super::AnalysisError;
use crate::fem::{Assembler, QuadratureRule, StressForm, TaylorHoodSpace, VectorField};
use crate::linalg::{ddot, dot, mat_t_vec, mat_vec, mul, scale, sub, sym, Mat3};
use crate::map::{MappingSample, SpaceTimeMap};
use crate::mesh::BoundaryLabel;
use crate::scalar::{Real, Vec3};
use crate::solver::FlowState;

/// Calls `f(cell, reference point in cell, weight, map sample)` at every
/// quadrature point of the reference mesh.
pub(crate) fn for_each_point<T: Real>(
    space: &TaylorHoodSpace<T>,
    rule: &QuadratureRule<T>,
    map: &SpaceTimeMap<T>,
    t: T,
    mut f: impl FnMut(usize, &Vec3<T>, T, &MappingSample<T>),
) -> Result<(), AnalysisError> {
    for c in 0..space.mesh().num_cells() {
        let g = space.geometry(c);
        for (xr, w) in rule.points.iter().zip(&rule.weights) {
            let s = map.evaluate_in_cell(c, &g.to_physical(xr), t)?;
            f(c, xr, *w * g.measure_factor(), &s);
        }
    }
    Ok(())
}

/// Calls `f(facet, reference point in the owning cell, weight, map sample)`
/// at every facet quadrature point.
pub(crate) fn for_each_facet_point<T: Real>(
    space: &TaylorHoodSpace<T>,
    rule: &QuadratureRule<T>,
    map: &SpaceTimeMap<T>,
    t: T,
    mut f: impl FnMut(usize, &Vec3<T>, T, &MappingSample<T>),
) -> Result<(), AnalysisError> {
    let mesh = space.mesh();
    let d = space.dim();
    let refv = space.velocity_basis().nodes::<T>();
    let factorial = if d == 3 { T::two() } else { T::one() };
    for (fi, facet) in mesh.facets().iter().enumerate() {
        let g = space.geometry(facet.cell);
        let lv: Vec<usize> = (0..=d).filter(|&j| j != facet.local_face).collect();
        let area = mesh.facet_area(fi) * factorial;
        for (sp, w) in rule.points.iter().zip(&rule.weights) {
            let xr: Vec3<T> = std::array::from_fn(|k| {
                let mut v = refv[lv[0]][k];
                for m in 1..d {
                    v += sp[m - 1] * (refv[lv[m]][k] - refv[lv[0]][k]);
                }
                v
            });
            let s = map.evaluate_in_cell(facet.cell, &g.to_physical(&xr), t)?;
            f(fi, &xr, *w * area, &s);
        }
    }
    Ok(())
}

/// `(int J |v|^2)^{1/2}` of a discrete velocity field at time `t`.
pub fn k_norm<T: Real>(asm: &Assembler<T>, map: &SpaceTimeMap<T>, t: T, u: &[T]) -> Result<T, AnalysisError> {
    let sp = asm.space();
    let mut acc = T::zero();
    for_each_point(sp, asm.rule(), map, t, |c, xr, w, s| {
        let v = sp.velocity_in_cell(u, c, xr);
        acc += w * s.j * dot(&v, &v);
    })?;
    Ok(acc.sqrt())
}

/// `(int J |f|^2)^{1/2}` of a function of reference coordinates.
pub fn k_norm_fn<T: Real>(
    asm: &Assembler<T>,
    map: &SpaceTimeMap<T>,
    t: T,
    f: impl Fn(&Vec3<T>) -> Vec3<T>,
) -> Result<T, AnalysisError> {
    let sp = asm.space();
    let mut acc = T::zero();
    for_each_point(sp, asm.rule(), map, t, |_, _, w, s| {
        let v = f(&s.point);
        acc += w * s.j * dot(&v, &v);
    })?;
    Ok(acc.sqrt())
}

/// Physical velocity gradient `grad u F^{-1}` of a discrete field.
pub(crate) fn physical_gradient<T: Real>(
    space: &TaylorHoodSpace<T>,
    u: &[T],
    c: usize,
    xr: &Vec3<T>,
    s: &MappingSample<T>,
) -> Mat3<T> {
    let mut g = mul(&space.velocity_gradient_in_cell(u, c, xr), &s.f_inv);
    if space.dim() == 2 {
        g[2] = [T::zero(); 3];
    }
    g
}

/// Per-step error components and the two combined norms.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyErrorReport<T> {
    /// `|e^k|_k` for `k = 1..N`.
    pub l2: Vec<T>,
    /// `|D_k(e^k)|_k` for `k = 1..N`.
    pub deformation: Vec<T>,
    pub dt: T,
    pub nu: T,
    /// `max_k |e^k|_k + sqrt(sum_k dt |D_k(e^k)|_k^2)`.
    pub combined: T,
    /// `sqrt(max_k |e^k|_k^2 + 2 nu dt sum_k |D_k(e^k)|_k^2)`.
    pub energy_norm: T,
}

impl<T: Real> EnergyErrorReport<T> {
    pub fn from_components(l2: Vec<T>, deformation: Vec<T>, dt: T, nu: T) -> Self {
        let max_l2 = l2.iter().fold(T::zero(), |m, v| m.max(*v));
        let sum_d: T = deformation.iter().map(|v| dt * *v * *v).sum();
        let combined = max_l2 + sum_d.sqrt();
        let energy_norm = (max_l2 * max_l2 + T::two() * nu * sum_d).sqrt();
        EnergyErrorReport { l2, deformation, dt, nu, combined, energy_norm }
    }
}

/// Exact physical velocity and its physical gradient at `(position, t)`.
pub trait ExactVelocity<T>: Sync {
    fn velocity(&self, x: &Vec3<T>, t: T) -> Vec3<T>;
    fn gradient(&self, x: &Vec3<T>, t: T) -> Mat3<T>;
}

/// Error of the states `trajectory` (steps `1..N`, consecutive) against
/// the exact velocity composed with the map at quadrature points.
pub fn energy_error<T: Real>(
    asm: &Assembler<T>,
    map: &SpaceTimeMap<T>,
    trajectory: &[FlowState<T>],
    dt: T,
    nu: T,
    exact: &dyn ExactVelocity<T>,
) -> Result<EnergyErrorReport<T>, AnalysisError> {
    let sp = asm.space();
    let d = sp.dim();
    let mut l2 = Vec::with_capacity(trajectory.len());
    let mut def = Vec::with_capacity(trajectory.len());
    for (i, st) in trajectory.iter().enumerate() {
        if st.step != i + 1 {
            return Err(AnalysisError::MissingSteps { expected: i + 1, found: st.step });
        }
        let (mut e2, mut d2) = (T::zero(), T::zero());
        for_each_point(sp, asm.rule(), map, st.time, |c, xr, w, s| {
            let uh = sp.velocity_in_cell(&st.u, c, xr);
            let ue = exact.velocity(&s.position, st.time);
            let mut e = [T::zero(); 3];
            for k in 0..d {
                e[k] = ue[k] - uh[k];
            }
            let mut ge = sub(&exact.gradient(&s.position, st.time), &physical_gradient(sp, &st.u, c, xr, s));
            if d == 2 {
                ge[2] = [T::zero(); 3];
                for row in ge.iter_mut() {
                    row[2] = T::zero();
                }
            }
            let de = sym(&ge);
            e2 += w * s.j * dot(&e, &e);
            d2 += w * s.j * ddot(&de, &de);
        })?;
        l2.push(e2.sqrt());
        def.push(d2.sqrt());
    }
    Ok(EnergyErrorReport::from_components(l2, def, dt, nu))
}

/// Discrete counterparts of the terms of the kinetic energy balance
/// `d/dt E + dissipation = wall work + open-boundary power + forcing power`.
/// A diagnostic only: the scheme satisfies this balance up to `O(dt)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBalance<T> {
    /// `(|u^k|_k^2 - |u^{k-1}|_{k-1}^2) / (2 dt)`
    pub kinetic_rate: T,
    pub dissipation: T,
    /// `int (J sigma F^{-T} n) . xi_t` over no-slip facets.
    pub wall_work: T,
    /// `int (J sigma F^{-T} n) . u` over Dirichlet and Neumann facets.
    pub open_boundary_power: T,
    /// `(J f, u^k)`
    pub forcing_power: T,
}

fn stress<T: Real>(grad: &Mat3<T>, p: T, nu: T, form: StressForm, d: usize) -> Mat3<T> {
    let mut s = match form {
        StressForm::Symmetric => scale(&sym(grad), T::two() * nu),
        StressForm::FullGradient => scale(grad, nu),
    };
    for k in 0..d {
        s[k][k] -= p;
    }
    s
}

pub fn energy_balance_terms<T: Real>(
    asm: &Assembler<T>,
    map: &SpaceTimeMap<T>,
    prev: &FlowState<T>,
    next: &FlowState<T>,
    nu: T,
    form: StressForm,
    forcing: Option<VectorField<'_, T>>,
) -> Result<EnergyBalance<T>, AnalysisError> {
    let sp = asm.space();
    let d = sp.dim();
    let dt = next.time - prev.time;
    let e0 = k_norm(asm, map, prev.time, &prev.u)?;
    let e1 = k_norm(asm, map, next.time, &next.u)?;
    let t = next.time;
    let (mut diss, mut power) = (T::zero(), T::zero());
    for_each_point(sp, asm.rule(), map, t, |c, xr, w, s| {
        let g = physical_gradient(sp, &next.u, c, xr, s);
        diss += w * s.j
            * match form {
                StressForm::Symmetric => T::two() * nu * ddot(&sym(&g), &sym(&g)),
                StressForm::FullGradient => nu * ddot(&g, &g),
            };
        if let Some(f) = forcing {
            let fv = f(&s.position, t);
            let u = sp.velocity_in_cell(&next.u, c, xr);
            power += w * s.j * dot(&fv, &u);
        }
    })?;
    let facet_rule = crate::fem::quadrature(d - 1, asm.rule().degree)?;
    let mesh = sp.mesh();
    let (mut wall, mut open) = (T::zero(), T::zero());
    for_each_facet_point(sp, &facet_rule, map, t, |fi, xr, w, s| {
        let facet = &mesh.facets()[fi];
        let c = facet.cell;
        let g = physical_gradient(sp, &next.u, c, xr, s);
        let p = sp.pressure_in_cell(&next.p, c, xr);
        let sigma = stress(&g, p, nu, form, d);
        let n_ref = mesh.facet_normal(fi);
        // J sigma F^{-T} n
        let traction = mat_vec(&sigma, &mat_t_vec(&s.f_inv, &n_ref));
        let tr: Vec3<T> = std::array::from_fn(|k| traction[k] * s.j);
        match facet.label {
            BoundaryLabel::NoSlip => wall += w * dot(&tr, &s.xi_t),
            _ => open += w * dot(&tr, &sp.velocity_in_cell(&next.u, c, xr)),
        }
    })?;
    Ok(EnergyBalance {
        kinetic_rate: (e1 * e1 - e0 * e0) / (T::two() * dt),
        dissipation: diss,
        wall_work: wall,
        open_boundary_power: open,
        forcing_power: power,
    })
}
