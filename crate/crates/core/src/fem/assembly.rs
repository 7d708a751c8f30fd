//! Assembly of one time step of the quasi-Lagrangian Taylor-Hood scheme.
//!
//! All integrals live on the fixed reference mesh. Physical gradients are
//! `g_i = F^{-T} grad phi_i`; the Piola-transformed advection field is
//! `W = J F^{-1} w`. The convective term is `(W . grad u, psi)` and the
//! skew-symmetrizing term `1/2 (div W u, psi)` is integrated by parts so no
//! derivatives of `F` are needed:
//!
//! ```text
//! 1/2 (div W u, psi) = -1/2 (W . grad(u . psi), 1) + 1/2 <W . n, u . psi>_Neumann
//! ```
//!
//! (test functions vanish on the constrained part of the boundary).

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quadrature::{quadrature, QuadratureRule};
use super::space::TaylorHoodSpace;
use super::sparse::{expand_scalar, CsrMatrix};
use super::FemError;
use crate::linalg::{ddot, dot, mat_t_vec, mat_vec, norm, sym, Mat3};
use crate::map::{MapError, SpaceTimeMap};
use crate::mesh::BoundaryLabel;
use crate::scalar::{Real, Vec3};

/// Body force `f(position, t)` in physical coordinates.
pub type VectorField<'a, T> = &'a (dyn Fn(&Vec3<T>, T) -> Vec3<T> + Sync);
/// Traction `g(patch, position, t, physical unit normal)` on Neumann facets.
pub type TractionField<'a, T> = &'a (dyn Fn(u32, &Vec3<T>, T, &Vec3<T>) -> Vec3<T> + Sync);

/// Cells per batch of parallel local computations.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StressForm {
    /// `2 nu (J D(u), D(psi))` with the symmetric deformation rate.
    #[default]
    Symmetric,
    /// `nu (J grad u F^{-1}, grad psi F^{-1})`.
    FullGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Viscosity<T> {
    Constant(T),
    /// `nu + (c_s h_T)^2 sqrt(2 D:D)` with `D` the deformation rate of the
    /// advection field.
    Smagorinsky { nu: T, cs: T },
}

impl<T: Real> Viscosity<T> {
    pub fn base(&self) -> T {
        match *self {
            Viscosity::Constant(nu) | Viscosity::Smagorinsky { nu, .. } => nu,
        }
    }
}

/// `nu + (c_s h)^2 sqrt(2 D:D)`.
pub fn smagorinsky_viscosity<T: Real>(d: &Mat3<T>, h: T, nu: T, cs: T) -> T {
    let ch = cs * h;
    nu + ch * ch * (T::two() * ddot(d, d)).sqrt()
}

/// Inputs of one step. `advection` is `w = u^{k-1} - I_h(xi_t^k)` (or its
/// extrapolated variant); `u_prev2` selects BDF2 when present.
#[derive(Clone, Copy)]
pub struct StepData<'a, T> {
    pub t_k: T,
    pub dt: T,
    pub advection: &'a [T],
    pub u_prev: &'a [T],
    pub u_prev2: Option<&'a [T]>,
    pub viscosity: Viscosity<T>,
    pub forcing: Option<VectorField<'a, T>>,
    pub traction: Option<TractionField<'a, T>>,
    pub stress: StressForm,
    pub temam: bool,
}

/// Saddle-point blocks of one step: `A u - B^T p = rhs_u`, `B u = rhs_p`.
#[derive(Debug, Clone)]
pub struct AssembledStep<T> {
    pub a: CsrMatrix<T>,
    /// `B_{q, i} = (q, J F^{-T} : grad psi_i)`, pressure rows by velocity columns.
    pub b: CsrMatrix<T>,
    pub rhs_u: Vec<T>,
    pub rhs_p: Vec<T>,
}

/// The individual velocity-velocity operators, without time-step scaling.
#[derive(Debug, Clone)]
pub struct StepBlocks<T> {
    /// `(J_{k-1} u, psi)`
    pub mass_prev: CsrMatrix<T>,
    /// `(J_k u, psi)`
    pub mass: CsrMatrix<T>,
    /// `((J_k - J_{k-1}) u, psi)`
    pub jump: CsrMatrix<T>,
    /// `(W . grad u, psi)`
    pub convection: CsrMatrix<T>,
    /// `1/2 (div W u, psi)`, integrated by parts.
    pub temam: CsrMatrix<T>,
    pub viscous: CsrMatrix<T>,
}

const NPARTS: usize = 6;

struct Local<T> {
    a: Vec<T>,
    b: Vec<T>,
    rhs: Vec<T>,
    parts: Option<Vec<Vec<T>>>,
}

/// Precomputed quadrature, basis tables and sparsity patterns for a space.
#[derive(Debug, Clone)]
pub struct Assembler<T> {
    space: Arc<TaylorHoodSpace<T>>,
    rule: QuadratureRule<T>,
    facet_rule: QuadratureRule<T>,
    phi: Vec<Vec<T>>,
    dphi: Vec<Vec<Vec3<T>>>,
    psi: Vec<Vec<T>>,
    dpsi: Vec<Vec3<T>>,
    a_template: CsrMatrix<T>,
    b_template: CsrMatrix<T>,
    p_template: CsrMatrix<T>,
    /// Compute cell contributions on the rayon pool. Accumulation is always
    /// serial in cell order, so results do not depend on this flag.
    pub parallel: bool,
}

impl<T: Real> Assembler<T> {
    /// `quadrature_degree` defaults to 6 in 2D and 5 in 3D.
    pub fn new(space: Arc<TaylorHoodSpace<T>>, quadrature_degree: Option<usize>) -> Result<Self, FemError> {
        let d = space.dim();
        let degree = quadrature_degree.unwrap_or(if d == 2 { 6 } else { 5 });
        let rule = quadrature::<T>(d, degree)?;
        let facet_rule = quadrature::<T>(d - 1, degree)?;
        let vb = space.velocity_basis();
        let pb = space.pressure_basis();
        let phi = rule.points.iter().map(|x| vb.values(x)).collect();
        let dphi = rule.points.iter().map(|x| vb.gradients(x)).collect();
        let psi = rule.points.iter().map(|x| pb.values(x)).collect();
        let dpsi = pb.gradients(&[T::zero(); 3]);

        let a_template = CsrMatrix::from_pattern(space.num_velocity_dofs(), expand_scalar(&space.node_pattern(), d));
        let b_rows = space
            .pressure_pattern()
            .into_iter()
            .map(|nodes| nodes.iter().flat_map(|&n| (0..d).map(move |k| n * d + k)).collect())
            .collect();
        let b_template = CsrMatrix::from_pattern(space.num_velocity_dofs(), b_rows);
        let mut p_rows = vec![Vec::new(); space.num_pressure_dofs()];
        for c in 0..space.mesh().num_cells() {
            let v = space.mesh().cell(c);
            for &a in v {
                p_rows[a].extend_from_slice(v);
            }
        }
        let p_template = CsrMatrix::from_pattern(space.num_pressure_dofs(), p_rows);
        Ok(Assembler {
            space,
            rule,
            facet_rule,
            phi,
            dphi,
            psi,
            dpsi,
            a_template,
            b_template,
            p_template,
            parallel: true,
        })
    }

    pub fn space(&self) -> &TaylorHoodSpace<T> {
        &self.space
    }

    pub fn space_arc(&self) -> &Arc<TaylorHoodSpace<T>> {
        &self.space
    }

    pub fn rule(&self) -> &QuadratureRule<T> {
        &self.rule
    }

    pub fn velocity_pattern(&self) -> &CsrMatrix<T> {
        &self.a_template
    }

    pub fn divergence_pattern(&self) -> &CsrMatrix<T> {
        &self.b_template
    }

    fn check(&self, map: &SpaceTimeMap<T>, data: &StepData<'_, T>) -> Result<(), FemError> {
        if map.dim() != self.space.dim() {
            return Err(FemError::DimensionMismatch { space: self.space.dim(), map: map.dim() });
        }
        let n = self.space.num_velocity_dofs();
        for v in [Some(data.advection), Some(data.u_prev), data.u_prev2].into_iter().flatten() {
            if v.len() != n {
                return Err(FemError::FieldLength { expected: n, found: v.len() });
            }
        }
        Ok(())
    }

    /// Computes per-cell results in cell order, in parallel batches when
    /// enabled, and feeds them to `sink` serially.
    fn for_cells<L: Send>(
        &self,
        kernel: impl Fn(usize) -> Result<L, MapError> + Sync,
        mut sink: impl FnMut(usize, L),
    ) -> Result<(), FemError> {
        let nc = self.space.mesh().num_cells();
        let mut start = 0;
        while start < nc {
            let end = (start + CHUNK).min(nc);
            let locals: Vec<L> = if self.parallel {
                (start..end).into_par_iter().map(&kernel).collect::<Result<_, _>>()?
            } else {
                (start..end).map(&kernel).collect::<Result<_, _>>()?
            };
            for (i, l) in locals.into_iter().enumerate() {
                sink(start + i, l);
            }
            start = end;
        }
        Ok(())
    }

    fn cell_local(&self, c: usize, map: &SpaceTimeMap<T>, data: &StepData<'_, T>, want_parts: bool) -> Result<Local<T>, MapError> {
        let sp = &*self.space;
        let mesh = sp.mesh();
        let d = sp.dim();
        let nodes = sp.cell_nodes(c);
        let nl = nodes.len();
        let nd = nl * d;
        let np = d + 1;
        let g = sp.geometry(c);
        let detg = g.measure_factor();
        let (tk, dt) = (data.t_k, data.dt);
        let half = T::half();

        let gather = |v: &[T]| -> Vec<Vec3<T>> {
            nodes.iter().map(|&n| std::array::from_fn(|k| if k < d { v[n * d + k] } else { T::zero() })).collect()
        };
        let wloc = gather(data.advection);
        let bdf2 = data.u_prev2.is_some();
        // Coefficients of the mass-type right-hand side.
        let prev = if let Some(u2) = data.u_prev2 {
            let (a1, a2) = (gather(data.u_prev), gather(u2));
            a1.iter().zip(&a2).map(|(x, y)| std::array::from_fn(|k| T::of(4.0) * x[k] - y[k])).collect()
        } else {
            gather(data.u_prev)
        };
        let h = if matches!(data.viscosity, Viscosity::Smagorinsky { .. }) { mesh.cell_diameter(c) } else { T::zero() };

        let mut a = vec![T::zero(); nd * nd];
        let mut b = vec![T::zero(); np * nd];
        let mut rhs = vec![T::zero(); nd];
        let mut parts = want_parts.then(|| vec![vec![T::zero(); nd * nd]; NPARTS]);
        let symmetric = data.stress == StressForm::Symmetric;

        for q in 0..self.rule.len() {
            let wq = self.rule.weights[q] * detg;
            let x = g.to_physical(&self.rule.points[q]);
            let sk = map.evaluate_in_cell(c, &x, tk)?;
            let jk = sk.j;
            let jm1 = map.evaluate_in_cell(c, &x, tk - dt)?.j;
            let (mass_coef, rhs_coef) = if bdf2 {
                let jm2 = map.evaluate_in_cell(c, &x, tk - dt - dt)?.j;
                let two_dt = T::two() * dt;
                let three = T::of(3.0);
                (
                    three * jk / two_dt + half * (three * jk - T::of(4.0) * jm1 + jm2) / two_dt,
                    jk / two_dt,
                )
            } else {
                (jm1 / dt + half * (jk - jm1) / dt, jm1 / dt)
            };
            let phi = &self.phi[q];
            let gm: Vec<Vec3<T>> = self.dphi[q].iter().map(|v| g.push_gradient(v)).collect();
            let gp: Vec<Vec3<T>> = gm.iter().map(|v| mat_t_vec(&sk.f_inv, v)).collect();

            let mut w = [T::zero(); 3];
            for (pa, wa) in phi.iter().zip(&wloc) {
                for k in 0..3 {
                    w[k] += *pa * wa[k];
                }
            }
            let fw = mat_vec(&sk.f_inv, &w);
            let big_w = [jk * fw[0], jk * fw[1], jk * fw[2]];
            let wdot: Vec<T> = gm.iter().map(|v| dot(&big_w, v)).collect();

            let nu = match data.viscosity {
                Viscosity::Constant(nu) => nu,
                Viscosity::Smagorinsky { nu, cs } => {
                    let mut gw = [[T::zero(); 3]; 3];
                    for (wa, ga) in wloc.iter().zip(&gp) {
                        for i in 0..3 {
                            for j in 0..3 {
                                gw[i][j] += wa[i] * ga[j];
                            }
                        }
                    }
                    smagorinsky_viscosity(&sym(&gw), h, nu, cs)
                }
            };
            let visc = nu * jk * wq;

            for ia in 0..nl {
                for ib in 0..nl {
                    let pp = phi[ia] * phi[ib];
                    let conv = wdot[ib] * phi[ia];
                    let tem = if data.temam { -half * (wdot[ib] * phi[ia] + wdot[ia] * phi[ib]) } else { T::zero() };
                    let gg = dot(&gp[ia], &gp[ib]);
                    let diag = (mass_coef * pp + conv + tem) * wq + visc * gg;
                    for al in 0..d {
                        let r = ia * d + al;
                        a[r * nd + ib * d + al] += diag;
                        rhs[r] += wq * rhs_coef * pp * prev[ib][al];
                    }
                    if symmetric {
                        for al in 0..d {
                            for be in 0..d {
                                a[(ia * d + al) * nd + ib * d + be] += visc * gp[ib][al] * gp[ia][be];
                            }
                        }
                    }
                    if let Some(p) = parts.as_mut() {
                        let vals = [jm1 * pp * wq, jk * pp * wq, (jk - jm1) * pp * wq, conv * wq, tem * wq];
                        for al in 0..d {
                            let k = (ia * d + al) * nd + ib * d + al;
                            for (m, v) in vals.iter().enumerate() {
                                p[m][k] += *v;
                            }
                            p[5][k] += visc * gg;
                        }
                        if symmetric {
                            for al in 0..d {
                                for be in 0..d {
                                    p[5][(ia * d + al) * nd + ib * d + be] += visc * gp[ib][al] * gp[ia][be];
                                }
                            }
                        }
                    }
                }
            }
            if let Some(f) = data.forcing {
                let fv = f(&sk.position, tk);
                for ia in 0..nl {
                    for al in 0..d {
                        rhs[ia * d + al] += wq * jk * phi[ia] * fv[al];
                    }
                }
            }
            let psi = &self.psi[q];
            for iq in 0..np {
                for ib in 0..nl {
                    for be in 0..d {
                        b[iq * nd + ib * d + be] += wq * jk * psi[iq] * gp[ib][be];
                    }
                }
            }
        }

        for &f in sp.cell_facets(c) {
            let facet = &mesh.facets()[f];
            let BoundaryLabel::Neumann(patch) = facet.label else { continue };
            let lv: Vec<usize> = (0..=d).filter(|&j| j != facet.local_face).collect();
            let refv = sp.velocity_basis().nodes::<T>();
            let scale = mesh.facet_area(f) * if d == 3 { T::two() } else { T::one() };
            let nhat = mesh.facet_normal(f);
            for s in 0..self.facet_rule.len() {
                let sp_ = &self.facet_rule.points[s];
                let ws = self.facet_rule.weights[s] * scale;
                let xr: Vec3<T> = std::array::from_fn(|k| {
                    let mut v = refv[lv[0]][k];
                    for m in 1..d {
                        v += sp_[m - 1] * (refv[lv[m]][k] - refv[lv[0]][k]);
                    }
                    v
                });
                let phi = sp.velocity_basis().values(&xr);
                let x = g.to_physical(&xr);
                let sk = map.evaluate_in_cell(c, &x, tk)?;
                if data.temam {
                    let mut w = [T::zero(); 3];
                    for (pa, wa) in phi.iter().zip(&wloc) {
                        for k in 0..3 {
                            w[k] += *pa * wa[k];
                        }
                    }
                    let wn = sk.j * dot(&mat_vec(&sk.f_inv, &w), &nhat);
                    for ia in 0..nl {
                        for ib in 0..nl {
                            let v = ws * half * wn * phi[ia] * phi[ib];
                            for al in 0..d {
                                let k = (ia * d + al) * nd + ib * d + al;
                                a[k] += v;
                                if let Some(p) = parts.as_mut() {
                                    p[4][k] += v;
                                }
                            }
                        }
                    }
                }
                if let Some(tr) = data.traction {
                    let fnv = mat_t_vec(&sk.f_inv, &nhat);
                    let len = norm(&fnv);
                    let n_phys = [fnv[0] / len, fnv[1] / len, fnv[2] / len];
                    let gv = tr(patch, &sk.position, tk, &n_phys);
                    for ia in 0..nl {
                        for al in 0..d {
                            rhs[ia * d + al] += ws * sk.j * len * phi[ia] * gv[al];
                        }
                    }
                }
            }
        }
        Ok(Local { a, b, rhs, parts })
    }

    fn scatter(&self, c: usize, local: &[T], m: &mut CsrMatrix<T>) {
        let d = self.space.dim();
        let nodes = self.space.cell_nodes(c);
        let nd = nodes.len() * d;
        for (ia, &na) in nodes.iter().enumerate() {
            for al in 0..d {
                let row = na * d + al;
                let lr = (ia * d + al) * nd;
                for (ib, &nb) in nodes.iter().enumerate() {
                    for be in 0..d {
                        let v = local[lr + ib * d + be];
                        if v != T::zero() {
                            m.add(row, nb * d + be, v);
                        }
                    }
                }
            }
        }
    }

    fn scatter_b(&self, c: usize, local: &[T], m: &mut CsrMatrix<T>) {
        let d = self.space.dim();
        let nodes = self.space.cell_nodes(c);
        let nd = nodes.len() * d;
        for (iq, &v) in self.space.mesh().cell(c).iter().enumerate() {
            for (ib, &nb) in nodes.iter().enumerate() {
                for be in 0..d {
                    let val = local[iq * nd + ib * d + be];
                    if val != T::zero() {
                        m.add(v, nb * d + be, val);
                    }
                }
            }
        }
    }

    /// Assembles the saddle-point blocks of one step.
    pub fn assemble(&self, map: &SpaceTimeMap<T>, data: &StepData<'_, T>) -> Result<AssembledStep<T>, FemError> {
        self.check(map, data)?;
        let mut a = self.a_template.clone();
        let mut b = self.b_template.clone();
        let mut rhs_u = vec![T::zero(); self.space.num_velocity_dofs()];
        let d = self.space.dim();
        self.for_cells(
            |c| self.cell_local(c, map, data, false),
            |c, l| {
                self.scatter(c, &l.a, &mut a);
                self.scatter_b(c, &l.b, &mut b);
                for (ia, &n) in self.space.cell_nodes(c).iter().enumerate() {
                    for al in 0..d {
                        rhs_u[n * d + al] += l.rhs[ia * d + al];
                    }
                }
            },
        )?;
        Ok(AssembledStep { a, b, rhs_u, rhs_p: vec![T::zero(); self.space.num_pressure_dofs()] })
    }

    /// Assembles the individual velocity operators of a step.
    pub fn assemble_blocks(&self, map: &SpaceTimeMap<T>, data: &StepData<'_, T>) -> Result<StepBlocks<T>, FemError> {
        self.check(map, data)?;
        let mut mats: Vec<CsrMatrix<T>> = (0..NPARTS).map(|_| self.a_template.clone()).collect();
        self.for_cells(
            |c| self.cell_local(c, map, data, true),
            |c, l| {
                for (m, p) in mats.iter_mut().zip(l.parts.as_ref().expect("parts requested")) {
                    self.scatter(c, p, m);
                }
            },
        )?;
        let mut it = mats.into_iter();
        let mut next = || it.next().unwrap();
        Ok(StepBlocks {
            mass_prev: next(),
            mass: next(),
            jump: next(),
            convection: next(),
            temam: next(),
            viscous: next(),
        })
    }

    /// Divergence block `B` at time `t` alone.
    pub fn divergence(&self, map: &SpaceTimeMap<T>, t: T) -> Result<CsrMatrix<T>, FemError> {
        if map.dim() != self.space.dim() {
            return Err(FemError::DimensionMismatch { space: self.space.dim(), map: map.dim() });
        }
        let sp = &*self.space;
        let d = sp.dim();
        let mut b = self.b_template.clone();
        self.for_cells(
            |c| {
                let g = sp.geometry(c);
                let nl = sp.cell_nodes(c).len();
                let nd = nl * d;
                let mut loc = vec![T::zero(); (d + 1) * nd];
                for q in 0..self.rule.len() {
                    let wq = self.rule.weights[q] * g.measure_factor();
                    let s = map.evaluate_in_cell(c, &g.to_physical(&self.rule.points[q]), t)?;
                    for (ib, gr) in self.dphi[q].iter().enumerate() {
                        let gp = mat_t_vec(&s.f_inv, &g.push_gradient(gr));
                        for iq in 0..=d {
                            for be in 0..d {
                                loc[iq * nd + ib * d + be] += wq * s.j * self.psi[q][iq] * gp[be];
                            }
                        }
                    }
                }
                Ok(loc)
            },
            |c, l| self.scatter_b(c, &l, &mut b),
        )?;
        Ok(b)
    }

    /// `J`-weighted P1 pressure mass and stiffness matrices at time `t`.
    pub fn pressure_operators(&self, map: &SpaceTimeMap<T>, t: T) -> Result<(CsrMatrix<T>, CsrMatrix<T>), FemError> {
        let sp = &*self.space;
        let d = sp.dim();
        let np = d + 1;
        let mut mass = self.p_template.clone();
        let mut stiff = self.p_template.clone();
        self.for_cells(
            |c| {
                let g = sp.geometry(c);
                let mut m = vec![T::zero(); np * np];
                let mut k = vec![T::zero(); np * np];
                let gm: Vec<Vec3<T>> = self.dpsi.iter().map(|v| g.push_gradient(v)).collect();
                for q in 0..self.rule.len() {
                    let wq = self.rule.weights[q] * g.measure_factor();
                    let s = map.evaluate_in_cell(c, &g.to_physical(&self.rule.points[q]), t)?;
                    let gp: Vec<Vec3<T>> = gm.iter().map(|v| mat_t_vec(&s.f_inv, v)).collect();
                    for i in 0..np {
                        for j in 0..np {
                            m[i * np + j] += wq * s.j * self.psi[q][i] * self.psi[q][j];
                            k[i * np + j] += wq * s.j * dot(&gp[i], &gp[j]);
                        }
                    }
                }
                Ok((m, k))
            },
            |c, (m, k)| {
                let v = sp.mesh().cell(c);
                for i in 0..np {
                    for j in 0..np {
                        mass.add(v[i], v[j], m[i * np + j]);
                        stiff.add(v[i], v[j], k[i * np + j]);
                    }
                }
            },
        )?;
        Ok((mass, stiff))
    }
}

/// One-shot assembly of a step (builds a throwaway [`Assembler`]).
pub fn assemble_step<T: Real>(
    space: Arc<TaylorHoodSpace<T>>,
    map: &SpaceTimeMap<T>,
    data: &StepData<'_, T>,
) -> Result<AssembledStep<T>, FemError> {
    Assembler::new(space, None)?.assemble(map, data)
}

/// `s = B^T 1`: the flux weights with `b(1, u) = s . u`.
pub fn divergence_weights<T: Real>(asm: &Assembler<T>, map: &SpaceTimeMap<T>, t: T) -> Result<Vec<T>, FemError> {
    let b = asm.divergence(map, t)?;
    Ok(b.mul_t_vec(&vec![T::one(); b.nrows()]))
}

/// Piola flux `int_{boundary} J F^{-T} u . n ds` of the boundary values of
/// `u` (interior values are ignored).
pub fn boundary_flux<T: Real>(asm: &Assembler<T>, map: &SpaceTimeMap<T>, t: T, u: &[T]) -> Result<T, FemError> {
    let s = divergence_weights(asm, map, t)?;
    let sp = asm.space();
    let d = sp.dim();
    let mut flux = T::zero();
    for n in 0..sp.num_nodes() {
        if sp.node_class(n) != super::NodeClass::Interior {
            for k in 0..d {
                flux += s[n * d + k] * u[n * d + k];
            }
        }
    }
    Ok(flux)
}

/// The constant `c` such that boundary data `u - c N` (with `N` the nodal
/// boundary normals) carries zero Piola flux.
pub fn boundary_flux_correction<T: Real>(asm: &Assembler<T>, map: &SpaceTimeMap<T>, t: T, u: &[T]) -> Result<T, FemError> {
    let sp = asm.space();
    let d = sp.dim();
    let normals = sp.interpolate_velocity(|n, _| sp.node_normal(n))?;
    let s = divergence_weights(asm, map, t)?;
    let (mut num, mut den) = (T::zero(), T::zero());
    for n in 0..sp.num_nodes() {
        if sp.node_class(n) != super::NodeClass::Interior {
            for k in 0..d {
                num += s[n * d + k] * u[n * d + k];
                den += s[n * d + k] * normals[n * d + k];
            }
        }
    }
    Ok(num / den)
}
