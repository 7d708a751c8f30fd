//! Boundary data and the constrained saddle-point system.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::SolverError;
use crate::fem::{AssembledStep, CsrMatrix, NodeClass, TaylorHoodSpace};
use crate::map::SpaceTimeMap;
use crate::mesh::BoundaryLabel;
use crate::scalar::{Real, Vec3};

/// Prescribed velocity `g(position, t)` in physical coordinates.
pub type DirichletFn<T> = Arc<dyn Fn(&Vec3<T>, T) -> Vec3<T> + Send + Sync>;
/// Prescribed traction `g(position, t, physical unit normal)`.
pub type NeumannFn<T> = Arc<dyn Fn(&Vec3<T>, T, &Vec3<T>) -> Vec3<T> + Send + Sync>;

/// Data for every labeled boundary patch. No-slip patches need no data:
/// they move with the wall.
#[derive(Clone, Default)]
pub struct BoundaryConditionSet<T> {
    dirichlet: BTreeMap<u32, DirichletFn<T>>,
    /// `None` is the do-nothing (zero traction) condition.
    neumann: BTreeMap<u32, Option<NeumannFn<T>>>,
}

impl<T> fmt::Debug for BoundaryConditionSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryConditionSet")
            .field("dirichlet", &self.dirichlet.keys().collect::<Vec<_>>())
            .field("neumann", &self.neumann.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl<T: Real> BoundaryConditionSet<T> {
    pub fn new() -> Self {
        BoundaryConditionSet { dirichlet: BTreeMap::new(), neumann: BTreeMap::new() }
    }

    pub fn dirichlet(mut self, patch: u32, g: DirichletFn<T>) -> Self {
        self.dirichlet.insert(patch, g);
        self
    }

    pub fn neumann(mut self, patch: u32, g: Option<NeumannFn<T>>) -> Self {
        self.neumann.insert(patch, g);
        self
    }

    pub fn dirichlet_data(&self, patch: u32) -> Option<&DirichletFn<T>> {
        self.dirichlet.get(&patch)
    }

    pub fn neumann_data(&self, patch: u32) -> Option<&NeumannFn<T>> {
        self.neumann.get(&patch).and_then(|g| g.as_ref())
    }

    /// Every label on the mesh must have data.
    pub fn check(&self, labels: &[BoundaryLabel]) -> Result<(), SolverError> {
        for &l in labels {
            let ok = match l {
                BoundaryLabel::NoSlip => true,
                BoundaryLabel::Dirichlet(p) => self.dirichlet.contains_key(&p),
                BoundaryLabel::Neumann(p) => self.neumann.contains_key(&p),
            };
            if !ok {
                return Err(SolverError::MissingBoundaryCondition(l));
            }
        }
        Ok(())
    }
}

/// Nodal boundary values at `t_k` for every constrained velocity dof.
#[derive(Debug, Clone)]
pub struct BoundaryValues<T> {
    /// `(dof, value)`, sorted by dof.
    pub dofs: Vec<(usize, T)>,
    /// Flux correction constant that was subtracted along the nodal normals.
    pub c_perp: T,
}

/// Evaluates boundary data at `t_k`. `wall` holds the nodal wall velocities.
/// When `flux_weights` is given (no open boundary), the values are corrected
/// by `-c N` so that their discrete Piola flux vanishes.
pub fn boundary_values<T: Real>(
    space: &TaylorHoodSpace<T>,
    map: &SpaceTimeMap<T>,
    bcs: &BoundaryConditionSet<T>,
    t_k: T,
    wall: &[T],
    flux_weights: Option<&[T]>,
) -> Result<BoundaryValues<T>, SolverError> {
    let d = space.dim();
    let mut dofs = Vec::new();
    let mut nodes = Vec::new();
    for n in 0..space.num_nodes() {
        let v: Vec3<T> = match space.node_class(n) {
            NodeClass::NoSlip => [wall[n * d], wall[n * d + 1], if d == 3 { wall[n * d + 2] } else { T::zero() }],
            NodeClass::Dirichlet(p) => {
                let g = bcs
                    .dirichlet_data(p)
                    .ok_or(SolverError::MissingBoundaryCondition(BoundaryLabel::Dirichlet(p)))?;
                let x = space.node_coords(n);
                let s = map.evaluate_in_cell(space.node_cell(n), &x, t_k)?;
                g(&s.position, t_k)
            }
            _ => continue,
        };
        nodes.push(n);
        for k in 0..d {
            dofs.push((n * d + k, v[k]));
        }
    }
    let mut c_perp = T::zero();
    if let Some(s) = flux_weights {
        let (mut num, mut den) = (T::zero(), T::zero());
        for (i, &n) in nodes.iter().enumerate() {
            let nn = space.node_normal(n);
            for k in 0..d {
                num += s[n * d + k] * dofs[i * d + k].1;
                den += s[n * d + k] * nn[k];
            }
        }
        if den != T::zero() {
            c_perp = num / den;
            for (i, &n) in nodes.iter().enumerate() {
                let nn = space.node_normal(n);
                for k in 0..d {
                    dofs[i * d + k].1 -= c_perp * nn[k];
                }
            }
        }
    }
    Ok(BoundaryValues { dofs, c_perp })
}

/// The full system `[A -B^T g; -B 0 0; g^T 0 0]` on `(u, p, lambda)` with the
/// constrained velocity dofs eliminated symmetrically. The bordered row is
/// present only when `gauge` is given and fixes `g . p = 0`.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    pub nu: usize,
    pub np: usize,
    pub gauged: bool,
}

/// Pattern of the constrained system; depends only on the space and whether
/// the pressure gauge is present, so symbolic factorizations can be reused.
pub fn system_pattern<T: Real>(a: &CsrMatrix<T>, b: &CsrMatrix<T>, gauged: bool) -> CsrMatrix<T> {
    let (nu, np) = (a.nrows(), b.nrows());
    let bt = b.transpose();
    let mut rows = Vec::with_capacity(nu + np + gauged as usize);
    for i in 0..nu {
        let mut r: Vec<usize> = a.row(i).0.to_vec();
        r.extend(bt.row(i).0.iter().map(|&q| nu + q));
        rows.push(r);
    }
    for q in 0..np {
        let mut r: Vec<usize> = b.row(q).0.to_vec();
        if gauged {
            r.push(nu + np);
        }
        rows.push(r);
    }
    if gauged {
        rows.push((nu..nu + np).collect());
    }
    CsrMatrix::from_pattern(nu + np + gauged as usize, rows)
}

/// Applies Dirichlet values by symmetric elimination and borders the
/// pressure block with `gauge` when given.
pub fn apply_boundary_conditions<T: Real>(
    step: &AssembledStep<T>,
    values: &BoundaryValues<T>,
    gauge: Option<&[T]>,
) -> ConstrainedSystem<T> {
    let (nu, np) = (step.a.nrows(), step.b.nrows());
    let gauged = gauge.is_some();
    let mut fixed: Vec<Option<T>> = vec![None; nu];
    for &(i, v) in &values.dofs {
        fixed[i] = Some(v);
    }
    let mut m = system_pattern(&step.a, &step.b, gauged);
    let mut rhs = vec![T::zero(); m.nrows()];
    for i in 0..nu {
        if let Some(v) = fixed[i] {
            m.add(i, i, T::one());
            rhs[i] = v;
            continue;
        }
        rhs[i] = step.rhs_u[i];
        let (cols, vals) = step.a.row(i);
        for (&j, &a) in cols.iter().zip(vals) {
            match fixed[j] {
                Some(v) => rhs[i] -= a * v,
                None => m.add(i, j, a),
            }
        }
    }
    let bt = step.b.transpose();
    for i in 0..nu {
        if fixed[i].is_some() {
            continue;
        }
        let (cols, vals) = bt.row(i);
        for (&q, &bv) in cols.iter().zip(vals) {
            m.add(i, nu + q, -bv);
        }
    }
    for q in 0..np {
        rhs[nu + q] = -step.rhs_p[q];
        let (cols, vals) = step.b.row(q);
        for (&j, &bv) in cols.iter().zip(vals) {
            match fixed[j] {
                Some(v) => rhs[nu + q] += bv * v,
                None => m.add(nu + q, j, -bv),
            }
        }
    }
    if let Some(g) = gauge {
        for q in 0..np {
            m.add(nu + q, nu + np, g[q]);
            m.add(nu + np, nu + q, g[q]);
        }
    }
    ConstrainedSystem { matrix: m, rhs, nu, np, gauged }
}
