//! Taylor-Hood P2/P1 degrees of freedom on a reference mesh.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::basis::LagrangeBasis;
use super::geometry::CellGeometry;
use super::FemError;
use crate::mesh::{local_edges, BoundaryLabel, SimplicialMesh};
use crate::scalar::{Real, Vec3};

/// Boundary classification of a velocity node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    NoSlip,
    Dirichlet(u32),
    /// On the Neumann boundary only; not constrained.
    Neumann(u32),
}

impl NodeClass {
    fn from_label(l: BoundaryLabel) -> Self {
        match l {
            BoundaryLabel::NoSlip => NodeClass::NoSlip,
            BoundaryLabel::Dirichlet(p) => NodeClass::Dirichlet(p),
            BoundaryLabel::Neumann(p) => NodeClass::Neumann(p),
        }
    }

    pub fn is_constrained(self) -> bool {
        matches!(self, NodeClass::NoSlip | NodeClass::Dirichlet(_))
    }
}

/// Velocity nodes are the mesh vertices followed by the edge midpoints;
/// velocity dof `node * d + component`. Pressure dofs are the vertices.
#[derive(Debug, Clone)]
pub struct TaylorHoodSpace<T> {
    mesh: Arc<SimplicialMesh<T>>,
    degree: usize,
    velocity_basis: LagrangeBasis,
    pressure_basis: LagrangeBasis,
    geometry: Vec<CellGeometry<T>>,
    node_class: Vec<NodeClass>,
    node_cell: Vec<usize>,
    node_normal: Vec<Vec3<T>>,
    cell_facets: Vec<Vec<usize>>,
}

impl<T: Real> TaylorHoodSpace<T> {
    /// Space of degree `m`: P(m+1) velocity with P(m) pressure. Only `m = 1`
    /// is implemented.
    pub fn new(mesh: Arc<SimplicialMesh<T>>, m: usize) -> Result<Self, FemError> {
        if m != 1 {
            return Err(FemError::UnsupportedDegree(m));
        }
        let d = mesh.dim();
        let nv = mesh.num_vertices();
        let nn = nv + mesh.num_edges();
        let geometry = (0..mesh.num_cells()).map(|c| CellGeometry::new(d, &mesh.cell_points(c))).collect();

        let mut node_cell = vec![usize::MAX; nn];
        for c in (0..mesh.num_cells()).rev() {
            for &v in mesh.cell(c) {
                node_cell[v] = c;
            }
            for &e in mesh.cell_edges(c) {
                node_cell[nv + e] = c;
            }
        }

        let mut node_class = vec![NodeClass::Interior; nn];
        let mut best: Vec<u8> = vec![0; nn];
        let mut node_normal = vec![[T::zero(); 3]; nn];
        let mut cell_facets = vec![Vec::new(); mesh.num_cells()];
        for (f, facet) in mesh.facets().iter().enumerate() {
            cell_facets[facet.cell].push(f);
            let prec = facet.label.precedence();
            let n = mesh.facet_normal(f);
            let area = mesh.facet_area(f);
            for node in Self::facet_nodes_of(&mesh, f) {
                // Ties between patches of the same kind go to the smaller id.
                let cls = NodeClass::from_label(facet.label);
                if prec > best[node] || (prec == best[node] && Self::patch(cls) < Self::patch(node_class[node])) {
                    best[node] = prec;
                    node_class[node] = cls;
                }
                for k in 0..3 {
                    node_normal[node][k] += area * n[k];
                }
            }
        }
        for n in node_normal.iter_mut() {
            let l = crate::linalg::norm(n);
            if l > T::zero() {
                *n = [n[0] / l, n[1] / l, n[2] / l];
            }
        }
        Ok(TaylorHoodSpace {
            velocity_basis: LagrangeBasis { dim: d, degree: m + 1 },
            pressure_basis: LagrangeBasis { dim: d, degree: m },
            mesh,
            degree: m,
            geometry,
            node_class,
            node_cell,
            node_normal,
            cell_facets,
        })
    }

    fn patch(c: NodeClass) -> u32 {
        match c {
            NodeClass::Dirichlet(p) | NodeClass::Neumann(p) => p,
            _ => u32::MAX,
        }
    }

    /// Velocity nodes (vertices and edges) on boundary facet `f`.
    fn facet_nodes_of(mesh: &SimplicialMesh<T>, f: usize) -> Vec<usize> {
        let facet = &mesh.facets()[f];
        let nv = mesh.num_vertices();
        let mut nodes: Vec<usize> = mesh.facet_vertices(f).to_vec();
        let edges = mesh.cell_edges(facet.cell);
        for (k, &[a, b]) in local_edges(mesh.dim()).iter().enumerate() {
            if a != facet.local_face && b != facet.local_face {
                nodes.push(nv + edges[k]);
            }
        }
        nodes
    }

    pub fn facet_nodes(&self, f: usize) -> Vec<usize> {
        Self::facet_nodes_of(&self.mesh, f)
    }

    pub fn mesh(&self) -> &SimplicialMesh<T> {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<SimplicialMesh<T>> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn velocity_basis(&self) -> LagrangeBasis {
        self.velocity_basis
    }

    pub fn pressure_basis(&self) -> LagrangeBasis {
        self.pressure_basis
    }

    pub fn geometry(&self, c: usize) -> &CellGeometry<T> {
        &self.geometry[c]
    }

    pub fn num_nodes(&self) -> usize {
        self.node_class.len()
    }

    pub fn num_velocity_dofs(&self) -> usize {
        self.num_nodes() * self.dim()
    }

    pub fn num_pressure_dofs(&self) -> usize {
        self.mesh.num_vertices()
    }

    /// Velocity nodes of cell `c` in local basis order.
    pub fn cell_nodes(&self, c: usize) -> Vec<usize> {
        let nv = self.mesh.num_vertices();
        let mut n = self.mesh.cell(c).to_vec();
        n.extend(self.mesh.cell_edges(c).iter().map(|&e| nv + e));
        n
    }

    /// Reference-domain coordinates of velocity node `n`.
    pub fn node_coords(&self, n: usize) -> Vec3<T> {
        let nv = self.mesh.num_vertices();
        if n < nv {
            self.mesh.vertex(n)
        } else {
            self.mesh.edge_midpoint(n - nv)
        }
    }

    pub fn node_class(&self, n: usize) -> NodeClass {
        self.node_class[n]
    }

    /// A cell containing node `n`.
    pub fn node_cell(&self, n: usize) -> usize {
        self.node_cell[n]
    }

    /// Area-weighted average outward normal at a boundary node (zero inside).
    pub fn node_normal(&self, n: usize) -> Vec3<T> {
        self.node_normal[n]
    }

    /// Boundary facets owned by cell `c`.
    pub fn cell_facets(&self, c: usize) -> &[usize] {
        &self.cell_facets[c]
    }

    pub fn constrained_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&n| self.node_class[n].is_constrained()).collect()
    }

    /// Node-to-node coupling pattern of the velocity space.
    pub fn node_pattern(&self) -> Vec<Vec<usize>> {
        let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.num_nodes()];
        for c in 0..self.mesh.num_cells() {
            let nodes = self.cell_nodes(c);
            for &a in &nodes {
                rows[a].extend(nodes.iter().copied());
            }
        }
        rows.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Pressure-vertex to velocity-node coupling pattern.
    pub fn pressure_pattern(&self) -> Vec<Vec<usize>> {
        let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.num_pressure_dofs()];
        for c in 0..self.mesh.num_cells() {
            let nodes = self.cell_nodes(c);
            for &v in self.mesh.cell(c) {
                rows[v].extend(nodes.iter().copied());
            }
        }
        rows.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Nodal interpolant of a vector field given in reference coordinates.
    pub fn interpolate_velocity(&self, f: impl Fn(usize, &Vec3<T>) -> Vec3<T>) -> Result<Vec<T>, FemError> {
        let d = self.dim();
        let mut u = vec![T::zero(); self.num_velocity_dofs()];
        for n in 0..self.num_nodes() {
            let x = self.node_coords(n);
            let v = f(n, &x);
            for k in 0..d {
                if !v[k].is_finite() {
                    return Err(FemError::NonFinite { node: n, point: x.map(|c| c.to_f64_lossy()) });
                }
                u[n * d + k] = v[k];
            }
        }
        Ok(u)
    }

    /// Nodal P1 interpolant of a scalar field.
    pub fn interpolate_pressure(&self, f: impl Fn(&Vec3<T>) -> T) -> Result<Vec<T>, FemError> {
        (0..self.num_pressure_dofs())
            .map(|v| {
                let x = self.mesh.vertex(v);
                let val = f(&x);
                if val.is_finite() {
                    Ok(val)
                } else {
                    Err(FemError::NonFinite { node: v, point: x.map(|c| c.to_f64_lossy()) })
                }
            })
            .collect()
    }

    /// Velocity value at reference point `xr` of cell `c`.
    pub fn velocity_in_cell(&self, u: &[T], c: usize, xr: &Vec3<T>) -> Vec3<T> {
        let d = self.dim();
        let phi = self.velocity_basis.values(xr);
        let mut v = [T::zero(); 3];
        for (a, &n) in self.cell_nodes(c).iter().enumerate() {
            for k in 0..d {
                v[k] += phi[a] * u[n * d + k];
            }
        }
        v
    }

    /// Reference-coordinate velocity gradient `(grad u)_{ij} = d u_i / d x_j`
    /// at reference point `xr` of cell `c`.
    pub fn velocity_gradient_in_cell(&self, u: &[T], c: usize, xr: &Vec3<T>) -> crate::linalg::Mat3<T> {
        let d = self.dim();
        let g = &self.geometry[c];
        let grads = self.velocity_basis.gradients(xr);
        let mut m = [[T::zero(); 3]; 3];
        for (a, &n) in self.cell_nodes(c).iter().enumerate() {
            let gp = g.push_gradient(&grads[a]);
            for i in 0..d {
                for j in 0..d {
                    m[i][j] += u[n * d + i] * gp[j];
                }
            }
        }
        m
    }

    pub fn pressure_in_cell(&self, p: &[T], c: usize, xr: &Vec3<T>) -> T {
        let psi = self.pressure_basis.values(xr);
        self.mesh.cell(c).iter().zip(&psi).map(|(&v, &s)| s * p[v]).sum()
    }

    /// Velocity at a reference-domain point, located by search.
    pub fn velocity_at(&self, u: &[T], x: &Vec3<T>) -> Option<Vec3<T>> {
        let c = self.mesh.locate(x)?;
        Some(self.velocity_in_cell(u, c, &self.geometry[c].to_reference(x)))
    }
}
