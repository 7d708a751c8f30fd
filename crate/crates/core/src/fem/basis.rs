//! Lagrange shape functions of degree 1 and 2 on the reference simplex.
//!
//! Local node order: vertices, then edge midpoints in `local_edges` order.

use thiserror::Error;

use crate::mesh::local_edges;
use crate::scalar::{Real, Vec3};

#[derive(Debug, Error, PartialEq)]
#[error("unsupported Lagrange degree {0} (only 1 and 2)")]
pub struct UnsupportedDegree(pub usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangeBasis {
    pub dim: usize,
    pub degree: usize,
}

impl LagrangeBasis {
    pub fn new(dim: usize, degree: usize) -> Result<Self, UnsupportedDegree> {
        if degree == 1 || degree == 2 {
            Ok(LagrangeBasis { dim, degree })
        } else {
            Err(UnsupportedDegree(degree))
        }
    }

    pub fn num_nodes(&self) -> usize {
        let nv = self.dim + 1;
        if self.degree == 1 {
            nv
        } else {
            nv + local_edges(self.dim).len()
        }
    }

    fn lambdas<T: Real>(&self, x: &Vec3<T>) -> [T; 4] {
        let mut l = [T::zero(); 4];
        l[0] = T::one() - (0..self.dim).map(|i| x[i]).sum::<T>();
        l[1..=self.dim].copy_from_slice(&x[..self.dim]);
        l
    }

    fn lambda_grad<T: Real>(&self, i: usize) -> Vec3<T> {
        let mut g = [T::zero(); 3];
        if i == 0 {
            for gk in g.iter_mut().take(self.dim) {
                *gk = -T::one();
            }
        } else {
            g[i - 1] = T::one();
        }
        g
    }

    pub fn values<T: Real>(&self, x: &Vec3<T>) -> Vec<T> {
        let l = self.lambdas(x);
        let nv = self.dim + 1;
        if self.degree == 1 {
            return l[..nv].to_vec();
        }
        let mut v: Vec<T> = (0..nv).map(|i| l[i] * (T::two() * l[i] - T::one())).collect();
        v.extend(local_edges(self.dim).iter().map(|&[a, b]| T::of(4.0) * l[a] * l[b]));
        v
    }

    /// Gradients with respect to reference coordinates.
    pub fn gradients<T: Real>(&self, x: &Vec3<T>) -> Vec<Vec3<T>> {
        let nv = self.dim + 1;
        let gl: Vec<Vec3<T>> = (0..nv).map(|i| self.lambda_grad(i)).collect();
        if self.degree == 1 {
            return gl;
        }
        let l = self.lambdas(x);
        let four = T::of(4.0);
        let mut g: Vec<Vec3<T>> =
            (0..nv).map(|i| gl[i].map(|c| c * (four * l[i] - T::one()))).collect();
        for &[a, b] in local_edges(self.dim) {
            let mut e = [T::zero(); 3];
            for k in 0..3 {
                e[k] = four * (l[a] * gl[b][k] + l[b] * gl[a][k]);
            }
            g.push(e);
        }
        g
    }

    /// Reference coordinates of the nodes.
    pub fn nodes<T: Real>(&self) -> Vec<Vec3<T>> {
        let nv = self.dim + 1;
        let mut verts = vec![[T::zero(); 3]; nv];
        for i in 1..nv {
            verts[i][i - 1] = T::one();
        }
        let mut n = verts.clone();
        if self.degree == 2 {
            for &[a, b] in local_edges(self.dim) {
                let mut m = [T::zero(); 3];
                for k in 0..3 {
                    m[k] = T::half() * (verts[a][k] + verts[b][k]);
                }
                n.push(m);
            }
        }
        n
    }
}
