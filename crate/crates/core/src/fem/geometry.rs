use crate::linalg::{inverse, mat_t_vec, mat_vec, vadd, vsub, Mat3};
use crate::scalar::{Real, Vec3};

/// Affine map `x = v0 + G x_ref` from the reference simplex onto a cell.
#[derive(Debug, Clone)]
pub struct CellGeometry<T> {
    pub dim: usize,
    pub origin: Vec3<T>,
    pub jacobian: Mat3<T>,
    pub jacobian_inv: Mat3<T>,
    /// `det G`; the cell measure is `|det G| / dim!`.
    pub det: T,
}

impl<T: Real> CellGeometry<T> {
    pub fn new(dim: usize, points: &[Vec3<T>]) -> Self {
        let mut g = crate::linalg::identity::<T>();
        for k in 0..dim {
            let e = vsub(&points[k + 1], &points[0]);
            for i in 0..dim {
                g[i][k] = e[i];
            }
        }
        let (inv, det) = inverse(&g).unwrap_or((crate::linalg::zeros(), T::zero()));
        CellGeometry { dim, origin: points[0], jacobian: g, jacobian_inv: inv, det }
    }

    pub fn to_physical(&self, xr: &Vec3<T>) -> Vec3<T> {
        vadd(&self.origin, &mat_vec(&self.jacobian, xr))
    }

    pub fn to_reference(&self, x: &Vec3<T>) -> Vec3<T> {
        mat_vec(&self.jacobian_inv, &vsub(x, &self.origin))
    }

    /// Maps a reference-element gradient to a cell gradient, `G^{-T} g`.
    #[inline]
    pub fn push_gradient(&self, g: &Vec3<T>) -> Vec3<T> {
        mat_t_vec(&self.jacobian_inv, g)
    }

    /// Quadrature weight scaling, `|det G|`.
    pub fn measure_factor(&self) -> T {
        self.det.abs()
    }
}
