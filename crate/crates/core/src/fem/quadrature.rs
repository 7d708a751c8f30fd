//! Positive-weight quadrature on reference simplices.
//!
//! Rules are conical (collapsed-coordinate) products of Gauss-Jacobi rules,
//! available for any exactness degree. The reference simplex has vertices at
//! the origin and the unit points `e_1 .. e_d`.

use thiserror::Error;

use crate::scalar::{Real, Vec3};

/// Highest exactness degree offered.
pub const MAX_DEGREE: usize = 30;

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("no rule of degree {degree} (maximum {MAX_DEGREE})")]
    UnsupportedDegree { degree: usize },
    #[error("unsupported simplex dimension {0}")]
    Dimension(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    pub dim: usize,
    /// Reference coordinates of the points.
    pub points: Vec<Vec3<T>>,
    pub weights: Vec<T>,
    pub degree: usize,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Barycentric coordinates of point `q`.
    pub fn barycentric(&self, q: usize) -> Vec<T> {
        let p = &self.points[q];
        let mut l = vec![T::one() - (0..self.dim).map(|i| p[i]).sum::<T>()];
        l.extend((0..self.dim).map(|i| p[i]));
        l
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Jacobi polynomial `P_n^{(a,b)}(x)` and its derivative.
fn jacobi(n: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    let eval = |n: usize, a: f64, b: f64| -> f64 {
        if n == 0 {
            return 1.0;
        }
        let mut p0 = 1.0;
        let mut p1 = 0.5 * ((a - b) + (a + b + 2.0) * x);
        for k in 2..=n {
            let k = k as f64;
            let c = 2.0 * k + a + b;
            let a1 = 2.0 * k * (k + a + b) * (c - 2.0);
            let a2 = (c - 1.0) * (a * a - b * b);
            let a3 = (c - 2.0) * (c - 1.0) * c;
            let a4 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * c;
            let p2 = ((a2 + a3 * x) * p1 - a4 * p0) / a1;
            p0 = p1;
            p1 = p2;
        }
        p1
    };
    let p = eval(n, a, b);
    let dp = if n == 0 { 0.0 } else { 0.5 * (n as f64 + a + b + 1.0) * eval(n - 1, a + 1.0, b + 1.0) };
    (p, dp)
}

/// Gauss-Jacobi nodes and weights on `[-1, 1]` for the weight `(1-x)^a`,
/// with integer `a`.
fn gauss_jacobi(n: usize, a: usize) -> (Vec<f64>, Vec<f64>) {
    let af = a as f64;
    let mut x: Vec<f64> = Vec::with_capacity(n);
    for k in 0..n {
        let mut r = -((2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos();
        if k > 0 {
            r = 0.5 * (r + x[k - 1]);
        }
        for _ in 0..200 {
            let s: f64 = x.iter().map(|xi| 1.0 / (r - xi)).sum();
            let (p, dp) = jacobi(n, af, 0.0, r);
            let delta = -p / (dp - s * p);
            r += delta;
            if delta.abs() < 1e-16 {
                break;
            }
        }
        x.push(r);
    }
    // w_i = Gamma(n+a+1) Gamma(n+1) / (Gamma(n+a+1) n!) 2^{a+1} / ((1-x^2) P'^2)
    //     = 2^{a+1} / ((1 - x^2) P'(x)^2)  since b = 0
    let c = 2f64.powi(a as i32 + 1) * factorial(n + a) * factorial(n) / (factorial(n + a) * factorial(n));
    let w = x
        .iter()
        .map(|&xi| {
            let (_, dp) = jacobi(n, af, 0.0, xi);
            c / ((1.0 - xi * xi) * dp * dp)
        })
        .collect();
    (x, w)
}

/// Rule on `[0, 1]` for the weight `(1-u)^a`.
fn unit_rule(n: usize, a: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_jacobi(n, a);
    let scale = 2f64.powi(-(a as i32) - 1);
    (x.iter().map(|xi| 0.5 * (1.0 + xi)).collect(), w.iter().map(|wi| wi * scale).collect())
}

/// Quadrature rule on the reference simplex of dimension `dim` (1, 2 or 3)
/// exact for polynomials of total degree `degree`.
pub fn quadrature<T: Real>(dim: usize, degree: usize) -> Result<QuadratureRule<T>, QuadratureError> {
    if degree > MAX_DEGREE {
        return Err(QuadratureError::UnsupportedDegree { degree });
    }
    let n = degree / 2 + 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        1 => {
            let (u, wu) = unit_rule(n, 0);
            for (ui, wi) in u.iter().zip(&wu) {
                points.push([T::of(*ui), T::zero(), T::zero()]);
                weights.push(T::of(*wi));
            }
        }
        2 => {
            let (u, wu) = unit_rule(n, 1);
            let (v, wv) = unit_rule(n, 0);
            for (ui, wui) in u.iter().zip(&wu) {
                for (vi, wvi) in v.iter().zip(&wv) {
                    points.push([T::of(*ui), T::of(vi * (1.0 - ui)), T::zero()]);
                    weights.push(T::of(wui * wvi));
                }
            }
        }
        3 => {
            let (u, wu) = unit_rule(n, 2);
            let (v, wv) = unit_rule(n, 1);
            let (w, ww) = unit_rule(n, 0);
            for (ui, wui) in u.iter().zip(&wu) {
                for (vi, wvi) in v.iter().zip(&wv) {
                    for (wi, wwi) in w.iter().zip(&ww) {
                        points.push([
                            T::of(*ui),
                            T::of(vi * (1.0 - ui)),
                            T::of(wi * (1.0 - ui) * (1.0 - vi)),
                        ]);
                        weights.push(T::of(wui * wvi * wwi));
                    }
                }
            }
        }
        _ => return Err(QuadratureError::Dimension(dim)),
    }
    Ok(QuadratureRule { dim, points, weights, degree })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact monomial integral over the reference simplex (Dirichlet formula).
    fn exact_monomial(exps: &[usize]) -> f64 {
        let num: f64 = exps.iter().map(|&e| factorial(e)).product();
        num / factorial(exps.iter().sum::<usize>() + exps.len())
    }

    #[test]
    fn monomials_integrate_exactly() {
        for dim in 1..=3usize {
            for degree in 0..=10usize {
                let rule = quadrature::<f64>(dim, degree).unwrap();
                assert!(rule.weights.iter().all(|w| *w > 0.0));
                for a in 0..=degree {
                    for b in 0..=(if dim >= 2 { degree - a } else { 0 }) {
                        for c in 0..=(if dim == 3 { degree - a - b } else { 0 }) {
                            let exps = [a, b, c];
                            let approx: f64 = rule
                                .points
                                .iter()
                                .zip(&rule.weights)
                                .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
                                .sum();
                            let exact = exact_monomial(&exps[..dim]);
                            assert!(
                                (approx - exact).abs() < 1e-13,
                                "dim {dim} degree {degree} exps {exps:?}: {approx} vs {exact}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn named_examples() {
        let tet = quadrature::<f64>(3, 0).unwrap();
        assert!((tet.weights.iter().sum::<f64>() - 1.0 / 6.0).abs() < 1e-15);
        let tri = quadrature::<f64>(2, 1).unwrap();
        let int_x: f64 = tri.points.iter().zip(&tri.weights).map(|(p, w)| w * p[0]).sum();
        assert!((int_x - 1.0 / 6.0).abs() < 1e-15);
        let tri = quadrature::<f64>(2, 4).unwrap();
        let v: f64 = tri.points.iter().zip(&tri.weights).map(|(p, w)| w * p[0].powi(2) * p[1].powi(2)).sum();
        assert!((v - 1.0 / 180.0).abs() < 1e-15);
    }

    #[test]
    fn unsupported_degree() {
        assert!(matches!(quadrature::<f64>(2, 99), Err(QuadratureError::UnsupportedDegree { degree: 99 })));
        assert!(matches!(quadrature::<f64>(4, 2), Err(QuadratureError::Dimension(4))));
    }

    #[test]
    fn single_precision_rule() {
        let r = quadrature::<f32>(3, 5).unwrap();
        assert!((r.weights.iter().sum::<f32>() - 1.0 / 6.0).abs() < 1e-6);
    }
}
