//! Gauss rules on the unit interval and collapsed (Duffy) product rules on
//! the reference triangle `{r, s >= 0, r + s <= 1}`.

use crate::error::{Error, Result};

/// Highest polynomial exactness the rule generators accept.
pub const MAX_DEGREE: usize = 40;

#[derive(Clone, Debug)]
pub struct QuadratureRule<P> {
    pub points: Vec<P>,
    pub weights: Vec<f64>,
    /// Polynomials of total degree up to this are integrated exactly.
    pub degree: usize,
}

pub type TriangleRule = QuadratureRule<[f64; 2]>;
pub type EdgeRule = QuadratureRule<f64>;

impl<P: Copy> QuadratureRule<P> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (P, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss-Legendre rule on `[0, 1]` exact for degree `degree`, with
/// `ceil((degree + 1) / 2)` points.
pub fn edge_quadrature(degree: usize) -> Result<EdgeRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree {
            requested: degree,
            max: MAX_DEGREE,
        });
    }
    Ok(gauss_unit_interval(degree))
}

fn gauss_unit_interval(degree: usize) -> EdgeRule {
    let n = (degree + 2) / 2;
    let (x, w) = gauss_legendre(n);
    QuadratureRule {
        points: x.iter().map(|&xi| 0.5 * (xi + 1.0)).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
        degree,
    }
}

/// Rule on the reference triangle exact for total degree `degree`.
///
/// Built from the collapsed map `(a, b) -> (a, b (1 - a))` whose Jacobian
/// `1 - a` raises the degree in `a` by one.
pub fn triangle_quadrature(degree: usize) -> Result<TriangleRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree {
            requested: degree,
            max: MAX_DEGREE,
        });
    }
    let outer = gauss_unit_interval(degree + 1);
    let inner = gauss_unit_interval(degree);
    let mut points = Vec::with_capacity(outer.len() * inner.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (a, wa) in outer.iter() {
        for (b, wb) in inner.iter() {
            points.push([a, b * (1.0 - a)]);
            weights.push(wa * wb * (1.0 - a));
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        degree,
    })
}
