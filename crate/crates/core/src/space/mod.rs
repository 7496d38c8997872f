//! Broken polynomial space of total degree `k` on a triangulation.
//!
//! Each element carries the monomials `r^I s^J`, `I + J <= k`, in reference
//! coordinates, composed with the element's affine map. Local ordering is
//! graded: degree `d = 0..=k`, and within a degree `I` runs from `d` down
//! to 0.

mod quadrature;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub use quadrature::{edge_quadrature, triangle_quadrature, EdgeRule, QuadratureRule, TriangleRule, MAX_DEGREE};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

/// Highest supported polynomial degree.
pub const MAX_POLY_DEGREE: usize = 4;

/// Local dimension `(k + 1)(k + 2) / 2`.
pub fn n_loc(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Exponent pairs `(I, J)` in local basis order.
pub fn monomial_exponents(k: usize) -> Vec<(i32, i32)> {
    let mut out = Vec::with_capacity(n_loc(k));
    for d in 0..=k as i32 {
        for i in (0..=d).rev() {
            out.push((i, d - i));
        }
    }
    out
}

fn monomial(exp: (i32, i32), r: Point) -> (f64, [f64; 2]) {
    let (i, j) = exp;
    let pow = |b: f64, e: i32| if e <= 0 { 1.0 } else { b.powi(e) };
    let value = pow(r[0], i) * pow(r[1], j);
    let dr = if i == 0 { 0.0 } else { i as f64 * pow(r[0], i - 1) * pow(r[1], j) };
    let ds = if j == 0 { 0.0 } else { j as f64 * pow(r[0], i) * pow(r[1], j - 1) };
    (value, [dr, ds])
}

/// Value and reference gradient of local basis function `i` of degree `k`.
pub fn reference_basis_eval(k: usize, i: usize, r: Point) -> Result<(f64, [f64; 2])> {
    if i >= n_loc(k) {
        return Err(Error::invalid(format!(
            "basis index {i} out of range for degree {k} (n_loc = {})",
            n_loc(k)
        )));
    }
    let exps = monomial_exponents(k);
    Ok(monomial(exps[i], r))
}

/// Basis values and reference gradients tabulated at a set of points.
#[derive(Clone, Debug)]
pub struct Tabulation {
    pub n_loc: usize,
    /// `values[q * n_loc + i]`
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

impl Tabulation {
    pub fn value(&self, q: usize, i: usize) -> f64 {
        self.values[q * self.n_loc + i]
    }

    pub fn values_at(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_loc..(q + 1) * self.n_loc]
    }

    pub fn grads_at(&self, q: usize) -> &[[f64; 2]] {
        &self.grads[q * self.n_loc..(q + 1) * self.n_loc]
    }
}

#[derive(Debug)]
pub struct DgSpace {
    mesh: Arc<Mesh>,
    degree: usize,
    n_loc: usize,
    exponents: Vec<(i32, i32)>,
    volume_rule: TriangleRule,
    edge_rule: EdgeRule,
    volume_tab: Tabulation,
    reference_mass: DMatrix<f64>,
    reference_mass_chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl DgSpace {
    /// Space of degree `k` with quadrature exactness `2k + 3` for volume and
    /// edge terms.
    pub fn new(mesh: Arc<Mesh>, k: usize) -> Result<Self> {
        if k > MAX_POLY_DEGREE {
            return Err(Error::invalid(format!(
                "polynomial degree {k} not supported (maximum {MAX_POLY_DEGREE})"
            )));
        }
        let n = n_loc(k);
        let exponents = monomial_exponents(k);
        let volume_rule = triangle_quadrature(2 * k + 3)?;
        let edge_rule = edge_quadrature(2 * k + 3)?;
        let volume_tab = tabulate(&exponents, &volume_rule.points);

        let mut reference_mass = DMatrix::zeros(n, n);
        for (q, w) in volume_rule.weights.iter().enumerate() {
            let phi = volume_tab.values_at(q);
            for i in 0..n {
                for j in 0..=i {
                    reference_mass[(i, j)] += w * phi[i] * phi[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                reference_mass[(j, i)] = reference_mass[(i, j)];
            }
        }
        let reference_mass_chol = reference_mass
            .clone()
            .cholesky()
            .ok_or(Error::NotSpd { block: 0 })?;
        Ok(DgSpace {
            mesh,
            degree: k,
            n_loc: n,
            exponents,
            volume_rule,
            edge_rule,
            volume_tab,
            reference_mass,
            reference_mass_chol,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_loc(&self) -> usize {
        self.n_loc
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_elements()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_loc * self.mesh.n_elements()
    }

    pub fn offset(&self, element: usize) -> usize {
        element * self.n_loc
    }

    pub fn dofs(&self, element: usize) -> std::ops::Range<usize> {
        let o = self.offset(element);
        o..o + self.n_loc
    }

    pub fn exponents(&self) -> &[(i32, i32)] {
        &self.exponents
    }

    pub fn volume_rule(&self) -> &TriangleRule {
        &self.volume_rule
    }

    pub fn edge_rule(&self) -> &EdgeRule {
        &self.edge_rule
    }

    /// Basis tabulated at the volume quadrature points.
    pub fn volume_tabulation(&self) -> &Tabulation {
        &self.volume_tab
    }

    pub fn tabulate(&self, points: &[Point]) -> Tabulation {
        tabulate(&self.exponents, points)
    }

    /// Local mass matrix on the reference triangle; element blocks are this
    /// times `det J`.
    pub fn reference_mass(&self) -> &DMatrix<f64> {
        &self.reference_mass
    }

    pub fn basis_eval(&self, r: Point) -> (Vec<f64>, Vec<[f64; 2]>) {
        self.exponents.iter().map(|&e| monomial(e, r)).unzip()
    }

    /// Project `f` onto the space by elementwise L2 projection.
    pub fn l2_project<F>(self: &Arc<Self>, f: F) -> Result<DgField>
    where
        F: Fn(f64, f64) -> Result<f64>,
    {
        let mut coeffs = vec![0.0; self.n_dofs()];
        let mesh = self.mesh();
        for e in 0..mesh.n_elements() {
            let mut rhs = DVector::zeros(self.n_loc);
            for (q, (r, w)) in self.volume_rule.iter().enumerate() {
                let p = mesh.map_to_physical(e, r);
                let fv = f(p[0], p[1])?;
                for (i, phi) in self.volume_tab.values_at(q).iter().enumerate() {
                    rhs[i] += w * fv * phi;
                }
            }
            // det J cancels from both sides of the local system
            let c = self.reference_mass_chol.solve(&rhs);
            coeffs[self.dofs(e)].copy_from_slice(c.as_slice());
        }
        DgField::new(self.clone(), coeffs, 0.0)
    }

    /// Largest `|(f - field, phi_i)_E|` relative to the largest `|(f, phi_i)_E|`.
    pub fn projection_residual<F>(&self, f: F, field: &DgField) -> Result<f64>
    where
        F: Fn(f64, f64) -> Result<f64>,
    {
        let mesh = self.mesh();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for e in 0..mesh.n_elements() {
            let det = mesh.triangle(e).det;
            let local = field.local(e);
            let mut moment = vec![0.0; self.n_loc];
            let mut resid = vec![0.0; self.n_loc];
            for (q, (r, w)) in self.volume_rule.iter().enumerate() {
                let p = mesh.map_to_physical(e, r);
                let fv = f(p[0], p[1])?;
                let phi = self.volume_tab.values_at(q);
                let uh: f64 = local.iter().zip(phi).map(|(c, v)| c * v).sum();
                for i in 0..self.n_loc {
                    moment[i] += w * det * fv * phi[i];
                    resid[i] += w * det * (fv - uh) * phi[i];
                }
            }
            worst = resid.iter().fold(worst, |m, v| m.max(v.abs()));
            scale = moment.iter().fold(scale, |m, v| m.max(v.abs()));
        }
        Ok(if scale > 0.0 { worst / scale } else { worst })
    }
}

fn tabulate(exponents: &[(i32, i32)], points: &[Point]) -> Tabulation {
    let n = exponents.len();
    let mut values = Vec::with_capacity(points.len() * n);
    let mut grads = Vec::with_capacity(points.len() * n);
    for &r in points {
        for &e in exponents {
            let (v, g) = monomial(e, r);
            values.push(v);
            grads.push(g);
        }
    }
    Tabulation { n_loc: n, values, grads }
}

/// Coefficient vector over a [`DgSpace`] at a time stamp.
#[derive(Clone, Debug)]
pub struct DgField {
    space: Arc<DgSpace>,
    pub coeffs: Vec<f64>,
    pub time: f64,
}

impl DgField {
    pub fn new(space: Arc<DgSpace>, coeffs: Vec<f64>, time: f64) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::invalid(format!(
                "coefficient length {} does not match {} dofs",
                coeffs.len(),
                space.n_dofs()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("coefficient {i} is not finite")));
        }
        Ok(DgField { space, coeffs, time })
    }

    pub fn zeros(space: Arc<DgSpace>) -> Self {
        let n = space.n_dofs();
        DgField {
            space,
            coeffs: vec![0.0; n],
            time: 0.0,
        }
    }

    pub fn space(&self) -> &Arc<DgSpace> {
        &self.space
    }

    pub fn local(&self, element: usize) -> &[f64] {
        &self.coeffs[self.space.dofs(element)]
    }

    /// `U_h` on `element` at reference point `r`.
    pub fn eval(&self, element: usize, r: Point) -> f64 {
        self.local(element)
            .iter()
            .zip(self.space.exponents())
            .map(|(c, &e)| c * monomial(e, r).0)
            .sum()
    }

    /// Value and physical gradient on `element` at reference point `r`.
    pub fn eval_with_gradient(&self, element: usize, r: Point) -> (f64, [f64; 2]) {
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for (c, &e) in self.local(element).iter().zip(self.space.exponents()) {
            let (phi, dphi) = monomial(e, r);
            v += c * phi;
            g[0] += c * dphi[0];
            g[1] += c * dphi[1];
        }
        (v, self.space.mesh().pull_back_gradient(element, g))
    }
}

/// Value of `field` on `element` at a reference point.
pub fn eval_field(field: &DgField, element: usize, r: Point) -> f64 {
    field.eval(element, r)
}
