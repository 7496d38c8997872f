//! Dense reference assembly straight from the definitions of the mass,
//! interior-penalty and upwind forms.
//!
//! Nothing here reuses the library's quadrature, edge tables or trace
//! frames: adjacency comes from the triangle vertex lists, integrals use
//! collapsed tensor Gauss-Legendre rules built with Golub-Welsch, and traces
//! are evaluated by inverting each element map at physical points. Only the
//! monomial basis itself is taken from the space.

use std::collections::BTreeMap;

use airdg::assembly::SparseMatrix;
use airdg::mesh::Mesh;
use airdg::model::ProblemSpec;
use airdg::space::DgSpace;
use nalgebra::{DMatrix, SymmetricEigen};

/// Points per direction; exact for polynomial integrands of degree 15.
pub const GAUSS_POINTS: usize = 8;

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        let k = i.max(j) as f64;
        if i.abs_diff(j) == 1 {
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v = eig.eigenvectors[(0, i)];
            (0.5 * (eig.eigenvalues[i] + 1.0), v * v)
        })
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// Duffy-collapsed rule on the reference triangle, weights summing to 1/2.
pub fn triangle_rule(n: usize) -> Vec<([f64; 2], f64)> {
    let g = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for &(s, ws) in &g {
        for &(t, wt) in &g {
            out.push(([s, t * (1.0 - s)], ws * wt * (1.0 - s)));
        }
    }
    out
}

struct Element {
    origin: [f64; 2],
    /// Columns `v1 - v0`, `v2 - v0`.
    jac: [[f64; 2]; 2],
    det: f64,
}

impl Element {
    fn new(mesh: &Mesh, t: usize) -> Self {
        let v = mesh.triangle(t).vertices.map(|i| mesh.vertices()[i]);
        let jac = [[v[1][0] - v[0][0], v[2][0] - v[0][0]], [v[1][1] - v[0][1], v[2][1] - v[0][1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        Element { origin: v[0], jac, det }
    }

    fn to_physical(&self, r: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            self.origin[1] + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    fn to_reference(&self, p: [f64; 2]) -> [f64; 2] {
        let (dx, dy) = (p[0] - self.origin[0], p[1] - self.origin[1]);
        [
            (self.jac[1][1] * dx - self.jac[0][1] * dy) / self.det,
            (-self.jac[1][0] * dx + self.jac[0][0] * dy) / self.det,
        ]
    }

    /// Values and physical gradients of the local basis at physical `p`.
    fn basis(&self, space: &DgSpace, p: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let (vals, ref_grads) = space.basis_eval(self.to_reference(p));
        // grad = J^{-T} ref_grad
        let grads = ref_grads
            .iter()
            .map(|g| {
                [
                    (self.jac[1][1] * g[0] - self.jac[1][0] * g[1]) / self.det,
                    (-self.jac[0][1] * g[0] + self.jac[0][0] * g[1]) / self.det,
                ]
            })
            .collect();
        (vals, grads)
    }
}

/// An edge found from the vertex lists: endpoints, the elements sharing it
/// and the unit normal pointing out of the first.
struct OracleEdge {
    a: [f64; 2],
    b: [f64; 2],
    elements: Vec<usize>,
    normal: [f64; 2],
}

fn edges(mesh: &Mesh) -> Vec<OracleEdge> {
    let mut by_pair: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for t in 0..mesh.n_elements() {
        let v = mesh.triangle(t).vertices;
        for k in 0..3 {
            let (p, q) = (v[k], v[(k + 1) % 3]);
            by_pair.entry((p.min(q), p.max(q))).or_default().push((t, v[(k + 2) % 3]));
        }
    }
    let xs = mesh.vertices();
    by_pair
        .into_iter()
        .map(|((p, q), owners)| {
            let (a, b) = (xs[p], xs[q]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let mut normal = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
            let opposite = xs[owners[0].1];
            if normal[0] * (opposite[0] - a[0]) + normal[1] * (opposite[1] - a[1]) > 0.0 {
                normal = [-normal[0], -normal[1]];
            }
            OracleEdge {
                a,
                b,
                elements: owners.iter().map(|o| o.0).collect(),
                normal,
            }
        })
        .collect()
}

/// Dense `M`, `A` (for penalty parameters `epsilon`, `sigma0`, `beta0`)
/// and `B`.
pub struct OracleMatrices {
    pub mass: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
    pub convection: DMatrix<f64>,
}

pub fn oracle(space: &DgSpace, spec: &ProblemSpec, epsilon: f64, sigma0: f64, beta0: f64) -> OracleMatrices {
    let mesh = space.mesh();
    let n = space.n_loc();
    let dofs = space.n_dofs();
    let mut mass = DMatrix::zeros(dofs, dofs);
    let mut diff = DMatrix::zeros(dofs, dofs);
    let mut conv = DMatrix::zeros(dofs, dofs);
    let at = |e: &airdg::model::Coefficient, p: [f64; 2]| e.at(p[0], p[1]).expect("coefficient");
    let elements: Vec<Element> = (0..mesh.n_elements()).map(|t| Element::new(mesh, t)).collect();

    for (t, el) in elements.iter().enumerate() {
        let o = space.offset(t);
        for (r, w) in triangle_rule(GAUSS_POINTS) {
            let p = el.to_physical(r);
            let dx = w * el.det.abs();
            let (vals, grads) = el.basis(space, p);
            let (kx, ky, c, e) = (at(&spec.kx, p), at(&spec.ky, p), at(&spec.c, p), at(&spec.e, p));
            for i in 0..n {
                for j in 0..n {
                    mass[(o + i, o + j)] += dx * vals[i] * vals[j];
                    diff[(o + i, o + j)] += dx * (kx * grads[j][0] * grads[i][0] + ky * grads[j][1] * grads[i][1]);
                    conv[(o + i, o + j)] -= dx * vals[j] * (c * grads[i][0] + e * grads[i][1]);
                }
            }
        }
    }

    for edge in edges(mesh) {
        let len = (edge.b[0] - edge.a[0]).hypot(edge.b[1] - edge.a[1]);
        let pen = sigma0 / len.powf(beta0);
        let nrm = edge.normal;
        let interior = edge.elements.len() == 2;
        for (s, w) in gauss_legendre(GAUSS_POINTS) {
            let p = [edge.a[0] + s * (edge.b[0] - edge.a[0]), edge.a[1] + s * (edge.b[1] - edge.a[1])];
            let ds = w * len;
            let (kx, ky) = (at(&spec.kx, p), at(&spec.ky, p));
            let c_n = at(&spec.c, p) * nrm[0] + at(&spec.e, p) * nrm[1];
            // (element, jump sign, average weight, values, normal fluxes)
            let sides: Vec<(usize, f64, f64, Vec<f64>, Vec<f64>)> = edge
                .elements
                .iter()
                .enumerate()
                .map(|(k, &t)| {
                    let (vals, grads) = elements[t].basis(space, p);
                    let flux = grads.iter().map(|g| kx * g[0] * nrm[0] + ky * g[1] * nrm[1]).collect();
                    let sign = if k == 0 { 1.0 } else { -1.0 };
                    (t, sign, if interior { 0.5 } else { 1.0 }, vals, flux)
                })
                .collect();
            let upwind = if c_n >= 0.0 { Some(0) } else if interior { Some(1) } else { None };
            for (ti, si, ai, vi, fi) in &sides {
                for (tj, sj, aj, vj, fj) in &sides {
                    let (oi, oj) = (space.offset(*ti), space.offset(*tj));
                    for i in 0..n {
                        let jump_v = si * vi[i];
                        let avg_v = ai * fi[i];
                        for j in 0..n {
                            let jump_w = sj * vj[j];
                            let avg_w = aj * fj[j];
                            diff[(oi + i, oj + j)] +=
                                ds * (-avg_w * jump_v + epsilon * avg_v * jump_w + pen * jump_w * jump_v);
                        }
                    }
                }
            }
            if let Some(u) = upwind {
                let (tu, _, _, vu, _) = &sides[u];
                for (ti, si, _, vi, _) in &sides {
                    let (oi, ou) = (space.offset(*ti), space.offset(*tu));
                    for i in 0..n {
                        for j in 0..n {
                            conv[(oi + i, ou + j)] += ds * c_n * vu[j] * si * vi[i];
                        }
                    }
                }
            }
        }
    }
    OracleMatrices {
        mass,
        diffusion: diff,
        convection: conv,
    }
}

/// `max |S - D| / max |D|`.
pub fn relative_difference(s: &SparseMatrix, d: &DMatrix<f64>) -> f64 {
    let scale = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0_f64;
    for i in 0..d.nrows() {
        for j in 0..d.ncols() {
            worst = worst.max((s.get(i, j) - d[(i, j)]).abs());
        }
    }
    worst / scale
}
