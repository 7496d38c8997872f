//! Discrete operators: block-diagonal mass `M`, diffusion with interior
//! penalty `A`, upwind convection `B` and the source vector `G(xi)`.
//!
//! Rows index test functions and columns trial functions, so
//! `v^T A w = a(w, v)`. Every edge sum runs over interior and boundary
//! edges. On an interior edge `[v] = v|E1 - v|E2`, `{v}` is the mean of both
//! traces and the normal points from `E1` into `E2`. On a boundary edge both
//! reduce to the interior trace and the normal points outward.

mod sparse;

use std::sync::Arc;

use rayon::prelude::*;

pub use sparse::{bilinear_form, quadratic_form, SparseMatrix};

use crate::error::{Error, Result};
use crate::expr::{Program, Staged, Var};
use crate::mesh::{Edge, Point};
use crate::model::ProblemSpec;
use crate::space::{DgField, DgSpace};

/// Interior-penalty variant, named by the sign of the symmetrization term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Symmetric, `epsilon = -1`.
    Sipg,
    /// Incomplete, `epsilon = 0`.
    Iipg,
    /// Nonsymmetric, `epsilon = +1`.
    Nipg,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Sipg, Scheme::Iipg, Scheme::Nipg];

    pub fn epsilon(self) -> i32 {
        match self {
            Scheme::Sipg => -1,
            Scheme::Iipg => 0,
            Scheme::Nipg => 1,
        }
    }

    pub fn from_epsilon(eps: i32) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.epsilon() == eps)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Sipg => "sipg",
            Scheme::Iipg => "iipg",
            Scheme::Nipg => "nipg",
        }
    }

    pub fn from_name(name: &str) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Penalty `sigma0 / |e|^beta0` and symmetrization sign.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyConfig {
    pub epsilon: i32,
    pub sigma0: f64,
    pub beta0: f64,
    /// Per-edge replacement for `sigma0`, indexed like the mesh edges.
    pub edge_sigma: Option<Vec<f64>>,
}

/// Default penalty magnitude `10 k^2` (`10` for `k = 0`).
pub fn default_sigma0(k: usize) -> f64 {
    10.0 * (k.max(1) * k.max(1)) as f64
}

impl PenaltyConfig {
    /// Validated configuration for time stepping: SIPG and IIPG need a
    /// positive penalty.
    pub fn new(scheme: Scheme, sigma0: f64, beta0: f64) -> Result<Self> {
        let p = Self::unchecked(scheme, sigma0, beta0);
        p.validate()?;
        Ok(p)
    }

    /// Configuration that skips the positivity requirement, for probes that
    /// deliberately study insufficient penalties.
    pub fn unchecked(scheme: Scheme, sigma0: f64, beta0: f64) -> Self {
        PenaltyConfig {
            epsilon: scheme.epsilon(),
            sigma0,
            beta0,
            edge_sigma: None,
        }
    }

    pub fn default_for(scheme: Scheme, k: usize) -> Self {
        Self::unchecked(scheme, default_sigma0(k), 1.0)
    }

    pub fn scheme(&self) -> Option<Scheme> {
        Scheme::from_epsilon(self.epsilon)
    }

    /// Everything assembly needs: known scheme, `sigma0 >= 0`, `beta0 >= 1`.
    pub fn validate_structure(&self) -> Result<()> {
        if self.scheme().is_none() {
            return Err(Error::invalid(format!("epsilon must be -1, 0 or 1, got {}", self.epsilon)));
        }
        if !(self.sigma0.is_finite() && self.sigma0 >= 0.0) {
            return Err(Error::invalid(format!("sigma0 must be >= 0, got {}", self.sigma0)));
        }
        if !(self.beta0.is_finite() && self.beta0 >= 1.0) {
            return Err(Error::invalid(format!("beta0 must be >= 1, got {}", self.beta0)));
        }
        if let Some(s) = &self.edge_sigma {
            if let Some(v) = s.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::invalid(format!("edge penalty must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Structural checks plus a positive penalty for SIPG and IIPG.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        let min_sigma = match &self.edge_sigma {
            Some(s) => s.iter().copied().fold(f64::INFINITY, f64::min),
            None => self.sigma0,
        };
        if self.epsilon != 1 && min_sigma <= 0.0 {
            return Err(Error::invalid(format!(
                "{} needs a positive penalty, got sigma0 = {min_sigma}",
                self.scheme().map_or("scheme", Scheme::name)
            )));
        }
        Ok(())
    }

    /// Weight `sigma_e / |e|^beta0` for edge `e`.
    pub fn edge_weight(&self, e: usize, length: f64) -> f64 {
        let sigma = self.edge_sigma.as_ref().map_or(self.sigma0, |s| s[e]);
        sigma / length.powf(self.beta0)
    }
}

/// Side whose trace supplies the upwind value on an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpwindSide {
    First,
    Second,
    /// Inflow boundary: exterior value zero.
    ExteriorZero,
}

/// `c_n = c n1 + e n2 >= 0` takes `E1`, otherwise `E2` (or zero outside the
/// domain).
pub fn upwind_side(edge: &Edge, c_n: f64) -> UpwindSide {
    if c_n >= 0.0 {
        UpwindSide::First
    } else if edge.is_interior() {
        UpwindSide::Second
    } else {
        UpwindSide::ExteriorZero
    }
}

/// Basis traces of one element at an edge quadrature point.
#[derive(Clone, Debug)]
pub struct SideTrace {
    pub element: usize,
    /// `+1` on `E1`, `-1` on `E2`: the factor in the jump.
    pub sign: f64,
    /// Weight in the average: `1/2` inside, `1` on the boundary.
    pub avg: f64,
    pub values: Vec<f64>,
    /// Physical gradients.
    pub grads: Vec<[f64; 2]>,
}

/// One edge quadrature point with traces from each adjacent element.
#[derive(Clone, Debug)]
pub struct EdgePoint {
    pub point: Point,
    /// Quadrature weight times edge length.
    pub weight: f64,
    pub sides: Vec<SideTrace>,
}

/// Quadrature data for edge `e`.
pub fn edge_points(space: &DgSpace, e: usize) -> Vec<EdgePoint> {
    let mesh = space.mesh();
    let edge = &mesh.edges()[e];
    let trace = mesh.edge_trace_frames(e);
    let interior = edge.is_interior();
    let avg = if interior { 0.5 } else { 1.0 };
    let frames: Vec<_> = std::iter::once((trace.side_1, 1.0))
        .chain(trace.side_2.map(|f| (f, -1.0)))
        .collect();
    space
        .edge_rule()
        .iter()
        .map(|(s, w)| {
            let sides = frames
                .iter()
                .map(|&(frame, sign)| {
                    let (values, ref_grads) = space.basis_eval(frame.reference_point(s));
                    let grads = ref_grads
                        .into_iter()
                        .map(|g| mesh.pull_back_gradient(frame.element, g))
                        .collect();
                    SideTrace {
                        element: frame.element,
                        sign,
                        avg,
                        values,
                        grads,
                    }
                })
                .collect();
            EdgePoint {
                point: trace.physical_point(s),
                weight: w * edge.length,
                sides,
            }
        })
        .collect()
}

/// Volume quadrature point on an element.
#[derive(Clone, Debug)]
pub struct VolumePoint<'a> {
    pub point: Point,
    /// Quadrature weight times `det J`.
    pub weight: f64,
    pub values: &'a [f64],
    pub grads: Vec<[f64; 2]>,
}

pub fn volume_points(space: &DgSpace, element: usize) -> Vec<VolumePoint<'_>> {
    let mesh = space.mesh();
    let det = mesh.triangle(element).det;
    let tab = space.volume_tabulation();
    space
        .volume_rule()
        .iter()
        .enumerate()
        .map(|(q, (r, w))| VolumePoint {
            point: mesh.map_to_physical(element, r),
            weight: w * det,
            values: tab.values_at(q),
            grads: tab.grads_at(q).iter().map(|&g| mesh.pull_back_gradient(element, g)).collect(),
        })
        .collect()
}

/// Dense local blocks keyed by (row element, column element), flushed to
/// triplets in a fixed order.
struct LocalBlocks {
    n: usize,
    blocks: Vec<((usize, usize), Vec<f64>)>,
}

impl LocalBlocks {
    fn new(n: usize) -> Self {
        LocalBlocks { n, blocks: Vec::new() }
    }

    fn block(&mut self, row: usize, col: usize) -> &mut [f64] {
        let k = match self.blocks.iter().position(|(key, _)| *key == (row, col)) {
            Some(k) => k,
            None => {
                self.blocks.push(((row, col), vec![0.0; self.n * self.n]));
                self.blocks.len() - 1
            }
        };
        &mut self.blocks[k].1
    }

    fn flush(&mut self, space: &DgSpace, out: &mut Vec<(usize, usize, f64)>) {
        let n = self.n;
        for ((r, c), vals) in self.blocks.drain(..) {
            let (r0, c0) = (space.offset(r), space.offset(c));
            for i in 0..n {
                for j in 0..n {
                    out.push((r0 + i, c0 + j, vals[i * n + j]));
                }
            }
        }
    }
}

/// Block-diagonal mass matrix; element blocks are `det J` times the
/// reference mass, hence exactly symmetric.
pub fn assemble_mass(space: &DgSpace) -> SparseMatrix {
    let n = space.n_loc();
    let reference = space.reference_mass();
    let mut t = Vec::with_capacity(space.n_elements() * n * n);
    for e in 0..space.n_elements() {
        let det = space.mesh().triangle(e).det;
        let o = space.offset(e);
        for i in 0..n {
            for j in 0..n {
                t.push((o + i, o + j, det * reference[(i, j)]));
            }
        }
    }
    SparseMatrix::from_triplets(space.n_dofs(), space.n_dofs(), &t).expect("mass entries are finite")
}

/// Diffusion plus interior-penalty matrix realizing
///
/// ```text
/// a(w, v) = sum_E (K grad w, grad v)_E - sum_e ({K grad w . n}, [v])_e
///         + epsilon sum_e ({K grad v . n}, [w])_e
///         + sum_e sigma_e / |e|^beta0 ([w], [v])_e
/// ```
pub fn assemble_diffusion(space: &DgSpace, spec: &ProblemSpec, penalty: &PenaltyConfig) -> Result<SparseMatrix> {
    penalty.validate_structure()?;
    let mesh = space.mesh();
    if let Some(s) = &penalty.edge_sigma {
        if s.len() != mesh.edges().len() {
            return Err(Error::invalid(format!(
                "{} edge penalties given for {} edges",
                s.len(),
                mesh.edges().len()
            )));
        }
    }
    let n = space.n_loc();
    let eps = penalty.epsilon as f64;
    let mut triplets = Vec::new();
    let mut blocks = LocalBlocks::new(n);

    for el in 0..space.n_elements() {
        let block = blocks.block(el, el);
        for q in volume_points(space, el) {
            let (kx, ky) = (spec.kx.at(q.point[0], q.point[1])?, spec.ky.at(q.point[0], q.point[1])?);
            for i in 0..n {
                let gi = q.grads[i];
                for j in 0..n {
                    let gj = q.grads[j];
                    block[i * n + j] += q.weight * (kx * gi[0] * gj[0] + ky * gi[1] * gj[1]);
                }
            }
        }
        blocks.flush(space, &mut triplets);
    }

    for (e, edge) in mesh.edges().iter().enumerate() {
        let pen = penalty.edge_weight(e, edge.length);
        let normal = edge.normal;
        for p in edge_points(space, e) {
            let (kx, ky) = (spec.kx.at(p.point[0], p.point[1])?, spec.ky.at(p.point[0], p.point[1])?);
            let flux = |s: &SideTrace| -> Vec<f64> {
                s.grads.iter().map(|g| kx * g[0] * normal[0] + ky * g[1] * normal[1]).collect()
            };
            let fluxes: Vec<Vec<f64>> = p.sides.iter().map(flux).collect();
            for (a, sa) in p.sides.iter().enumerate() {
                for (b, sb) in p.sides.iter().enumerate() {
                    let block = blocks.block(sa.element, sb.element);
                    for i in 0..n {
                        let jump_v = sa.sign * sa.values[i];
                        let avg_v = sa.avg * fluxes[a][i];
                        for j in 0..n {
                            let jump_w = sb.sign * sb.values[j];
                            let avg_w = sb.avg * fluxes[b][j];
                            block[i * n + j] += p.weight * (-avg_w * jump_v + eps * avg_v * jump_w + pen * jump_w * jump_v);
                        }
                    }
                }
            }
        }
        blocks.flush(space, &mut triplets);
    }
    SparseMatrix::from_triplets(space.n_dofs(), space.n_dofs(), &triplets)
}

/// Upwind convection matrix realizing
///
/// ```text
/// b(w, v) = -sum_E (w, c v_x + e v_y)_E + sum_e ((c n1 + e n2) w_up, [v])_e
/// ```
pub fn assemble_convection(space: &DgSpace, spec: &ProblemSpec) -> Result<SparseMatrix> {
    let mesh = space.mesh();
    let n = space.n_loc();
    let mut triplets = Vec::new();
    let mut blocks = LocalBlocks::new(n);

    for el in 0..space.n_elements() {
        let block = blocks.block(el, el);
        for q in volume_points(space, el) {
            let (c, e) = (spec.c.at(q.point[0], q.point[1])?, spec.e.at(q.point[0], q.point[1])?);
            for i in 0..n {
                let dv = c * q.grads[i][0] + e * q.grads[i][1];
                for j in 0..n {
                    block[i * n + j] -= q.weight * q.values[j] * dv;
                }
            }
        }
        blocks.flush(space, &mut triplets);
    }

    for (ei, edge) in mesh.edges().iter().enumerate() {
        for p in edge_points(space, ei) {
            let (c, e) = (spec.c.at(p.point[0], p.point[1])?, spec.e.at(p.point[0], p.point[1])?);
            let c_n = c * edge.normal[0] + e * edge.normal[1];
            let up = match upwind_side(edge, c_n) {
                UpwindSide::First => &p.sides[0],
                UpwindSide::Second => &p.sides[1],
                UpwindSide::ExteriorZero => continue,
            };
            for sa in &p.sides {
                let block = blocks.block(sa.element, up.element);
                for i in 0..n {
                    let jump_v = sa.sign * sa.values[i];
                    for j in 0..n {
                        block[i * n + j] += p.weight * c_n * up.values[j] * jump_v;
                    }
                }
            }
        }
        blocks.flush(space, &mut triplets);
    }
    SparseMatrix::from_triplets(space.n_dofs(), space.n_dofs(), &triplets)
}

/// Evaluates `G_i = (f(U_h), phi_i)` repeatedly on a fixed space.
///
/// Spatial parts of the emission are bound once per quadrature point and
/// purely time-dependent parts once per call, so each point evaluates only
/// the remainder and `Q(U_h)`.
#[derive(Clone, Debug)]
pub struct SourceAssembler {
    space: Arc<DgSpace>,
    deposition: f64,
    emission: Staged,
    chemistry: Program,
    /// Physical quadrature points, element-major.
    points: Vec<Point>,
    slots: Vec<f64>,
    n_q: usize,
    /// `M_ref^{-1} Phi W`, `n_loc x n_q` row-major. On an affine element
    /// the Jacobian cancels, so `M_E^{-1} G_E` is this times the point
    /// values of `f`.
    projector: Vec<f64>,
}

impl SourceAssembler {
    pub fn new(space: Arc<DgSpace>, spec: &ProblemSpec) -> Result<Self> {
        let emission = Staged::with_uniform(&spec.emission, &[Var::T, Var::U], &[Var::T]);
        let chemistry = Program::compile(&spec.chemistry);
        let mesh = space.mesh();
        let n_q = space.volume_rule().len();
        let n = space.n_loc();
        let mut points = Vec::with_capacity(space.n_elements() * n_q);
        let mut slots = Vec::with_capacity(space.n_elements() * n_q * emission.n_slots());
        for el in 0..space.n_elements() {
            for r in &space.volume_rule().points {
                let p = mesh.map_to_physical(el, *r);
                emission.bind(&[p[0], p[1], f64::NAN, f64::NAN], &mut slots)?;
                points.push(p);
            }
        }
        let chol = space
            .reference_mass()
            .clone()
            .cholesky()
            .ok_or(Error::NotSpd { block: 0 })?;
        let tab = space.volume_tabulation();
        let mut pw = nalgebra::DMatrix::zeros(n, n_q);
        for q in 0..n_q {
            for i in 0..n {
                pw[(i, q)] = tab.value(q, i) * space.volume_rule().weights[q];
            }
        }
        chol.solve_mut(&mut pw);
        let projector = (0..n).flat_map(|i| (0..n_q).map(move |q| (i, q))).map(|(i, q)| pw[(i, q)]).collect();
        Ok(SourceAssembler {
            space,
            deposition: spec.deposition(),
            emission,
            chemistry,
            points,
            slots,
            n_q,
            projector,
        })
    }

    pub fn space(&self) -> &Arc<DgSpace> {
        &self.space
    }

    /// `G(xi)` at time `t`.
    pub fn assemble(&self, coeffs: &[f64], t: f64) -> Result<Vec<f64>> {
        self.assemble_shifted(coeffs, t, 0.0)
    }

    /// `(f(U_h) + shift U_h, phi_i)`. A shift equal to the total linear
    /// decay rate leaves only the part of the source that is not linear in
    /// `u`.
    pub fn assemble_shifted(&self, coeffs: &[f64], t: f64, shift: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.space.n_dofs()];
        self.assemble_shifted_into(coeffs, t, shift, &mut out)?;
        Ok(out)
    }

    pub fn assemble_shifted_into(&self, coeffs: &[f64], t: f64, shift: f64, out: &mut [f64]) -> Result<()> {
        self.sweep(coeffs, t, shift, out, false)
    }

    /// `M^{-1} G(xi)` without a separate mass solve.
    pub fn assemble_projected_into(&self, coeffs: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        self.sweep(coeffs, t, 0.0, out, true)
    }

    fn sweep(&self, coeffs: &[f64], t: f64, shift: f64, out: &mut [f64], projected: bool) -> Result<()> {
        let space = &*self.space;
        let n = space.n_loc();
        if coeffs.len() != space.n_dofs() || out.len() != space.n_dofs() {
            return Err(Error::invalid("source vector length does not match the space"));
        }
        let tab = space.volume_tabulation();
        let weights = &space.volume_rule().weights;
        let ns = self.emission.n_slots();
        let n_q = self.n_q;
        let linear = shift - self.deposition;
        let chem_const = self.chemistry.as_constant();
        let uniforms = self.emission.prepare(&[f64::NAN, f64::NAN, t, f64::NAN])?;
        out.par_chunks_mut(n).enumerate().try_for_each(|(el, g)| -> Result<()> {
            g.fill(0.0);
            let det = space.mesh().triangle(el).det;
            let local = &coeffs[el * n..(el + 1) * n];
            for q in 0..n_q {
                let idx = el * n_q + q;
                let p = self.points[idx];
                let phi = tab.values_at(q);
                let u: f64 = local.iter().zip(phi).map(|(c, v)| c * v).sum();
                let vars = [p[0], p[1], t, u];
                let e = self
                    .emission
                    .eval_prepared(&vars, &self.slots[idx * ns..(idx + 1) * ns], &uniforms)?;
                let qv = match chem_const {
                    Some(v) => v,
                    None => self.chemistry.eval(&vars)?,
                };
                let f = linear * u + e + qv;
                if projected {
                    for (i, gi) in g.iter_mut().enumerate() {
                        *gi += self.projector[i * n_q + q] * f;
                    }
                } else {
                    let w = weights[q] * det * f;
                    for (gi, v) in g.iter_mut().zip(phi) {
                        *gi += w * v;
                    }
                }
            }
            Ok(())
        })
    }
}

/// One-shot `G_i = (f(U_h), phi_i)` at time `t`.
pub fn assemble_source(space: &Arc<DgSpace>, spec: &ProblemSpec, field: &DgField, t: f64) -> Result<Vec<f64>> {
    SourceAssembler::new(space.clone(), spec)?.assemble(&field.coeffs, t)
}
