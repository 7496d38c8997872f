//! Norms, errors and verification probes: energy seminorm, convergence
//! studies, coercivity scans, consistency residuals and element balances.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::{assemble_diffusion, edge_points, quadratic_form, volume_points, PenaltyConfig, Scheme, SparseMatrix};
use crate::error::{Error, Result};
use crate::expr::Program;
use crate::mesh::{build_uniform_mesh, Mesh};
use crate::model::{ExactSolution, ProblemSpec};
use crate::solver::{solve, Integrator, Observer, SemidiscreteSystem, SolveOptions, StepSize, TimeConfig};
use crate::space::{DgField, DgSpace};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact solution compiled for pointwise evaluation.
struct CompiledExact {
    u_x: Program,
    u_y: Program,
}

impl CompiledExact {
    fn new(e: &ExactSolution) -> Self {
        CompiledExact {
            u_x: Program::compile(&e.u_x),
            u_y: Program::compile(&e.u_y),
        }
    }
}

/// `||U_h||_{L2}`
pub fn l2_norm(field: &DgField) -> f64 {
    let space = field.space();
    (0..space.n_elements())
        .map(|el| {
            let loc = field.local(el);
            volume_points(space, el).iter().map(|q| q.weight * dot(loc, q.values).powi(2)).sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// `int U_h`
pub fn total_mass(field: &DgField) -> f64 {
    element_masses(field).iter().sum()
}

/// `int_E U_h` per element.
pub fn element_masses(field: &DgField) -> Vec<f64> {
    let space = field.space();
    (0..space.n_elements())
        .map(|el| {
            let loc = field.local(el);
            volume_points(space, el).iter().map(|q| q.weight * dot(loc, q.values)).sum()
        })
        .collect()
}

/// `||U_h - u(t)||_{L2}`
pub fn l2_error(field: &DgField, exact: &ExactSolution, t: f64) -> Result<f64> {
    let space = field.space();
    let u = Program::compile(&exact.u);
    let mut sum = 0.0;
    for el in 0..space.n_elements() {
        let loc = field.local(el);
        for q in volume_points(space, el) {
            let d = dot(loc, q.values) - u.eval(&[q.point[0], q.point[1], t, f64::NAN])?;
            sum += q.weight * d * d;
        }
    }
    Ok(sum.sqrt())
}

/// Squared energy contributions of `U_h - u`: volume, interior jumps and
/// boundary jumps. `exact = None` measures `U_h` itself.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyParts {
    pub volume: f64,
    pub interior_jumps: f64,
    pub boundary_jumps: f64,
}

impl EnergyParts {
    /// Interior jumps only.
    pub fn seminorm(&self) -> f64 {
        (self.volume + self.interior_jumps).sqrt()
    }

    /// Seminorm augmented with boundary jumps, a norm on the DG space.
    pub fn augmented(&self) -> f64 {
        (self.volume + self.interior_jumps + self.boundary_jumps).sqrt()
    }
}

fn energy_parts_impl(
    field: &DgField,
    spec: &ProblemSpec,
    penalty: &PenaltyConfig,
    exact: Option<(&CompiledExact, f64)>,
) -> Result<EnergyParts> {
    let space = field.space();
    let n = space.n_loc();
    let mut parts = EnergyParts::default();
    for el in 0..space.n_elements() {
        let loc = field.local(el);
        for q in volume_points(space, el) {
            let (x, y) = (q.point[0], q.point[1]);
            let mut g = [0.0; 2];
            for i in 0..n {
                g[0] += loc[i] * q.grads[i][0];
                g[1] += loc[i] * q.grads[i][1];
            }
            if let Some((ex, t)) = exact {
                let v = [x, y, t, f64::NAN];
                g[0] -= ex.u_x.eval(&v)?;
                g[1] -= ex.u_y.eval(&v)?;
            }
            parts.volume += q.weight * (spec.kx.at(x, y)? * g[0] * g[0] + spec.ky.at(x, y)? * g[1] * g[1]);
        }
    }
    // the exact solution is continuous and vanishes on the boundary, so the
    // jumps of U_h - u are those of U_h
    for (e, edge) in space.mesh().edges().iter().enumerate() {
        let w = penalty.edge_weight(e, edge.length);
        let mut sum = 0.0;
        for p in edge_points(space, e) {
            let jump: f64 = p.sides.iter().map(|s| s.sign * dot(field.local(s.element), &s.values)).sum();
            sum += p.weight * w * jump * jump;
        }
        if edge.is_interior() {
            parts.interior_jumps += sum;
        } else {
            parts.boundary_jumps += sum;
        }
    }
    Ok(parts)
}

/// Energy contributions of `field`.
pub fn energy_parts(field: &DgField, spec: &ProblemSpec, penalty: &PenaltyConfig) -> Result<EnergyParts> {
    energy_parts_impl(field, spec, penalty, None)
}

/// `(sum_E ||D^{1/2} grad v||^2 + sum_{interior e} sigma_e/|e|^beta0 ||[v]||^2)^{1/2}`
pub fn energy_seminorm(field: &DgField, spec: &ProblemSpec, penalty: &PenaltyConfig) -> Result<f64> {
    Ok(energy_parts(field, spec, penalty)?.seminorm())
}

/// [`energy_seminorm`] plus the boundary-edge penalty terms.
pub fn energy_norm_augmented(field: &DgField, spec: &ProblemSpec, penalty: &PenaltyConfig) -> Result<f64> {
    Ok(energy_parts(field, spec, penalty)?.augmented())
}

/// Energy seminorm of `U_h - u(t)` (interior jumps only).
pub fn energy_error(
    field: &DgField,
    exact: &ExactSolution,
    t: f64,
    spec: &ProblemSpec,
    penalty: &PenaltyConfig,
) -> Result<f64> {
    let ex = CompiledExact::new(exact);
    Ok(energy_parts_impl(field, spec, penalty, Some((&ex, t)))?.seminorm())
}

/// `log2(e_coarse / e_fine) / log2(h_coarse / h_fine)`
pub fn observed_order(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}

/// How a convergence study picks its time steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeStepRule {
    /// Explicit integrator at the CFL step of each level.
    Cfl { integrator: Integrator, safety: f64 },
    /// `dt = dt0 (h / h0)^((k + 1) / p)` with `p` the integrator order, so
    /// the temporal error decays no slower than the spatial one.
    Scaled { integrator: Integrator, dt0: f64 },
}

impl TimeStepRule {
    pub fn integrator(&self) -> Integrator {
        match *self {
            TimeStepRule::Cfl { integrator, .. } | TimeStepRule::Scaled { integrator, .. } => integrator,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelResult {
    pub n: usize,
    pub h: f64,
    pub dofs: usize,
    pub dt: f64,
    pub steps: usize,
    /// Max over sampled times of the L2 error.
    pub l2_error: f64,
    /// Energy seminorm error at `T`.
    pub energy_error: f64,
    /// `(sum dt ||e||_energy^2)^{1/2}` over sampled times.
    pub energy_error_integrated: f64,
    pub l2_error_final: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub k: usize,
    pub scheme: Option<Scheme>,
    pub integrator: Integrator,
    pub levels: Vec<LevelResult>,
    /// `min(k + 1, s) - 1` with `s` unbounded.
    pub reference_order: f64,
}

impl ConvergenceReport {
    /// Orders between consecutive levels, `None` on the first.
    pub fn l2_orders(&self) -> Vec<Option<f64>> {
        self.orders(|l| l.l2_error)
    }

    pub fn energy_orders(&self) -> Vec<Option<f64>> {
        self.orders(|l| l.energy_error)
    }

    fn orders(&self, f: impl Fn(&LevelResult) -> f64) -> Vec<Option<f64>> {
        std::iter::once(None)
            .chain(self.levels.windows(2).map(|w| Some(observed_order(f(&w[0]), f(&w[1]), w[0].h, w[1].h))))
            .collect()
    }
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "k = {}, scheme = {}, integrator = {}, reference energy order {}",
            self.k,
            self.scheme.map_or("?", Scheme::name),
            self.integrator,
            self.reference_order
        )?;
        writeln!(f, "{:>5} {:>10} {:>8} {:>12} {:>12} {:>8} {:>8}", "n", "h", "dofs", "l2", "energy", "l2 ord", "en ord")?;
        let (lo, eo) = (self.l2_orders(), self.energy_orders());
        for (i, l) in self.levels.iter().enumerate() {
            let fmt_o = |o: Option<f64>| o.map_or_else(String::new, |v| format!("{v:.3}"));
            writeln!(
                f,
                "{:>5} {:>10.4e} {:>8} {:>12.4e} {:>12.4e} {:>8} {:>8}",
                l.n,
                l.h,
                l.dofs,
                l.l2_error,
                l.energy_error,
                fmt_o(lo[i]),
                fmt_o(eo[i])
            )?;
        }
        Ok(())
    }
}

/// Backward-Euler start-up for Crank-Nicolson levels. Without it the
/// stiff part of the initial projection error is barely damped and
/// pollutes the energy error at `T`.
pub const STUDY_STARTUP_STEPS: usize = 2;

/// Number of observer samples per level.
const STUDY_SAMPLES: usize = 50;

fn run_level(spec: &ProblemSpec, k: usize, n: usize, penalty: &PenaltyConfig, rule: TimeStepRule, h0: f64) -> Result<LevelResult> {
    let exact = spec
        .exact
        .as_ref()
        .ok_or_else(|| Error::invalid("convergence study needs an exact solution"))?;
    let mesh = Arc::new(build_uniform_mesh(n, n, spec.domain)?);
    let h = mesh.h_max();
    let space = Arc::new(DgSpace::new(mesh, k)?);
    let system = SemidiscreteSystem::new(space.clone(), spec.clone(), penalty.clone())?;
    let (integrator, dt) = match rule {
        TimeStepRule::Cfl { integrator, safety } => (integrator, crate::solver::cfl_dt(&system, safety)?),
        TimeStepRule::Scaled { integrator, dt0 } => {
            let p = integrator.order() as f64;
            (integrator, dt0 * (h / h0).powf((k as f64 + 1.0) / p))
        }
    };
    let mut config = TimeConfig::new(integrator, StepSize::Fixed(dt), spec.final_time);
    config.enforce_picard_bound = true;
    config.startup_steps = STUDY_STARTUP_STEPS;
    let steps = (spec.final_time / dt).ceil().max(1.0) as usize;
    let options = SolveOptions {
        observers: vec![Observer::L2Error, Observer::EnergyError],
        stride: (steps / STUDY_SAMPLES).max(1),
        ..Default::default()
    };
    let result = solve(&system, &config, options)?;
    let l2_max = result.samples.iter().map(|s| s.values[0]).fold(0.0, f64::max);
    let mut integrated = 0.0;
    for w in result.samples.windows(2) {
        integrated += (w[1].time - w[0].time) * w[1].values[1].powi(2);
    }
    let last = result.samples.last().expect("final sample");
    let _ = exact;
    Ok(LevelResult {
        n,
        h,
        dofs: space.n_dofs(),
        dt,
        steps: result.steps,
        l2_error: l2_max,
        energy_error: last.values[1],
        energy_error_integrated: integrated.sqrt(),
        l2_error_final: last.values[0],
    })
}

/// Solve on uniform `n x n` meshes for each `n` in `levels` (each twice the
/// previous) and measure errors against the exact solution.
pub fn convergence_study(
    spec: &ProblemSpec,
    k: usize,
    levels: &[usize],
    penalty: &PenaltyConfig,
    rule: TimeStepRule,
) -> Result<ConvergenceReport> {
    if levels.len() < 3 {
        return Err(Error::invalid("a convergence study needs at least 3 levels"));
    }
    if levels.windows(2).any(|w| w[1] != 2 * w[0]) || levels[0] == 0 {
        return Err(Error::invalid("levels must double: n, 2n, 4n, ..."));
    }
    let h0 = build_uniform_mesh(levels[0], levels[0], spec.domain)?.h_max();
    let results: Vec<Result<LevelResult>> = levels
        .par_iter()
        .map(|&n| run_level(spec, k, n, penalty, rule, h0))
        .collect();
    Ok(ConvergenceReport {
        k,
        scheme: penalty.scheme(),
        integrator: rule.integrator(),
        levels: results.into_iter().collect::<Result<_>>()?,
        reference_order: k as f64,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoercivityEntry {
    pub sigma0: f64,
    /// Minimum over the random samples.
    pub sample_min: f64,
    /// Minimum after descent on the Rayleigh quotient from each sample.
    pub refined_min: f64,
}

impl CoercivityEntry {
    pub fn min_ratio(&self) -> f64 {
        self.sample_min.min(self.refined_min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoercivityReport {
    pub scheme: Scheme,
    pub samples: usize,
    pub entries: Vec<CoercivityEntry>,
    /// Smallest scanned `sigma0` from which every larger value has a
    /// positive minimum.
    pub threshold: Option<f64>,
    /// Positive floor at the largest scanned `sigma0`.
    pub kappa: Option<f64>,
}

impl fmt::Display for CoercivityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} coercivity scan, {} samples; ratio v'Av / ||v||^2 (boundary-augmented norm)",
            self.scheme.name(),
            self.samples
        )?;
        for e in &self.entries {
            writeln!(f, "  sigma0 = {:<10} sample min = {:<12.5e} refined min = {:.5e}", e.sigma0, e.sample_min, e.refined_min)?;
        }
        match self.threshold {
            Some(t) => writeln!(f, "  positive from sigma0 = {t}"),
            None => writeln!(f, "  no positive sigma0 in the scan"),
        }
    }
}

/// Rayleigh quotient `v^T A v / v^T D v` with `D` symmetric.
fn rayleigh(a: &SparseMatrix, d: &SparseMatrix, v: &[f64]) -> Result<Option<f64>> {
    let den = quadratic_form(d, v)?;
    Ok((den > 0.0).then(|| quadratic_form(a, v).map(|n| n / den)).transpose()?)
}

/// Steepest descent on the Rayleigh quotient with two-dimensional
/// Rayleigh-Ritz line searches.
fn descend(a_sym: &SparseMatrix, d: &SparseMatrix, v0: &[f64], iters: usize) -> Result<Option<f64>> {
    let mut v = v0.to_vec();
    let Some(mut rho) = rayleigh(a_sym, d, &v)? else {
        return Ok(None);
    };
    for _ in 0..iters {
        let av = a_sym.matvec(&v);
        let dv = d.matvec(&v);
        let g: Vec<f64> = av.iter().zip(&dv).map(|(x, y)| x - rho * y).collect();
        let gn = dot(&g, &g).sqrt();
        if gn == 0.0 {
            break;
        }
        let ag = a_sym.matvec(&g);
        let dg = d.matvec(&g);
        // 2x2 generalized eigenproblem on span{v, g}
        let (a11, a12, a22) = (dot(&v, &av), dot(&v, &ag), dot(&g, &ag));
        let (d11, d12, d22) = (dot(&v, &dv), dot(&v, &dg), dot(&g, &dg));
        // det(Ar - mu Dr) = 0
        let qa = d11 * d22 - d12 * d12;
        let qb = -(a11 * d22 + a22 * d11 - 2.0 * a12 * d12);
        let qc = a11 * a22 - a12 * a12;
        if qa.abs() <= 1e-14 * d11 * d22 {
            break;
        }
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
        let mu = (-qb - disc.copysign(qa)) / (2.0 * qa);
        let mu = mu.min((-qb + disc.copysign(qa)) / (2.0 * qa));
        // eigenvector for mu
        let (c1, c2) = if (a12 - mu * d12).abs() > (a11 - mu * d11).abs() * 1e-300 {
            (a12 - mu * d12, -(a11 - mu * d11))
        } else {
            (1.0, 0.0)
        };
        let (c1, c2) = if c1 == 0.0 && c2 == 0.0 { (0.0, 1.0) } else { (-c1, -c2) };
        // we want c = (x, y) with (Ar - mu Dr) c = 0: x = -(a12 - mu d12), y = (a11 - mu d11)
        let next: Vec<f64> = v.iter().zip(&g).map(|(p, q)| c1 * p + c2 * q).collect();
        let nn = dot(&next, &next).sqrt();
        if nn == 0.0 {
            break;
        }
        let next: Vec<f64> = next.iter().map(|x| x / nn).collect();
        match rayleigh(a_sym, d, &next)? {
            Some(r) if r < rho => {
                let done = (rho - r).abs() <= 1e-12 * rho.abs().max(1e-300);
                rho = r;
                v = next;
                if done {
                    break;
                }
            }
            _ => break,
        }
    }
    Ok(Some(rho))
}

/// Descent iterations per sample in [`coercivity_scan`].
pub const DESCENT_ITERATIONS: usize = 40;

/// Minimum Rayleigh ratio of `A(sigma0)` over `samples` random fields with
/// coefficients uniform in `[-1, 1]`, before and after descent. The norm
/// includes boundary jumps (weighted by the same `sigma0`).
pub fn coercivity_scan(
    space: &DgSpace,
    spec: &ProblemSpec,
    scheme: Scheme,
    sigmas: &[f64],
    beta0: f64,
    samples: usize,
    seed: u64,
) -> Result<CoercivityReport> {
    if samples == 0 {
        return Err(Error::invalid("coercivity scan needs at least one sample"));
    }
    let mut entries = Vec::new();
    for &sigma0 in sigmas {
        let penalty = PenaltyConfig::unchecked(scheme, sigma0, beta0);
        let a = assemble_diffusion(space, spec, &penalty)?;
        let a_sym = a.linear_combination(0.5, &a.transpose(), 0.5)?;
        // the symmetric part of the NIPG matrix is exactly the norm matrix
        let nipg = assemble_diffusion(space, spec, &PenaltyConfig::unchecked(Scheme::Nipg, sigma0, beta0))?;
        let d = nipg.linear_combination(0.5, &nipg.transpose(), 0.5)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sample_min = f64::INFINITY;
        let mut refined_min = f64::INFINITY;
        for _ in 0..samples {
            let v: Vec<f64> = (0..space.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if let Some(r) = rayleigh(&a, &d, &v)? {
                sample_min = sample_min.min(r);
            }
            if let Some(r) = descend(&a_sym, &d, &v, DESCENT_ITERATIONS)? {
                refined_min = refined_min.min(r);
            }
        }
        entries.push(CoercivityEntry {
            sigma0,
            sample_min,
            refined_min,
        });
    }
    let mut threshold = None;
    for e in entries.iter().rev() {
        if e.min_ratio() > 0.0 {
            threshold = Some(e.sigma0);
        } else {
            break;
        }
    }
    let kappa = entries.last().map(CoercivityEntry::min_ratio).filter(|&m| m > 0.0);
    Ok(CoercivityReport {
        scheme,
        samples,
        entries,
        threshold,
        kappa,
    })
}

/// `max |M xi_t + (A + B) xi - G(xi, t)|` for the projected exact
/// solution, which must be representable in the space.
pub fn consistency_residual(system: &SemidiscreteSystem, t: f64) -> Result<f64> {
    let spec = system.spec();
    let exact = spec
        .exact
        .as_ref()
        .ok_or_else(|| Error::invalid("consistency residual needs an exact solution"))?;
    let space = system.space();
    let u = Program::compile(&exact.u);
    let u_t = Program::compile(&exact.u_t);
    let xi = space.l2_project(|x, y| u.eval(&[x, y, t, f64::NAN]))?;
    let xi_t = space.l2_project(|x, y| u_t.eval(&[x, y, t, f64::NAN]))?;
    // representability: the projection must reproduce u
    let err = l2_error(&xi, exact, t)?;
    let norm = l2_norm(&xi);
    if err > 1e-10 * norm.max(1e-300) && err > 1e-14 {
        return Err(Error::invalid(format!(
            "exact solution not representable at degree {} (projection error {err:e})",
            space.degree()
        )));
    }
    let r = system.residual(&xi.coeffs, &xi_t.coeffs, t)?;
    Ok(r.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Per-element balance violations of a recorded run.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservationReport {
    /// Largest violation over all elements and steps.
    pub max_violation: f64,
    /// Largest violation per element over all steps.
    pub per_element: Vec<f64>,
}

/// Test each recorded step with the element indicators: for a theta scheme
///
/// ```text
/// int_E (U1 - U0) + dt sum_{e in E} int_e s_E (-{K grad U.n} + sigma/|e|^b [U]
///     + (c n1 + e n2) U_up) - dt int_E f(U) = 0
/// ```
///
/// with `U = theta U1 + (1 - theta) U0` in the flux terms and `s_E` the
/// jump sign of `E` on `e`. Fluxes are re-evaluated from the fields, not
/// taken from the assembled matrices.
pub fn local_conservation_check(
    system: &SemidiscreteSystem,
    integrator: Integrator,
    states: &[DgField],
) -> Result<ConservationReport> {
    let theta = match integrator {
        Integrator::ForwardEuler => 0.0,
        other => other
            .theta()
            .ok_or_else(|| Error::invalid(format!("element balance not defined stage-wise for {other}")))?,
    };
    let space = system.space();
    let spec = system.spec();
    let penalty = system.penalty();
    let mesh = space.mesh();
    let mut per_element = vec![0.0_f64; space.n_elements()];
    for w in states.windows(2) {
        let (s0, s1) = (&w[0], &w[1]);
        let dt = s1.time - s0.time;
        if !(dt > 0.0) {
            return Err(Error::invalid("recorded states must advance in time"));
        }
        let blend: Vec<f64> = s0.coeffs.iter().zip(&s1.coeffs).map(|(a, b)| theta * b + (1.0 - theta) * a).collect();
        let m0 = element_masses(s0);
        let m1 = element_masses(s1);
        let g0 = system.source_vector(&s0.coeffs, s0.time)?;
        let g1 = system.source_vector(&s1.coeffs, s1.time)?;
        // constant basis function has index 0
        let mut balance: Vec<f64> = (0..space.n_elements())
            .map(|el| {
                let o = space.offset(el);
                m1[el] - m0[el] - dt * (theta * g1[o] + (1.0 - theta) * g0[o])
            })
            .collect();
        for (e, edge) in mesh.edges().iter().enumerate() {
            let pen = penalty.edge_weight(e, edge.length);
            let nrm = edge.normal;
            let mut flux_1 = 0.0;
            for p in edge_points(space, e) {
                let (x, y) = (p.point[0], p.point[1]);
                let (kx, ky) = (spec.kx.at(x, y)?, spec.ky.at(x, y)?);
                let c_n = spec.c.at(x, y)? * nrm[0] + spec.e.at(x, y)? * nrm[1];
                let mut avg_flux = 0.0;
                let mut jump = 0.0;
                let mut traces = [0.0; 2];
                for (k, s) in p.sides.iter().enumerate() {
                    let loc = &blend[space.dofs(s.element)];
                    let v = dot(loc, &s.values);
                    let g = (0..loc.len()).fold([0.0; 2], |g, i| {
                        [g[0] + loc[i] * s.grads[i][0], g[1] + loc[i] * s.grads[i][1]]
                    });
                    avg_flux += s.avg * (kx * g[0] * nrm[0] + ky * g[1] * nrm[1]);
                    jump += s.sign * v;
                    traces[k] = v;
                }
                let up = match crate::assembly::upwind_side(edge, c_n) {
                    crate::assembly::UpwindSide::First => traces[0],
                    crate::assembly::UpwindSide::Second => traces[1],
                    crate::assembly::UpwindSide::ExteriorZero => 0.0,
                };
                flux_1 += p.weight * (-avg_flux + pen * jump + c_n * up);
            }
            // E1 sees +flux, E2 sees -flux
            balance[edge.element_1] += dt * flux_1;
            if let Some(e2) = edge.element_2 {
                balance[e2] -= dt * flux_1;
            }
        }
        for (worst, b) in per_element.iter_mut().zip(&balance) {
            *worst = worst.max(b.abs());
        }
    }
    Ok(ConservationReport {
        max_violation: per_element.iter().copied().fold(0.0, f64::max),
        per_element,
    })
}

/// Mesh helper for probes.
pub fn unit_space(domain: crate::mesh::Rect, n: usize, k: usize) -> Result<Arc<DgSpace>> {
    let mesh: Mesh = build_uniform_mesh(n, n, domain)?;
    Ok(Arc::new(DgSpace::new(Arc::new(mesh), k)?))
}

#[cfg(test)]
mod tests;
