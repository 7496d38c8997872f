//! Time integration of `M xi' + (A + B) xi = G(xi, t)`.
//!
//! Explicit steppers apply `M^{-1}` by exact block solves. The theta
//! schemes solve
//!
//! ```text
//! (M + theta dt (A + B + lambda M)) xi1
//!     = (M - (1 - theta) dt (A + B)) xi0 + (1 - theta) dt G(xi0, t0)
//!       + theta dt (G(xi1, t1) + lambda M xi1)
//! ```
//!
//! by Picard iteration on the last term. `lambda` is the part of the source
//! known to be linear in `u` (deposition, plus the slope of an affine `Q`),
//! so affine problems converge after one correction.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::analysis;
use crate::assembly::{
    assemble_convection, assemble_diffusion, assemble_mass, PenaltyConfig, Scheme, SourceAssembler, SparseMatrix,
};
use crate::error::{Error, Result};
use crate::expr::{differentiate, Program, Var};
use crate::linsolve::{krylov_solve, BlockFactorization, BlockJacobi, KrylovMethod, KrylovOptions};
use crate::model::ProblemSpec;
use crate::space::{DgField, DgSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Integrator {
    ForwardEuler,
    SspRk3,
    BackwardEuler,
    CrankNicolson,
}

impl Integrator {
    pub const ALL: [Integrator; 4] = [
        Integrator::ForwardEuler,
        Integrator::SspRk3,
        Integrator::BackwardEuler,
        Integrator::CrankNicolson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Integrator::ForwardEuler => "forward-euler",
            Integrator::SspRk3 => "ssprk3",
            Integrator::BackwardEuler => "backward-euler",
            Integrator::CrankNicolson => "crank-nicolson",
        }
    }

    pub fn from_name(name: &str) -> Option<Integrator> {
        Integrator::ALL.into_iter().find(|i| i.name() == name)
    }

    pub fn is_explicit(self) -> bool {
        matches!(self, Integrator::ForwardEuler | Integrator::SspRk3)
    }

    /// Implicitness weight of the theta schemes.
    pub fn theta(self) -> Option<f64> {
        match self {
            Integrator::BackwardEuler => Some(1.0),
            Integrator::CrankNicolson => Some(0.5),
            _ => None,
        }
    }

    /// Nominal order of accuracy.
    pub fn order(self) -> u32 {
        match self {
            Integrator::ForwardEuler | Integrator::BackwardEuler => 1,
            Integrator::CrankNicolson => 2,
            Integrator::SspRk3 => 3,
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    /// [`cfl_dt`] with the configured safety factor.
    Auto,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeConfig {
    pub integrator: Integrator,
    pub dt: StepSize,
    pub final_time: f64,
    pub safety: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub linear_tol: f64,
    /// Reject implicit steps with `dt L_Q > 0.5` for non-affine `Q`.
    pub enforce_picard_bound: bool,
    /// Crank-Nicolson only: the first `startup_steps` steps are each taken
    /// as two backward-Euler half-steps. Crank-Nicolson maps stiff modes to
    /// nearly their negatives, so rough components of the initial error
    /// otherwise survive to `T`.
    pub startup_steps: usize,
}

impl TimeConfig {
    pub fn new(integrator: Integrator, dt: StepSize, final_time: f64) -> Self {
        TimeConfig {
            integrator,
            dt,
            final_time,
            safety: 0.5,
            picard_tol: 1e-12,
            picard_max_iter: 50,
            linear_tol: 1e-10,
            enforce_picard_bound: true,
            startup_steps: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.final_time.is_finite() && self.final_time >= 0.0) {
            return Err(Error::invalid(format!("final time must be >= 0, got {}", self.final_time)));
        }
        if let StepSize::Fixed(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
            }
        }
        for (name, v) in [
            ("safety", self.safety),
            ("picard tolerance", self.picard_tol),
            ("linear tolerance", self.linear_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.picard_max_iter == 0 {
            return Err(Error::invalid("Picard iteration cap must be positive"));
        }
        Ok(())
    }
}

/// Assembled operators of the semidiscrete system.
#[derive(Debug)]
pub struct SemidiscreteSystem {
    space: Arc<DgSpace>,
    spec: ProblemSpec,
    penalty: PenaltyConfig,
    mass: SparseMatrix,
    diffusion: SparseMatrix,
    convection: SparseMatrix,
    operator: SparseMatrix,
    /// `M^{-1} (A + B)`, built on first explicit use.
    explicit_operator: OnceLock<SparseMatrix>,
    mass_factor: BlockFactorization,
    source: SourceAssembler,
    symmetric: bool,
}

impl SemidiscreteSystem {
    pub fn new(space: Arc<DgSpace>, spec: ProblemSpec, penalty: PenaltyConfig) -> Result<Self> {
        spec.check_structure()?;
        penalty.validate()?;
        let mass = assemble_mass(&space);
        let diffusion = assemble_diffusion(&space, &spec, &penalty)?;
        let convection = assemble_convection(&space, &spec)?;
        Self::from_parts(space, spec, penalty, mass, diffusion, convection)
    }

    /// Assemble without the penalty positivity check, for probes.
    pub fn new_unchecked(space: Arc<DgSpace>, spec: ProblemSpec, penalty: PenaltyConfig) -> Result<Self> {
        spec.check_structure()?;
        let mass = assemble_mass(&space);
        let diffusion = assemble_diffusion(&space, &spec, &penalty)?;
        let convection = assemble_convection(&space, &spec)?;
        Self::from_parts(space, spec, penalty, mass, diffusion, convection)
    }

    fn from_parts(
        space: Arc<DgSpace>,
        spec: ProblemSpec,
        penalty: PenaltyConfig,
        mass: SparseMatrix,
        diffusion: SparseMatrix,
        convection: SparseMatrix,
    ) -> Result<Self> {
        let mass_factor = BlockFactorization::new(&mass, space.n_loc())?;
        let operator = diffusion.linear_combination(1.0, &convection, 1.0)?;
        let source = SourceAssembler::new(space.clone(), &spec)?;
        let symmetric = penalty.scheme() == Some(Scheme::Sipg) && convection.max_abs() == 0.0;
        Ok(SemidiscreteSystem {
            space,
            spec,
            penalty,
            mass,
            diffusion,
            convection,
            operator,
            explicit_operator: OnceLock::new(),
            mass_factor,
            source,
            symmetric,
        })
    }

    pub fn space(&self) -> &Arc<DgSpace> {
        &self.space
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn penalty(&self) -> &PenaltyConfig {
        &self.penalty
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn diffusion(&self) -> &SparseMatrix {
        &self.diffusion
    }

    pub fn convection(&self) -> &SparseMatrix {
        &self.convection
    }

    /// `A + B`
    pub fn operator(&self) -> &SparseMatrix {
        &self.operator
    }

    pub fn mass_factor(&self) -> &BlockFactorization {
        &self.mass_factor
    }

    pub fn source(&self) -> &SourceAssembler {
        &self.source
    }

    /// True when `A + B` is symmetric (SIPG without wind).
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// `G(xi, t)`
    pub fn source_vector(&self, xi: &[f64], t: f64) -> Result<Vec<f64>> {
        self.source.assemble(xi, t)
    }

    /// `M^{-1} (G(xi, t) - (A + B) xi)`
    pub fn rhs(&self, xi: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; xi.len()];
        self.rhs_into(xi, t, &mut out)?;
        Ok(out)
    }

    /// [`SemidiscreteSystem::rhs`] into a caller buffer. Uses the
    /// precomputed `M^{-1} (A + B)` and the element-independent source
    /// projector, which agree with block solves to roundoff.
    pub fn rhs_into(&self, xi: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        let op = match self.explicit_operator.get() {
            Some(op) => op,
            None => {
                let op = self.mass_factor.left_solve(&self.operator)?;
                self.explicit_operator.get_or_init(|| op)
            }
        };
        self.source.assemble_projected_into(xi, t, out)?;
        let ax = op.matvec(xi);
        for (o, a) in out.iter_mut().zip(&ax) {
            *o -= a;
        }
        Ok(())
    }

    /// `M xi_t + (A + B) xi - G(xi, t)`
    pub fn residual(&self, xi: &[f64], xi_t: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut r = self.mass.matvec(xi_t);
        let ax = self.operator.matvec(xi);
        let g = self.source.assemble(xi, t)?;
        for ((ri, a), gi) in r.iter_mut().zip(&ax).zip(&g) {
            *ri += a - gi;
        }
        Ok(r)
    }

    fn field(&self, coeffs: Vec<f64>, t: f64, step: usize) -> Result<DgField> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::BlowUp { step });
        }
        DgField::new(self.space.clone(), coeffs, t)
    }

    /// Slope `q1` when `Q(u) = q0 + q1 u`.
    fn affine_slope(&self) -> Option<f64> {
        self.spec.chemistry_affine().map(|(_, q1)| q1)
    }

    /// Lipschitz constant of `Q` used by the Picard step bound: the declared
    /// bound, otherwise the largest sampled `|Q'|` on the state interval.
    pub fn chemistry_lipschitz(&self) -> Result<f64> {
        if let Some(q1) = self.affine_slope() {
            return Ok(q1.abs());
        }
        if let Some(l) = self.spec.bounds.lipschitz {
            return Ok(l);
        }
        let dq = Program::compile(&differentiate(&self.spec.chemistry, Var::U));
        let (a, b) = self.spec.bounds.state_interval;
        let mut max: f64 = 0.0;
        for i in 0..=1000 {
            let u = a + (b - a) * i as f64 / 1000.0;
            max = max.max(dq.eval(&[f64::NAN, f64::NAN, f64::NAN, u])?.abs());
        }
        Ok(max)
    }
}

/// L2 projection of `u0`, stamped `t = 0`.
pub fn initial_state(system: &SemidiscreteSystem) -> Result<DgField> {
    let spec = &system.spec;
    let mut f = system.space.l2_project(|x, y| spec.initial_at(x, y))?;
    f.time = 0.0;
    Ok(f)
}

/// Largest `max(|c|, |e|)` and `max(kx, ky)` over volume quadrature points.
pub fn coefficient_maxima(space: &DgSpace, spec: &ProblemSpec) -> Result<(f64, f64)> {
    let mesh = space.mesh();
    let (mut c_max, mut k_max): (f64, f64) = (0.0, 0.0);
    for el in 0..space.n_elements() {
        for r in &space.volume_rule().points {
            let p = mesh.map_to_physical(el, *r);
            c_max = c_max.max(spec.c.at(p[0], p[1])?.abs()).max(spec.e.at(p[0], p[1])?.abs());
            k_max = k_max.max(spec.kx.at(p[0], p[1])?.abs()).max(spec.ky.at(p[0], p[1])?.abs());
        }
    }
    Ok((c_max, k_max))
}

/// Stiffness rate of the interior-penalty term, an upper estimate of its
/// contribution to the spectral radius of `M^{-1} A`:
/// `3 (k + 1) (k + 2) sigma_max / h_min^(1 + beta0)`.
pub fn penalty_rate(penalty: &PenaltyConfig, k: usize, h_min: f64) -> f64 {
    let sigma = match &penalty.edge_sigma {
        Some(s) => s.iter().copied().fold(penalty.sigma0, f64::max),
        None => penalty.sigma0,
    };
    3.0 * ((k + 1) * (k + 2)) as f64 * sigma / h_min.powf(1.0 + penalty.beta0)
}

/// `safety / (c_max (2k+1) / h + k_max (2k+1)^2 / h^2 + p)` with `p` the
/// penalty rate. Zero rates everywhere are rejected.
pub fn cfl_formula(c_max: f64, k_max: f64, h_min: f64, k: usize, safety: f64, penalty: f64) -> Result<f64> {
    let p = (2 * k + 1) as f64;
    let rate = c_max * p / h_min + k_max * p * p / (h_min * h_min) + penalty;
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::invalid("no transport, diffusion or penalty: CFL step undefined"));
    }
    if !(h_min > 0.0 && safety > 0.0) {
        return Err(Error::invalid("CFL needs positive h_min and safety"));
    }
    Ok(safety / rate)
}

/// Explicit step size for `system`.
pub fn cfl_dt(system: &SemidiscreteSystem, safety: f64) -> Result<f64> {
    let k = system.space.degree();
    let h = system.space.mesh().h_min();
    let (c_max, k_max) = coefficient_maxima(&system.space, &system.spec)?;
    cfl_formula(c_max, k_max, h, k, safety, penalty_rate(&system.penalty, k, h))
}

/// Picard iterates that stop contracting within this factor of the
/// tolerance are accepted as converged to rounding level.
pub const STALL_FACTOR: f64 = 1e3;

/// Accuracy of a Picard correction relative to the full right-hand side
/// of the implicit system, below which the residual is rounding noise.
pub const LINEAR_FLOOR: f64 = 1e-12;

/// Linear tolerance of the Picard sweeps when the source is affine.
pub const AFFINE_LINEAR_TOL: f64 = 1e-12;

/// Implicit iteration matrix with its preconditioner, cached per `dt`.
struct ImplicitOperator {
    dt: f64,
    theta: f64,
    lambda: f64,
    matrix: SparseMatrix,
    pre: BlockJacobi,
}

/// Stepper state for one integrator on one system.
pub struct TimeStepper<'a> {
    system: &'a SemidiscreteSystem,
    config: TimeConfig,
    implicit: Option<ImplicitOperator>,
    steps: usize,
    picard_iterations: Vec<usize>,
}

impl<'a> TimeStepper<'a> {
    pub fn new(system: &'a SemidiscreteSystem, config: TimeConfig) -> Result<Self> {
        config.validate()?;
        Ok(TimeStepper {
            system,
            config,
            implicit: None,
            steps: 0,
            picard_iterations: Vec::new(),
        })
    }

    /// Picard iteration counts of the implicit steps taken so far.
    pub fn picard_iterations(&self) -> &[usize] {
        &self.picard_iterations
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn step(&mut self, state: &DgField, dt: f64) -> Result<DgField> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
        }
        let index = self.steps + 1;
        let out = match self.config.integrator {
            Integrator::ForwardEuler => self.forward_euler(state, dt, index),
            Integrator::SspRk3 => self.ssprk3(state, dt, index),
            Integrator::CrankNicolson if self.steps < self.config.startup_steps => {
                let half = self.theta_step(state, 0.5 * dt, 1.0, index)?;
                self.theta_step(&half, 0.5 * dt, 1.0, index)
            }
            Integrator::BackwardEuler | Integrator::CrankNicolson => {
                let theta = self.config.integrator.theta().expect("implicit integrator");
                self.theta_step(state, dt, theta, index)
            }
        }?;
        self.steps = index;
        Ok(out)
    }

    fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
        x.iter().zip(y).map(|(p, q)| p + a * q).collect()
    }

    fn forward_euler(&self, s: &DgField, dt: f64, index: usize) -> Result<DgField> {
        let f = self.system.rhs(&s.coeffs, s.time)?;
        self.system.field(Self::axpy(&s.coeffs, dt, &f), s.time + dt, index)
    }

    fn ssprk3(&self, s: &DgField, dt: f64, index: usize) -> Result<DgField> {
        let sys = self.system;
        let t = s.time;
        let u0 = &s.coeffs;
        let guard = |v: Vec<f64>| if v.iter().all(|c| c.is_finite()) { Ok(v) } else { Err(Error::BlowUp { step: index }) };
        let u1 = guard(Self::axpy(u0, dt, &sys.rhs(u0, t)?))?;
        let f1 = sys.rhs(&u1, t + dt)?;
        let u2: Vec<f64> = (0..u0.len()).map(|i| 0.75 * u0[i] + 0.25 * (u1[i] + dt * f1[i])).collect();
        let u2 = guard(u2)?;
        let f2 = sys.rhs(&u2, t + 0.5 * dt)?;
        let u3: Vec<f64> = (0..u0.len())
            .map(|i| u0[i] / 3.0 + 2.0 / 3.0 * (u2[i] + dt * f2[i]))
            .collect();
        sys.field(u3, t + dt, index)
    }

    fn implicit_operator(&mut self, dt: f64, theta: f64) -> Result<&ImplicitOperator> {
        let fresh = self.implicit.as_ref().is_some_and(|op| op.dt == dt && op.theta == theta);
        if !fresh {
            let sys = self.system;
            let dep = sys.spec.deposition();
            let mut lambda = match sys.affine_slope() {
                Some(q1) => dep - q1,
                None => dep,
            };
            // keep the shifted mass term safely positive
            if 1.0 + theta * dt * lambda < 0.5 {
                lambda = 0.0;
            }
            let scaled_mass = 1.0 + theta * dt * lambda;
            let matrix = sys.mass.linear_combination(scaled_mass, &sys.operator, theta * dt)?;
            let pre = BlockJacobi::new(&matrix, sys.space.n_loc())?;
            self.implicit = Some(ImplicitOperator {
                dt,
                theta,
                lambda,
                matrix,
                pre,
            });
        }
        Ok(self.implicit.as_ref().expect("operator just built"))
    }

    fn theta_step(&mut self, s: &DgField, dt: f64, theta: f64, index: usize) -> Result<DgField> {
        let sys = self.system;
        let affine = sys.affine_slope().is_some();
        if self.config.enforce_picard_bound && !affine {
            let l = sys.chemistry_lipschitz()?;
            if dt * l > 0.5 {
                return Err(Error::invalid(format!(
                    "dt L_Q = {} exceeds 0.5; reduce dt for the Picard iteration",
                    dt * l
                )));
            }
        }
        let (t0, t1) = (s.time, s.time + dt);
        let xi0 = &s.coeffs;
        let n = xi0.len();

        // fixed part: (M - (1 - theta) dt (A + B)) xi0 + (1 - theta) dt G(xi0, t0)
        let mut fixed = sys.mass.matvec(xi0);
        if theta < 1.0 {
            let w = (1.0 - theta) * dt;
            let ax = sys.operator.matvec(xi0);
            let g0 = sys.source.assemble(xi0, t0)?;
            for i in 0..n {
                fixed[i] += w * (g0[i] - ax[i]);
            }
        }
        // each sweep solves for the correction, so the relative linear
        // tolerance tightens in absolute terms as the iteration settles
        let opts = KrylovOptions {
            method: if sys.symmetric { KrylovMethod::Cg } else { KrylovMethod::BiCgStab },
            // an affine source is exact after one sweep, so that sweep must
            // be accurate to the Picard level for the second to confirm it
            tol: if affine { self.config.linear_tol.min(AFFINE_LINEAR_TOL) } else { self.config.linear_tol },
            max_iter: None,
        };
        let (picard_tol, max_iter) = (self.config.picard_tol, self.config.picard_max_iter);
        let op = self.implicit_operator(dt, theta)?;
        let mut xi = xi0.clone();
        let mut history = Vec::new();
        let mut converged = None;
        let mut kx = vec![0.0; n];
        for it in 1..=max_iter {
            let g = sys.source.assemble_shifted(&xi, t1, op.lambda)?;
            op.matrix.matvec_into(&xi, &mut kx);
            let mut full_sq = 0.0;
            let mut r_sq = 0.0;
            let r: Vec<f64> = (0..n)
                .map(|i| {
                    let full = fixed[i] + theta * dt * g[i];
                    full_sq += full * full;
                    let ri = full - kx[i];
                    r_sq += ri * ri;
                    ri
                })
                .collect();
            // near convergence the residual is dominated by cancellation in
            // K xi; asking for more than LINEAR_FLOOR relative to the
            // uncorrected right-hand side would chase rounding noise
            let opts = KrylovOptions {
                tol: opts.tol.max(LINEAR_FLOOR * (full_sq / r_sq).sqrt()),
                ..opts
            };
            let (delta, _) = krylov_solve(&op.matrix, &r, None, &opts, &op.pre)?;
            let mut diff = 0.0_f64;
            let mut scale = 0.0_f64;
            for (x, d) in xi.iter_mut().zip(&delta) {
                *x += d;
                diff = diff.max(d.abs());
                scale = scale.max(x.abs());
            }
            if !diff.is_finite() {
                return Err(Error::BlowUp { step: index });
            }
            let bound = picard_tol * (1.0 + scale);
            // below a small multiple of the tolerance an iteration that no
            // longer contracts is looking at rounding noise in the residual
            let stalled = history.last().is_some_and(|&prev| diff >= 0.5 * prev) && diff <= STALL_FACTOR * bound;
            history.push(diff);
            if diff <= bound || (it >= 3 && stalled) {
                converged = Some(it);
                break;
            }
        }
        match converged {
            Some(it) => {
                self.picard_iterations.push(it);
                sys.field(xi, t1, index)
            }
            None => Err(Error::Picard { history }),
        }
    }
}

/// One forward Euler step.
pub fn step_forward_euler(system: &SemidiscreteSystem, state: &DgField, dt: f64) -> Result<DgField> {
    let cfg = TimeConfig::new(Integrator::ForwardEuler, StepSize::Fixed(dt), state.time + dt);
    TimeStepper::new(system, cfg)?.step(state, dt)
}

/// One three-stage strong-stability-preserving Runge-Kutta step.
pub fn step_ssprk3(system: &SemidiscreteSystem, state: &DgField, dt: f64) -> Result<DgField> {
    let cfg = TimeConfig::new(Integrator::SspRk3, StepSize::Fixed(dt), state.time + dt);
    TimeStepper::new(system, cfg)?.step(state, dt)
}

pub fn step_backward_euler(system: &SemidiscreteSystem, state: &DgField, dt: f64) -> Result<DgField> {
    let cfg = TimeConfig::new(Integrator::BackwardEuler, StepSize::Fixed(dt), state.time + dt);
    TimeStepper::new(system, cfg)?.step(state, dt)
}

pub fn step_crank_nicolson(system: &SemidiscreteSystem, state: &DgField, dt: f64) -> Result<DgField> {
    let cfg = TimeConfig::new(Integrator::CrankNicolson, StepSize::Fixed(dt), state.time + dt);
    TimeStepper::new(system, cfg)?.step(state, dt)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observer {
    L2Norm,
    /// `int U_h`
    Mass,
    /// Needs an exact solution.
    L2Error,
    /// Needs an exact solution.
    EnergyError,
}

impl Observer {
    pub fn name(self) -> &'static str {
        match self {
            Observer::L2Norm => "l2_norm",
            Observer::Mass => "mass",
            Observer::L2Error => "l2_error",
            Observer::EnergyError => "energy_error",
        }
    }

    /// Norms always, errors when an exact solution is known.
    pub fn defaults(spec: &ProblemSpec) -> Vec<Observer> {
        let mut v = vec![Observer::L2Norm, Observer::Mass];
        if spec.exact.is_some() {
            v.extend([Observer::L2Error, Observer::EnergyError]);
        }
        v
    }

    fn evaluate(self, system: &SemidiscreteSystem, field: &DgField) -> Result<f64> {
        let exact = || {
            system
                .spec
                .exact
                .as_ref()
                .ok_or_else(|| Error::invalid(format!("observer {} needs an exact solution", self.name())))
        };
        match self {
            Observer::L2Norm => Ok(analysis::l2_norm(field)),
            Observer::Mass => Ok(analysis::total_mass(field)),
            Observer::L2Error => analysis::l2_error(field, exact()?, field.time),
            Observer::EnergyError => {
                analysis::energy_error(field, exact()?, field.time, &system.spec, &system.penalty)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObserverSample {
    pub step: usize,
    pub time: f64,
    pub values: Vec<f64>,
}

/// Per-step callback, e.g. for field output.
pub type StepCallback<'a> = &'a mut dyn FnMut(usize, &DgField) -> Result<()>;

#[derive(Default)]
pub struct SolveOptions<'a> {
    pub observers: Vec<Observer>,
    /// Sample every `stride` steps (and always at the last step); 0 means 1.
    pub stride: usize,
    /// Keep every state for post-processing.
    pub record_states: bool,
    pub callback: Option<StepCallback<'a>>,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub final_state: DgField,
    pub observers: Vec<Observer>,
    pub samples: Vec<ObserverSample>,
    pub steps: usize,
    /// Nominal step size; the last step may be shorter.
    pub dt: f64,
    pub step_sizes: Vec<f64>,
    /// Initial state followed by every step when recording.
    pub states: Vec<DgField>,
    pub picard_iterations: Vec<usize>,
}

/// Resolve the configured step size.
pub fn resolve_dt(system: &SemidiscreteSystem, config: &TimeConfig) -> Result<f64> {
    match config.dt {
        StepSize::Fixed(dt) => Ok(dt),
        StepSize::Auto => cfl_dt(system, config.safety),
    }
}

/// Integrate from the projected initial data to `T`; the last step is
/// shortened to land on `T` exactly.
pub fn solve(system: &SemidiscreteSystem, config: &TimeConfig, options: SolveOptions<'_>) -> Result<SolveResult> {
    let init = initial_state(system)?;
    solve_from(system, config, init, options)
}

pub fn solve_from(
    system: &SemidiscreteSystem,
    config: &TimeConfig,
    init: DgField,
    mut options: SolveOptions<'_>,
) -> Result<SolveResult> {
    config.validate()?;
    let dt = resolve_dt(system, config)?;
    let stride = options.stride.max(1);
    let final_time = config.final_time;
    let mut stepper = TimeStepper::new(system, config.clone())?;
    let mut samples = Vec::new();
    let mut states = Vec::new();
    let mut step_sizes = Vec::new();
    let sample = |step: usize, f: &DgField, obs: &[Observer]| -> Result<ObserverSample> {
        Ok(ObserverSample {
            step,
            time: f.time,
            values: obs.iter().map(|o| o.evaluate(system, f)).collect::<Result<_>>()?,
        })
    };
    samples.push(sample(0, &init, &options.observers)?);
    if let Some(cb) = options.callback.as_mut() {
        cb(0, &init)?;
    }
    if options.record_states {
        states.push(init.clone());
    }
    let mut state = init;
    let mut step = 0;
    // tolerance for landing on T
    let eps = 1e-12 * final_time.max(dt);
    while final_time - state.time > eps {
        let remaining = final_time - state.time;
        let h = if remaining - dt <= eps { remaining } else { dt };
        step += 1;
        let mut next = stepper.step(&state, h).map_err(|e| match e {
            Error::BlowUp { .. } => Error::BlowUp { step },
            other => other,
        })?;
        if final_time - next.time <= eps {
            next.time = final_time;
        }
        step_sizes.push(h);
        let last = final_time - next.time <= eps;
        if step % stride == 0 || last {
            samples.push(sample(step, &next, &options.observers)?);
        }
        if let Some(cb) = options.callback.as_mut() {
            cb(step, &next)?;
        }
        if options.record_states {
            states.push(next.clone());
        }
        state = next;
    }
    Ok(SolveResult {
        final_state: state,
        observers: options.observers,
        samples,
        steps: step,
        dt,
        step_sizes,
        states,
        picard_iterations: stepper.picard_iterations.clone(),
    })
}

#[cfg(test)]
mod tests;
