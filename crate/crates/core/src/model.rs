//! Problem definition: transport coefficients, deposition, emission and
//! chemistry for
//!
//! ```text
//! u_t + (c u)_x + (e u)_y - (kx u_x)_x - (ky u_y)_y = f(u),
//! f(u) = -(k1 + k2) u + E(x, y, t) + Q(u),
//! ```
//!
//! with `u = u0` at `t = 0` and `u = 0` on the boundary. Also builds
//! manufactured-solution forcing and checks the standing coefficient
//! assumptions by sampling.

use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{differentiate, parse, simplify, Env, Expr, Var};
use crate::mesh::{build_uniform_mesh, Rect};
use crate::space::triangle_quadrature;

/// An expression with a cached value when it is constant.
#[derive(Clone, Debug)]
pub struct Coefficient {
    expr: Expr,
    constant: Option<f64>,
}

impl Coefficient {
    pub fn new(expr: Expr) -> Self {
        let expr = simplify(&expr);
        let constant = match expr {
            Expr::Num(v) => Some(v),
            _ => None,
        };
        Coefficient { expr, constant }
    }

    pub fn constant(v: f64) -> Self {
        Coefficient {
            expr: Expr::Num(v),
            constant: Some(v),
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    #[inline]
    pub fn at(&self, x: f64, y: f64) -> Result<f64> {
        match self.constant {
            Some(v) => Ok(v),
            None => self.expr.eval(&Env::new().with(Var::X, x).with(Var::Y, y)),
        }
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

/// User-declared bounds used only by [`validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct DeclaredBounds {
    /// `(k_lower, k_upper)` for `|kx|`, `|ky|`.
    pub diffusion: Option<(f64, f64)>,
    /// `(c_lower, c_upper)` for `|c|`, `|e|`.
    pub wind: Option<(f64, f64)>,
    /// Lipschitz bound for `Q` on `state_interval`.
    pub lipschitz: Option<f64>,
    pub state_interval: (f64, f64),
}

impl Default for DeclaredBounds {
    fn default() -> Self {
        DeclaredBounds {
            diffusion: None,
            wind: None,
            lipschitz: None,
            state_interval: (-1.0, 1.0),
        }
    }
}

/// Closed-form solution and its derivatives.
#[derive(Clone, Debug)]
pub struct ExactSolution {
    pub u: Expr,
    pub u_t: Expr,
    pub u_x: Expr,
    pub u_y: Expr,
    pub u_xx: Expr,
    pub u_yy: Expr,
}

impl ExactSolution {
    /// `u` must be an expression in `x`, `y`, `t` vanishing on the boundary
    /// of `domain` (checked at sampled points to 1e-12).
    pub fn new(u: Expr, domain: Rect) -> Result<Self> {
        if u.depends_on(Var::U) {
            return Err(Error::invalid("exact solution may not depend on u"));
        }
        let u = simplify(&u);
        let u_x = differentiate(&u, Var::X);
        let u_y = differentiate(&u, Var::Y);
        let exact = ExactSolution {
            u_t: differentiate(&u, Var::T),
            u_xx: differentiate(&u_x, Var::X),
            u_yy: differentiate(&u_y, Var::Y),
            u,
            u_x,
            u_y,
        };
        let worst = exact.boundary_violation(domain)?;
        if worst > 1e-12 {
            return Err(Error::invalid(format!(
                "exact solution does not vanish on the boundary (|u| = {worst:e})"
            )));
        }
        Ok(exact)
    }

    pub fn from_text(text: &str, domain: Rect) -> Result<Self> {
        Self::new(parse(text)?, domain)
    }

    /// Largest `|u|` over boundary samples at a few times.
    pub fn boundary_violation(&self, d: Rect) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let n = 16;
        for t in [0.0, 0.37, 1.0] {
            for i in 0..=n {
                let s = i as f64 / n as f64;
                let x = d.x0 + s * d.width();
                let y = d.y0 + s * d.height();
                for (px, py) in [(x, d.y0), (x, d.y1), (d.x0, y), (d.x1, y)] {
                    worst = worst.max(self.u.eval(&Env::xyt(px, py, t))?.abs());
                }
            }
        }
        Ok(worst)
    }

    pub fn value(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        self.u.eval(&Env::xyt(x, y, t))
    }

    pub fn gradient(&self, x: f64, y: f64, t: f64) -> Result<[f64; 2]> {
        let env = Env::xyt(x, y, t);
        Ok([self.u_x.eval(&env)?, self.u_y.eval(&env)?])
    }

    pub fn time_derivative(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        self.u_t.eval(&Env::xyt(x, y, t))
    }
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub kx: Coefficient,
    pub ky: Coefficient,
    pub c: Coefficient,
    pub e: Coefficient,
    pub k1: f64,
    pub k2: f64,
    /// `E(x, y, t)`
    pub emission: Expr,
    /// `Q(u)`
    pub chemistry: Expr,
    /// `u0(x, y)`
    pub u0: Expr,
    pub final_time: f64,
    pub domain: Rect,
    pub bounds: DeclaredBounds,
    pub exact: Option<ExactSolution>,
}

/// The constant transport/diffusion part of a problem, used to build
/// manufactured problems.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantCoefficients {
    pub kx: f64,
    pub ky: f64,
    pub c: f64,
    pub e: f64,
    pub k1: f64,
    pub k2: f64,
}

fn check_vars(name: &str, e: &Expr, allowed: &[Var]) -> Result<()> {
    match e.variables().into_iter().find(|v| !allowed.contains(v)) {
        Some(v) => Err(Error::invalid(format!(
            "{name} may not depend on '{}'",
            v.name()
        ))),
        None => Ok(()),
    }
}

impl ProblemSpec {
    /// Check which variables each expression may use: transport and
    /// diffusion in `(x, y)`, emission in `(x, y, t)`, chemistry in `u`,
    /// initial data in `(x, y)`.
    pub fn check_structure(&self) -> Result<()> {
        let xy = [Var::X, Var::Y];
        check_vars("kx", self.kx.expr(), &xy)?;
        check_vars("ky", self.ky.expr(), &xy)?;
        check_vars("c", self.c.expr(), &xy)?;
        check_vars("e", self.e.expr(), &xy)?;
        check_vars("E", &self.emission, &[Var::X, Var::Y, Var::T])?;
        check_vars("Q", &self.chemistry, &[Var::U])?;
        check_vars("u0", &self.u0, &xy)?;
        if !self.k1.is_finite() || !self.k2.is_finite() || !self.final_time.is_finite() {
            return Err(Error::invalid("k1, k2 and T must be finite"));
        }
        self.domain.validate()
    }

    /// Manufactured problem: `exact` solves the equation once the emission
    /// is replaced by the generated forcing; `u0 = exact(t = 0)`.
    pub fn manufactured(
        exact: &str,
        coeffs: ConstantCoefficients,
        chemistry: &str,
        final_time: f64,
        domain: Rect,
    ) -> Result<Self> {
        let exact = ExactSolution::from_text(exact, domain)?;
        let mut spec = ProblemSpec {
            kx: Coefficient::constant(coeffs.kx),
            ky: Coefficient::constant(coeffs.ky),
            c: Coefficient::constant(coeffs.c),
            e: Coefficient::constant(coeffs.e),
            k1: coeffs.k1,
            k2: coeffs.k2,
            emission: Expr::Num(0.0),
            chemistry: parse(chemistry)?,
            u0: simplify(&exact.u.substitute(Var::T, &Expr::Num(0.0))),
            final_time,
            domain,
            bounds: DeclaredBounds::default(),
            exact: None,
        };
        spec.emission = mms_forcing(&spec, &exact)?;
        spec.exact = Some(exact);
        spec.check_structure()?;
        Ok(spec)
    }

    pub fn deposition(&self) -> f64 {
        self.k1 + self.k2
    }

    #[inline]
    pub fn emission_at(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        self.emission.eval(&Env::xyt(x, y, t))
    }

    #[inline]
    pub fn chemistry_at(&self, u: f64) -> Result<f64> {
        self.chemistry.eval(&Env::new().with(Var::U, u))
    }

    pub fn initial_at(&self, x: f64, y: f64) -> Result<f64> {
        self.u0.eval(&Env::new().with(Var::X, x).with(Var::Y, y))
    }

    /// `Q(u) = q0 + q1 u` exactly when `Q` is affine in `u`.
    pub fn chemistry_affine(&self) -> Option<(f64, f64)> {
        let dq = differentiate(&self.chemistry, Var::U);
        let slope = dq.as_constant()?;
        let q0 = simplify(&self.chemistry.substitute(Var::U, &Expr::Num(0.0))).as_constant()?;
        Some((q0, slope))
    }

    /// True when `kx`, `ky`, `c`, `e` are all constants.
    pub fn has_constant_transport(&self) -> bool {
        [&self.kx, &self.ky, &self.c, &self.e]
            .iter()
            .all(|k| k.as_constant().is_some())
    }
}

/// Source `f(u) = -(k1 + k2) u + E(x, y, t) + Q(u)`.
pub fn f_eval(spec: &ProblemSpec, u: f64, x: f64, y: f64, t: f64) -> Result<f64> {
    Ok(-spec.deposition() * u + spec.emission_at(x, y, t)? + spec.chemistry_at(u)?)
}

/// Emission that makes `exact` solve the equation:
/// `u_t + c u_x + e u_y - kx u_xx - ky u_yy + (k1 + k2) u - Q(u)`.
pub fn mms_forcing(spec: &ProblemSpec, exact: &ExactSolution) -> Result<Expr> {
    let constant = |name: &str, k: &Coefficient| {
        k.as_constant().ok_or_else(|| {
            Error::UnsupportedConfig(format!(
                "manufactured forcing needs a constant {name}, got {k}"
            ))
        })
    };
    let kx = constant("kx", &spec.kx)?;
    let ky = constant("ky", &spec.ky)?;
    let c = constant("c", &spec.c)?;
    let e = constant("e", &spec.e)?;
    let n = Expr::Num;
    let u = exact.u.clone();
    let forcing = [
        exact.u_t.clone(),
        Expr::mul(n(c), exact.u_x.clone()),
        Expr::mul(n(e), exact.u_y.clone()),
        Expr::mul(n(-kx), exact.u_xx.clone()),
        Expr::mul(n(-ky), exact.u_yy.clone()),
        Expr::mul(n(spec.deposition()), u.clone()),
        Expr::neg(spec.chemistry.substitute(Var::U, &u)),
    ]
    .into_iter()
    .reduce(Expr::add)
    .unwrap_or(Expr::Num(0.0));
    Ok(simplify(&forcing))
}

/// Pointwise residual of the PDE for `exact` under `spec` at `(x, y, t)`.
pub fn pde_residual(spec: &ProblemSpec, exact: &ExactSolution, x: f64, y: f64, t: f64) -> Result<f64> {
    let env = Env::xyt(x, y, t);
    let u = exact.u.eval(&env)?;
    let lhs = exact.u_t.eval(&env)? + spec.c.at(x, y)? * exact.u_x.eval(&env)?
        + spec.e.at(x, y)? * exact.u_y.eval(&env)?
        - spec.kx.at(x, y)? * exact.u_xx.eval(&env)?
        - spec.ky.at(x, y)? * exact.u_yy.eval(&env)?;
    Ok(lhs - f_eval(spec, u, x, y, t)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
    /// Sample location (`(x, y)`, or `(u, 0)` for state checks) of the
    /// first violation.
    pub witness: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skipped => "SKIP",
            };
            write!(f, "{status:4}  {:<20} {}", c.name, c.detail)?;
            if let Some(w) = c.witness {
                write!(f, " at ({}, {})", w[0], w[1])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Number of state samples for the Lipschitz check.
const LIPSCHITZ_SAMPLES: usize = 1000;

fn sample_points(domain: Rect) -> Vec<[f64; 2]> {
    let mesh = build_uniform_mesh(8, 8, domain).expect("validated domain");
    let rule = triangle_quadrature(4).expect("tabulated degree");
    (0..mesh.n_elements())
        .flat_map(|t| rule.points.iter().map(move |&r| (t, r)))
        .map(|(t, r)| mesh.map_to_physical(t, r))
        .collect()
}

fn bound_check(
    name: &'static str,
    pair: [&Coefficient; 2],
    declared: Option<(f64, f64)>,
    points: &[[f64; 2]],
) -> CheckResult {
    let Some((lo, hi)) = declared else {
        return CheckResult {
            name,
            status: CheckStatus::Skipped,
            detail: "no bounds declared".into(),
            witness: None,
        };
    };
    if !(lo > 0.0 && lo <= hi) {
        return CheckResult {
            name,
            status: CheckStatus::Fail,
            detail: format!("declared bounds [{lo}, {hi}] need 0 < lower <= upper"),
            witness: None,
        };
    }
    for &p in points {
        for k in pair {
            match k.at(p[0], p[1]) {
                Ok(v) if v.abs() < lo || v.abs() > hi => {
                    return CheckResult {
                        name,
                        status: CheckStatus::Fail,
                        detail: format!("|{k}| = {} outside [{lo}, {hi}]", v.abs()),
                        witness: Some(p),
                    }
                }
                Ok(_) => {}
                Err(err) => {
                    return CheckResult {
                        name,
                        status: CheckStatus::Fail,
                        detail: err.to_string(),
                        witness: Some(p),
                    }
                }
            }
        }
    }
    CheckResult {
        name,
        status: CheckStatus::Pass,
        detail: format!("within [{lo}, {hi}] at {} samples", points.len()),
        witness: None,
    }
}

fn lipschitz_check(spec: &ProblemSpec) -> CheckResult {
    let name = "lipschitz";
    let Some(bound) = spec.bounds.lipschitz else {
        return CheckResult {
            name,
            status: CheckStatus::Skipped,
            detail: "no Lipschitz bound declared".into(),
            witness: None,
        };
    };
    let (a, b) = spec.bounds.state_interval;
    let dq = differentiate(&spec.chemistry, Var::U);
    let local = !differentiate(&dq, Var::U).as_constant().is_some_and(|v| v == 0.0);
    let scope = if local {
        "local bound on the declared interval only"
    } else {
        "Q affine, bound is global"
    };
    let mut max_slope: f64 = 0.0;
    for i in 0..LIPSCHITZ_SAMPLES {
        let u = a + (b - a) * i as f64 / (LIPSCHITZ_SAMPLES - 1) as f64;
        match dq.eval(&Env::new().with(Var::U, u)) {
            Ok(s) => {
                max_slope = max_slope.max(s.abs());
                if s.abs() > bound {
                    return CheckResult {
                        name,
                        status: CheckStatus::Fail,
                        detail: format!("|dQ/du| = {} exceeds L_Q = {bound} ({scope})", s.abs()),
                        witness: Some([u, 0.0]),
                    };
                }
            }
            Err(err) => {
                return CheckResult {
                    name,
                    status: CheckStatus::Fail,
                    detail: err.to_string(),
                    witness: Some([u, 0.0]),
                }
            }
        }
    }
    CheckResult {
        name,
        status: CheckStatus::Pass,
        detail: format!("max |dQ/du| = {max_slope} <= {bound} on [{a}, {b}] ({scope})"),
        witness: None,
    }
}

fn simple(name: &'static str, ok: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
        detail,
        witness: None,
    }
}

/// Evaluate the standing assumptions on a sample. Failures are report
/// entries, never errors.
pub fn validate(spec: &ProblemSpec) -> ValidationReport {
    let mut checks = Vec::new();
    checks.push(match spec.check_structure() {
        Ok(()) => simple("structure", true, "expression variables admissible".into()),
        Err(e) => simple("structure", false, e.to_string()),
    });
    if spec.domain.validate().is_err() {
        return ValidationReport { checks };
    }
    let points = sample_points(spec.domain);
    checks.push(bound_check("diffusion-bounds", [&spec.kx, &spec.ky], spec.bounds.diffusion, &points));
    checks.push(bound_check("wind-bounds", [&spec.c, &spec.e], spec.bounds.wind, &points));
    checks.push(lipschitz_check(spec));
    checks.push(simple(
        "deposition",
        spec.k1 >= 0.0 && spec.k2 >= 0.0,
        format!("k1 = {}, k2 = {}", spec.k1, spec.k2),
    ));
    checks.push(simple(
        "final-time",
        spec.final_time > 0.0,
        format!("T = {}", spec.final_time),
    ));
    if let Some(exact) = &spec.exact {
        checks.push(match exact.boundary_violation(spec.domain) {
            Ok(v) => simple("exact-boundary", v <= 1e-12, format!("max |u| on boundary = {v:e}")),
            Err(e) => simple("exact-boundary", false, e.to_string()),
        });
    }
    ValidationReport { checks }
}

/// Built-in problems for reproducible runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// `u = exp(-t) sin(pi x) sin(pi y)` with wind, diffusion, deposition
    /// and `Q = 0.1 sin(u)`.
    SmoothMms,
    /// `u = x (1 - x) y (1 - y) (1 + t)`, same coefficients.
    PolynomialMms,
    /// No source: a sine bump advected and diffused out of the domain.
    DecayTest,
    /// No transport, diffusion or source: nothing moves.
    ConservationTest,
}

/// Coefficients shared by the manufactured presets.
pub const MMS_COEFFICIENTS: ConstantCoefficients = ConstantCoefficients {
    kx: 0.05,
    ky: 0.05,
    c: 1.0,
    e: 0.5,
    k1: 0.05,
    k2: 0.05,
};

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::SmoothMms,
        Preset::PolynomialMms,
        Preset::DecayTest,
        Preset::ConservationTest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::SmoothMms => "smooth-mms",
            Preset::PolynomialMms => "polynomial-mms",
            Preset::DecayTest => "decay-test",
            Preset::ConservationTest => "conservation-test",
        }
    }

    pub fn from_name(name: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == name)
    }

    /// True when the preset expects the penalty switched off (pure NIPG
    /// with `sigma0 = 0`), so that the discrete operator vanishes.
    pub fn wants_zero_penalty(self) -> bool {
        self == Preset::ConservationTest
    }

    pub fn build(self) -> ProblemSpec {
        let domain = Rect::unit();
        let mms_bounds = DeclaredBounds {
            diffusion: Some((0.05, 0.05)),
            wind: Some((0.5, 1.0)),
            lipschitz: Some(0.1),
            state_interval: (-1.0, 1.0),
        };
        let spec = match self {
            Preset::SmoothMms => ProblemSpec::manufactured(
                "exp(-t)*sin(pi*x)*sin(pi*y)",
                MMS_COEFFICIENTS,
                "0.1*sin(u)",
                0.1,
                domain,
            )
            .map(|s| ProblemSpec { bounds: mms_bounds.clone(), ..s }),
            Preset::PolynomialMms => ProblemSpec::manufactured(
                "x*(1-x)*y*(1-y)*(1+t)",
                MMS_COEFFICIENTS,
                "0.1*sin(u)",
                1.0,
                domain,
            )
            .map(|s| ProblemSpec { bounds: mms_bounds.clone(), ..s }),
            Preset::DecayTest => Ok(ProblemSpec {
                kx: Coefficient::constant(0.05),
                ky: Coefficient::constant(0.05),
                c: Coefficient::constant(1.0),
                e: Coefficient::constant(0.5),
                k1: 0.0,
                k2: 0.0,
                emission: Expr::Num(0.0),
                chemistry: Expr::Num(0.0),
                u0: parse("sin(pi*x)*sin(pi*y)").expect("preset expression"),
                final_time: 0.1,
                domain,
                bounds: DeclaredBounds {
                    diffusion: Some((0.05, 0.05)),
                    wind: Some((0.5, 1.0)),
                    lipschitz: Some(0.0),
                    state_interval: (-1.0, 1.0),
                },
                exact: None,
            }),
            Preset::ConservationTest => Ok(ProblemSpec {
                kx: Coefficient::constant(0.0),
                ky: Coefficient::constant(0.0),
                c: Coefficient::constant(0.0),
                e: Coefficient::constant(0.0),
                k1: 0.0,
                k2: 0.0,
                emission: Expr::Num(0.0),
                chemistry: Expr::Num(0.0),
                u0: parse("1 + x*y + sin(pi*x)").expect("preset expression"),
                final_time: 0.1,
                domain,
                bounds: DeclaredBounds::default(),
                exact: None,
            }),
        };
        spec.expect("preset problems are well formed")
    }
}
