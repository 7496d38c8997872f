use super::*;
use crate::expr::{parse, Expr};
use crate::mesh::Rect;
use crate::model::{Coefficient, Preset};
use crate::solver::{SolveResult, StepSize};

fn space(n: usize, k: usize) -> Arc<DgSpace> {
    unit_space(Rect::unit(), n, k).unwrap()
}

fn random_field(space: &Arc<DgSpace>, rng: &mut ChaCha8Rng) -> DgField {
    let c = (0..space.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DgField::new(space.clone(), c, 0.0).unwrap()
}

fn sipg(k: usize) -> PenaltyConfig {
    PenaltyConfig::default_for(Scheme::Sipg, k)
}

#[test]
fn observed_order_examples() {
    assert!((observed_order(0.2, 0.1, 0.1, 0.05) - 1.0).abs() < 1e-15);
    assert!((observed_order(0.08, 0.02, 0.1, 0.05) - 2.0).abs() < 1e-15);
}

#[test]
fn seminorm_vanishes_on_constants_and_is_homogeneous() {
    let s = space(4, 2);
    let spec = Preset::SmoothMms.build();
    let one = s.l2_project(|_, _| Ok(1.0)).unwrap();
    assert!(energy_seminorm(&one, &spec, &sipg(2)).unwrap() < 1e-12);
    // the boundary-augmented norm sees the boundary jumps of a constant
    assert!(energy_norm_augmented(&one, &spec, &sipg(2)).unwrap() > 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = random_field(&s, &mut rng);
    let n = energy_seminorm(&v, &spec, &sipg(2)).unwrap();
    let scaled = DgField::new(s.clone(), v.coeffs.iter().map(|c| -2.5 * c).collect(), 0.0).unwrap();
    assert!((energy_seminorm(&scaled, &spec, &sipg(2)).unwrap() - 2.5 * n).abs() <= 1e-13 * n);
}

#[test]
fn seminorm_triangle_inequality() {
    let s = space(4, 1);
    let spec = Preset::SmoothMms.build();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let v = random_field(&s, &mut rng);
        let w = random_field(&s, &mut rng);
        let sum = DgField::new(s.clone(), v.coeffs.iter().zip(&w.coeffs).map(|(a, b)| a + b).collect(), 0.0).unwrap();
        let p = sipg(1);
        let lhs = energy_seminorm(&sum, &spec, &p).unwrap();
        let rhs = energy_seminorm(&v, &spec, &p).unwrap() + energy_seminorm(&w, &spec, &p).unwrap();
        assert!(lhs <= rhs + 1e-12);
    }
}

#[test]
fn nipg_quadratic_form_is_the_augmented_norm() {
    let s = space(3, 2);
    let spec = Preset::SmoothMms.build();
    let p = PenaltyConfig::new(Scheme::Nipg, 3.0, 1.0).unwrap();
    let a = assemble_diffusion(&s, &spec, &p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let v = random_field(&s, &mut rng);
        let q = quadratic_form(&a, &v.coeffs).unwrap();
        let n = energy_norm_augmented(&v, &spec, &p).unwrap().powi(2);
        assert!((q - n).abs() <= 1e-12 * n, "{q} vs {n}");
    }
}

#[test]
fn errors_against_exact_solution() {
    let spec = Preset::PolynomialMms.build();
    let exact = spec.exact.clone().unwrap();
    let s = space(2, 4);
    let u = Program::compile(&exact.u);
    let f = s.l2_project(|x, y| u.eval(&[x, y, 0.5, f64::NAN])).unwrap();
    assert!(l2_error(&f, &exact, 0.5).unwrap() <= 1e-12);
    assert!(energy_error(&f, &exact, 0.5, &spec, &sipg(4)).unwrap() <= 1e-10);
    // zero field: the error is the norm of sin(pi x) sin(pi y), i.e. 1/2
    let smooth = Preset::SmoothMms.build().exact.unwrap();
    let zero = DgField::zeros(space(4, 3));
    assert!((l2_error(&zero, &smooth, 0.0).unwrap() - 0.5).abs() < 1e-9);
    // sign symmetry: |U - u| and |(2 P u - U) - u| agree
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = space(3, 2);
    let pu = s.l2_project(|x, y| smooth.value(x, y, 0.0)).unwrap();
    let d = random_field(&s, &mut rng);
    let plus = DgField::new(s.clone(), pu.coeffs.iter().zip(&d.coeffs).map(|(a, b)| a + 1e-2 * b).collect(), 0.0).unwrap();
    let minus = DgField::new(s.clone(), pu.coeffs.iter().zip(&d.coeffs).map(|(a, b)| a - 1e-2 * b).collect(), 0.0).unwrap();
    let (ep, em) = (l2_error(&plus, &smooth, 0.0).unwrap(), l2_error(&minus, &smooth, 0.0).unwrap());
    assert!(ep > 0.0 && em > 0.0);
}

#[test]
fn norms_of_simple_fields() {
    let s = space(4, 1);
    let one = s.l2_project(|_, _| Ok(1.0)).unwrap();
    assert!((l2_norm(&one) - 1.0).abs() < 1e-13);
    assert!((total_mass(&one) - 1.0).abs() < 1e-13);
    assert_eq!(element_masses(&one).len(), s.n_elements());
}

#[test]
fn convergence_study_needs_doubling_levels() {
    let spec = Preset::SmoothMms.build();
    let rule = TimeStepRule::Scaled { integrator: Integrator::BackwardEuler, dt0: 0.05 };
    assert!(convergence_study(&spec, 1, &[2, 4], &sipg(1), rule).is_err());
    assert!(convergence_study(&spec, 1, &[2, 4, 6], &sipg(1), rule).is_err());
    assert!(convergence_study(&Preset::DecayTest.build(), 1, &[2, 4, 8], &sipg(1), rule).is_err());
}

#[test]
fn small_convergence_study() {
    let spec = Preset::SmoothMms.build();
    let rule = TimeStepRule::Scaled { integrator: Integrator::CrankNicolson, dt0: 0.02 };
    let r = convergence_study(&spec, 1, &[2, 4, 8], &sipg(1), rule).unwrap();
    assert_eq!(r.levels.len(), 3);
    for w in r.levels.windows(2) {
        assert_eq!(w[1].h, 0.5 * w[0].h);
        assert!(w[1].energy_error < w[0].energy_error);
    }
    assert_eq!(r.l2_orders()[0], None);
    assert!(r.energy_orders()[2].unwrap() > 0.5);
    assert!(format!("{r}").contains("crank-nicolson"));
}

#[test]
fn coercivity_scan_separates_penalties() {
    let s = space(4, 1);
    let spec = Preset::SmoothMms.build();
    let r = coercivity_scan(&s, &spec, Scheme::Sipg, &[0.0, 10.0], 1.0, 100, 7).unwrap();
    assert!(r.entries[0].min_ratio() <= 0.0, "{r}");
    assert!(r.entries[1].min_ratio() > 0.0, "{r}");
    assert_eq!(r.threshold, Some(10.0));
    let r = coercivity_scan(&s, &spec, Scheme::Nipg, &[0.1], 1.0, 20, 7).unwrap();
    assert!(r.entries[0].min_ratio() > 0.0);
    assert!(coercivity_scan(&s, &spec, Scheme::Nipg, &[0.1], 1.0, 0, 7).is_err());
}

#[test]
fn consistency_of_polynomial_solution() {
    let spec = Preset::PolynomialMms.build();
    for n in [2, 4] {
        let sys = SemidiscreteSystem::new(space(n, 4), spec.clone(), sipg(4)).unwrap();
        for t in [0.0, 0.5, 1.0] {
            let r = consistency_residual(&sys, t).unwrap();
            assert!(r <= 1e-10, "n={n} t={t} r={r}");
        }
    }
    // degree too low to represent the solution
    let sys = SemidiscreteSystem::new(space(2, 2), spec, sipg(2)).unwrap();
    assert!(matches!(consistency_residual(&sys, 0.0), Err(Error::InvalidArgument(_))));
}

#[test]
fn consistency_of_zero_solution() {
    let mut spec = Preset::PolynomialMms.build();
    spec.exact = Some(crate::model::ExactSolution::new(Expr::Num(0.0), spec.domain).unwrap());
    spec.emission = Expr::Num(0.0);
    spec.chemistry = parse("0.1*sin(u)").unwrap();
    let sys = SemidiscreteSystem::new(space(2, 1), spec, sipg(1)).unwrap();
    assert_eq!(consistency_residual(&sys, 0.3).unwrap(), 0.0);
}

fn recorded(system: &SemidiscreteSystem, integrator: Integrator, dt: f64, t: f64) -> SolveResult {
    let config = TimeConfig::new(integrator, StepSize::Fixed(dt), t);
    solve(system, &config, SolveOptions { record_states: true, ..Default::default() }).unwrap()
}

#[test]
fn conservation_of_zero_dynamics() {
    let mut spec = Preset::ConservationTest.build();
    spec.kx = Coefficient::constant(0.0);
    let sys = SemidiscreteSystem::new(space(3, 1), spec, PenaltyConfig::new(Scheme::Nipg, 0.0, 1.0).unwrap()).unwrap();
    let r = recorded(&sys, Integrator::BackwardEuler, 0.02, 0.1);
    assert_eq!(local_conservation_check(&sys, Integrator::BackwardEuler, &r.states).unwrap().max_violation, 0.0);
}

#[test]
fn conservation_of_implicit_and_explicit_steps() {
    let spec = Preset::SmoothMms.build();
    let sys = SemidiscreteSystem::new(space(8, 1), spec, sipg(1)).unwrap();
    for (integrator, dt) in [(Integrator::BackwardEuler, 0.01), (Integrator::CrankNicolson, 0.01)] {
        let r = recorded(&sys, integrator, dt, 0.05);
        let c = local_conservation_check(&sys, integrator, &r.states).unwrap();
        assert!(c.max_violation <= 1e-10, "{integrator}: {}", c.max_violation);
    }
    let dt = crate::solver::cfl_dt(&sys, 0.5).unwrap();
    let r = recorded(&sys, Integrator::ForwardEuler, dt, 20.0 * dt);
    let c = local_conservation_check(&sys, Integrator::ForwardEuler, &r.states).unwrap();
    assert!(c.max_violation <= 1e-12, "{}", c.max_violation);
    assert!(local_conservation_check(&sys, Integrator::SspRk3, &r.states).is_err());
}

#[test]
fn conservation_violation_is_symmetric() {
    // pure diffusion from a symmetric bump: mirror elements see equal balances
    let mut spec = Preset::DecayTest.build();
    spec.c = Coefficient::constant(0.0);
    spec.e = Coefficient::constant(0.0);
    let sys = SemidiscreteSystem::new(space(4, 1), spec, sipg(1)).unwrap();
    let r = recorded(&sys, Integrator::BackwardEuler, 0.01, 0.03);
    let c = local_conservation_check(&sys, Integrator::BackwardEuler, &r.states).unwrap();
    assert!(c.max_violation <= 1e-12);
}
