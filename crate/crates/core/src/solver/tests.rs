use super::*;
use crate::expr::{parse, Expr};
use crate::mesh::{build_uniform_mesh, Mesh, Rect};
use crate::model::{Coefficient, Preset};

fn space(n: usize, k: usize) -> Arc<DgSpace> {
    Arc::new(DgSpace::new(Arc::new(build_uniform_mesh(n, n, Rect::unit()).unwrap()), k).unwrap())
}

fn single_triangle(k: usize) -> Arc<DgSpace> {
    let mesh = Mesh::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[[0, 1, 2]], Rect::unit()).unwrap();
    Arc::new(DgSpace::new(Arc::new(mesh), k).unwrap())
}

fn still(spec: &mut ProblemSpec) {
    for c in [&mut spec.kx, &mut spec.ky, &mut spec.c, &mut spec.e] {
        *c = Coefficient::constant(0.0);
    }
}

/// `u' = -lambda u` on one constant element with every operator off.
fn reaction_system(lambda: f64, u0: f64) -> SemidiscreteSystem {
    let mut spec = Preset::ConservationTest.build();
    still(&mut spec);
    spec.k1 = lambda;
    spec.u0 = Expr::Num(u0);
    let penalty = PenaltyConfig::new(Scheme::Nipg, 0.0, 1.0).unwrap();
    SemidiscreteSystem::new(single_triangle(0), spec, penalty).unwrap()
}

fn run(system: &SemidiscreteSystem, integrator: Integrator, dt: f64, t: f64) -> SolveResult {
    let config = TimeConfig::new(integrator, StepSize::Fixed(dt), t);
    solve(system, &config, SolveOptions::default()).unwrap()
}

#[test]
fn integrator_names_round_trip() {
    for i in [Integrator::ForwardEuler, Integrator::SspRk3, Integrator::BackwardEuler, Integrator::CrankNicolson] {
        assert_eq!(Integrator::from_name(i.name()), Some(i));
    }
    assert_eq!(Integrator::from_name("rk4"), None);
    assert!(Integrator::SspRk3.is_explicit());
    assert_eq!(Integrator::CrankNicolson.theta(), Some(0.5));
}

#[test]
fn config_validation() {
    let mut c = TimeConfig::new(Integrator::BackwardEuler, StepSize::Fixed(0.1), 1.0);
    assert!(c.validate().is_ok());
    c.dt = StepSize::Fixed(0.0);
    assert!(c.validate().is_err());
    c.dt = StepSize::Auto;
    c.picard_tol = -1.0;
    assert!(c.validate().is_err());
}

#[test]
fn initial_state_projects() {
    let mut spec = Preset::DecayTest.build();
    spec.u0 = Expr::Num(0.0);
    let sys = SemidiscreteSystem::new(space(2, 1), spec.clone(), PenaltyConfig::default_for(Scheme::Sipg, 1)).unwrap();
    assert!(initial_state(&sys).unwrap().coeffs.iter().all(|&c| c == 0.0));
    spec.u0 = Expr::Num(1.0);
    let sys = SemidiscreteSystem::new(space(2, 1), spec.clone(), PenaltyConfig::default_for(Scheme::Sipg, 1)).unwrap();
    let f = initial_state(&sys).unwrap();
    assert_eq!(f.time, 0.0);
    assert!((f.eval(3, [0.2, 0.3]) - 1.0).abs() < 1e-13);
    // ||sin(pi x) sin(pi y)|| = 1/2
    spec.u0 = parse("sin(pi*x)*sin(pi*y)").unwrap();
    let errs: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let sys = SemidiscreteSystem::new(space(n, 1), spec.clone(), PenaltyConfig::default_for(Scheme::Sipg, 1)).unwrap();
            (analysis::l2_norm(&initial_state(&sys).unwrap()) - 0.5).abs()
        })
        .collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[1] && errs[2] < 1e-3, "{errs:?}");
}

#[test]
fn cfl_examples() {
    let dt = cfl_formula(1.0, 0.0, 0.1, 1, 0.5, 0.0).unwrap();
    assert!((dt - 0.5 / 30.0).abs() < 1e-15);
    let half = cfl_formula(1.0, 0.05, 0.05, 1, 0.5, 0.0).unwrap();
    assert!(half <= 0.5 * cfl_formula(1.0, 0.05, 0.1, 1, 0.5, 0.0).unwrap());
    assert!(cfl_formula(0.0, 0.0, 0.1, 1, 0.5, 0.0).is_err());
    // the assembled system halves with h too
    let spec = Preset::SmoothMms.build();
    let p = PenaltyConfig::default_for(Scheme::Sipg, 1);
    let a = cfl_dt(&SemidiscreteSystem::new(space(4, 1), spec.clone(), p.clone()).unwrap(), 0.5).unwrap();
    let b = cfl_dt(&SemidiscreteSystem::new(space(8, 1), spec, p).unwrap(), 0.5).unwrap();
    assert!(b <= 0.5 * a);
}

#[test]
fn zero_rhs_leaves_state() {
    let mut spec = Preset::ConservationTest.build();
    still(&mut spec);
    let sys = SemidiscreteSystem::new(space(3, 2), spec, PenaltyConfig::new(Scheme::Nipg, 0.0, 1.0).unwrap()).unwrap();
    let init = initial_state(&sys).unwrap();
    for step in [step_forward_euler, step_ssprk3, step_backward_euler, step_crank_nicolson] {
        let next = step(&sys, &init, 0.01).unwrap();
        assert!(next.coeffs.iter().zip(&init.coeffs).all(|(a, b)| (a - b).abs() <= 1e-15 * (1.0 + b.abs())));
        assert!((next.time - 0.01).abs() < 1e-16);
    }
}

#[test]
fn forward_euler_scalar_recurrence() {
    let (lambda, dt) = (2.0, 0.05);
    let sys = reaction_system(lambda, 1.0);
    let r = run(&sys, Integrator::ForwardEuler, dt, 1.0);
    assert_eq!(r.steps, 20);
    let expect = (1.0 - lambda * dt).powi(20);
    let got = r.final_state.coeffs[0];
    assert!((got - expect).abs() <= 1e-14 * expect, "{got} vs {expect}");
}

#[test]
fn backward_euler_scalar_recurrence() {
    let (lambda, dt) = (2.0, 0.05);
    let sys = reaction_system(lambda, 1.0);
    let r = run(&sys, Integrator::BackwardEuler, dt, 1.0);
    let expect = (1.0 + lambda * dt).powi(-20);
    assert!((r.final_state.coeffs[0] - expect).abs() <= 1e-13 * expect);
    assert!(r.picard_iterations.iter().all(|&i| i <= 2), "{:?}", r.picard_iterations);
}

#[test]
fn crank_nicolson_startup_uses_backward_euler_half_steps() {
    let (lambda, dt) = (2.0, 0.1);
    let sys = reaction_system(lambda, 1.0);
    let mut config = TimeConfig::new(Integrator::CrankNicolson, StepSize::Fixed(dt), 0.5);
    config.startup_steps = 2;
    let r = solve(&sys, &config, SolveOptions::default()).unwrap();
    assert_eq!(r.steps, 5);
    let be_half = 1.0 / (1.0 + 0.5 * lambda * dt);
    let cn = (1.0 - 0.5 * lambda * dt) / (1.0 + 0.5 * lambda * dt);
    let expect = be_half.powi(4) * cn.powi(3);
    assert!((r.final_state.coeffs[0] - expect).abs() <= 1e-13 * expect);
}

#[test]
fn ssprk3_is_third_order() {
    let lambda = 1.0;
    let sys = reaction_system(lambda, 1.0);
    let exact = (-lambda).exp();
    let errs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| (run(&sys, Integrator::SspRk3, dt, 1.0).final_state.coeffs[0] - exact).abs())
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio.log2() - 3.0).abs() < 0.3, "ratio {ratio}");
    }
}

#[test]
fn affine_chemistry_converges_in_two_picard_sweeps() {
    let mut spec = Preset::SmoothMms.build();
    spec.chemistry = parse("0.3 - 0.2*u").unwrap();
    let sys = SemidiscreteSystem::new(space(4, 1), spec, PenaltyConfig::default_for(Scheme::Sipg, 1)).unwrap();
    for integrator in [Integrator::BackwardEuler, Integrator::CrankNicolson] {
        let r = run(&sys, integrator, 0.02, 0.1);
        assert!(r.picard_iterations.iter().all(|&i| i <= 2), "{:?}", r.picard_iterations);
    }
}

#[test]
fn picard_contracts_for_sine_chemistry() {
    let mut spec = Preset::SmoothMms.build();
    spec.chemistry = parse("sin(u)").unwrap();
    spec.bounds.lipschitz = Some(1.0);
    let sys = SemidiscreteSystem::new(space(4, 1), spec, PenaltyConfig::default_for(Scheme::Sipg, 1)).unwrap();
    let r = run(&sys, Integrator::BackwardEuler, 0.05, 0.1);
    assert!(r.picard_iterations.iter().all(|&i| i < 50));
    // dt L_Q = 1 is refused by default
    let config = TimeConfig::new(Integrator::BackwardEuler, StepSize::Fixed(1.0), 1.0);
    assert!(solve(&sys, &config, SolveOptions::default()).is_err());
}

#[test]
fn picard_failure_carries_history() {
    let mut spec = Preset::SmoothMms.build();
    spec.chemistry = parse("3*sin(u)").unwrap();
    spec.bounds.lipschitz = Some(3.0);
    let sys = SemidiscreteSystem::new(space(2, 1), spec, PenaltyConfig::default_for(Scheme::Sipg, 1)).unwrap();
    let mut config = TimeConfig::new(Integrator::BackwardEuler, StepSize::Fixed(1.0), 1.0);
    config.enforce_picard_bound = false;
    config.picard_max_iter = 3;
    match solve(&sys, &config, SolveOptions::default()) {
        Err(Error::Picard { history }) => assert_eq!(history.len(), 3),
        other => panic!("expected Picard failure, got {other:?}"),
    }
}

#[test]
fn backward_euler_decay_is_monotone() {
    let spec = Preset::DecayTest.build();
    let sys = SemidiscreteSystem::new(space(4, 1), spec, PenaltyConfig::default_for(Scheme::Sipg, 1)).unwrap();
    let config = TimeConfig::new(Integrator::BackwardEuler, StepSize::Fixed(0.001), 0.1);
    let r = solve(&sys, &config, SolveOptions { observers: vec![Observer::L2Norm], ..Default::default() }).unwrap();
    assert_eq!(r.samples.len(), 101);
    for w in r.samples.windows(2) {
        assert!(w[1].values[0] <= w[0].values[0] * (1.0 + 1e-12));
    }
}

#[test]
fn zero_final_time_returns_initial_state() {
    let spec = Preset::SmoothMms.build();
    let sys = SemidiscreteSystem::new(space(2, 1), spec, PenaltyConfig::default_for(Scheme::Sipg, 1)).unwrap();
    let r = run(&sys, Integrator::SspRk3, 0.01, 0.0);
    assert_eq!(r.steps, 0);
    assert_eq!(r.final_state.coeffs, initial_state(&sys).unwrap().coeffs);
}

#[test]
fn zero_dynamics_conserve_mass() {
    let spec = Preset::ConservationTest.build();
    let sys = SemidiscreteSystem::new(space(4, 2), spec, PenaltyConfig::new(Scheme::Nipg, 0.0, 1.0).unwrap()).unwrap();
    let config = TimeConfig::new(Integrator::SspRk3, StepSize::Fixed(0.001), 0.1);
    let r = solve(&sys, &config, SolveOptions { observers: vec![Observer::Mass], ..Default::default() }).unwrap();
    assert_eq!(r.steps, 100);
    let m0 = r.samples[0].values[0];
    assert!(r.samples.iter().all(|s| (s.values[0] - m0).abs() <= 1e-12));
}

#[test]
fn last_step_lands_on_final_time() {
    let spec = Preset::DecayTest.build();
    let sys = SemidiscreteSystem::new(space(2, 1), spec, PenaltyConfig::default_for(Scheme::Sipg, 1)).unwrap();
    let r = run(&sys, Integrator::BackwardEuler, 0.03, 0.1);
    assert_eq!(r.steps, 4);
    assert_eq!(r.final_state.time, 0.1);
    assert!((r.step_sizes[3] - 0.01).abs() < 1e-12);
}

#[test]
fn refinement_reduces_error() {
    let spec = Preset::SmoothMms.build();
    let errs: Vec<f64> = [8, 16]
        .iter()
        .map(|&n| {
            let sys = SemidiscreteSystem::new(space(n, 1), spec.clone(), PenaltyConfig::default_for(Scheme::Sipg, 1)).unwrap();
            let mut config = TimeConfig::new(Integrator::SspRk3, StepSize::Auto, 0.02);
            config.safety = 0.5;
            let r = solve(&sys, &config, SolveOptions { observers: vec![Observer::L2Error], ..Default::default() }).unwrap();
            r.samples.last().unwrap().values[0]
        })
        .collect();
    assert!(errs[0].is_finite() && errs[1] < errs[0], "{errs:?}");
}

#[test]
fn explicit_steps_stay_finite_at_cfl() {
    let spec = Preset::SmoothMms.build();
    for k in [1, 2] {
        let sys = SemidiscreteSystem::new(space(4, k), spec.clone(), PenaltyConfig::default_for(Scheme::Sipg, k)).unwrap();
        let dt = cfl_dt(&sys, 0.5).unwrap();
        for integrator in [Integrator::ForwardEuler, Integrator::SspRk3] {
            let r = run(&sys, integrator, dt, 1000.0 * dt);
            assert_eq!(r.steps, 1000);
            assert!(r.final_state.coeffs.iter().all(|c| c.is_finite() && c.abs() < 10.0));
        }
    }
}

#[test]
fn blow_up_names_the_step() {
    let spec = Preset::SmoothMms.build();
    let sys = SemidiscreteSystem::new(space(4, 1), spec, PenaltyConfig::default_for(Scheme::Sipg, 1)).unwrap();
    let dt = 1e3 * cfl_dt(&sys, 0.5).unwrap();
    let config = TimeConfig::new(Integrator::ForwardEuler, StepSize::Fixed(dt), 1e6 * dt);
    match solve(&sys, &config, SolveOptions::default()) {
        Err(Error::BlowUp { step }) => assert!(step > 1),
        other => panic!("expected blow-up, got {:?}", other.map(|r| r.steps)),
    }
}
