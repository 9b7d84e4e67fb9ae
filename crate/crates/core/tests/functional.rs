mod common;

use poisson_ou::functional::{
    add_one_cost, certify_monotonicity, gamma_expectation, second_difference, CertificationPlan,
};
use poisson_ou::inequalities::check_poincare;
use poisson_ou::{Functional, GroundSpace, SemigroupEngine, SignCondition, Verdict};
use proptest::prelude::*;

fn engine(weights: Vec<f64>) -> SemigroupEngine {
    SemigroupEngine::exact_auto(GroundSpace::new(weights).unwrap()).unwrap()
}

proptest! {
    #[test]
    fn difference_is_linear(seed in any::<u64>(), a in -5.0..5.0f64, b in -5.0..5.0f64, n in 0u32..80) {
        let mut rng = common::rng(seed);
        let f = common::random_bounded(&mut rng, 0);
        let g = common::random_bounded(&mut rng, 1);
        let h = Functional::combine(a, &f, b, &g);
        let lhs = add_one_cost(&h, &[n], 0);
        let rhs = a * add_one_cost(&f, &[n], 0) + b * add_one_cost(&g, &[n], 0);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + a.abs() + b.abs()));
    }

    #[test]
    fn second_difference_is_symmetric(seed in any::<u64>(), x in 0u32..12, y in 0u32..12) {
        let mut rng = common::rng(seed);
        let f = common::random_bounded_2d(&mut rng, 0, 16);
        let c = [x, y];
        prop_assert_eq!(second_difference(&f, &c, 0, 1), second_difference(&f, &c, 1, 0));
        // D² is D of D
        let d1 = f.difference(1);
        prop_assert!((add_one_cost(&d1, &c, 0) - second_difference(&f, &c, 0, 1)).abs() < 1e-15);
    }
}

#[test]
fn gamma_is_symmetric_and_nonnegative() {
    let e = engine(vec![0.8, 1.7]);
    let mut rng = common::rng(17);
    for id in 0..20 {
        let f = common::random_bounded_2d(&mut rng, id, 20);
        let g = common::random_bounded_2d(&mut rng, id + 100, 20);
        let fg = gamma_expectation(&f, &g, e.space(), e.measure()).value;
        let gf = gamma_expectation(&g, &f, e.space(), e.measure()).value;
        assert_eq!(fg, gf);
        assert!(gamma_expectation(&f, &f, e.space(), e.measure()).value >= 0.0);
    }
}

#[test]
fn gamma_examples() {
    let e = engine(vec![2.5]);
    let c = Functional::constant(4.0);
    assert_eq!(gamma_expectation(&c, &c, e.space(), e.measure()).value, 0.0);
    let n = Functional::parse("count(0)").unwrap();
    assert!((gamma_expectation(&n, &n, e.space(), e.measure()).value - 2.5).abs() < 1e-10);
}

#[test]
fn poincare_consistency_over_corpus() {
    let mut rng = common::rng(3);
    for &lambda in &[0.5, 1.0, 2.0, 5.0] {
        let e = engine(vec![lambda]);
        for id in 0..25 {
            let f = common::random_bounded(&mut rng, id);
            let var = e.measure().variance_of(&e.measure().values(|c| f.eval(c))).value;
            let gam = gamma_expectation(&f, &f, e.space(), e.measure()).value;
            assert!(var <= gam + 1e-10, "lambda={lambda} var={var} gamma={gam}");
            assert_eq!(check_poincare(&e, &f).unwrap().verdict, Verdict::Holds);
        }
    }
}

#[test]
fn certificate_examples() {
    let e = engine(vec![1.0]);
    let trunc = e.truncation().unwrap();
    let exp = Functional::parse("exp_neg(0.7, 0)").unwrap();
    let cert = certify_monotonicity(&exp, SignCondition::DfNonPos, CertificationPlan::Exact(trunc));
    assert!(cert.holds());
    assert_eq!(cert.states_checked, trunc.state_count() as u64);

    let count = Functional::parse("count(0)").unwrap();
    let cert = e.certify(&count, SignCondition::DfNonPos);
    let w = cert.witness.as_ref().expect("count increases");
    assert_eq!(w.value, 1.0);
    assert_eq!(cert.replay(&count), Some(1.0));

    let g = Functional::parse("cumsum_g(0, [1, 1, 1, 1])").unwrap();
    assert!(e.certify(&g, SignCondition::DfNonNeg).holds());
    assert!(e.certify(&g, SignCondition::D2fNonPos).holds());
}

#[test]
fn sampled_certificates_are_labelled() {
    let mc = poisson_ou::McSettings {
        replications: 500,
        inner_replications: 1,
        seed: 1,
    };
    let e = SemigroupEngine::monte_carlo(GroundSpace::single(1.0).unwrap(), mc).unwrap();
    let cert = e.certify(&Functional::parse("exp_neg(1, 0)").unwrap(), SignCondition::DfNonPos);
    assert!(cert.holds());
    assert!(cert.to_string().contains(":sampled:"), "{cert}");
}
