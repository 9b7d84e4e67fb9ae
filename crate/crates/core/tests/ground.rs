use poisson_ou::ground::{check_mecke, poisson_law, poisson_upper_tail, sample_configuration, DEFAULT_STATE_BUDGET};
use poisson_ou::semigroup::sample_points;
use poisson_ou::{Error, GroundSpace, SemigroupEngine, TruncatedStateSpace, Verdict};
use statrs::distribution::{DiscreteCDF, Poisson as PoissonDist};

#[test]
fn sample_mean_matches_intensity() {
    let space = GroundSpace::single(2.0).unwrap();
    let pts = sample_points(&space, 1_000_000, 11);
    let n = pts.len() as f64;
    let mean = pts.iter().map(|c| f64::from(c[0])).sum::<f64>() / n;
    let var = pts.iter().map(|c| (f64::from(c[0]) - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!((mean - 2.0).abs() <= 3.0 * se, "mean {mean} se {se}");
}

#[test]
fn distinct_atoms_are_uncorrelated() {
    let space = GroundSpace::new(vec![1.0, 3.0]).unwrap();
    let pts = sample_points(&space, 200_000, 5);
    let n = pts.len() as f64;
    let m0 = pts.iter().map(|c| f64::from(c[0])).sum::<f64>() / n;
    let m1 = pts.iter().map(|c| f64::from(c[1])).sum::<f64>() / n;
    let prods: Vec<f64> = pts
        .iter()
        .map(|c| (f64::from(c[0]) - m0) * (f64::from(c[1]) - m1))
        .collect();
    let cov = prods.iter().sum::<f64>() / n;
    let var = prods.iter().map(|p| (p - cov).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(cov.abs() <= 3.0 * (var / n).sqrt(), "cov {cov}");
}

#[test]
fn seeded_sampling_is_reproducible() {
    let space = GroundSpace::new(vec![0.5, 4.0, 2.0]).unwrap();
    assert_eq!(sample_configuration(&space, 99), sample_configuration(&space, 99));
    assert_eq!(sample_points(&space, 10_000, 3), sample_points(&space, 10_000, 3));
}

#[test]
fn law_examples() {
    let t = TruncatedStateSpace::with_caps(GroundSpace::single(1.0).unwrap(), vec![0], 10).unwrap();
    let law = poisson_law(&t).unwrap();
    assert!((law.prob(&[0]).unwrap() - (-1.0f64).exp()).abs() < 1e-16);

    let t = TruncatedStateSpace::auto(GroundSpace::new(vec![1.0, 2.0]).unwrap()).unwrap();
    let law = poisson_law(&t).unwrap();
    assert!((law.prob(&[1, 1]).unwrap() - 2.0 * (-3.0f64).exp()).abs() < 1e-16);
    assert!((law.total() - 1.0).abs() <= t.tail_mass());
}

#[test]
fn automatic_cap_for_unit_intensity_against_statrs_tail() {
    let t = TruncatedStateSpace::auto(GroundSpace::single(1.0).unwrap()).unwrap();
    let n = t.caps()[0];
    assert!(n <= 38);
    let sf = PoissonDist::new(1.0).unwrap().sf(u64::from(n));
    assert!(sf <= 1e-12, "P[X > {n}] = {sf}");
    assert!((poisson_upper_tail(n, 1.0) - sf).abs() <= 1e-6 * sf);
    // one less cap would not be enough
    assert!(PoissonDist::new(1.0).unwrap().sf(u64::from(n - 1)) > 1e-12);
    assert!(poisson_upper_tail(38, 1.0) < 1e-12);
}

#[test]
fn budget_exceeded_is_reported() {
    let space = GroundSpace::new(vec![5.0; 6]).unwrap();
    assert!(matches!(
        TruncatedStateSpace::from_tail_mass(space, 1e-12, DEFAULT_STATE_BUDGET),
        Err(Error::BudgetExceeded { .. })
    ));
}

#[test]
fn mecke_examples() {
    let engine = SemigroupEngine::exact_auto(GroundSpace::single(1.5).unwrap()).unwrap();
    let r = check_mecke(engine.space(), engine.measure(), |_, _| 1.0).unwrap();
    assert!((r.lhs - 1.5).abs() < 1e-10 && (r.rhs - 1.5).abs() < 1e-10);
    assert_eq!(r.verdict, Verdict::Holds);

    let engine = SemigroupEngine::exact_auto(GroundSpace::single(1.0).unwrap()).unwrap();
    let r = check_mecke(engine.space(), engine.measure(), |c, i| f64::from(c[i])).unwrap();
    assert!(
        (r.lhs - 2.0).abs() < 1e-10 && (r.rhs - 2.0).abs() < 1e-10,
        "{}",
        r.to_record_line()
    );
    assert_eq!(r.verdict, Verdict::Holds);

    let r = check_mecke(engine.space(), engine.measure(), |_, _| 0.0).unwrap();
    assert_eq!((r.lhs, r.rhs, r.verdict), (0.0, 0.0, Verdict::Holds));
}

#[test]
fn mecke_tolerance_bound_on_two_atoms() {
    let engine = SemigroupEngine::exact_auto(GroundSpace::new(vec![0.7, 2.5]).unwrap()).unwrap();
    let h = |c: &poisson_ou::Configuration, i: usize| ((c[0] as f64) - 2.0 * c[1] as f64 + i as f64).sin();
    let r = check_mecke(engine.space(), engine.measure(), h).unwrap();
    let bound = 10.0 * engine.tail_mass() * 1.0 * (1.0 + 3.2);
    assert!((r.lhs - r.rhs).abs() <= bound, "{}", r.to_record_line());
}

#[test]
fn mecke_in_monte_carlo_mode() {
    let space = GroundSpace::new(vec![1.0, 0.5]).unwrap();
    let mc = poisson_ou::McSettings {
        replications: 200_000,
        inner_replications: 1,
        seed: 7,
    };
    let engine = SemigroupEngine::monte_carlo(space, mc).unwrap();
    let r = check_mecke(engine.space(), engine.measure(), |c, i| {
        f64::from(c[i]) * (i + 1) as f64
    })
    .unwrap();
    assert!(r.passed(), "{}", r.to_record_line());
    assert!(r.stderr.is_some());
}
