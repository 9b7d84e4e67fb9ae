use poisson_ou::examples::{
    counterexample_fk, counterexample_k0, counterexample_scan, fk_demonstration, maxima_closed_forms,
    maxima_monte_carlo, near_optimality_cross_check, near_optimality_lhs, near_optimality_point, near_optimality_rhs,
    near_optimality_scan, one_dim_bound_comparison, one_dim_cumulative, one_dim_lambda_sweep, Increments, MaximaModel,
    RadialTail,
};
use poisson_ou::functional::{add_one_cost, second_difference};
use poisson_ou::inequalities::{check_poincare, talagrand_bound};
use poisson_ou::{Configuration, GroundSpace, SemigroupEngine, SignCondition, TalagrandForm, Verdict};
use statrs::distribution::{Discrete, DiscreteCDF, Poisson as PoissonDist};
use statrs::function::factorial::factorial;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

#[test]
fn maxima_closed_forms_match_engine() {
    for &m in &[0.5, 1.0, 5.0, 20.0] {
        let closed = maxima_closed_forms(&MaximaModel::analytic(m).unwrap()).unwrap();
        let e = SemigroupEngine::exact_auto(GroundSpace::single(m).unwrap()).unwrap();
        let f = MaximaModel::functional();
        let p = check_poincare(&e, &f).unwrap();
        assert!(
            close(p.lhs, closed.variance, 1e-10),
            "m={m}: {} vs {}",
            p.lhs,
            closed.variance
        );
        assert!(close(p.rhs, closed.poincare_rhs, 1e-10));
        let tal = talagrand_bound(&e, &f, TalagrandForm::OneAtom).unwrap();
        assert!(close(tal.value, closed.talagrand_rhs, 1e-10));
        assert!(close(tal.terms[0].l1, closed.dx_l1, 1e-10));
        assert!(close(tal.terms[0].l2, closed.dx_l2, 1e-10));
        assert!(close(closed.dx_l2, closed.dx_l1.sqrt(), 1e-15));
        assert!(close(closed.log_ratio, m / 2.0, 1e-15));
        assert!(e.certify(&f, SignCondition::D2fNonPos).holds());
    }
}

#[test]
fn maxima_asymptotics() {
    let tiny = maxima_closed_forms(&MaximaModel::analytic(1e-9).unwrap()).unwrap();
    assert!(tiny.variance < 1e-8 && tiny.poincare_rhs < 1e-8 && tiny.talagrand_rhs < 1e-8);
    let mut prev = 0.0;
    for &m in &[1.0, 2.0, 5.0, 10.0, 20.0] {
        let c = maxima_closed_forms(&MaximaModel::analytic(m).unwrap()).unwrap();
        let ratio = c.poincare_rhs / c.variance;
        assert!(close(ratio, m / -(-m).exp_m1(), 1e-12));
        assert!(ratio > prev);
        prev = ratio;
    }
    let c = maxima_closed_forms(&MaximaModel::analytic(50.0).unwrap()).unwrap();
    assert!((c.talagrand_rhs / (4.0 * (-50.0_f64).exp()) - 1.0).abs() < 0.16);
    for &m in &[10.0, 20.0, 50.0] {
        let c = maxima_closed_forms(&MaximaModel::analytic(m).unwrap()).unwrap();
        assert!(c.talagrand_rhs / c.variance <= 5.0);
    }
}

#[test]
fn maxima_monte_carlo_routes_agree() {
    let n = 100.0;
    let t = 20.0_f64.ln();
    let model = MaximaModel::monte_carlo(RadialTail::exponential(), n, t).unwrap();
    assert!(close(model.m, 5.0, 1e-12));
    let rec = maxima_monte_carlo(&model, n, t, 100_000, 11).unwrap();
    assert!(rec.radial.variance.agrees_with_exact(rec.closed.variance, 4.0));
    assert!(rec.full.variance.agrees_with_exact(rec.closed.variance, 4.0));
    assert!(rec.radial.poincare_rhs.agrees_with_exact(rec.closed.poincare_rhs, 4.0));
    assert!(rec.full.poincare_rhs.agrees_with_exact(rec.closed.poincare_rhs, 4.0));
    assert!(rec.radial.variance.agrees_with(&rec.full.variance, 4.0));
    assert_eq!(rec, maxima_monte_carlo(&model, n, t, 100_000, 11).unwrap());

    let far = -(1e-7_f64 / n).ln();
    let model = MaximaModel::monte_carlo(RadialTail::exponential(), n, far).unwrap();
    let rec = maxima_monte_carlo(&model, n, far, 10_000, 3).unwrap();
    assert!(rec.radial.variance.value < 1e-3);
    assert!(rec.radial.variance.agrees_with_exact(rec.closed.variance, 4.0));
}

#[test]
fn radial_tail_validation() {
    assert!(RadialTail::new(|r: f64| (r - 3.0).abs() / 3.0).is_err());
    assert!(RadialTail::new(|r: f64| 2.0 * (-r).exp()).is_err());
    let tail = RadialTail::exponential();
    assert!(close(tail.inverse(tail.at(1.7)), 1.7, 1e-9));
    assert!(maxima_monte_carlo(&MaximaModel::analytic(1.0).unwrap(), 1.0, 1.0, 10, 0).is_err());
}

#[test]
fn cumulative_functionals() {
    let zero = one_dim_cumulative(Increments::Listed(vec![]), 2.0).unwrap();
    assert_eq!(zero.functional.eval(&Configuration::new(vec![7])), 0.0);

    let m = 3;
    let ind = one_dim_cumulative(Increments::indicator(m), 2.0).unwrap();
    assert!(ind.certificates.iter().all(|c| c.holds()));
    for n in 0..10u32 {
        let d = add_one_cost(&ind.functional, &[n], 0);
        assert_eq!(d, if n <= m { 1.0 } else { 0.0 });
    }

    let geo = one_dim_cumulative(Increments::Geometric(0.5), 1.0).unwrap();
    assert!(geo.certificates.iter().all(|c| c.holds()));
    for n in 0..20u32 {
        let c = Configuration::new(vec![n]);
        let d2 = second_difference(&geo.functional, &c, 0, 0);
        assert!(close(d2, -0.5_f64.powi(n as i32 + 1), 1e-12), "n={n}");
    }
    assert!(one_dim_cumulative(Increments::Listed(vec![0.5, 1.0]), 1.0).is_err());
    assert!(one_dim_cumulative(Increments::Listed(vec![-0.5]), 1.0).is_err());
    assert!(one_dim_cumulative(Increments::Geometric(1.5), 1.0).is_err());
}

#[test]
fn bound_comparison_along_lambda_grid() {
    let g = Increments::indicator(1);
    let rows = one_dim_lambda_sweep(&g, &[1.0, 5.0, 10.0, 20.0]).unwrap();
    let mut prev_l1 = f64::INFINITY;
    let mut prev_denom = 0.0;
    for r in &rows {
        let pois = PoissonDist::new(r.lambda).unwrap();
        let l1 = (-r.lambda).exp() * (1.0 + r.lambda);
        assert!(close(r.g_l1, l1, 1e-10) && close(l1, pois.cdf(1), 1e-12));
        assert!(close(r.log_ratio, -0.5 * l1.ln(), 1e-9));
        let denom = 1.0 - 0.5 * r.g_l1.ln();
        assert!(r.g_l1 < prev_l1 && denom > prev_denom);
        prev_l1 = r.g_l1;
        prev_denom = denom;
        assert!(close(r.talagrand_over_poincare(), 2.0 / (1.0 + r.log_ratio), 1e-12));
        assert!(r.variance <= r.talagrand_rhs && r.variance <= r.poincare_rhs);
        if r.log_ratio > 1.0 {
            assert!(r.talagrand_over_poincare() < 1.0);
        }
    }
    assert!(rows.last().unwrap().talagrand_over_poincare() < 1.0);

    for &lambda in &[0.5, 3.0] {
        let lin = one_dim_bound_comparison(&Increments::Geometric(1.0), lambda).unwrap();
        assert!(close(lin.variance, lambda, 1e-10) && close(lin.poincare_rhs, lambda, 1e-10));
    }
}

#[test]
fn counterexample_identities() {
    for k in 2..=30u32 {
        let r = counterexample_fk(k).unwrap();
        let want = (-1.0_f64).exp() / factorial(u64::from(k - 1));
        assert!(close(r.e_df_sq, want, 1e-12), "k={k}");
        assert_eq!(r.e_df, r.e_df_sq);
    }
    let pois = PoissonDist::new(1.0).unwrap();
    let r = counterexample_fk(2).unwrap();
    let head = pois.pmf(0) + pois.pmf(1);
    assert!(close(r.variance, head * (1.0 - head), 1e-14));
    assert!(close(r.denom, 1.0 - 0.5 * pois.pmf(1).ln(), 1e-14));
    assert!(close(r.lhs_over_rhs, r.variance / (0.5 * pois.pmf(1) / r.denom), 1e-12));
    assert!(close(r.lhs_over_rhs, 4.0 * r.lhs_over_rhs_one_atom, 1e-14));
    assert!(counterexample_fk(1).is_err());
}

#[test]
fn counterexample_engine_cross_check() {
    for k in [2u32, 4, 8] {
        let r = fk_demonstration(k).unwrap();
        let closed = counterexample_fk(k).unwrap();
        assert!(close(r.lhs, closed.variance, 1e-10), "k={k}");
        assert!(close(r.lhs / r.rhs, closed.lhs_over_rhs, 1e-9));
        assert!(r.is_demonstration());
    }
}

#[test]
fn counterexample_threshold() {
    let scan = counterexample_scan(2..=50).unwrap();
    let k0 = counterexample_k0(&scan).expect("some k0");
    assert_eq!(k0, 4, "dips at k = 3, 4 then rises");
    assert!(scan.iter().all(|r| r.lhs_over_rhs > 1.0));
    let tail: Vec<_> = scan.iter().filter(|r| r.k >= k0).collect();
    assert!(tail.iter().all(|r| r.lhs_over_rhs > 1.0));
    assert!(tail.windows(2).all(|w| w[1].lhs_over_rhs > w[0].lhs_over_rhs));
    assert!(counterexample_fk(40).unwrap().lhs_over_rhs > counterexample_fk(10).unwrap().lhs_over_rhs);
    let demo = fk_demonstration(20).unwrap();
    assert_eq!(demo.verdict, Verdict::Violated);
}

#[test]
fn near_optimality_ratio_over_grid() {
    let a_grid: Vec<f64> = (1..=30).map(|i| 0.1 * f64::from(i)).collect();
    let q_grid: Vec<f64> = (1..=30).map(|j| 1.0 + 0.1 * f64::from(j)).collect();
    let rows = near_optimality_scan(&a_grid, &q_grid, 1.0).unwrap();
    assert_eq!(rows.len(), 900);
    assert!(rows.iter().all(|r| r.ratio >= 1.0), "ratio below one");
    for &a in &[1e-4_f64, 0.01, 0.5, 2.0] {
        let exact = 1.0 - a * (-a).exp() - (-a).exp();
        assert!(close(near_optimality_lhs(a, 1.0), exact, 1e-9));
    }
    assert_eq!(near_optimality_lhs(0.0, 1.0), 0.0);
    assert_eq!(near_optimality_rhs(0.0, 2.0), 0.0);
    assert!(near_optimality_point(0.0, 2.0).is_err());
    assert!(near_optimality_point(1.0, 1.0).is_err());
}

#[test]
fn near_optimality_engine_cross_check() {
    let c = near_optimality_cross_check(0.5, 2.0, 1.0).unwrap();
    let closed = (-0.5_f64 * 2.0).exp_m1().exp() * (1.0 - (-1.0_f64).exp() - (-1.0_f64).exp());
    assert!((c.entropy_closed - closed).abs() < 1e-15);
    assert!((c.entropy_engine - c.entropy_closed).abs() < 1e-9);
    assert!((c.gamma_form_engine - c.gamma_form_closed).abs() < 1e-9);
    assert!((c.moment_engine - c.moment_closed).abs() < 1e-9);
    assert!(close(c.moment_closed, ((-1.0_f64).exp() - 1.0).exp(), 1e-15));
}
