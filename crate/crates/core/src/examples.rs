//! Worked examples with closed-form reference values: the maxima of a Poisson
//! cloud, one-atom cumulative functionals, the indicator counterexample `F_k`,
//! and the exponential functional `G = e^{-a η(B)}`.
//!
//! Every table can be rendered as CSV for external plotting.

use std::fmt::{self, Display};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::dsl::{Basis, Expr, Term};
use crate::error::{Error, Result};
use crate::functional::{gamma_expectation, Functional, MonotonicityCertificate, SignCondition};
use crate::ground::{poisson_ln_pmf, poisson_ln_upper_tail, GroundSpace, TruncatedStateSpace, DEFAULT_STATE_BUDGET};
use crate::inequalities::{check_talagrand, entropy, talagrand_bound, Gate, TalagrandForm};
use crate::report::{fmt_float, InequalityReport};
use crate::semigroup::SemigroupEngine;

/// Replications per random sub-stream.
const CHUNK: usize = 4096;

/// A plain CSV table; cells are written verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

impl Display for CsvTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Maxima of a Poisson cloud
// ---------------------------------------------------------------------------

/// `r ↦ μ(‖x‖ > r)` with an optional exact inverse.
#[derive(Clone)]
pub struct RadialTail {
    tail: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    quantile: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl fmt::Debug for RadialTail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialTail")
            .field("exact_quantile", &self.quantile.is_some())
            .finish()
    }
}

/// Radii probed when validating a tail function.
const TAIL_PROBES: usize = 512;

impl RadialTail {
    /// Validates that `tail` maps `[0, ∞)` into `[0, 1]` and is non-increasing
    /// on a probe grid.
    pub fn new<F>(tail: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut prev = f64::INFINITY;
        for k in 0..TAIL_PROBES {
            let r = if k == 0 { 0.0 } else { 1e-3 * 1.05f64.powi(k as i32) };
            let v = tail(r);
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Precondition(format!("radial tail {v} at r={r} outside [0, 1]")));
            }
            if v > prev {
                return Err(Error::Precondition(format!("radial tail increases at r={r}")));
            }
            prev = v;
        }
        Ok(Self {
            tail: Arc::new(tail),
            quantile: None,
        })
    }

    /// Standard exponential radius: `μ(‖x‖ > r) = e^{-r}`.
    pub fn exponential() -> Self {
        Self {
            tail: Arc::new(|r: f64| (-r.max(0.0)).exp()),
            quantile: Some(Arc::new(|u: f64| -u.ln())),
        }
    }

    pub fn at(&self, r: f64) -> f64 {
        (self.tail)(r)
    }

    /// A radius `R` with `P[R > r] = tail(r)`, from `u ∈ (0, 1]`.
    pub fn inverse(&self, u: f64) -> f64 {
        if let Some(q) = &self.quantile {
            return q(u);
        }
        // smallest r with tail(r) <= u, by bracketing and bisection
        if self.at(0.0) <= u {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.at(hi) > u {
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.at(mid) > u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaximaMode {
    Analytic,
    MonteCarlo,
}

/// `F = 1{max_{x ∈ η} ‖x‖ > t}` for a Poisson cloud of intensity `nμ`. `F`
/// only sees the number of points outside the ball, a Poisson variable of
/// mean `m = n μ(‖x‖ > t)`.
#[derive(Debug, Clone)]
pub struct MaximaModel {
    pub m: f64,
    pub mode: MaximaMode,
    pub radial_tail: Option<RadialTail>,
}

impl MaximaModel {
    pub fn analytic(m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "m",
                value: m,
                reason: "must be positive",
            });
        }
        Ok(Self {
            m,
            mode: MaximaMode::Analytic,
            radial_tail: None,
        })
    }

    /// Simulation model with `m = n · tail(t)`.
    pub fn monte_carlo(radial_tail: RadialTail, n: f64, t: f64) -> Result<Self> {
        let m = n * radial_tail.at(t);
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "m",
                value: m,
                reason: "n·tail(t) must be positive",
            });
        }
        Ok(Self {
            m,
            mode: MaximaMode::MonteCarlo,
            radial_tail: Some(radial_tail),
        })
    }

    /// The reduced one-atom functional `1{c_0 >= 1}`.
    pub fn functional() -> Functional {
        Expr {
            terms: vec![Term {
                coef: 1.0,
                basis: Some(Basis::MaxRadiusGt(0)),
            }],
        }
        .to_functional()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximaClosedForms {
    pub m: f64,
    /// `e^{-m}(1 - e^{-m})`
    pub variance: f64,
    /// `m e^{-m}`
    pub poincare_rhs: f64,
    /// `2 m e^{-m} / (1 + m/2)`
    pub talagrand_rhs: f64,
    /// `‖D_z F‖_1 = e^{-m}` for `z` outside the ball.
    pub dx_l1: f64,
    /// `‖D_z F‖_2 = e^{-m/2}` for `z` outside the ball.
    pub dx_l2: f64,
    /// `log(‖D_z F‖_2 / ‖D_z F‖_1) = m/2`
    pub log_ratio: f64,
}

pub fn maxima_closed_forms(model: &MaximaModel) -> Result<MaximaClosedForms> {
    let m = model.m;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "m",
            value: m,
            reason: "must be positive",
        });
    }
    let e = (-m).exp();
    Ok(MaximaClosedForms {
        m,
        variance: e * -(-m).exp_m1(),
        poincare_rhs: m * e,
        talagrand_rhs: 2.0 * m * e / (1.0 + m / 2.0),
        dx_l1: e,
        dx_l2: (-m / 2.0).exp(),
        log_ratio: m / 2.0,
    })
}

/// Mean with standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McValue {
    pub value: f64,
    pub stderr: f64,
}

impl McValue {
    /// `|self - other| <= z · sqrt(se₁² + se₂²)`.
    pub fn agrees_with(&self, other: &McValue, z: f64) -> bool {
        (self.value - other.value).abs() <= z * self.stderr.hypot(other.stderr)
    }

    pub fn agrees_with_exact(&self, exact: f64, z: f64) -> bool {
        (self.value - exact).abs() <= z * self.stderr
    }
}

/// Variance and Poincaré integral from one simulation route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximaRoute {
    pub variance: McValue,
    pub poincare_rhs: McValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximaMcRecord {
    pub n: f64,
    pub t: f64,
    pub m: f64,
    pub replications: usize,
    pub closed: MaximaClosedForms,
    /// Outside count drawn directly as `Poisson(m)`.
    pub radial: MaximaRoute,
    /// Every point of the cloud drawn by inverse transform.
    pub full: MaximaRoute,
}

/// Per-replication values `(F, poincare integrand)`.
fn simulate<G>(replications: usize, seed: u64, stream_offset: u64, draw: G) -> Vec<(f64, f64)>
where
    G: Fn(&mut ChaCha8Rng) -> (f64, f64) + Sync,
{
    let chunks = replications.div_ceil(CHUNK);
    let blocks: Vec<Vec<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_offset + k as u64);
            let len = CHUNK.min(replications - k * CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    blocks.into_iter().flatten().collect()
}

fn summarize(samples: &[(f64, f64)]) -> MaximaRoute {
    let n = samples.len() as f64;
    let mean_f = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let sq: Vec<f64> = samples.iter().map(|s| (s.0 - mean_f).powi(2)).collect();
    let mean_of = |v: &[f64]| -> McValue {
        let mu = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0);
        // one extra count of resolution keeps an all-equal sample honest
        McValue {
            value: mu,
            stderr: (var / n).sqrt().max(1.0 / n),
        }
    };
    let poinc: Vec<f64> = samples.iter().map(|s| s.1).collect();
    MaximaRoute {
        variance: mean_of(&sq),
        poincare_rhs: mean_of(&poinc),
    }
}

/// Simulates the maxima example along the radial reduction and, as a
/// cross-check, by sampling every radius of the cloud.
pub fn maxima_monte_carlo(
    model: &MaximaModel,
    n: f64,
    t: f64,
    replications: usize,
    seed: u64,
) -> Result<MaximaMcRecord> {
    if model.mode != MaximaMode::MonteCarlo {
        return Err(Error::WrongMode("monte-carlo"));
    }
    let tail = model
        .radial_tail
        .clone()
        .ok_or_else(|| Error::Precondition("radial tail required".into()))?;
    if replications < 2 {
        return Err(Error::InvalidParameter {
            name: "replications",
            value: replications as f64,
            reason: "need at least 2",
        });
    }
    let m = n * tail.at(t);
    let closed = maxima_closed_forms(&MaximaModel::analytic(m)?)?;
    let outside = Poisson::new(m).map_err(|_| Error::InvalidParameter {
        name: "m",
        value: m,
        reason: "invalid Poisson mean",
    })?;
    let radial = simulate(replications, seed, 1, |rng| {
        let count: f64 = outside.sample(rng);
        let f = f64::from(u8::from(count >= 1.0));
        (f, m * (1.0 - f))
    });
    let cloud = Poisson::new(n).map_err(|_| Error::InvalidParameter {
        name: "n",
        value: n,
        reason: "invalid Poisson mean",
    })?;
    let full = simulate(replications, seed, 1 << 32, |rng| {
        let kappa = cloud.sample(rng) as u64;
        let mut beyond = false;
        for _ in 0..kappa {
            let u: f64 = 1.0 - rng.random::<f64>();
            beyond |= tail.inverse(u) > t;
        }
        let f = f64::from(u8::from(beyond));
        // ∫ (D_z F)² n μ(dz) with one z ~ μ: D_z F = 1{F = 0, ‖z‖ > t}
        let z = tail.inverse(1.0 - rng.random::<f64>());
        let d = if !beyond && z > t { 1.0 } else { 0.0 };
        (f, n * d)
    });
    Ok(MaximaMcRecord {
        n,
        t,
        m,
        replications,
        closed,
        radial: summarize(&radial),
        full: summarize(&full),
    })
}

/// Closed forms over a grid of `m`.
pub fn maxima_table(ms: &[f64]) -> Result<CsvTable> {
    let mut table = CsvTable::new(&[
        "m",
        "variance",
        "poincare_rhs",
        "talagrand_rhs",
        "poincare_over_variance",
        "talagrand_over_variance",
        "log_ratio",
    ]);
    for &m in ms {
        let c = maxima_closed_forms(&MaximaModel::analytic(m)?)?;
        table.push(vec![
            fmt_float(m),
            fmt_float(c.variance),
            fmt_float(c.poincare_rhs),
            fmt_float(c.talagrand_rhs),
            fmt_float(c.poincare_rhs / c.variance),
            fmt_float(c.talagrand_rhs / c.variance),
            fmt_float(c.log_ratio),
        ]);
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// One-atom cumulative functionals
// ---------------------------------------------------------------------------

/// Increments `g` of `G(n) = Σ_{j<n} g(j)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Increments {
    /// `g(j)` for `j < len`, zero afterwards.
    Listed(Vec<f64>),
    /// `g(j) = r^j`.
    Geometric(f64),
}

impl Increments {
    /// `g(j) = 1{j <= m}`.
    pub fn indicator(m: u32) -> Self {
        Increments::Listed(vec![1.0; m as usize + 1])
    }

    pub fn at(&self, j: u32) -> f64 {
        match self {
            Increments::Listed(g) => g.get(j as usize).copied().unwrap_or(0.0),
            Increments::Geometric(r) => r.powi(j as i32),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Increments::Listed(g) => {
                let mut prev = f64::INFINITY;
                for &v in g {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(Error::Precondition(format!(
                            "increment {v} is not a finite non-negative value"
                        )));
                    }
                    if v > prev {
                        return Err(Error::Precondition("increments must be non-increasing".into()));
                    }
                    prev = v;
                }
                Ok(())
            }
            Increments::Geometric(r) if (0.0..=1.0).contains(r) => Ok(()),
            Increments::Geometric(r) => Err(Error::InvalidParameter {
                name: "r",
                value: *r,
                reason: "must lie in [0, 1]",
            }),
        }
    }

    fn basis(&self) -> Basis {
        match self {
            Increments::Listed(g) => Basis::CumsumG(0, g.clone()),
            Increments::Geometric(r) => Basis::CumsumGeom(0, *r),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cumulative {
    pub functional: Functional,
    pub increments: Increments,
    pub lambda: f64,
    /// Exact certificates for `DF >= 0` and `D²F <= 0`.
    pub certificates: Vec<MonotonicityCertificate>,
}

/// `G(0) = 0`, `G(n) = Σ_{j<n} g(j)` on one atom of weight `λ`.
pub fn one_dim_cumulative(g: Increments, lambda: f64) -> Result<Cumulative> {
    g.validate()?;
    let functional = Expr {
        terms: vec![Term {
            coef: 1.0,
            basis: Some(g.basis()),
        }],
    }
    .to_functional();
    let engine = SemigroupEngine::exact_auto(GroundSpace::single(lambda)?)?;
    let certificates = vec![
        engine.certify(&functional, SignCondition::DfNonNeg),
        engine.certify(&functional, SignCondition::D2fNonPos),
    ];
    Ok(Cumulative {
        functional,
        increments: g,
        lambda,
        certificates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundComparison {
    pub lambda: f64,
    pub variance: f64,
    /// `λ E[g(X)²]`
    pub poincare_rhs: f64,
    /// `2 λ E[g(X)²] / (1 + log(‖g(X)‖_2 / ‖g(X)‖_1))`
    pub talagrand_rhs: f64,
    pub g_l1: f64,
    pub g_l2: f64,
    pub log_ratio: f64,
}

impl BoundComparison {
    pub fn talagrand_over_poincare(&self) -> f64 {
        self.talagrand_rhs / self.poincare_rhs
    }
}

/// Both variance bounds for a cumulative functional, computed exactly.
pub fn one_dim_bound_comparison(g: &Increments, lambda: f64) -> Result<BoundComparison> {
    let cum = one_dim_cumulative(g.clone(), lambda)?;
    let engine = SemigroupEngine::exact_auto(GroundSpace::single(lambda)?)?;
    let measure = engine.measure();
    let vals = measure.values(|c| cum.functional.eval(c));
    let variance = measure.variance_of(&vals).value;
    let tal = talagrand_bound(&engine, &cum.functional, TalagrandForm::OneAtom)?;
    let term = tal.terms[0];
    Ok(BoundComparison {
        lambda,
        variance,
        poincare_rhs: lambda * term.l2 * term.l2,
        talagrand_rhs: tal.value,
        g_l1: term.l1,
        g_l2: term.l2,
        log_ratio: if term.l2 == 0.0 { 0.0 } else { (term.l2 / term.l1).ln() },
    })
}

pub fn one_dim_lambda_sweep(g: &Increments, lambdas: &[f64]) -> Result<Vec<BoundComparison>> {
    lambdas.iter().map(|&l| one_dim_bound_comparison(g, l)).collect()
}

pub fn bound_comparison_table(rows: &[BoundComparison]) -> CsvTable {
    let mut table = CsvTable::new(&[
        "lambda",
        "variance",
        "poincare_rhs",
        "talagrand_rhs",
        "talagrand_over_poincare",
        "g_l1",
        "g_l2",
        "log_ratio",
    ]);
    for r in rows {
        table.push(vec![
            fmt_float(r.lambda),
            fmt_float(r.variance),
            fmt_float(r.poincare_rhs),
            fmt_float(r.talagrand_rhs),
            fmt_float(r.talagrand_over_poincare()),
            fmt_float(r.g_l1),
            fmt_float(r.g_l2),
            fmt_float(r.log_ratio),
        ]);
    }
    table
}

// ---------------------------------------------------------------------------
// Counterexample F_k = 1{X <= k-1}, X ~ Poisson(1)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkRecord {
    pub k: u32,
    /// `π([0,k-1]) π([k,∞))`
    pub variance: f64,
    /// `E|DF_k| = π(k-1)`
    pub e_df: f64,
    /// `E[DF_k²] = π(k-1) = e^{-1}/(k-1)!`
    pub e_df_sq: f64,
    /// `1 + (1/2) log(1/π(k-1))`
    pub denom: f64,
    /// `Var / ((1/2) π(k-1) / denom)`
    pub lhs_over_rhs: f64,
    /// The same ratio against the one-atom constant `2`.
    pub lhs_over_rhs_one_atom: f64,
}

/// Exact values for `F_k`, in log space so large `k` stay representable.
pub fn counterexample_fk(k: u32) -> Result<FkRecord> {
    if k < 2 {
        return Err(Error::InvalidParameter {
            name: "k",
            value: f64::from(k),
            reason: "must be at least 2",
        });
    }
    let ln_pi = poisson_ln_pmf(k - 1, 1.0);
    let ln_tail = poisson_ln_upper_tail(k - 1, 1.0);
    let ln_var = ln_tail + (-ln_tail.exp()).ln_1p();
    let denom = 1.0 - 0.5 * ln_pi;
    let ratio_unit = (ln_var - ln_pi).exp() * denom;
    Ok(FkRecord {
        k,
        variance: ln_var.exp(),
        e_df: ln_pi.exp(),
        e_df_sq: ln_pi.exp(),
        denom,
        lhs_over_rhs: ratio_unit / TalagrandForm::Printed.constant(),
        lhs_over_rhs_one_atom: ratio_unit / TalagrandForm::OneAtom.constant(),
    })
}

pub fn counterexample_scan(ks: std::ops::RangeInclusive<u32>) -> Result<Vec<FkRecord>> {
    ks.map(counterexample_fk).collect()
}

/// Smallest `k0` in the scan from which `lhs_over_rhs` exceeds 1 and is
/// strictly increasing up to the last record. Records must be sorted by `k`.
pub fn counterexample_k0(records: &[FkRecord]) -> Option<u32> {
    let last = records.last()?;
    if last.lhs_over_rhs <= 1.0 {
        return None;
    }
    let mut k0 = last.k;
    for w in records.windows(2).rev() {
        if w[0].lhs_over_rhs > 1.0 && w[0].lhs_over_rhs < w[1].lhs_over_rhs {
            k0 = w[0].k;
        } else {
            break;
        }
    }
    Some(k0)
}

/// Exact engine on `λ = 1` whose box reaches [`FK_CAP_MARGIN`] states past the
/// jump of `F_k`, so the violation is not hidden by truncation.
pub fn fk_engine(k: u32) -> Result<SemigroupEngine> {
    let space = GroundSpace::single(1.0)?;
    let auto = TruncatedStateSpace::auto(space.clone())?;
    let cap = auto.caps()[0].max(k + FK_CAP_MARGIN);
    SemigroupEngine::exact(TruncatedStateSpace::with_caps(space, vec![cap], DEFAULT_STATE_BUDGET)?)
}

pub const FK_CAP_MARGIN: u32 = 20;

/// The gate-bypassed `L¹-L²` check on `F_k`, tagged as a deliberate violation.
pub fn fk_demonstration(k: u32) -> Result<InequalityReport> {
    if k < 2 {
        return Err(Error::InvalidParameter {
            name: "k",
            value: f64::from(k),
            reason: "must be at least 2",
        });
    }
    let engine = fk_engine(k)?;
    let fk = Functional::parse(&format!("indicator_le(0, {})", k - 1))?;
    Ok(check_talagrand(&engine, &fk, TalagrandForm::Printed, Gate::Bypass)?
        .with_param("k", k)
        .as_demonstration())
}

pub fn counterexample_table(records: &[FkRecord]) -> CsvTable {
    let mut table = CsvTable::new(&[
        "k",
        "variance",
        "e_df",
        "e_df_sq",
        "denom",
        "lhs_over_rhs",
        "lhs_over_rhs_one_atom",
    ]);
    for r in records {
        table.push(vec![
            r.k.to_string(),
            fmt_float(r.variance),
            fmt_float(r.e_df),
            fmt_float(r.e_df_sq),
            fmt_float(r.denom),
            fmt_float(r.lhs_over_rhs),
            fmt_float(r.lhs_over_rhs_one_atom),
        ]);
    }
    table
}

// ---------------------------------------------------------------------------
// Exponential functional G = e^{-a η(B)}
// ---------------------------------------------------------------------------

/// `1 - e^{-x}(1 + x)`, accurate for small `x`.
fn one_minus_exp_poly(x: f64) -> f64 {
    if x.abs() < 0.1 {
        one_minus_exp_poly_series(x)
    } else {
        -(-x).exp_m1() - x * (-x).exp()
    }
}

/// `Σ_{n>=2} (-1)^n (n-1) x^n / n!`
fn one_minus_exp_poly_series(x: f64) -> f64 {
    let mut term = x * x / 2.0;
    let mut acc = 0.0;
    for n in 2..30u32 {
        acc += f64::from(n - 1) * term;
        term *= -x / f64::from(n + 1);
    }
    acc
}

/// Reduced left side `1 - aq e^{-aq} - e^{-aq}`.
pub fn near_optimality_lhs(a: f64, q: f64) -> f64 {
    one_minus_exp_poly(a * q)
}

/// Reduced right side `q²/(q-1) (1 - e^{-a})(1 - e^{-(q-1)a})`.
pub fn near_optimality_rhs(a: f64, q: f64) -> f64 {
    q * q / (q - 1.0) * (-(-a).exp_m1()) * (-(-(q - 1.0) * a).exp_m1())
}

/// Limit of the ratio as `(a, q) → (0, 1⁺)`: `lhs ~ (aq)²/2`, `rhs ~ (aq)²`.
pub const NEAR_OPTIMALITY_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearOptimalityRow {
    pub a: f64,
    pub q: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

pub fn near_optimality_point(a: f64, q: f64) -> Result<NearOptimalityRow> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "a",
            value: a,
            reason: "must be positive",
        });
    }
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "q",
            value: q,
            reason: "must exceed 1",
        });
    }
    let lhs = near_optimality_lhs(a, q);
    let rhs = near_optimality_rhs(a, q);
    Ok(NearOptimalityRow {
        a,
        q,
        lhs,
        rhs,
        ratio: rhs / lhs,
    })
}

/// Ratios `rhs/lhs` over the product grid; `γ` cancels from both sides.
pub fn near_optimality_scan(a_grid: &[f64], q_grid: &[f64], gamma: f64) -> Result<Vec<NearOptimalityRow>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            value: gamma,
            reason: "must be positive",
        });
    }
    let points: Vec<(f64, f64)> = a_grid
        .iter()
        .flat_map(|&a| q_grid.iter().map(move |&q| (a, q)))
        .collect();
    points.par_iter().map(|&(a, q)| near_optimality_point(a, q)).collect()
}

pub fn near_optimality_table(rows: &[NearOptimalityRow]) -> CsvTable {
    let mut table = CsvTable::new(&["a", "q", "lhs", "rhs", "ratio"]);
    for r in rows {
        table.push(vec![
            fmt_float(r.a),
            fmt_float(r.q),
            fmt_float(r.lhs),
            fmt_float(r.rhs),
            fmt_float(r.ratio),
        ]);
    }
    table
}

/// Unreduced sides of the entropy-power bound for `G = e^{-a c_0}` on one
/// atom of weight `γ`: engine values next to closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearOptimalityCrossCheck {
    pub a: f64,
    pub q: f64,
    pub gamma: f64,
    pub entropy_engine: f64,
    /// `γ exp(γ(e^{-qa} - 1)) (1 - aq e^{-aq} - e^{-aq})`
    pub entropy_closed: f64,
    pub gamma_form_engine: f64,
    /// `E[G^q] (1 - e^{-a})(1 - e^{-(q-1)a}) γ`
    pub gamma_form_closed: f64,
    pub moment_engine: f64,
    /// `E[G^q] = exp(γ(e^{-qa} - 1))`
    pub moment_closed: f64,
}

pub fn near_optimality_cross_check(a: f64, q: f64, gamma: f64) -> Result<NearOptimalityCrossCheck> {
    near_optimality_point(a, q)?;
    let engine = SemigroupEngine::exact_auto(GroundSpace::single(gamma)?)?;
    let g = Functional::parse(&format!("exp_neg({a}, 0)"))?;
    let gq = g.powf(q);
    let entropy_engine = entropy(&engine, &gq)?.value;
    let gamma_form_engine = gamma_expectation(&g.powf(q - 1.0), &g, engine.space(), engine.measure()).value;
    let moment_engine = engine.measure().expect(|c| gq.eval(c)).value;
    let moment_closed = (gamma * (-q * a).exp_m1()).exp();
    Ok(NearOptimalityCrossCheck {
        a,
        q,
        gamma,
        entropy_engine,
        entropy_closed: gamma * moment_closed * near_optimality_lhs(a, q),
        gamma_form_engine,
        gamma_form_closed: moment_closed * (-(-a).exp_m1()) * (-(-(q - 1.0) * a).exp_m1()) * gamma,
        moment_engine,
        moment_closed,
    })
}
