//! Ornstein-Uhlenbeck semigroup on a finite Poisson space.
//!
//! `P_t F(η) = E[F(η_{e^{-t}} + η'_{1-e^{-t}}) | η]`: every point survives
//! independently with probability `e^{-t}` and an independent Poisson
//! configuration of intensity `(1-e^{-t})λ` is added. On an atomic space both
//! steps act atom by atom, so the exact operator is the tensor product of
//! one-atom kernels
//!
//! ```text
//! K_t(n, ·) = Binomial(n, e^{-t}) * Poisson((1-e^{-t}) λ_i)
//! ```
//!
//! with the refresh truncated at the atom's cap. The discarded refresh mass is
//! left out rather than renormalised, so rows are sub-stochastic by at most
//! the truncation tail.

use std::borrow::Cow;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::functional::{
    add_one_cost, certify_monotonicity, CertificationPlan, Functional, MonotonicityCertificate, SignCondition,
};
use crate::ground::{
    poisson_law, poisson_pmf, sample_with, Configuration, GroundSpace, StateGrid, TruncatedStateSpace,
};
use crate::measure::{Estimate, Measure};
use crate::report::{InequalityReport, Precision, Relation};

/// Extra room above the caps so that `D` and `D²` of `P_t F` never leave the
/// tabulated box.
const DIFF_MARGIN: u32 = 2;

/// The source box of an exact `P_t` may exceed the state budget by this factor.
const SOURCE_BUDGET_FACTOR: u128 = 64;

/// Samples drawn per random sub-stream.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineMode {
    Exact,
    MonteCarlo,
}

impl EngineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EngineMode::Exact => "exact",
            EngineMode::MonteCarlo => "mc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSettings {
    /// Samples of `η` used for outer expectations.
    pub replications: usize,
    /// Replications of the Mehler representation per `P_t F(c)` evaluation.
    pub inner_replications: usize,
    pub seed: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            replications: 100_000,
            inner_replications: 256,
            seed: 0x5eed,
        }
    }
}

/// `L^p` norm of a functional. In Monte Carlo mode `p = ∞` is the sample
/// maximum, which only bounds the true norm from below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpNorm {
    pub p: f64,
    pub value: f64,
    pub stderr: Option<f64>,
    pub lower_bound: bool,
}

/// One-atom Mehler kernel for a fixed `t`.
#[derive(Debug, Clone)]
struct AtomKernel {
    t: f64,
    refresh: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl AtomKernel {
    fn new(t: f64, lambda: f64, refresh_cap: u32, tabulate_up_to: u32) -> Self {
        let refresh_mean = -(-t).exp_m1() * lambda;
        let refresh: Vec<f64> = (0..=refresh_cap).map(|k| poisson_pmf(k, refresh_mean)).collect();
        let rows = (0..=tabulate_up_to)
            .map(|n| Self::compute_row(t, &refresh, n))
            .collect();
        Self { t, refresh, rows }
    }

    fn binomial_row(t: f64, n: u32) -> Vec<f64> {
        let mut out = vec![0.0; n as usize + 1];
        if t == 0.0 {
            out[n as usize] = 1.0;
            return out;
        }
        let ln_u = -t;
        let ln_v = (-(-t).exp_m1()).ln();
        for (j, slot) in out.iter_mut().enumerate() {
            let j = j as u64;
            let ln = ln_binomial(u64::from(n), j) + j as f64 * ln_u + (u64::from(n) - j) as f64 * ln_v;
            *slot = ln.exp();
        }
        // the binomial law is complete; rescaling only removes log-gamma rounding
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|p| *p /= total);
        out
    }

    fn compute_row(t: f64, refresh: &[f64], n: u32) -> Vec<f64> {
        let bin = Self::binomial_row(t, n);
        let mut row = vec![0.0; bin.len() + refresh.len() - 1];
        for (j, b) in bin.iter().enumerate() {
            if *b == 0.0 {
                continue;
            }
            for (k, r) in refresh.iter().enumerate() {
                row[j + k] += b * r;
            }
        }
        row
    }

    fn row(&self, n: u32) -> Cow<'_, [f64]> {
        match self.rows.get(n as usize) {
            Some(r) => Cow::Borrowed(r.as_slice()),
            None => Cow::Owned(Self::compute_row(self.t, &self.refresh, n)),
        }
    }
}

/// Tensor product of per-atom kernels at a fixed time.
#[derive(Debug, Clone)]
pub struct SemigroupKernel {
    t: f64,
    atoms: Vec<AtomKernel>,
}

impl SemigroupKernel {
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Transition row of one atom from count `n`; entry `m` is the
    /// probability of moving to count `m`.
    pub fn atom_row(&self, atom: usize, n: u32) -> Vec<f64> {
        self.atoms[atom].row(n).into_owned()
    }

    /// `Σ_{c'} K_t(c, c') F(c')` by direct summation over the kernel support.
    pub fn apply_at(&self, f: &Functional, c: &[u32]) -> f64 {
        let rows: Vec<Cow<'_, [f64]>> = c.iter().zip(&self.atoms).map(|(&n, k)| k.row(n)).collect();
        let mut target = vec![0u32; c.len()];
        fn recurse(f: &Functional, rows: &[Cow<'_, [f64]>], target: &mut [u32], atom: usize, weight: f64) -> f64 {
            if atom == rows.len() {
                return weight * f.eval(target);
            }
            let mut acc = 0.0;
            for (m, p) in rows[atom].iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                target[atom] = m as u32;
                acc += recurse(f, rows, target, atom + 1, weight * p);
            }
            acc
        }
        recurse(f, &rows, &mut target, 0, 1.0)
    }

    /// Tabulates `P_t F` on `inner` by contracting `F` over `source` one axis
    /// at a time.
    fn tabulate(&self, f: &Functional, inner: &StateGrid, source: &StateGrid) -> Vec<f64> {
        let mut dims: Vec<usize> = source.caps().iter().map(|&n| n as usize + 1).collect();
        let mut vals: Vec<f64> = (0..source.len())
            .into_par_iter()
            .map(|idx| f.eval(&source.counts_at(idx)))
            .collect();
        for (axis, kernel) in self.atoms.iter().enumerate() {
            let new_len = inner.caps()[axis] as usize + 1;
            let outer: usize = dims[..axis].iter().product();
            let stride: usize = dims[axis + 1..].iter().product();
            let old_len = dims[axis];
            let rows: Vec<Cow<'_, [f64]>> = (0..new_len as u32).map(|n| kernel.row(n)).collect();
            let mut out = vec![0.0; outer * new_len * stride];
            out.par_chunks_mut(new_len * stride).enumerate().for_each(|(o, block)| {
                let src = &vals[o * old_len * stride..(o + 1) * old_len * stride];
                for (n, row) in rows.iter().enumerate() {
                    let dst = &mut block[n * stride..(n + 1) * stride];
                    for (m, p) in row.iter().enumerate().take(old_len) {
                        if *p == 0.0 {
                            continue;
                        }
                        let s = &src[m * stride..(m + 1) * stride];
                        for (d, v) in dst.iter_mut().zip(s) {
                            *d += p * v;
                        }
                    }
                }
            });
            vals = out;
            dims[axis] = new_len;
        }
        vals
    }
}

#[derive(Debug, Clone)]
pub struct SemigroupEngine {
    mode: EngineMode,
    space: GroundSpace,
    trunc: Option<TruncatedStateSpace>,
    measure: Measure,
    mc: McSettings,
}

impl SemigroupEngine {
    pub fn exact(trunc: TruncatedStateSpace) -> Result<Self> {
        let law = poisson_law(&trunc)?;
        let measure = Measure::exact(&law, trunc.tail_mass());
        Ok(Self {
            mode: EngineMode::Exact,
            space: trunc.space().clone(),
            trunc: Some(trunc),
            measure,
            mc: McSettings::default(),
        })
    }

    /// Exact engine with the default tail mass and state budget.
    pub fn exact_auto(space: GroundSpace) -> Result<Self> {
        Self::exact(TruncatedStateSpace::auto(space)?)
    }

    pub fn monte_carlo(space: GroundSpace, mc: McSettings) -> Result<Self> {
        if mc.replications < 2 || mc.inner_replications < 1 {
            return Err(Error::InvalidParameter {
                name: "replications",
                value: mc.replications as f64,
                reason: "need at least 2 outer and 1 inner replication",
            });
        }
        let points = sample_points(&space, mc.replications, mc.seed);
        Ok(Self {
            mode: EngineMode::MonteCarlo,
            space,
            trunc: None,
            measure: Measure::sampled(points),
            mc,
        })
    }

    pub fn mode(&self) -> EngineMode {
        self.mode
    }

    pub fn space(&self) -> &GroundSpace {
        &self.space
    }

    pub fn truncation(&self) -> Option<&TruncatedStateSpace> {
        self.trunc.as_ref()
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn mc_settings(&self) -> McSettings {
        self.mc
    }

    pub fn tail_mass(&self) -> f64 {
        self.measure.tail_mass()
    }

    pub fn precision(&self, scale: f64, stderr: Option<f64>) -> Precision {
        self.measure.precision(scale, stderr)
    }

    pub fn variance_precision(&self, sup_sq: f64, sides: f64, stderr: Option<f64>) -> Precision {
        self.measure.variance_precision(sup_sq, sides, stderr)
    }

    fn require_exact(&self) -> Result<&TruncatedStateSpace> {
        self.trunc.as_ref().ok_or(Error::WrongMode("exact"))
    }

    /// Exact certificate over the truncated box, or a sampled one over the
    /// Monte Carlo points.
    pub fn certify(&self, f: &Functional, property: SignCondition) -> MonotonicityCertificate {
        match &self.trunc {
            Some(trunc) => certify_monotonicity(f, property, CertificationPlan::Exact(trunc)),
            None => certify_monotonicity(f, property, CertificationPlan::Sampled(self.measure.points())),
        }
    }

    /// Caps of the box where `P_t F` is tabulated.
    pub fn inner_caps(&self) -> Result<Vec<u32>> {
        Ok(self.require_exact()?.caps().iter().map(|n| n + DIFF_MARGIN).collect())
    }

    /// Caps of every state an exact `P_t` evaluation on the inner box touches.
    pub fn source_caps(&self) -> Result<Vec<u32>> {
        let trunc = self.require_exact()?;
        Ok(trunc.caps().iter().map(|n| 2 * n + DIFF_MARGIN).collect())
    }

    pub fn kernel(&self, t: f64) -> Result<SemigroupKernel> {
        check_time(t)?;
        let trunc = self.require_exact()?;
        let atoms = trunc
            .caps()
            .iter()
            .zip(self.space.weights())
            .map(|(&n, &lambda)| AtomKernel::new(t, lambda, n, n + DIFF_MARGIN))
            .collect();
        Ok(SemigroupKernel { t, atoms })
    }

    /// `sup |F|` over the states the engine can see: the full kernel reach in
    /// exact mode, the sample points in Monte Carlo mode.
    pub fn sup_abs(&self, f: &Functional) -> Result<f64> {
        let sup = match self.mode {
            EngineMode::Exact => {
                let grid = StateGrid::new(self.source_caps()?);
                (0..grid.len())
                    .into_par_iter()
                    .map(|i| f.eval(&grid.counts_at(i)).abs())
                    .reduce(|| 0.0, f64::max)
            }
            EngineMode::MonteCarlo => self
                .measure
                .points()
                .par_iter()
                .map(|c| f.eval(c).abs())
                .reduce(|| 0.0, f64::max),
        };
        if sup.is_nan() {
            return Err(Error::NonFinite {
                counts: vec![],
                value: sup,
            });
        }
        Ok(sup)
    }

    /// `P_t F`. In exact mode the result is tabulated on the caps plus a
    /// margin of two and falls back to direct kernel summation elsewhere; in
    /// Monte Carlo mode each evaluation is an independent Mehler estimate.
    pub fn apply_semigroup(&self, f: &Functional, t: f64) -> Result<Functional> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(f.clone());
        }
        let label = format!("P[{t}]({})", f.label());
        let out = match self.mode {
            EngineMode::Exact => {
                let inner = StateGrid::new(self.inner_caps()?);
                let source = StateGrid::new(self.source_caps()?);
                let limit = u128::from(self.require_exact()?.budget()) * SOURCE_BUDGET_FACTOR;
                if source.len() as u128 > limit {
                    return Err(Error::BudgetExceeded {
                        states: source.len() as u128,
                        budget: self.require_exact()?.budget(),
                    });
                }
                let kernel = Arc::new(self.kernel(t)?);
                let table = Arc::new(kernel.tabulate(f, &inner, &source));
                let g = f.clone();
                Functional::new(label, move |c| match inner.index_of(c) {
                    Some(i) => table[i],
                    None => kernel.apply_at(&g, c),
                })
            }
            EngineMode::MonteCarlo => {
                let space = self.space.clone();
                let g = f.clone();
                let (reps, seed) = (self.mc.inner_replications, self.mc.seed);
                Functional::new(label, move |c| mehler_estimate(&space, &g, c, t, reps, seed).value)
            }
        };
        let mut out = out.with_signs(f.declared_sign_d(), f.declared_sign_d2());
        if let Some(b) = f.bounded_by() {
            out = out.with_bound(b);
        }
        Ok(out)
    }

    /// Monte Carlo estimate of `P_t F(c)` with its standard error; available
    /// in either mode.
    pub fn estimate_semigroup_at(&self, f: &Functional, c: &[u32], t: f64, replications: usize) -> Result<Estimate> {
        check_time(t)?;
        Ok(mehler_estimate(&self.space, f, c, t, replications, self.mc.seed))
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

/// Draws `n` configurations, `CHUNK` per ChaCha sub-stream, so the result
/// does not depend on thread scheduling.
pub fn sample_points(space: &GroundSpace, n: usize, seed: u64) -> Vec<Configuration> {
    let chunks = n.div_ceil(CHUNK);
    let blocks: Vec<Vec<Configuration>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64 + 1);
            let len = CHUNK.min(n - k * CHUNK);
            (0..len).map(|_| sample_with(space, &mut rng)).collect()
        })
        .collect();
    blocks.into_iter().flatten().collect()
}

fn stream_key(c: &[u32], t: f64) -> u64 {
    // FNV-1a over the counts and the bits of t
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for x in c {
        feed(&x.to_le_bytes());
    }
    feed(&t.to_bits().to_le_bytes());
    h
}

/// One draw of `η_{e^{-t}} + η'_{1-e^{-t}}` given `η = c`.
pub fn mehler_draw<R: Rng + ?Sized>(space: &GroundSpace, c: &[u32], t: f64, rng: &mut R) -> Vec<u32> {
    let survive = (-t).exp();
    let fresh = -(-t).exp_m1();
    c.iter()
        .zip(space.weights())
        .map(|(&n, &lambda)| {
            let kept = if n == 0 || survive >= 1.0 {
                n
            } else {
                Binomial::new(u64::from(n), survive)
                    .expect("valid binomial")
                    .sample(rng) as u32
            };
            let mean = fresh * lambda;
            let added = if mean > 0.0 {
                Poisson::new(mean).expect("valid poisson").sample(rng) as u32
            } else {
                0
            };
            kept + added
        })
        .collect()
}

fn mehler_estimate(space: &GroundSpace, f: &Functional, c: &[u32], t: f64, reps: usize, seed: u64) -> Estimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream_key(c, t));
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for _ in 0..reps {
        let v = f.eval(&mehler_draw(space, c, t, &mut rng));
        sum += v;
        sumsq += v * v;
    }
    let n = reps as f64;
    let mean = sum / n;
    let var = if reps > 1 {
        ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        f64::INFINITY
    };
    Estimate {
        value: mean,
        stderr: Some((var / n).sqrt()),
    }
}

fn require_finite(c: &Configuration, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            counts: c.counts().to_vec(),
            value: v,
        })
    }
}

/// `E[P_t F] = E[F]`.
pub fn mean_preservation_check(engine: &SemigroupEngine, f: &Functional, t: f64) -> Result<InequalityReport> {
    let pt = engine.apply_semigroup(f, t)?;
    let measure = engine.measure();
    let lhs_vals = measure.values(|c| pt.eval(c));
    let rhs_vals = measure.values(|c| f.eval(c));
    let lhs = measure.mean_of(&lhs_vals);
    let rhs = measure.mean_of(&rhs_vals);
    let diff: Vec<f64> = lhs_vals.iter().zip(&rhs_vals).map(|(a, b)| a - b).collect();
    let scale = engine.sup_abs(f)?;
    Ok(InequalityReport::new(
        "mean_preservation",
        Relation::Equal,
        lhs.value,
        rhs.value,
        engine.precision(scale, measure.delta_stderr(&diff)),
    )
    .with_param("t", t))
}

/// Worst state of `|D_i(P_t F) - e^{-t} P_t D_i F|`.
pub fn commutation_check(engine: &SemigroupEngine, f: &Functional, t: f64) -> Result<InequalityReport> {
    let trunc = engine.require_exact()?;
    let pt = engine.apply_semigroup(f, t)?;
    let decay = (-t).exp();
    let mut worst = (f64::NEG_INFINITY, 0.0, 0.0, Configuration::zeros(0), 0usize);
    for i in 0..engine.space().atom_count() {
        let pdi = engine.apply_semigroup(&f.difference(i), t)?;
        for c in trunc.grid().states() {
            let lhs = add_one_cost(&pt, &c, i);
            let rhs = decay * pdi.eval(&c);
            let dev = (lhs - rhs).abs();
            if !(dev <= worst.0) {
                worst = (dev, lhs, rhs, c, i);
            }
        }
    }
    let scale = engine.sup_abs(f)?;
    Ok(InequalityReport::new(
        "commutation",
        Relation::Equal,
        worst.1,
        worst.2,
        engine.precision(scale, None),
    )
    .with_param("t", t)
    .with_param("atom", worst.4)
    .with_param("state", &worst.3)
    .with_param("max_dev", crate::report::fmt_float(worst.0)))
}

/// `P_s P_t F = P_{s+t} F`, worst state over the caps.
pub fn semigroup_property_check(engine: &SemigroupEngine, f: &Functional, s: f64, t: f64) -> Result<InequalityReport> {
    let trunc = engine.require_exact()?;
    let composed = engine.apply_semigroup(&engine.apply_semigroup(f, t)?, s)?;
    let direct = engine.apply_semigroup(f, s + t)?;
    let mut worst = (f64::NEG_INFINITY, 0.0, 0.0);
    for c in trunc.grid().states() {
        let (a, b) = (composed.eval(&c), direct.eval(&c));
        if !((a - b).abs() <= worst.0) {
            worst = ((a - b).abs(), a, b);
        }
    }
    let scale = engine.sup_abs(f)?;
    Ok(InequalityReport::new(
        "semigroup_property",
        Relation::Equal,
        worst.1,
        worst.2,
        engine.precision(scale, None),
    )
    .with_param("s", s)
    .with_param("t", t))
}

/// Birth-death form `LF(c) = Σ_i λ_i (F(c+e_i) - F(c)) + c_i (F(c-e_i) - F(c))`.
pub fn generator_apply(space: &GroundSpace, f: &Functional, c: &[u32]) -> f64 {
    let base = f.eval(c);
    let mut acc = 0.0;
    let mut work = c.to_vec();
    for i in 0..c.len() {
        work[i] += 1;
        acc += space.weight(i) * (f.eval(&work) - base);
        work[i] -= 1;
        if c[i] > 0 {
            work[i] -= 1;
            acc += f64::from(c[i]) * (f.eval(&work) - base);
            work[i] += 1;
        }
    }
    acc
}

/// `L` applied to a functional, as a new functional.
pub fn generator(space: &GroundSpace, f: &Functional) -> Functional {
    let (space, g) = (space.clone(), f.clone());
    Functional::new(format!("L({})", f.label()), move |c| generator_apply(&space, &g, c))
}

/// Compares `(P_h F - F)/h` with the birth-death generator on every state of
/// the caps. Since `P_h F - F - h LF = ∫_0^h (h-s) P_s L²F ds` and `P_s` is a
/// sup-norm contraction, the deviation is at most `(h/2) sup |L²F|`; the
/// right-hand side is that bound over the kernel's reach plus a rounding term.
pub fn generator_check(engine: &SemigroupEngine, f: &Functional, h: f64) -> Result<InequalityReport> {
    let trunc = engine.require_exact()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "h",
            value: h,
            reason: "must be positive",
        });
    }
    let ph = engine.apply_semigroup(f, h)?;
    let space = engine.space();
    let mut dev = 0.0_f64;
    for c in trunc.grid().states() {
        let fd = (ph.eval(&c) - f.eval(&c)) / h;
        dev = dev.max((fd - generator_apply(space, f, &c)).abs());
    }
    let lf = generator(space, f);
    let reach = StateGrid::new(trunc.caps().iter().map(|n| 2 * n).collect());
    let l2_sup = (0..reach.len())
        .into_par_iter()
        .map(|i| generator_apply(space, &lf, &reach.counts_at(i)).abs())
        .reduce(|| 0.0, f64::max);
    let rounding = 1e3 * f64::EPSILON * engine.sup_abs(f)? / h;
    let bound = 0.5 * h * l2_sup + rounding;
    Ok(InequalityReport::new(
        "generator",
        Relation::LessEqual,
        dev,
        bound,
        Precision::Exact { tolerance: 0.0 },
    )
    .with_param("h", h))
}

/// `E[F LG] = E[G LF] = -E[Γ(F,G)]`; the report carries the pair of the three
/// quantities that disagree most.
pub fn symmetry_check(engine: &SemigroupEngine, f: &Functional, g: &Functional) -> Result<InequalityReport> {
    let space = engine.space();
    let measure = engine.measure();
    let m = space.atom_count();
    let flg = measure.values(|c| f.eval(c) * generator_apply(space, g, c));
    let glf = measure.values(|c| g.eval(c) * generator_apply(space, f, c));
    let ngam = measure.values(|c| {
        -(0..m)
            .map(|i| space.weight(i) * (add_one_cost(f, c, i) * add_one_cost(g, c, i)))
            .sum::<f64>()
    });
    let vals = [
        measure.weighted_sum(&flg),
        measure.weighted_sum(&glf),
        measure.weighted_sum(&ngam),
    ];
    let series = [&flg, &glf, &ngam];
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let (a, b) = pairs
        .into_iter()
        .max_by(|x, y| {
            let dx = (vals[x.0] - vals[x.1]).abs();
            let dy = (vals[y.0] - vals[y.1]).abs();
            dx.total_cmp(&dy)
        })
        .unwrap();
    let diff: Vec<f64> = series[a].iter().zip(series[b]).map(|(x, y)| x - y).collect();
    let scale = series
        .iter()
        .flat_map(|s| s.iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    Ok(InequalityReport::new(
        "symmetry",
        Relation::Equal,
        vals[a],
        vals[b],
        engine.precision(scale, measure.delta_stderr(&diff)),
    )
    .with_param("e_flg", vals[0])
    .with_param("e_glf", vals[1])
    .with_param("neg_e_gamma", vals[2]))
}

/// `‖F‖_p`, `p ∈ [1, ∞]`.
pub fn lp_norm(engine: &SemigroupEngine, f: &Functional, p: f64) -> Result<LpNorm> {
    lp_norm_on(engine.measure(), f, p)
}

pub fn lp_norm_on(measure: &Measure, f: &Functional, p: f64) -> Result<LpNorm> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            reason: "must lie in [1, ∞]",
        });
    }
    let mut vals = Vec::with_capacity(measure.len());
    for c in measure.points() {
        vals.push(require_finite(c, f.eval(c))?.abs());
    }
    if p.is_infinite() {
        let value = vals.iter().copied().fold(0.0, f64::max);
        return Ok(LpNorm {
            p,
            value,
            stderr: None,
            lower_bound: !measure.is_exact(),
        });
    }
    let pow: Vec<f64> = vals.iter().map(|v| v.powf(p)).collect();
    let moment = measure.mean_of(&pow);
    if !moment.value.is_finite() {
        return Err(Error::NonFinite {
            counts: vec![],
            value: moment.value,
        });
    }
    let value = moment.value.powf(1.0 / p);
    let stderr = moment.stderr.map(|se| {
        if moment.value > 0.0 {
            se * value / (p * moment.value)
        } else {
            0.0
        }
    });
    Ok(LpNorm {
        p,
        value,
        stderr,
        lower_bound: false,
    })
}

/// Per-point Mehler estimates of `P_t F` over the sample, in point order;
/// `None` in exact mode.
pub(crate) fn mc_semigroup_estimates(
    engine: &SemigroupEngine,
    f: &Functional,
    t: f64,
) -> Result<Option<Vec<Estimate>>> {
    check_time(t)?;
    if engine.mode() == EngineMode::Exact {
        return Ok(None);
    }
    let (reps, seed) = (engine.mc.inner_replications, engine.mc.seed);
    let space = engine.space();
    Ok(Some(
        engine
            .measure()
            .points()
            .par_iter()
            .map(|c| mehler_estimate(space, f, c.counts(), t, reps, seed))
            .collect(),
    ))
}

/// `‖P_t F‖_p`. In Monte Carlo mode the inner estimates are noisy and
/// `x ↦ |x|^p` is convex, so each term gets the second-order correction
/// `-p(p-1)|x|^{p-2} se² / 2`. It is skipped within two standard errors of
/// zero, where the expansion is not valid.
pub fn semigroup_lp_norm(engine: &SemigroupEngine, f: &Functional, t: f64, p: f64) -> Result<LpNorm> {
    match mc_semigroup_estimates(engine, f, t)? {
        Some(est) if p.is_finite() && p >= 1.0 => {
            let measure = engine.measure();
            let pow: Vec<f64> = est
                .iter()
                .map(|e| {
                    let (x, se) = (e.value.abs(), e.stderr.unwrap_or(0.0));
                    let raw = x.powf(p);
                    if x > 2.0 * se && se > 0.0 {
                        (raw - 0.5 * p * (p - 1.0) * x.powf(p - 2.0) * se * se).max(0.0)
                    } else {
                        raw
                    }
                })
                .collect();
            let moment = measure.mean_of(&pow);
            let value = moment.value.powf(1.0 / p);
            let stderr = moment.stderr.map(|se| {
                if moment.value > 0.0 {
                    se * value / (p * moment.value)
                } else {
                    0.0
                }
            });
            Ok(LpNorm {
                p,
                value,
                stderr,
                lower_bound: false,
            })
        }
        _ => lp_norm(engine, &engine.apply_semigroup(f, t)?, p),
    }
}

/// `‖P_t F‖_p <= ‖F‖_p`.
pub fn contraction_check(engine: &SemigroupEngine, f: &Functional, t: f64, p: f64) -> Result<InequalityReport> {
    let lhs = semigroup_lp_norm(engine, f, t, p)?;
    let rhs = lp_norm(engine, f, p)?;
    let stderr = combine_se(lhs.stderr, rhs.stderr);
    Ok(InequalityReport::new(
        "contraction",
        Relation::LessEqual,
        lhs.value,
        rhs.value,
        engine.precision(rhs.value.max(lhs.value), stderr),
    )
    .with_param("t", t)
    .with_param("p", p))
}

pub(crate) fn combine_se(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (None, None) => None,
        (a, b) => Some((a.unwrap_or(0.0).powi(2) + b.unwrap_or(0.0).powi(2)).sqrt()),
    }
}

/// `|D_i(P_t F)| <= 2 e^{-t}` for `|F| <= 1`.
pub fn pointwise_gradient_check(engine: &SemigroupEngine, f: &Functional, t: f64) -> Result<InequalityReport> {
    let trunc = engine.require_exact()?;
    let bounded = match f.bounded_by() {
        Some(b) if b <= 1.0 => true,
        _ => engine.sup_abs(f)? <= 1.0,
    };
    if !bounded {
        return Err(Error::Precondition("pointwise gradient bound needs |F| <= 1".into()));
    }
    let pt = engine.apply_semigroup(f, t)?;
    let mut worst = 0.0_f64;
    for c in trunc.grid().states() {
        for i in 0..engine.space().atom_count() {
            worst = worst.max(add_one_cost(&pt, &c, i).abs());
        }
    }
    let rhs = 2.0 * (-t).exp();
    Ok(InequalityReport::new(
        "pointwise_gradient",
        Relation::LessEqual,
        worst,
        rhs,
        engine.precision(1.0, None),
    )
    .with_param("t", t))
}

/// `‖D P_t F‖_{L^p(Ω; L²(λ))} <= e^{-t} / sqrt(1 - e^{-t}) ‖F‖_p`, `p ∈ [2, ∞]`.
///
/// For `p = ∞` the right side uses the supremum of `|F|` over every state the
/// exact kernel reaches from the caps.
pub fn integrated_gradient_check(engine: &SemigroupEngine, f: &Functional, t: f64, p: f64) -> Result<InequalityReport> {
    engine.require_exact()?;
    if !(p >= 2.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            reason: "must lie in [2, ∞]",
        });
    }
    if !(t > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t,
            reason: "must be positive",
        });
    }
    let pt = engine.apply_semigroup(f, t)?;
    let space = engine.space();
    let measure = engine.measure();
    let sq_norm = measure.values(|c| {
        (0..space.atom_count())
            .map(|i| space.weight(i) * add_one_cost(&pt, c, i).powi(2))
            .sum::<f64>()
    });
    let (lhs, f_norm) = if p.is_infinite() {
        let lhs = sq_norm.iter().copied().fold(0.0, f64::max).sqrt();
        (lhs, engine.sup_abs(f)?)
    } else {
        let pow: Vec<f64> = sq_norm.iter().map(|v| v.powf(p / 2.0)).collect();
        (measure.weighted_sum(&pow).powf(1.0 / p), lp_norm(engine, f, p)?.value)
    };
    let decay = (-t).exp();
    let rhs = decay / (-(-t).exp_m1()).sqrt() * f_norm;
    Ok(InequalityReport::new(
        "integrated_gradient",
        Relation::LessEqual,
        lhs,
        rhs,
        engine.precision(rhs.max(lhs), None),
    )
    .with_param("t", t)
    .with_param("p", p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine(lambda: f64) -> SemigroupEngine {
        SemigroupEngine::exact_auto(GroundSpace::single(lambda).unwrap()).unwrap()
    }

    #[test]
    fn kernel_rows_are_substochastic_and_nonnegative() {
        let e = engine(2.0);
        let k = e.kernel(0.7).unwrap();
        let tail = e.tail_mass();
        for n in 0..60 {
            let row = k.atom_row(0, n);
            assert!(row.iter().all(|p| *p >= 0.0));
            let s: f64 = row.iter().sum();
            assert!(s <= 1.0 + 1e-14 && s >= 1.0 - tail - 1e-14, "n={n} sum={s}");
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let e = engine(1.0);
        let f = Functional::parse("indicator_le(0, 3) + 0.5*count(0)").unwrap();
        let p0 = e.apply_semigroup(&f, 0.0).unwrap();
        for n in 0..50 {
            assert_eq!(p0.eval(&[n]), f.eval(&[n]));
        }
    }

    #[test]
    fn constants_are_preserved_up_to_truncation() {
        let e = engine(3.0);
        let f = Functional::constant(7.0);
        let pt = e.apply_semigroup(&f, 1.3).unwrap();
        for n in 0..40 {
            assert!((pt.eval(&[n]) - 7.0).abs() <= 7.0 * e.tail_mass() + 1e-13);
        }
    }

    #[test]
    fn negative_time_rejected() {
        let e = engine(1.0);
        assert!(matches!(
            e.apply_semigroup(&Functional::constant(1.0), -0.1),
            Err(Error::NegativeTime(_))
        ));
    }

    #[test]
    fn table_and_direct_paths_agree() {
        let e = SemigroupEngine::exact_auto(GroundSpace::new(vec![0.5, 1.5]).unwrap()).unwrap();
        let f = Functional::parse("exp_neg(0.3, 0) - 2*indicator_le(1, 2) + count(0)").unwrap();
        let t = 0.4;
        let pt = e.apply_semigroup(&f, t).unwrap();
        let k = e.kernel(t).unwrap();
        for c in [[0u32, 0], [3, 1], [5, 7], [1, 9]] {
            let a = pt.eval(&c);
            let b = k.apply_at(&f, &c);
            assert!((a - b).abs() < 1e-12, "{c:?}: {a} vs {b}");
        }
    }

    #[test]
    fn gradient_gate() {
        let e = engine(1.0);
        let f = Functional::parse("2*indicator_le(0, 3)").unwrap();
        assert!(matches!(
            pointwise_gradient_check(&e, &f, 1.0),
            Err(Error::Precondition(_))
        ));
        let f = Functional::parse("indicator_le(0, 3)").unwrap();
        assert!(pointwise_gradient_check(&e, &f, 1.0).unwrap().passed());
        assert!(integrated_gradient_check(&e, &f, 1.0, 1.5).is_err());
        assert!(integrated_gradient_check(&e, &f, 0.0, 2.0).is_err());
    }

    #[test]
    fn mc_mode_rejects_exact_only_checks() {
        let e = SemigroupEngine::monte_carlo(
            GroundSpace::single(1.0).unwrap(),
            McSettings {
                replications: 100,
                inner_replications: 4,
                seed: 1,
            },
        )
        .unwrap();
        let f = Functional::constant(1.0);
        assert!(matches!(commutation_check(&e, &f, 1.0), Err(Error::WrongMode(_))));
    }
}
