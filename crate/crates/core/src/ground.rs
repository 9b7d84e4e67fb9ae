//! Finite atomic ground spaces and Poisson configurations over them.
//!
//! A [`GroundSpace`] is a finite set of atoms `x_1, ..., x_m` carrying positive
//! weights `λ_i = λ({x_i})`. A Poisson random measure on it is a vector of
//! independent counts `η({x_i}) ~ Poisson(λ_i)`, represented by
//! [`Configuration`]. Exact computations run over a [`TruncatedStateSpace`],
//! which caps each count so that the discarded probability is bounded by a
//! requested `tail_mass`.

use std::fmt;
use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::report::{InequalityReport, Relation};

/// Default total probability that truncation is allowed to discard.
pub const DEFAULT_TAIL_MASS: f64 = 1e-12;

/// Default maximum number of truncated states.
pub const DEFAULT_STATE_BUDGET: u64 = 1_000_000;

/// Finite atomic intensity measure.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundSpace {
    weights: Vec<f64>,
}

impl GroundSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidSpace("at least one atom is required".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidSpace(format!(
                    "weight of atom {i} must be positive and finite, got {w}"
                )));
            }
        }
        Ok(Self { weights })
    }

    /// One-atom space with intensity `lambda`.
    pub fn single(lambda: f64) -> Result<Self> {
        Self::new(vec![lambda])
    }

    pub fn atom_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, atom: usize) -> f64 {
        self.weights[atom]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Count vector `c_i = η({x_i})`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration(Vec<u32>);

impl Configuration {
    pub fn new(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    pub fn zeros(atoms: usize) -> Self {
        Self(vec![0; atoms])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }

    /// `η + δ_{x_atom}`.
    pub fn plus(&self, atom: usize) -> Self {
        let mut counts = self.0.clone();
        counts[atom] += 1;
        Self(counts)
    }

    pub fn into_counts(self) -> Vec<u32> {
        self.0
    }
}

impl Deref for Configuration {
    type Target = [u32];

    fn deref(&self) -> &[u32] {
        &self.0
    }
}

impl From<Vec<u32>> for Configuration {
    fn from(counts: Vec<u32>) -> Self {
        Self(counts)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// `log P[Poisson(mean) = k]`; `mean = 0` is the point mass at zero.
pub fn poisson_ln_pmf(k: u32, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    f64::from(k) * mean.ln() - mean - ln_factorial(u64::from(k))
}

pub fn poisson_pmf(k: u32, mean: f64) -> f64 {
    poisson_ln_pmf(k, mean).exp()
}

/// `P[Poisson(mean) > n]` by direct summation of the upper tail.
pub fn poisson_upper_tail(n: u32, mean: f64) -> f64 {
    poisson_ln_upper_tail(n, mean).exp()
}

/// `log P[Poisson(mean) > n]`, summed in log space so it stays meaningful far
/// below the smallest positive double.
pub fn poisson_ln_upper_tail(n: u32, mean: f64) -> f64 {
    if mean == 0.0 {
        return f64::NEG_INFINITY;
    }
    let first = poisson_ln_pmf(n + 1, mean);
    // Terms relative to the first one; ratios pmf(k+1)/pmf(k) = mean/(k+1).
    let mut rel = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut k = n + 1;
    loop {
        k += 1;
        rel *= mean / f64::from(k);
        sum += rel;
        if f64::from(k) > mean && rel < sum * 1e-18 {
            break;
        }
    }
    first + sum.ln()
}

/// Per-atom count caps together with the probability they discard.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedStateSpace {
    space: GroundSpace,
    caps: Vec<u32>,
    tail_mass: f64,
    budget: u64,
}

impl TruncatedStateSpace {
    /// Chooses each cap `N_i` as the smallest integer with
    /// `P[Poisson(λ_i) > N_i] <= tail_mass / m`.
    pub fn from_tail_mass(space: GroundSpace, tail_mass: f64, budget: u64) -> Result<Self> {
        if !(tail_mass > 0.0 && tail_mass < 1.0) {
            return Err(Error::InvalidParameter {
                name: "tail_mass",
                value: tail_mass,
                reason: "must lie in (0, 1)",
            });
        }
        let per_atom = tail_mass / space.atom_count() as f64;
        let ln_target = per_atom.ln();
        let caps = space
            .weights()
            .iter()
            .map(|&lambda| {
                let mut n = lambda.floor() as u32;
                while poisson_ln_upper_tail(n, lambda) > ln_target {
                    n += 1;
                }
                n.max(1)
            })
            .collect();
        let trunc = Self {
            space,
            caps,
            tail_mass,
            budget,
        };
        trunc.check_budget()?;
        Ok(trunc)
    }

    /// Default tail mass and budget.
    pub fn auto(space: GroundSpace) -> Result<Self> {
        Self::from_tail_mass(space, DEFAULT_TAIL_MASS, DEFAULT_STATE_BUDGET)
    }

    /// Explicit caps; the recorded tail mass is the actual discarded bound
    /// `m · max_i P[Poisson(λ_i) > N_i]`.
    pub fn with_caps(space: GroundSpace, caps: Vec<u32>, budget: u64) -> Result<Self> {
        if caps.len() != space.atom_count() {
            return Err(Error::InvalidSpace(format!(
                "{} caps given for {} atoms",
                caps.len(),
                space.atom_count()
            )));
        }
        let worst = caps
            .iter()
            .zip(space.weights())
            .map(|(&n, &lambda)| poisson_upper_tail(n, lambda))
            .fold(0.0, f64::max);
        let tail_mass = worst * space.atom_count() as f64;
        let trunc = Self {
            space,
            caps,
            tail_mass,
            budget,
        };
        trunc.check_budget()?;
        Ok(trunc)
    }

    fn check_budget(&self) -> Result<()> {
        let states = self.state_count();
        if states > u128::from(self.budget) {
            return Err(Error::BudgetExceeded {
                states,
                budget: self.budget,
            });
        }
        Ok(())
    }

    pub fn space(&self) -> &GroundSpace {
        &self.space
    }

    pub fn caps(&self) -> &[u32] {
        &self.caps
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn state_count(&self) -> u128 {
        self.caps.iter().map(|&n| u128::from(n) + 1).product()
    }

    pub fn grid(&self) -> StateGrid {
        StateGrid::new(self.caps.clone())
    }
}

/// Rectangular box `{c : 0 <= c_i <= caps_i}` in row-major order (last atom
/// fastest).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateGrid {
    caps: Vec<u32>,
    strides: Vec<usize>,
    len: usize,
}

impl StateGrid {
    pub fn new(caps: Vec<u32>) -> Self {
        let mut strides = vec![0; caps.len()];
        let mut len = 1usize;
        for (i, &n) in caps.iter().enumerate().rev() {
            strides[i] = len;
            len *= n as usize + 1;
        }
        Self { caps, strides, len }
    }

    pub fn caps(&self) -> &[u32] {
        &self.caps
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, counts: &[u32]) -> bool {
        counts.len() == self.caps.len() && counts.iter().zip(&self.caps).all(|(c, n)| c <= n)
    }

    pub fn index_of(&self, counts: &[u32]) -> Option<usize> {
        if !self.contains(counts) {
            return None;
        }
        Some(counts.iter().zip(&self.strides).map(|(&c, &s)| c as usize * s).sum())
    }

    pub fn counts_at(&self, mut index: usize) -> Vec<u32> {
        self.strides
            .iter()
            .map(|&s| {
                let c = index / s;
                index %= s;
                c as u32
            })
            .collect()
    }

    pub fn states(&self) -> impl Iterator<Item = Configuration> + '_ {
        (0..self.len).map(|i| Configuration(self.counts_at(i)))
    }
}

/// Product-Poisson probabilities over a truncated box.
#[derive(Debug, Clone)]
pub struct PoissonLaw {
    grid: StateGrid,
    probs: Vec<f64>,
}

impl PoissonLaw {
    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, counts: &[u32]) -> Option<f64> {
        self.grid.index_of(counts).map(|i| self.probs[i])
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Exact product-Poisson table `∏ pmf(c_i; λ_i)` over every state within caps.
pub fn poisson_law(trunc: &TruncatedStateSpace) -> Result<PoissonLaw> {
    trunc.check_budget()?;
    let marginals: Vec<Vec<f64>> = trunc
        .caps()
        .iter()
        .zip(trunc.space().weights())
        .map(|(&n, &lambda)| (0..=n).map(|k| poisson_pmf(k, lambda)).collect())
        .collect();
    let grid = trunc.grid();
    let probs = (0..grid.len())
        .map(|idx| {
            grid.counts_at(idx)
                .iter()
                .zip(&marginals)
                .map(|(&c, pmf)| pmf[c as usize])
                .product()
        })
        .collect();
    Ok(PoissonLaw { grid, probs })
}

/// Draws independent `Poisson(λ_i)` counts.
pub fn sample_with<R: Rng + ?Sized>(space: &GroundSpace, rng: &mut R) -> Configuration {
    Configuration(
        space
            .weights()
            .iter()
            .map(|&lambda| {
                let dist = Poisson::new(lambda).expect("weights are positive and finite");
                dist.sample(rng) as u32
            })
            .collect(),
    )
}

pub fn sample_configuration(space: &GroundSpace, seed: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(space, &mut rng)
}

/// Mecke's formula `E Σ_i h(η, i) η_i = E Σ_i λ_i h(η + δ_i, i)`.
pub fn check_mecke<H>(space: &GroundSpace, measure: &Measure, h: H) -> Result<InequalityReport>
where
    H: Fn(&Configuration, usize) -> f64 + Sync,
{
    let m = space.atom_count();
    let mut sup = 0.0_f64;
    let mut lhs_vals = Vec::with_capacity(measure.len());
    let mut rhs_vals = Vec::with_capacity(measure.len());
    for c in measure.points() {
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for i in 0..m {
            let here = h(c, i);
            let added = h(&c.plus(i), i);
            for v in [here, added] {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        counts: c.counts().to_vec(),
                        value: v,
                    });
                }
                sup = sup.max(v.abs());
            }
            lhs += here * f64::from(c[i]);
            rhs += space.weight(i) * added;
        }
        lhs_vals.push(lhs);
        rhs_vals.push(rhs);
    }
    let lhs = measure.mean_of(&lhs_vals);
    let rhs = measure.mean_of(&rhs_vals);
    let diff: Vec<f64> = lhs_vals.iter().zip(&rhs_vals).map(|(a, b)| a - b).collect();
    let scale = sup * (1.0 + space.total_mass());
    let precision = measure.precision(scale, measure.delta_stderr(&diff));
    Ok(InequalityReport::new("mecke", Relation::Equal, lhs.value, rhs.value, precision).with_param("atoms", m))
}
