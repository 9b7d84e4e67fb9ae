//! Weighted point sets standing in for the law of `η`.
//!
//! In exact mode the points are every truncated state with its product-Poisson
//! probability; in Monte Carlo mode they are i.i.d. samples with weight `1/n`.
//! Every expectation in the crate goes through [`Measure`], so the checkers do
//! not care which mode produced it.

use rayon::prelude::*;

use crate::ground::{Configuration, PoissonLaw};
use crate::report::Precision;

/// One-sided z used for statistical verdicts.
pub const STAT_Z: f64 = 4.0;

/// Relative rounding allowance added to every exact tolerance.
const ROUNDOFF: f64 = 1e-13;

/// Absolute floor for centred second moments, where the error of the mean
/// enters squared.
const SQUARED_ROUNDOFF: f64 = 1e-26;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: Option<f64>,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureKind {
    Exact { tail_mass: f64 },
    Sampled,
}

#[derive(Debug, Clone)]
pub struct Measure {
    kind: MeasureKind,
    points: Vec<Configuration>,
    weights: Vec<f64>,
}

impl Measure {
    pub fn exact(law: &PoissonLaw, tail_mass: f64) -> Self {
        Self {
            kind: MeasureKind::Exact { tail_mass },
            points: law.grid().states().collect(),
            weights: law.probs().to_vec(),
        }
    }

    pub fn sampled(points: Vec<Configuration>) -> Self {
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        Self {
            kind: MeasureKind::Sampled,
            points,
            weights,
        }
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.kind, MeasureKind::Exact { .. })
    }

    pub fn tail_mass(&self) -> f64 {
        match self.kind {
            MeasureKind::Exact { tail_mass } => tail_mass,
            MeasureKind::Sampled => 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Configuration] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Evaluates `f` at every point, in point order.
    pub fn values<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&Configuration) -> f64 + Sync,
    {
        self.points.par_iter().map(&f).collect()
    }

    /// Weighted mean of per-point values (summed sequentially, so results are
    /// bit-reproducible).
    pub fn mean_of(&self, values: &[f64]) -> Estimate {
        let value = self.weighted_sum(values);
        Estimate {
            value,
            stderr: self.delta_stderr(values),
        }
    }

    pub fn weighted_sum(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    pub fn expect<F>(&self, f: F) -> Estimate
    where
        F: Fn(&Configuration) -> f64 + Sync,
    {
        self.mean_of(&self.values(f))
    }

    /// Standard error of a smooth statistic whose per-point influence values
    /// are given (delta method). `None` in exact mode.
    pub fn delta_stderr(&self, influence: &[f64]) -> Option<f64> {
        match self.kind {
            MeasureKind::Exact { .. } => None,
            MeasureKind::Sampled => {
                let n = influence.len() as f64;
                if n < 2.0 {
                    return Some(f64::INFINITY);
                }
                let mean = influence.iter().sum::<f64>() / n;
                let var = influence.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                Some((var / n).sqrt())
            }
        }
    }

    /// Weighted variance, computed in two passes around the weighted mean.
    pub fn variance_of(&self, values: &[f64]) -> Estimate {
        let mean = self.weighted_sum(values);
        let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
        let value = self.weighted_sum(&sq);
        Estimate {
            value,
            stderr: self.delta_stderr(&sq),
        }
    }

    /// Tolerance model for a quantity of magnitude `scale`.
    pub fn precision(&self, scale: f64, stderr: Option<f64>) -> Precision {
        match self.kind {
            MeasureKind::Exact { tail_mass } => Precision::Exact {
                tolerance: exact_tolerance(tail_mass, scale),
            },
            MeasureKind::Sampled => Precision::Statistical {
                stderr: stderr.unwrap_or(0.0),
            },
        }
    }

    /// Tolerance for a variance-type comparison. Truncation error scales with
    /// `sup F²`, while rounding of a centred sum scales with the sides
    /// themselves, so tiny variances stay resolvable.
    pub fn variance_precision(&self, sup_sq: f64, sides: f64, stderr: Option<f64>) -> Precision {
        match self.kind {
            MeasureKind::Exact { tail_mass } => Precision::Exact {
                tolerance: 10.0 * tail_mass * sup_sq + ROUNDOFF * sides.abs() + SQUARED_ROUNDOFF * sup_sq,
            },
            MeasureKind::Sampled => Precision::Statistical {
                stderr: stderr.unwrap_or(0.0),
            },
        }
    }
}

/// `10 · tail_mass · scale`, plus a rounding floor.
pub fn exact_tolerance(tail_mass: f64, scale: f64) -> f64 {
    let scale = scale.abs().max(f64::MIN_POSITIVE);
    10.0 * tail_mass * scale + ROUNDOFF * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_mean_and_stderr() {
        let m = Measure::sampled(vec![Configuration::zeros(1); 4]);
        let e = m.mean_of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.value, 2.5);
        let se = e.stderr.unwrap();
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exact_has_no_stderr() {
        let law = crate::ground::poisson_law(
            &crate::ground::TruncatedStateSpace::auto(crate::ground::GroundSpace::single(1.0).unwrap()).unwrap(),
        )
        .unwrap();
        let m = Measure::exact(&law, 1e-12);
        let e = m.expect(|c| f64::from(c[0]));
        assert!(e.stderr.is_none());
        assert!((e.value - 1.0).abs() < 1e-11);
    }
}
