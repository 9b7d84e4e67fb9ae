//! Functionals of configurations and the add-one-cost calculus.
//!
//! `D_i F(c) = F(c + e_i) - F(c)` and `D²_{i,j} F = D_i D_j F` are evaluated
//! directly from the rule, so truncation caps never clip a difference: a
//! functional is a total rule on count vectors, and the checkers simply ask
//! for it one or two steps past the truncation box.

use std::fmt;
use std::sync::Arc;

use crate::dsl;
use crate::error::Result;
use crate::ground::{Configuration, GroundSpace, TruncatedStateSpace};
use crate::measure::{Estimate, Measure};

/// Relative tolerance below which a difference of the wrong sign is treated as
/// rounding noise by the certifier.
pub const SIGN_TOL: f64 = 1e-12;

pub type Rule = dyn Fn(&[u32]) -> f64 + Send + Sync;

/// Declared sign of a difference. `Zero` means identically zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Zero,
    NonNeg,
    NonPos,
    Unknown,
}

impl Sign {
    pub fn is_nonneg(self) -> bool {
        matches!(self, Sign::Zero | Sign::NonNeg)
    }

    pub fn is_nonpos(self) -> bool {
        matches!(self, Sign::Zero | Sign::NonPos)
    }

    /// Sign of `coef · x` where `x` has sign `self`.
    pub fn scale(self, coef: f64) -> Sign {
        if coef == 0.0 {
            return Sign::Zero;
        }
        match (self, coef > 0.0) {
            (Sign::NonNeg, false) => Sign::NonPos,
            (Sign::NonPos, false) => Sign::NonNeg,
            (s, _) => s,
        }
    }

    /// Sign of `x + y`.
    pub fn plus(self, other: Sign) -> Sign {
        match (self, other) {
            (Sign::Zero, s) | (s, Sign::Zero) => s,
            (a, b) if a == b => a,
            _ => Sign::Unknown,
        }
    }
}

#[derive(Clone)]
pub struct Functional {
    label: String,
    rule: Arc<Rule>,
    sign_d: Sign,
    sign_d2: Sign,
    bounded_by: Option<f64>,
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Functional")
            .field("label", &self.label)
            .field("sign_d", &self.sign_d)
            .field("sign_d2", &self.sign_d2)
            .field("bounded_by", &self.bounded_by)
            .finish()
    }
}

impl Functional {
    pub fn new<F>(label: impl Into<String>, rule: F) -> Self
    where
        F: Fn(&[u32]) -> f64 + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            rule: Arc::new(rule),
            sign_d: Sign::Unknown,
            sign_d2: Sign::Unknown,
            bounded_by: None,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(value.to_string(), move |_| value)
            .with_signs(Sign::Zero, Sign::Zero)
            .with_bound(value.abs())
    }

    /// Parses the functional DSL (see [`crate::dsl`]).
    pub fn parse(src: &str) -> Result<Self> {
        Ok(dsl::parse(src)?.to_functional())
    }

    pub fn with_signs(mut self, sign_d: Sign, sign_d2: Sign) -> Self {
        self.sign_d = sign_d;
        self.sign_d2 = sign_d2;
        self
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bounded_by = Some(bound);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn declared_sign_d(&self) -> Sign {
        self.sign_d
    }

    pub fn declared_sign_d2(&self) -> Sign {
        self.sign_d2
    }

    pub fn bounded_by(&self) -> Option<f64> {
        self.bounded_by
    }

    #[inline]
    pub fn eval(&self, counts: &[u32]) -> f64 {
        (self.rule)(counts)
    }

    /// `a·F + b·G`.
    pub fn combine(a: f64, f: &Functional, b: f64, g: &Functional) -> Functional {
        let (f2, g2) = (f.clone(), g.clone());
        let bound = match (f.bounded_by, g.bounded_by) {
            (Some(x), Some(y)) => Some(a.abs() * x + b.abs() * y),
            _ => None,
        };
        let mut out = Functional::new(format!("{a}*({}) + {b}*({})", f.label, g.label), move |c| {
            a * f2.eval(c) + b * g2.eval(c)
        })
        .with_signs(
            f.sign_d.scale(a).plus(g.sign_d.scale(b)),
            f.sign_d2.scale(a).plus(g.sign_d2.scale(b)),
        );
        out.bounded_by = bound;
        out
    }

    /// Pointwise map `c ↦ g(F(c))`; declarations are dropped.
    pub fn map<G>(&self, label: impl Into<String>, g: G) -> Functional
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let f = self.clone();
        Functional::new(label, move |c| g(f.eval(c)))
    }

    /// `F^q` for `F >= 0`. For `q > 0` the sign of `DF` is preserved.
    pub fn powf(&self, q: f64) -> Functional {
        let mut out = self.map(format!("({})^{q}", self.label), move |v| v.powf(q));
        if q > 0.0 {
            out.sign_d = self.sign_d;
            out.bounded_by = self.bounded_by.map(|b| b.powf(q));
        }
        out
    }

    /// The rule `c ↦ D_atom F(c)`.
    pub fn difference(&self, atom: usize) -> Functional {
        let f = self.clone();
        let d2 = self.sign_d2;
        Functional::new(format!("D{atom}({})", self.label), move |c| {
            let mut up = c.to_vec();
            up[atom] += 1;
            f.eval(&up) - f.eval(c)
        })
        .with_signs(d2, Sign::Unknown)
    }
}

/// `D_i F(c) = F(c + e_i) - F(c)`.
pub fn add_one_cost(f: &Functional, c: &[u32], atom: usize) -> f64 {
    let mut up = c.to_vec();
    up[atom] += 1;
    f.eval(&up) - f.eval(c)
}

/// `D²_{i,j} F(c) = F(c+e_i+e_j) - F(c+e_i) - F(c+e_j) + F(c)`.
pub fn second_difference(f: &Functional, c: &[u32], i: usize, j: usize) -> f64 {
    let mut ij = c.to_vec();
    ij[i] += 1;
    ij[j] += 1;
    let mut ci = c.to_vec();
    ci[i] += 1;
    let mut cj = c.to_vec();
    cj[j] += 1;
    f.eval(&ij) - f.eval(&ci) - f.eval(&cj) + f.eval(c)
}

/// The four sign conditions appearing as theorem hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignCondition {
    DfNonPos,
    DfNonNeg,
    D2fNonPos,
    D2fNonNeg,
}

impl SignCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            SignCondition::DfNonPos => "DF<=0",
            SignCondition::DfNonNeg => "DF>=0",
            SignCondition::D2fNonPos => "D2F<=0",
            SignCondition::D2fNonNeg => "D2F>=0",
        }
    }

    fn second_order(self) -> bool {
        matches!(self, SignCondition::D2fNonPos | SignCondition::D2fNonNeg)
    }

    fn wants_nonneg(self) -> bool {
        matches!(self, SignCondition::DfNonNeg | SignCondition::D2fNonNeg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub configuration: Configuration,
    pub atoms: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityCertificate {
    pub kind: CertificateKind,
    pub property: SignCondition,
    pub states_checked: u64,
    pub witness: Option<Witness>,
}

impl MonotonicityCertificate {
    pub fn holds(&self) -> bool {
        self.witness.is_none()
    }

    /// Recomputes the difference at the witness, if any.
    pub fn replay(&self, f: &Functional) -> Option<f64> {
        let w = self.witness.as_ref()?;
        Some(match w.atoms.as_slice() {
            [i] => add_one_cost(f, &w.configuration, *i),
            [i, j] => second_difference(f, &w.configuration, *i, *j),
            _ => unreachable!("witness carries one or two atoms"),
        })
    }
}

impl fmt::Display for MonotonicityCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            CertificateKind::Exact => "exact",
            CertificateKind::Sampled => "sampled",
        };
        write!(f, "{}:{}:", self.property.as_str(), kind)?;
        match &self.witness {
            None => write!(f, "ok:n={}", self.states_checked),
            Some(w) => {
                let atoms: Vec<String> = w.atoms.iter().map(|a| a.to_string()).collect();
                write!(
                    f,
                    "witness:{}@{}={}",
                    w.configuration,
                    atoms.join("/"),
                    crate::report::fmt_float(w.value)
                )
            }
        }
    }
}

/// Where the certifier looks.
#[derive(Debug, Clone, Copy)]
pub enum CertificationPlan<'a> {
    /// Every state of the truncated box (which carries all but `tail_mass` of
    /// the probability), every atom or atom pair.
    Exact(&'a TruncatedStateSpace),
    /// The given configurations only; a weaker, clearly labelled statement.
    Sampled(&'a [Configuration]),
}

pub fn certify_monotonicity(
    f: &Functional,
    property: SignCondition,
    plan: CertificationPlan<'_>,
) -> MonotonicityCertificate {
    let (kind, states): (CertificateKind, Box<dyn Iterator<Item = Configuration> + '_>) = match plan {
        CertificationPlan::Exact(trunc) => {
            let grid = trunc.grid();
            let all: Vec<Configuration> = grid.states().collect();
            (CertificateKind::Exact, Box::new(all.into_iter()))
        }
        CertificationPlan::Sampled(points) => (CertificateKind::Sampled, Box::new(points.iter().cloned())),
    };
    let mut checked = 0u64;
    for c in states {
        checked += 1;
        let m = c.len();
        let pairs: Vec<Vec<usize>> = if property.second_order() {
            (0..m).flat_map(|i| (i..m).map(move |j| vec![i, j])).collect()
        } else {
            (0..m).map(|i| vec![i]).collect()
        };
        for atoms in pairs {
            let (value, scale) = match atoms.as_slice() {
                [i] => {
                    let up = c.plus(*i);
                    let (a, b) = (f.eval(&up), f.eval(&c));
                    (a - b, a.abs().max(b.abs()))
                }
                [i, j] => {
                    let ci = c.plus(*i);
                    let cj = c.plus(*j);
                    let cij = ci.plus(*j);
                    let vals = [f.eval(&cij), f.eval(&ci), f.eval(&cj), f.eval(&c)];
                    let scale = vals.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
                    (vals[0] - vals[1] - vals[2] + vals[3], scale)
                }
                _ => unreachable!(),
            };
            let tol = SIGN_TOL * scale;
            let bad = if property.wants_nonneg() {
                !(value >= -tol)
            } else {
                !(value <= tol)
            };
            if bad {
                return MonotonicityCertificate {
                    kind,
                    property,
                    states_checked: checked,
                    witness: Some(Witness {
                        configuration: c,
                        atoms,
                        value,
                    }),
                };
            }
        }
    }
    MonotonicityCertificate {
        kind,
        property,
        states_checked: checked,
        witness: None,
    }
}

/// `E[Γ(F,G)] = Σ_i λ_i E[D_i F · D_i G]`.
pub fn gamma_expectation(f: &Functional, g: &Functional, space: &GroundSpace, measure: &Measure) -> Estimate {
    let m = space.atom_count();
    let vals = measure.values(|c| {
        (0..m)
            .map(|i| space.weight(i) * (add_one_cost(f, c, i) * add_one_cost(g, c, i)))
            .sum()
    });
    measure.mean_of(&vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::{poisson_law, GroundSpace};

    fn unit_exact(lambda: f64) -> (GroundSpace, TruncatedStateSpace, Measure) {
        let space = GroundSpace::single(lambda).unwrap();
        let trunc = TruncatedStateSpace::auto(space.clone()).unwrap();
        let law = poisson_law(&trunc).unwrap();
        let m = Measure::exact(&law, trunc.tail_mass());
        (space, trunc, m)
    }

    #[test]
    fn differences_of_simple_rules() {
        let seven = Functional::constant(7.0);
        let count = Functional::parse("count(0)").unwrap();
        let sq = Functional::parse("count_pow(0, 2)").unwrap();
        for n in 0..20 {
            assert_eq!(add_one_cost(&seven, &[n], 0), 0.0);
            assert_eq!(add_one_cost(&count, &[n], 0), 1.0);
            assert_eq!(second_difference(&count, &[n], 0, 0), 0.0);
            assert_eq!(second_difference(&sq, &[n], 0, 0), 2.0);
        }
    }

    #[test]
    fn indicator_difference_matches_minus_point_mass() {
        let k = 6;
        let fk = Functional::parse(&format!("indicator_le(0, {})", k - 1)).unwrap();
        for n in 0..30u32 {
            let expected = if n == k - 1 { -1.0 } else { 0.0 };
            assert_eq!(add_one_cost(&fk, &[n], 0), expected);
        }
    }

    #[test]
    fn certificates() {
        let (_, trunc, _) = unit_exact(1.0);
        let g = Functional::parse("exp_neg(0.7, 0)").unwrap();
        let cert = certify_monotonicity(&g, SignCondition::DfNonPos, CertificationPlan::Exact(&trunc));
        assert!(cert.holds());
        assert_eq!(cert.states_checked, u64::from(trunc.caps()[0]) + 1);

        let count = Functional::parse("count(0)").unwrap();
        let cert = certify_monotonicity(&count, SignCondition::DfNonPos, CertificationPlan::Exact(&trunc));
        let w = cert.witness.clone().unwrap();
        assert_eq!(w.value, 1.0);
        assert_eq!(cert.replay(&count), Some(1.0));

        let cum = Functional::parse("cumsum_g(0, [1, 1, 1, 1])").unwrap();
        for prop in [SignCondition::DfNonNeg, SignCondition::D2fNonPos] {
            assert!(certify_monotonicity(&cum, prop, CertificationPlan::Exact(&trunc)).holds());
        }
    }

    #[test]
    fn second_difference_witness_replays() {
        let (_, trunc, _) = unit_exact(2.0);
        let f = Functional::parse("indicator_le(0, 3)").unwrap();
        let cert = certify_monotonicity(&f, SignCondition::D2fNonPos, CertificationPlan::Exact(&trunc));
        let w = cert.witness.clone().expect("indicator has D2 of both signs");
        assert_eq!(cert.replay(&f), Some(w.value));
        assert!(w.value > 0.0);
    }

    #[test]
    fn gamma_of_exponential_matches_closed_form() {
        let (a, gamma) = (0.8_f64, 1.3_f64);
        let (space, _, m) = unit_exact(gamma);
        let g = Functional::parse(&format!("exp_neg({a}, 0)")).unwrap();
        let got = gamma_expectation(&g, &g, &space, &m).value;
        let eg2 = (gamma * ((-2.0 * a).exp() - 1.0)).exp();
        let want = eg2 * (1.0 - (-a).exp()).powi(2) * gamma;
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn gamma_of_count_is_intensity() {
        let (space, _, m) = unit_exact(3.5);
        let c = Functional::parse("count(0)").unwrap();
        assert!((gamma_expectation(&c, &c, &space, &m).value - 3.5).abs() < 1e-10);
        let k = Functional::constant(2.0);
        assert_eq!(gamma_expectation(&k, &k, &space, &m).value, 0.0);
    }

    #[test]
    fn sign_algebra() {
        assert_eq!(Sign::NonNeg.scale(-2.0), Sign::NonPos);
        assert_eq!(Sign::NonNeg.plus(Sign::Zero), Sign::NonNeg);
        assert_eq!(Sign::NonNeg.plus(Sign::NonPos), Sign::Unknown);
    }
}
