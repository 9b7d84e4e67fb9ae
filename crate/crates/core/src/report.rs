//! Structured outcome of a single inequality or identity check.

use std::collections::BTreeMap;
use std::fmt::{self, Display, Write as _};

use crate::functional::MonotonicityCertificate;
use crate::measure::STAT_Z;

/// Param key used to mark intentional counterexample demonstrations.
pub const DEMO_TAG: &str = "intentional-violation-demo";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `lhs <= rhs`
    LessEqual,
    /// `lhs == rhs`
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    HoldsWithinStatError,
    Violated,
    HypothesisNotMet,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::HoldsWithinStatError => "holds-within-stat-error",
            Verdict::Violated => "violated",
            Verdict::HypothesisNotMet => "hypothesis-not-met",
        }
    }

    pub fn is_ok(self) -> bool {
        matches!(self, Verdict::Holds | Verdict::HoldsWithinStatError)
    }
}

impl Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the two sides were obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Precision {
    Exact { tolerance: f64 },
    Statistical { stderr: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub name: String,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub stderr: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub certificates: Vec<MonotonicityCertificate>,
    pub params: BTreeMap<String, String>,
}

impl InequalityReport {
    pub fn new(name: impl Into<String>, relation: Relation, lhs: f64, rhs: f64, precision: Precision) -> Self {
        let (stderr, tolerance) = match precision {
            Precision::Exact { tolerance } => (None, tolerance),
            Precision::Statistical { stderr } => (Some(stderr), STAT_Z * stderr),
        };
        let gap = match relation {
            Relation::LessEqual => lhs - rhs,
            Relation::Equal => (lhs - rhs).abs(),
        };
        let verdict = if gap.is_nan() {
            Verdict::Violated
        } else if gap <= 0.0 || (gap <= tolerance && stderr.is_none()) {
            Verdict::Holds
        } else if gap <= tolerance {
            Verdict::HoldsWithinStatError
        } else {
            Verdict::Violated
        };
        Self {
            name: name.into(),
            relation,
            lhs,
            rhs,
            slack: rhs - lhs,
            stderr,
            tolerance,
            verdict,
            certificates: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Display) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    /// Attaches hypothesis certificates. Unless `bypass` is set, any
    /// certificate carrying a witness turns the verdict into
    /// [`Verdict::HypothesisNotMet`].
    pub fn gated(mut self, certificates: Vec<MonotonicityCertificate>, bypass: bool) -> Self {
        let met = !certificates.is_empty() && certificates.iter().all(|c| c.holds());
        self.certificates = certificates;
        if bypass {
            self.params.insert("gate".into(), "bypassed".into());
        } else if !met {
            self.verdict = Verdict::HypothesisNotMet;
        }
        self
    }

    /// Marks the record as a deliberate counterexample; such records never
    /// count as failures.
    pub fn as_demonstration(mut self) -> Self {
        self.params.insert("tag".into(), DEMO_TAG.into());
        self
    }

    pub fn is_demonstration(&self) -> bool {
        self.params.get("tag").map(String::as_str) == Some(DEMO_TAG)
    }

    pub fn passed(&self) -> bool {
        self.verdict.is_ok()
    }

    /// One tab-separated record:
    /// `name, params, lhs, rhs, slack, stderr, verdict, certs`.
    pub fn to_record_line(&self) -> String {
        let params = if self.params.is_empty() {
            "-".to_string()
        } else {
            self.params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";")
        };
        let certs = if self.certificates.is_empty() {
            "-".to_string()
        } else {
            self.certificates
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut line = String::new();
        let _ = write!(
            line,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.name,
            params,
            fmt_float(self.lhs),
            fmt_float(self.rhs),
            fmt_float(self.slack),
            self.stderr.map_or_else(|| "-".to_string(), fmt_float),
            self.verdict,
            certs
        );
        line
    }
}

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}
