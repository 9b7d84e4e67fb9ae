//! Difference calculus and the Ornstein-Uhlenbeck semigroup on finite Poisson
//! spaces, with exact and Monte Carlo checkers for the associated functional
//! inequalities.
//!
//! Everything is built on a finite atomic intensity `λ = Σ λ_i δ_{x_i}`. A
//! configuration is a count vector, a functional is a rule on count vectors,
//! and every expectation is taken either exactly over a truncated box of
//! states or over seeded Monte Carlo samples.

// `!(x <= tol)` is the idiom here: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsl;
pub mod error;
pub mod examples;
pub mod functional;
pub mod ground;
pub mod inequalities;
pub mod measure;
pub mod report;
pub mod semigroup;

pub use error::{Error, Result};
pub use functional::{Functional, MonotonicityCertificate, Sign, SignCondition};
pub use ground::{Configuration, GroundSpace, TruncatedStateSpace};
pub use inequalities::{Gate, TalagrandForm};
pub use measure::{Estimate, Measure};
pub use report::{InequalityReport, Relation, Verdict};
pub use semigroup::{EngineMode, LpNorm, McSettings, SemigroupEngine};
