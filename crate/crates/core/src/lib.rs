//! Causal-fraction analysis for families of probability distributions over
//! finite causal scenarios.
//!
//! The crate models scenarios as posets of events with input/output
//! alphabets, represents empirical models as input-indexed distributions
//! over joint outputs, and measures how much of a model is explainable by a
//! given causal order (its causal fraction) by closed form, marginal bound,
//! or exact linear programming. A small ingestion pipeline turns phrase
//! plausibility annotations into two-event models and correlates the
//! resulting fractions with word-ambiguity labels.

pub mod fraction;
pub mod linguistics;
pub mod lp;
pub mod model;
pub mod num;
pub mod plot;
pub mod scenario;
pub mod stats;

#[cfg(test)]
pub(crate) mod testutil;

pub use fraction::{
    bell222_fraction, full_report, full_report_with_method, lp_fraction, lp_fraction_via_sections,
    nosignalling_fraction, upper_bound_fraction, witness_check, CausalOrder, FractionError,
    FractionMethod, FractionResult, ReportMethod,
};
pub use model::{AnyModel, Distribution, EmpiricalModel, MarginalReport, ModelError, ModelMeta};
pub use num::{Rational, Scalar};
pub use scenario::{CausalScenario, Event, Lowerset, ScenarioError};
