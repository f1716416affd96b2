//! Saturated full-data models for multivariate nonresponse under itemwise
//! conditional independence.
//!
//! Given the observed-data distribution `f(x_m̄, m)` over a set of missingness
//! patterns, [`build_full_data`] returns the unique full-data distribution in
//! which each missingness indicator is independent of its own item given the
//! other items and indicators. The crate also provides a sensitivity family
//! around that assumption, a Bayesian posterior for categorical counts, a
//! kernel-density version for two continuous items, the monotone special case
//! and a refutation check.

// Negated float comparisons reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod categorical;
pub mod cli;
pub mod continuous;
pub mod diagnostics;
pub mod error;
pub mod lattice;
pub mod monotone;
pub mod posterior;
pub mod sensitivity;

pub use categorical::{
    build_eta, build_full_data, CategoricalSpace, EtaTable, Event, FullDataDistribution, Functional,
    ObservedDistribution,
};
pub use error::{Error, ErrorCategory, Result};
pub use lattice::{Pattern, PatternSet};
pub use sensitivity::{build_full_data_xi, conditional_log_odds_ratio, SensitivityFunction};
