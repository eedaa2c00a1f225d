//! Field- and age-normalized citation impact indicators.
//!
//! The crate covers the full batch path from a publication corpus to an
//! assessment of how well each indicator equalizes citation distributions:
//!
//! - [`corpus`]: JSON Lines ingestion, validation and citation indices.
//! - [`core_selection`]: eligibility filter, country-distribution
//!   internationality test and the active-citation fixpoint that selects
//!   core journals.
//! - [`classification`]: publication-level field classifications built by
//!   resolution-parameterized clustering of the direct citation network.
//! - [`normalization`]: raw citation counts, classification-based NCS and
//!   the three source-normalized scores.
//! - [`evaluation`]: quantile intervals, Theil inequality per interval and
//!   the `I = W + S + IDCP` decomposition.
//! - [`synthgen`]: a seeded synthetic corpus generator with controllable
//!   field citation cultures.
//! - [`pipeline`]: stage orchestration, CSV emission and run manifests used
//!   by the `citenorm` binary.

pub mod classification;
pub mod core_selection;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod normalization;
pub mod pipeline;
pub mod synthgen;

pub use error::{Error, Result};
