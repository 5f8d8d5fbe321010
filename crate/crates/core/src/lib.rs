//! Stable multi-round matching for two-sided candidate/employer markets.
//!
//! The crate is organised bottom-up:
//!
//! - [`types`]: preference tables, matchings and multi-round match tables.
//! - [`daa`]: candidate-proposing deferred acceptance plus a blocking-pair checker.
//! - [`mmdaa`]: repeated deferred acceptance with matched entries removed between rounds.
//! - [`lmf`]: masked non-negative factorization used to densify sparse rankings.
//! - [`mixed`]: overlay of sparse-run matches with dense-run substitutes.
//! - [`metrics`]: displacement, withholdings and retention series.
//! - [`simulator`]: three-round job-offer market and its vacancy report.
//! - [`datagen`]: seeded two-attribute utility markets.
//! - [`io`]: the long-form CSV formats shared by every tool.

pub mod daa;
pub mod datagen;
pub mod error;
pub mod io;
pub mod lmf;
pub mod metrics;
pub mod mixed;
pub mod mmdaa;
pub mod simulator;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    AgentId, Cell, Matching, MultiMatching, PreferenceTable, Provenance, Side, SideMatches, ValidationIssue,
    ValidationReport,
};
