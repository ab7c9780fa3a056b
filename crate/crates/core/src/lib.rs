//! Flood-risk decision analysis for a single dike ring: the van Dantzig cost
//! model, sea-level and storm-surge hazard models, ensemble evaluation of
//! competing objectives and variance-based sensitivity analysis.

// negated comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod core_model;
pub mod error;
pub mod io;
pub mod objectives;
pub mod rng;
pub mod sealevel;
pub mod sensitivity;
pub mod stats;
pub mod surge;
pub mod uncertainty;

pub use error::{Error, Result};
