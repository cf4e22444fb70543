//! Task-focused network structure inference and model selection.
//!
//! Candidate networks are inferred from node attribute data, turned into node
//! weight functions that pick training subsets, and scored by the precision
//! of per-node predictors (collective classification, link prediction) and by
//! their MDL efficiency: correct predictions per compressed byte of predictors
//! plus representation.

pub mod dataset;
pub mod error;
pub mod mdl;
pub mod network;
pub mod pipeline;
pub mod predict;
pub mod weights;
pub mod seed;
pub mod select;
pub mod sparse;
pub mod stats;

pub use error::{Error, Result};
