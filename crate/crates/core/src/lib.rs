//! Heatmap-to-box extraction, set-matching detection losses, unsupervised
//! single-object discovery, localization metrics and a small refinement
//! simulator that ties them together.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod discovery;
pub mod error;
pub mod geometry;
pub mod heatmap;
pub mod matching;
pub mod metrics;
pub mod refinesim;

pub use error::{Error, Result};
pub use geometry::{BBox, PredBox, ScoredBox, TargetBox};
pub use heatmap::Heatmap;
