//! Collaborative cross networks for cross-domain recommendation: data
//! handling, the MLP / MLP++ / cross-stitch / CoNet model family, training
//! with sparse transfer matrices, and leave-one-out evaluation.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod numerics;
pub mod study;
pub mod training;

pub use error::{Error, Result};
