//! Weakly-supervised temporal action localization by adversarial seeded
//! sequence growing.
//!
//! The pipeline runs in stages, each backed by a module here:
//!
//! 1. [`corpus`] — synthetic two-stream feature corpora and feature file I/O.
//! 2. [`seeding`] — a small attention classifier whose class activation
//!    sequences (CAS) provide sparse foreground seeds; shot-change cues
//!    provide background seeds.
//! 3. [`ssg`] — the seeded sequence growing network: a shared temporal
//!    backbone, a per-segment class heatmap, the growing rule, and the
//!    seeding loss.
//! 4. [`classifier`] — the adversarial branch: erase the strongest heatmap
//!    regions from the shared features and classify the remainder with
//!    self-adaptive pooling.
//! 5. [`trainer`] — the alternating training loop with checkpointing.
//! 6. [`detector`] — two-stream fusion, proposal extraction, and temporal NMS.
//! 7. [`evaluator`] — temporal IoU, average precision, and mAP reports.
//!
//! Everything is driven by [`numerics`], a minimal reverse-mode automatic
//! differentiation tape over dense `f64` matrices with an Adam optimizer.
//! All operations are deterministic: the same inputs and seeds produce
//! bit-identical outputs.

pub mod classifier;
pub mod corpus;
pub mod detector;
pub mod error;
pub mod evaluator;
pub mod numerics;
pub mod seeding;
pub mod ssg;
pub mod trainer;

pub use error::{AssgError, Result};
