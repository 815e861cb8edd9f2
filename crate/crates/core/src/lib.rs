//! Unsupervised detection of stereotypical (repetitive, non-functional)
//! behaviour in human-pose keypoint sequences.
//!
//! The detector is trained only on normal motion and scores every test frame
//! with three self-supervised streams:
//!
//! * `pr` — a recurrent autoencoder; the reconstruction error of a frame's
//!   keypoints is its anomaly score,
//! * `pp` — a one-step pose forecaster (variational for the keypoints, a
//!   cascaded recurrent model for their center); the forecast error is the
//!   score,
//! * `rd` — a repetition classifier over a temporal self-similarity matrix of
//!   learned frame embeddings; the score is the probability that a frame
//!   belongs to periodic motion.
//!
//! The three per-frame scores are fused by z-normalizing the first two with
//! training statistics and taking a weighted sum. Evaluation reports
//! micro-averaged (all frames pooled) and macro-averaged (mean per video)
//! AUROC. A seeded synthetic dataset generator stands in for clinical data.

#![allow(clippy::needless_range_loop)]

pub mod ablate;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod numkit;
pub mod pipeline;
pub mod pp;
pub mod pr;
pub mod rd;
pub mod seeds;
pub(crate) mod train_loop;

pub use error::{Error, Result};
