//! Minimal dense numeric kernel: matrices, an LSTM cell with hand-derived
//! backward pass, elementwise activations, Adam, and a finite-difference
//! gradient checker. Everything is 64-bit and deterministic; there is no
//! external autodiff, so every gradient path can be verified against
//! central differences.

pub mod adam;
pub mod gradcheck;
pub mod linear;
pub mod lstm;
pub mod matrix;
pub mod ops;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use gradcheck::{grad_check, GradCheckReport};
pub use linear::{Linear, LinearGrads};
pub use lstm::{cell_backward, cell_forward, cell_forward_cached, LstmCache, LstmGrads, LstmParams};
pub use matrix::Matrix;
pub use ops::{clip_l2, l2_norm, sigmoid, softmax_row, softmax_row_backward};

/// Global L2 clipping threshold applied to every gradient before Adam.
pub const GRAD_CLIP_NORM: f64 = 5.0;
