//! Minimal deterministic numerics: dense `f64` matrices, a reverse-mode
//! autodiff tape, the Adam optimizer, and a finite-difference gradient
//! checker.
//!
//! Every operation is a pure function of its inputs and runs single-threaded,
//! so repeated calls are bit-identical. Kernel-size-1 temporal convolutions
//! reduce to per-column affine maps, which is all the network needs.

mod adam;
mod gradcheck;
mod matrix;
mod tape;

pub use adam::{adam_update, AdamHyperParams, AdamState};
pub use gradcheck::finite_diff_check;
pub use matrix::Matrix;
pub use tape::{Gradients, NodeId, Tape};

use rand::Rng;

/// Uniform weight initialization in `[-a, a]` with
/// `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
    Matrix::from_vec(rows, cols, data).expect("init values are finite by construction")
}
