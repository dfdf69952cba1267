//! Dense complex order-3 tensors, the tensor-tensor product induced by an
//! invertible mode-3 transform, and alternating-steepest-descent completion
//! of undersampled matrices and tensors.
//!
//! The main pieces:
//!
//! * [`tensor`] — column-major [`Tensor3`]/[`Matrix`] storage plus the
//!   reshapes (`flatten`, `twist`, `unfold3`, …) that connect them.
//! * [`transform`] — mode-3 transforms `M = c·W` with `W` unitary: DFT, DCT,
//!   identity, or a user-supplied matrix.
//! * [`algebra`] — slicewise products in the transform domain, tensor SVD,
//!   rank profiles, and global singular-value truncation.
//! * [`sampling`] — Bernoulli and raster-style observation masks.
//! * [`asd`] / [`tasd`] — matrix and tensor completion by alternating
//!   steepest descent, including the rank-adaptive looped and slicewise
//!   variants.
//! * [`synth`], [`metrics`], [`sweep`] — synthetic data sets, recovery-error
//!   scoring, and reproducible parameter sweeps.
//!
//! With the `parallel` feature (on by default) the slicewise inner loops and
//! sweep cells run on a rayon pool; without it everything runs sequentially.
//! Results are identical either way: every parallel reduction is collected in
//! slice order before being folded.

pub mod algebra;
pub mod asd;
pub mod error;
pub mod knee;
pub mod metrics;
mod par;
pub mod rng;
pub mod sampling;
pub mod sweep;
pub mod synth;
pub mod tasd;
pub mod tensor;
pub mod tns1;
pub mod transform;

pub use error::{Error, Result};
pub use tensor::{Matrix, Tensor3, C64};
