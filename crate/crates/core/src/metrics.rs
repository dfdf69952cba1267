//! Completion-quality metrics.

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor3};

/// Stand-in for an exact match (`-inf` dB) in numeric CSV columns; the
/// `exact` flag column records which rows were floored.
pub const RSE_EXACT_DB_FLOOR: f64 = -320.0;

/// Relative square error in decibels:
/// `20·log10(‖truth - estimate‖_F / ‖truth‖_F)`.
///
/// An exact match returns `-inf`; use [`rse_for_csv`] where a numeric
/// value is required.
pub fn rse(truth: &Tensor3, estimate: &Tensor3) -> Result<f64> {
    if truth.dims() != estimate.dims() {
        return Err(Error::dims(
            "rse",
            format!("{:?} truth vs {:?} estimate", truth.dims(), estimate.dims()),
        ));
    }
    rse_from_norms(truth.sub(estimate).frobenius_norm(), truth.frobenius_norm())
}

/// [`rse`] for matrices.
pub fn rse_matrix(truth: &Matrix, estimate: &Matrix) -> Result<f64> {
    if (truth.rows(), truth.cols()) != (estimate.rows(), estimate.cols()) {
        return Err(Error::dims(
            "rse",
            format!(
                "{}x{} truth vs {}x{} estimate",
                truth.rows(),
                truth.cols(),
                estimate.rows(),
                estimate.cols()
            ),
        ));
    }
    rse_from_norms(truth.sub(estimate).frobenius_norm(), truth.frobenius_norm())
}

fn rse_from_norms(err_norm: f64, truth_norm: f64) -> Result<f64> {
    if truth_norm == 0.0 {
        return Err(Error::arg("rse", "truth is identically zero"));
    }
    Ok(if err_norm == 0.0 { f64::NEG_INFINITY } else { 20.0 * (err_norm / truth_norm).log10() })
}

/// Maps an RSE value onto the numeric CSV representation:
/// `(value or floor, exact flag)`.
pub fn rse_for_csv(rse_db: f64) -> (f64, bool) {
    if rse_db == f64::NEG_INFINITY {
        (RSE_EXACT_DB_FLOOR, true)
    } else {
        (rse_db, false)
    }
}
