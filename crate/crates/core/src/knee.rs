//! Knee detection on test-error curves.
//!
//! Cross-validated rank estimation produces a curve of test errors, one per
//! candidate rank; the selected rank sits at the curve's knee. Two detectors
//! are offered: the chord-distance rule (normalize the curve into the unit
//! square and take the point farthest below the straight line through its
//! endpoints) and a simpler gradient threshold (the first index whose
//! relative decrement falls under a cutoff).
//!
//! Degenerate curves carry a `no_knee` flag instead of failing: a constant
//! curve reports index 1, a linear curve its last index. The flag is also
//! raised when the error at the detected knee still exceeds 1.5x the curve's
//! minimum — the curve keeps improving well past the knee, so the detected
//! index is suspect.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KneeMethod {
    Kneedle,
    /// First index whose relative decrement `|t[j+1] - t[j]| / t[1]` drops
    /// below the threshold.
    GradientThreshold { theta: f64 },
}

impl KneeMethod {
    pub fn gradient_threshold() -> Self {
        KneeMethod::GradientThreshold { theta: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KneeResult {
    /// 1-based position of the knee in the input curve.
    pub index: usize,
    /// No interior knee was found, or the value at the knee is still far
    /// from the curve's minimum.
    pub no_knee: bool,
}

/// Locates the knee of a curve of nonnegative values (at least 3 points).
pub fn knee_detect(values: &[f64], method: KneeMethod) -> Result<KneeResult> {
    if values.len() < 3 {
        return Err(Error::arg(
            "knee_detect",
            format!("need at least 3 values, got {}", values.len()),
        ));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::arg("knee_detect", format!("values must be finite and >= 0, got {bad}")));
    }

    let mut result = match method {
        KneeMethod::Kneedle => kneedle(values),
        KneeMethod::GradientThreshold { theta } => gradient_threshold(values, theta),
    };

    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if values[result.index - 1] > 1.5 * min {
        result.no_knee = true;
    }
    Ok(result)
}

fn kneedle(values: &[f64]) -> KneeResult {
    let n = values.len();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return KneeResult { index: 1, no_knee: true };
    }

    // Normalize onto [0,1]^2 and measure each point's drop below the chord
    // through the normalized endpoints.
    let range = max - min;
    let y = |j: usize| (values[j] - min) / range;
    let (y0, y1) = (y(0), y(n - 1));
    let mut best = f64::NEG_INFINITY;
    let mut best_j = 0;
    for j in 0..n {
        let x = j as f64 / (n - 1) as f64;
        let chord = y0 + (y1 - y0) * x;
        let d = chord - y(j);
        if d > best {
            best = d;
            best_j = j;
        }
    }

    if best <= 1e-12 {
        // The curve never dips below its chord: linear decay or worse.
        KneeResult { index: n, no_knee: true }
    } else {
        KneeResult { index: best_j + 1, no_knee: false }
    }
}

fn gradient_threshold(values: &[f64], theta: f64) -> KneeResult {
    let n = values.len();
    let t1 = values[0];
    for j in 0..n - 1 {
        let diff = (values[j + 1] - values[j]).abs();
        let ratio = if t1 > 0.0 {
            diff / t1
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if ratio < theta {
            return KneeResult { index: j + 1, no_knee: false };
        }
    }
    KneeResult { index: n, no_knee: true }
}
