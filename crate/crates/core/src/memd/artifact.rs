//! Peak-to-peak rejection of contaminated IMF contributions.
//!
//! Rejection works per (channel, component): a channel's share of an IMF is
//! dropped when its max − min over the epoch exceeds the threshold, leaving
//! the same IMF untouched on clean channels. The residue is tested the same
//! way, so slow drifts above threshold are removed too.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::ImfStack;

pub fn peak_to_peak(x: ArrayView1<'_, f64>) -> f64 {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

/// `rejected[k][c]` is true when component `k` (IMFs, then the residue) was
/// removed from channel `c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionMask {
    pub rejected: Vec<Vec<bool>>,
}

impl RejectionMask {
    pub fn count(&self) -> usize {
        self.rejected.iter().flatten().filter(|&&r| r).count()
    }

    pub fn any(&self) -> bool {
        self.count() > 0
    }
}

/// Zeroes every (channel, component) whose peak-to-peak exceeds `threshold_uv`.
/// A non-positive threshold rejects everything, flat components included.
pub fn clean_stack(stack: &ImfStack, threshold_uv: f64) -> (ImfStack, RejectionMask) {
    let mut cleaned = stack.clone();
    let mut rejected = Vec::with_capacity(stack.n_imfs() + 1);
    let components = cleaned.imfs.iter_mut().chain(std::iter::once(&mut cleaned.residue));
    for comp in components {
        let mut flags = Vec::with_capacity(comp.nrows());
        for mut row in comp.rows_mut() {
            let reject = threshold_uv <= 0.0 || peak_to_peak(row.view()) > threshold_uv;
            if reject {
                row.fill(0.0);
            }
            flags.push(reject);
        }
        rejected.push(flags);
    }
    (cleaned, RejectionMask { rejected })
}

/// The signal rebuilt from the contributions that survive `threshold_uv`.
pub fn remove_artifact_imfs(stack: &ImfStack, threshold_uv: f64) -> Array2<f64> {
    clean_stack(stack, threshold_uv).0.reconstruct()
}

#[cfg(test)]
mod tests {
    use super::super::{memd_decompose, SiftConfig};
    use super::*;
    use std::f64::consts::PI;

    fn blink(t: usize, fs: f64, amp: f64) -> Vec<f64> {
        (0..t)
            .map(|i| {
                let x = i as f64 / fs - 0.4;
                amp * (-(x * x) / (2.0 * 0.06f64.powi(2))).exp()
            })
            .collect()
    }

    fn small_stack() -> ImfStack {
        let t = 231;
        let fast = Array2::from_shape_fn((3, t), |(c, i)| {
            (2.0 + c as f64) * (2.0 * PI * 12.0 * i as f64 / 256.0).sin()
        });
        let slow = Array2::from_shape_fn((3, t), |(c, i)| {
            (1.0 + c as f64) * (2.0 * PI * 3.0 * i as f64 / 256.0).cos()
        });
        ImfStack {
            imfs: vec![fast, slow],
            residue: Array2::from_elem((3, t), 0.25),
        }
    }

    #[test]
    fn below_threshold_is_a_no_op() {
        let stack = small_stack();
        let out = remove_artifact_imfs(&stack, 20.0);
        let orig = stack.reconstruct();
        for (a, b) in out.iter().zip(orig.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(!clean_stack(&stack, 20.0).1.any());
    }

    #[test]
    fn blink_contribution_removed_on_its_channel_only() {
        let mut stack = small_stack();
        let b = blink(231, 256.0, 100.0);
        let mut blink_imf = Array2::zeros((3, 231));
        blink_imf.row_mut(0).assign(&ndarray::Array1::from(b));
        stack.imfs.push(blink_imf);
        let (cleaned, mask) = clean_stack(&stack, 20.0);
        assert_eq!(mask.rejected[2], vec![true, false, false]);
        assert_eq!(mask.count(), 1);
        let out = cleaned.reconstruct();
        assert!(peak_to_peak(out.row(0)) < 20.0);
        assert_eq!(out.row(1), small_stack().reconstruct().row(1));
    }

    #[test]
    fn zero_threshold_removes_everything() {
        let out = remove_artifact_imfs(&small_stack(), 0.0);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cleaning_is_idempotent() {
        let mut stack = small_stack();
        stack.imfs[1] *= 20.0;
        let (once, _) = clean_stack(&stack, 20.0);
        let (twice, mask) = clean_stack(&once, 20.0);
        assert_eq!(once, twice);
        assert!(!mask.any());
    }

    #[test]
    fn decomposed_blink_is_detected() {
        let t = 231;
        let b = blink(t, 256.0, 100.0);
        let s = Array2::from_shape_fn((4, t), |(c, i)| {
            let w = if c < 2 { 1.0 } else { 1.0 / 3.0 };
            w * b[i] + 2.0 * (2.0 * PI * 10.0 * i as f64 / 256.0 + c as f64).sin()
        });
        let stack = memd_decompose(s.view(), &SiftConfig::default()).unwrap();
        let (cleaned, mask) = clean_stack(&stack, 20.0);
        assert!(mask.rejected.iter().any(|comp| comp[0]));
        let out = cleaned.reconstruct();
        assert!(peak_to_peak(out.row(0)) < peak_to_peak(s.row(0)) / 2.0);
    }
}
