//! Multivariate empirical mode decomposition.
//!
//! All channels are decomposed jointly: the signal is projected onto K
//! directions from a Hammersley set on the (n−1)-sphere, the multivariate
//! samples at each projection's maxima are interpolated into an envelope,
//! and the mean of the K envelopes is sifted out. Every channel therefore
//! receives the same number of IMFs, covering aligned frequency bands.
//!
//! The stoppage rule is the energy-ratio criterion
//! `Σ‖d_new − d_old‖² / Σ‖d_old‖² < sd_threshold`; no extrema/zero-crossing
//! count condition is imposed.

mod artifact;
mod hammersley;
mod sift;
mod spline;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use artifact::{clean_stack, peak_to_peak, remove_artifact_imfs, RejectionMask};
pub use hammersley::{hammersley_directions, radical_inverse, DirectionSet};
pub use sift::{envelope_mean, find_maxima, project};
pub use spline::interpolate_natural;

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Default peak-to-peak rejection threshold, µV.
pub const DEFAULT_THRESHOLD_UV: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SiftConfig {
    /// Number of projection directions K.
    pub directions: usize,
    pub max_sift_iters: usize,
    pub sd_threshold: f64,
    pub max_imfs: usize,
    pub execution: Execution,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self {
            directions: 64,
            max_sift_iters: 50,
            sd_threshold: 0.075,
            max_imfs: 12,
            execution: Execution::default(),
        }
    }
}

impl SiftConfig {
    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.directions < 2 * channels {
            return Err(Error::config(format!(
                "{} directions is fewer than twice the {channels} channels",
                self.directions
            )));
        }
        if self.max_sift_iters == 0 || self.max_imfs == 0 {
            return Err(Error::config("sift iteration and IMF limits must be positive"));
        }
        if !(self.sd_threshold > 0.0 && self.sd_threshold.is_finite()) {
            return Err(Error::config("sd_threshold must be positive"));
        }
        Ok(())
    }
}

/// IMFs (finest first) and the residue, each channels × samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImfStack {
    pub imfs: Vec<Array2<f64>>,
    pub residue: Array2<f64>,
}

impl ImfStack {
    pub fn n_imfs(&self) -> usize {
        self.imfs.len()
    }

    pub fn n_channels(&self) -> usize {
        self.residue.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.residue.ncols()
    }

    /// IMFs followed by the residue.
    pub fn components(&self) -> impl Iterator<Item = &Array2<f64>> {
        self.imfs.iter().chain(std::iter::once(&self.residue))
    }

    /// `Σ IMFs + residue`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let mut sum = self.residue.clone();
        for imf in &self.imfs {
            sum += imf;
        }
        sum
    }
}

/// One sifting pass producing the first IMF of `signal` and the remainder.
pub fn sift(signal: ArrayView2<'_, f64>, cfg: &SiftConfig) -> Result<(Array2<f64>, Array2<f64>)> {
    validate_signal(signal)?;
    cfg.validate(signal.nrows())?;
    let dirs = hammersley_directions(cfg.directions, signal.nrows())?;
    sift::sift_with(signal, &dirs, cfg)
}

fn validate_signal(signal: ArrayView2<'_, f64>) -> Result<()> {
    if signal.nrows() < 2 {
        return Err(Error::arg(format!(
            "multivariate decomposition needs at least 2 channels, got {}",
            signal.nrows()
        )));
    }
    if signal.ncols() < 16 {
        return Err(Error::arg(format!(
            "decomposition needs at least 16 samples, got {}",
            signal.ncols()
        )));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("signal contains non-finite samples"));
    }
    Ok(())
}

/// Sifts IMFs off successive remainders until the remainder's projections
/// no longer carry enough extrema or `max_imfs` is reached.
pub fn memd_decompose(signal: ArrayView2<'_, f64>, cfg: &SiftConfig) -> Result<ImfStack> {
    validate_signal(signal)?;
    cfg.validate(signal.nrows())?;
    let dirs = hammersley_directions(cfg.directions, signal.nrows())?;
    let mut residue = signal.to_owned();
    let mut imfs = Vec::new();
    while imfs.len() < cfg.max_imfs {
        match sift::sift_with(residue.view(), &dirs, cfg) {
            Ok((imf, rest)) => {
                imfs.push(imf);
                residue = rest;
            }
            Err(Error::InsufficientExtrema) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(ImfStack { imfs, residue })
}
