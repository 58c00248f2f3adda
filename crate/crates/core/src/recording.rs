use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multichannel EEG, channels × samples, in microvolts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultichannelRecording {
    sample_rate_hz: f64,
    channel_names: Vec<String>,
    data: Array2<f64>,
}

impl MultichannelRecording {
    pub fn new(sample_rate_hz: f64, channel_names: Vec<String>, data: Array2<f64>) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::arg(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if data.nrows() == 0 {
            return Err(Error::arg("a recording needs at least one channel"));
        }
        if channel_names.len() != data.nrows() {
            return Err(Error::arg(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                data.nrows()
            )));
        }
        Ok(Self {
            sample_rate_hz,
            channel_names,
            data,
        })
    }

    /// Channels named `ch0`, `ch1`, ...
    pub fn with_default_names(sample_rate_hz: f64, data: Array2<f64>) -> Result<Self> {
        let names = default_channel_names(data.nrows());
        Self::new(sample_rate_hz, names, data)
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn channel(&self, c: usize) -> ArrayView1<'_, f64> {
        self.data.row(c)
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    /// Same metadata, new samples of identical shape.
    pub fn with_data(&self, data: Array2<f64>) -> Result<Self> {
        if data.dim() != self.data.dim() {
            return Err(Error::arg("replacement data has a different shape"));
        }
        Self::new(self.sample_rate_hz, self.channel_names.clone(), data)
    }
}

pub fn default_channel_names(n: usize) -> Vec<String> {
    (0..n).map(|c| format!("ch{c}")).collect()
}
