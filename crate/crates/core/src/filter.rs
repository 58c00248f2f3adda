//! Butterworth IIR design and causal band-limiting of EEG.
//!
//! Filters are designed from the analog Butterworth prototype via the
//! bilinear transform with the cutoff prewarped, so the digital magnitude is
//! exactly −3.01 dB at the requested frequency. Coefficients are kept as a
//! cascade of second-order sections (plus one first-order section for odd
//! orders) and run in transposed direct form II.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::recording::MultichannelRecording;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Lowpass,
    Highpass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff_hz: f64,
    pub kind: FilterKind,
}

impl FilterSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if self.order == 0 {
            return Err(Error::arg("filter order must be at least 1"));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::arg(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < sample_rate_hz / 2.0) {
            return Err(Error::arg(format!(
                "cutoff {} Hz must lie in (0, {}) Hz",
                self.cutoff_hz,
                sample_rate_hz / 2.0
            )));
        }
        Ok(())
    }
}

/// One section `(b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (1.0 + self.a[0] * z_inv + self.a[1] * z2)
    }

    fn poles(&self) -> Vec<Complex64> {
        let [a1, a2] = self.a;
        if a2 == 0.0 {
            return vec![Complex64::new(-a1, 0.0)];
        }
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        vec![(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirFilter {
    pub spec: FilterSpec,
    pub sample_rate_hz: f64,
    pub sections: Vec<Biquad>,
}

impl IirFilter {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(Biquad::poles).collect()
    }

    /// Causal single-pass filtering from rest.
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut out = input.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for x in out.iter_mut() {
                let y = s.b[0] * *x + z1;
                z1 = s.b[1] * *x - s.a[0] * y + z2;
                z2 = s.b[2] * *x - s.a[1] * y;
                *x = y;
            }
        }
        out
    }
}

/// Bilinear map of an s-plane point at sample rate `fs`.
fn bilinear(s: Complex64, fs: f64) -> Complex64 {
    let k = 2.0 * fs;
    (k + s) / (k - s)
}

pub fn design_butterworth(spec: FilterSpec, sample_rate_hz: f64) -> Result<IirFilter> {
    spec.validate(sample_rate_hz)?;
    let n = spec.order;
    let warped = 2.0 * sample_rate_hz * (PI * spec.cutoff_hz / sample_rate_hz).tan();
    let analog_pole = |k: usize| -> Complex64 {
        let unit = Complex64::from_polar(1.0, PI * (2 * k + n + 1) as f64 / (2 * n) as f64);
        match spec.kind {
            FilterKind::Lowpass => unit * warped,
            FilterKind::Highpass => warped / unit,
        }
    };
    // zeros sit at z = -1 (lowpass) or z = +1 (highpass); each section is
    // normalized to unit gain at DC (lowpass) or Nyquist (highpass)
    let zero_sign = match spec.kind {
        FilterKind::Lowpass => 1.0,
        FilterKind::Highpass => -1.0,
    };
    let mut sections = Vec::with_capacity(n.div_ceil(2));
    for k in 0..n / 2 {
        let p = bilinear(analog_pole(k), sample_rate_hz);
        let a = [-2.0 * p.re, p.norm_sqr()];
        let b_shape = [1.0, 2.0 * zero_sign, 1.0];
        let gain = (1.0 + zero_sign * a[0] + a[1]) / 4.0;
        sections.push(Biquad {
            b: b_shape.map(|c| c * gain),
            a,
        });
    }
    if n % 2 == 1 {
        let p = bilinear(analog_pole(n / 2), sample_rate_hz).re;
        let gain = (1.0 - zero_sign * p) / 2.0;
        sections.push(Biquad {
            b: [gain, zero_sign * gain, 0.0],
            a: [-p, 0.0],
        });
    }
    Ok(IirFilter {
        spec,
        sample_rate_hz,
        sections,
    })
}

/// Pass band used by [`bandlimit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandConfig {
    pub order: usize,
    pub highpass_hz: f64,
    pub lowpass_hz: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            order: 5,
            highpass_hz: 0.5,
            lowpass_hz: 20.0,
        }
    }
}

/// Highpass then lowpass, per channel, with the default 0.5–20 Hz band.
pub fn bandlimit(rec: &MultichannelRecording, exec: Execution) -> Result<MultichannelRecording> {
    bandlimit_with(rec, BandConfig::default(), exec)
}

pub fn bandlimit_with(rec: &MultichannelRecording, band: BandConfig, exec: Execution) -> Result<MultichannelRecording> {
    let fs = rec.sample_rate_hz();
    if fs <= 2.0 * band.lowpass_hz {
        return Err(Error::arg(format!(
            "sample rate {fs} Hz is too low for a {} Hz lowpass",
            band.lowpass_hz
        )));
    }
    let hp = design_butterworth(
        FilterSpec {
            order: band.order,
            cutoff_hz: band.highpass_hz,
            kind: FilterKind::Highpass,
        },
        fs,
    )?;
    let lp = design_butterworth(
        FilterSpec {
            order: band.order,
            cutoff_hz: band.lowpass_hz,
            kind: FilterKind::Lowpass,
        },
        fs,
    )?;
    let rows = exec.map_indexed(rec.n_channels(), |c| {
        let x = rec.channel(c).to_vec();
        lp.apply(&hp.apply(&x))
    });
    let t = rec.n_samples();
    let data = Array2::from_shape_vec((rows.len(), t), rows.concat()).expect("filtered rows keep the input length");
    rec.with_data(data)
}
