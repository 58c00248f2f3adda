//! Multichannel stimulus rendering for playback checks.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::protocol::{StimulusEvent, Timbre};
use crate::vbap::{ring_gain_vector, LoudspeakerRing, PanningMode, VirtualSource};

pub const WAV_SAMPLE_RATE_HZ: u32 = 44_100;
const FADE_MS: f64 = 10.0;
const LEVEL: f64 = 0.5;

fn source_signal(timbre: Timbre, n: usize, seed: u64) -> Vec<f64> {
    let fs = WAV_SAMPLE_RATE_HZ as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dur = n as f64 / fs;
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            match timbre {
                Timbre::WhiteNoise => rng.random_range(-1.0..1.0),
                // A few decaying harmonics of A4.
                Timbre::Midi => {
                    (1..=4)
                        .map(|h| (2.0 * PI * 440.0 * h as f64 * t).sin() / h as f64)
                        .sum::<f64>()
                        * (-3.0 * t).exp()
                        / 2.0833
                }
                // Rising chirp, 300 Hz to 3 kHz.
                Timbre::Effect => (2.0 * PI * (300.0 * t + 2700.0 * t * t / (2.0 * dur))).sin(),
            }
        })
        .enumerate()
        .map(|(i, v)| {
            let fade = (FADE_MS / 1000.0 * fs).round() as usize;
            let edge = i.min(n - 1 - i);
            let w = if edge < fade {
                0.5 - 0.5 * (PI * edge as f64 / fade as f64).cos()
            } else {
                1.0
            };
            LEVEL * w * v
        })
        .collect()
}

/// One event as loudspeaker feeds, `(ring.len(), samples)`.
pub fn render_stimulus(
    ring: &LoudspeakerRing,
    event: &StimulusEvent,
    mode: PanningMode,
    seed: u64,
) -> Result<Array2<f64>> {
    let source = VirtualSource::new(event.direction_deg, event.depth_c)?;
    let gains = ring_gain_vector(ring, &source, mode)?;
    let n = (event.duration_ms as usize * WAV_SAMPLE_RATE_HZ as usize) / 1000;
    if n == 0 {
        return Err(Error::arg("stimulus has zero duration"));
    }
    let mono = source_signal(event.timbre, n, seed);
    Ok(Array2::from_shape_fn((ring.len(), n), |(c, i)| {
        gains.gains[c] * mono[i]
    }))
}

/// 16-bit PCM; samples are clipped to [-1, 1].
pub fn write_wav(path: &Path, feeds: &Array2<f64>, sample_rate_hz: u32) -> Result<()> {
    let channels = u16::try_from(feeds.nrows()).map_err(|_| Error::arg("too many channels for WAV"))?;
    if channels == 0 {
        return Err(Error::arg("no channels to write"));
    }
    let spec = hound::WavSpec {
        channels,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for col in feeds.columns() {
        for &v in col {
            w.write_sample((v.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16)?;
        }
    }
    w.finalize()?;
    Ok(())
}
