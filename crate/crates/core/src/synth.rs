//! Seeded synthetic EEG sessions with the injected components kept as ground
//! truth.
//!
//! The clean recording is 1/f background noise plus a Gaussian P300 bump after
//! every target onset. Blinks and slow drift are added on top to form the
//! contaminated recording, and every piece is stored separately so tests can
//! compare against the exact signal that went in.

use ndarray::Array2;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::epoch::EpochWindow;
use crate::error::{Error, Result};
use crate::protocol::{ResponseLog, SessionPlan};
use crate::recording::{default_channel_names, MultichannelRecording};

/// Total length of one blink template.
pub const BLINK_SUPPORT_MS: f64 = 400.0;
/// Blink weight on the frontal half of the montage relative to the rest.
pub const FRONTAL_WEIGHT_RATIO: f64 = 3.0;
/// Frequencies below this are shaped as if they sat at it, so the 1/f
/// spectrum stays finite near DC.
pub const NOISE_KNEE_HZ: f64 = 1.0;
/// Signal recorded past the last SOA slot.
pub const TAIL_MS: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_channels: usize,
    pub sample_rate_hz: f64,
    pub p300_amplitude_uv: f64,
    pub p300_latency_ms: f64,
    /// Standard deviation of the Gaussian bump.
    pub p300_width_ms: f64,
    pub noise_sigma_uv: f64,
    /// Power spectrum of the background falls as 1/f^exponent.
    pub noise_exponent: f64,
    /// Peak magnitude on frontal channels.
    pub blink_amplitude_uv: f64,
    pub blink_rate_per_min: f64,
    pub drift: Option<Drift>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_channels: 8,
            sample_rate_hz: 256.0,
            p300_amplitude_uv: 5.0,
            p300_latency_ms: 300.0,
            p300_width_ms: 100.0,
            noise_sigma_uv: 2.0,
            noise_exponent: 1.0,
            blink_amplitude_uv: 100.0,
            blink_rate_per_min: 12.0,
            drift: None,
        }
    }
}

/// Slow sinusoidal drift with a random phase per channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub amplitude_uv: f64,
    pub frequency_hz: f64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 {
            return Err(Error::config("synthetic recording needs at least one channel"));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::config(format!(
                "sample rate {} Hz must be positive",
                self.sample_rate_hz
            )));
        }
        let amplitudes = [
            ("p300_amplitude_uv", self.p300_amplitude_uv),
            ("noise_sigma_uv", self.noise_sigma_uv),
            ("blink_amplitude_uv", self.blink_amplitude_uv),
            ("blink_rate_per_min", self.blink_rate_per_min),
            ("noise_exponent", self.noise_exponent),
            ("drift amplitude", self.drift.map_or(0.0, |d| d.amplitude_uv)),
            ("drift frequency", self.drift.map_or(0.0, |d| d.frequency_hz)),
        ];
        if let Some((name, v)) = amplitudes.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config(format!(
                "{name} must be finite and non-negative, got {v}"
            )));
        }
        if !(self.p300_width_ms.is_finite() && self.p300_width_ms > 0.0) {
            return Err(Error::config("p300_width_ms must be positive"));
        }
        let post_ms = EpochWindow::standard(self.sample_rate_hz).post_samples as f64 * 1000.0 / self.sample_rate_hz;
        if !(self.p300_latency_ms > 0.0 && self.p300_latency_ms < post_ms) {
            return Err(Error::config(format!(
                "P300 latency {} ms lies outside the (0, {post_ms}) ms epoch post-window",
                self.p300_latency_ms
            )));
        }
        Ok(())
    }
}

/// Per-channel P300 weights, rising from 0.4 on the first channel to 1 on the
/// last.
pub fn p300_topography(n_channels: usize) -> Vec<f64> {
    if n_channels == 1 {
        return vec![1.0];
    }
    (0..n_channels)
        .map(|c| 0.4 + 0.6 * c as f64 / (n_channels - 1) as f64)
        .collect()
}

/// Blink weights: 1 on the first half of the channels, 1/3 on the rest.
pub fn blink_topography(n_channels: usize) -> Vec<f64> {
    let frontal = n_channels.div_ceil(2);
    (0..n_channels)
        .map(|c| if c < frontal { 1.0 } else { 1.0 / FRONTAL_WEIGHT_RATIO })
        .collect()
}

/// Biphasic blink shape at `t_ms` after the blink onset, zero outside the
/// support: a positive lobe followed by an equal negative one, so the
/// template has no net area. The positive peak is 1.
pub fn blink_template(t_ms: f64) -> f64 {
    if !(0.0..BLINK_SUPPORT_MS).contains(&t_ms) {
        return 0.0;
    }
    let g = |mu: f64, sigma: f64| (-(t_ms - mu).powi(2) / (2.0 * sigma * sigma)).exp();
    // peak of the raw difference, found numerically once and frozen
    const PEAK: f64 = 0.961_015_955_472_935_7;
    (g(150.0, 40.0) - g(250.0, 40.0)) / PEAK
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEvent {
    /// Session-clock onset.
    pub onset_ms: f64,
    pub trial: usize,
    pub event: usize,
    pub is_target: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Background plus P300.
    pub clean: MultichannelRecording,
    pub background: Array2<f64>,
    pub p300: Array2<f64>,
    pub blinks: Array2<f64>,
    pub drift: Array2<f64>,
    pub events: Vec<TruthEvent>,
    pub blink_onsets_ms: Vec<f64>,
}

impl GroundTruth {
    pub fn target_onsets_ms(&self) -> Vec<f64> {
        self.events.iter().filter(|e| e.is_target).map(|e| e.onset_ms).collect()
    }

    pub fn non_target_onsets_ms(&self) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| !e.is_target)
            .map(|e| e.onset_ms)
            .collect()
    }

    pub fn all_onsets_ms(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.onset_ms).collect()
    }
}

/// Gaussian-shaped noise with power spectrum ∝ 1/f^exponent, scaled to unit
/// sample standard deviation.
fn pink_noise(rng: &mut ChaCha8Rng, len: usize, sample_rate_hz: f64, exponent: f64) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..len)
        .map(|_| Complex::new(rng.sample(StandardNormal), 0.0))
        .collect();
    if len < 2 {
        return vec![0.0; len];
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    for (k, z) in buf.iter_mut().enumerate().skip(1) {
        let bin = k.min(len - k) as f64;
        let f = (bin * sample_rate_hz / len as f64).max(NOISE_KNEE_HZ);
        *z *= f.powf(-exponent / 2.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let out: Vec<f64> = buf.iter().map(|z| z.re).collect();
    let mean = out.iter().sum::<f64>() / len as f64;
    let sd = (out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / len as f64).sqrt();
    if sd == 0.0 {
        return vec![0.0; len];
    }
    out.iter().map(|x| (x - mean) / sd).collect()
}

fn sample_time_ms(i: usize, sample_rate_hz: f64) -> f64 {
    i as f64 * 1000.0 / sample_rate_hz
}

/// Renders a session into a contaminated recording and its ground truth.
///
/// The background, P300, blinks and drift are drawn in that order from one
/// generator seeded by `spec.seed`.
pub fn synth_session(plan: &SessionPlan, spec: &SynthSpec) -> Result<(MultichannelRecording, GroundTruth)> {
    spec.validate()?;
    if plan.trials.is_empty() {
        return Err(Error::config("session plan has no trials"));
    }
    let fs = spec.sample_rate_hz;
    let c_len = spec.n_channels;
    let t_len = ((plan.end_ms() as f64 + TAIL_MS) * fs / 1000.0).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut background = Array2::zeros((c_len, t_len));
    for mut row in background.rows_mut() {
        let noise = pink_noise(&mut rng, t_len, fs, spec.noise_exponent);
        for (x, n) in row.iter_mut().zip(noise) {
            *x = spec.noise_sigma_uv * n;
        }
    }

    let events: Vec<TruthEvent> = plan
        .trials
        .iter()
        .enumerate()
        .flat_map(|(ti, t)| {
            t.events.iter().enumerate().map(move |(ei, e)| TruthEvent {
                onset_ms: t.session_onset_ms(ei) as f64,
                trial: ti,
                event: ei,
                is_target: e.is_target,
            })
        })
        .collect();

    let mut p300 = Array2::zeros((c_len, t_len));
    let topo = p300_topography(c_len);
    // exp(−40²/2) underflows to zero, so truncating here changes nothing
    let reach = 40.0 * spec.p300_width_ms;
    for ev in events.iter().filter(|e| e.is_target) {
        let center = ev.onset_ms + spec.p300_latency_ms;
        let lo = (((center - reach) * fs / 1000.0).floor().max(0.0)) as usize;
        let hi = ((((center + reach) * fs / 1000.0).ceil()) as usize).min(t_len);
        for i in lo..hi {
            let dt = sample_time_ms(i, fs) - center;
            let v = spec.p300_amplitude_uv * (-(dt * dt) / (2.0 * spec.p300_width_ms.powi(2))).exp();
            for c in 0..c_len {
                p300[[c, i]] += topo[c] * v;
            }
        }
    }

    let mut blinks = Array2::zeros((c_len, t_len));
    let mut blink_onsets_ms = Vec::new();
    if spec.blink_rate_per_min > 0.0 && spec.blink_amplitude_uv > 0.0 {
        let gap =
            Exp::new(spec.blink_rate_per_min / 60_000.0).map_err(|e| Error::config(format!("blink rate: {e}")))?;
        let total_ms = sample_time_ms(t_len, fs);
        let weights = blink_topography(c_len);
        let mut t: f64 = gap.sample(&mut rng);
        while t + BLINK_SUPPORT_MS < total_ms {
            blink_onsets_ms.push(t);
            let lo = (t * fs / 1000.0).ceil() as usize;
            let hi = (((t + BLINK_SUPPORT_MS) * fs / 1000.0).ceil() as usize).min(t_len);
            for i in lo..hi {
                let v = spec.blink_amplitude_uv * blink_template(sample_time_ms(i, fs) - t);
                for c in 0..c_len {
                    blinks[[c, i]] += weights[c] * v;
                }
            }
            t += BLINK_SUPPORT_MS + gap.sample(&mut rng);
        }
    }

    let mut drift = Array2::zeros((c_len, t_len));
    if let Some(d) = spec.drift.filter(|d| d.amplitude_uv > 0.0) {
        for mut row in drift.rows_mut() {
            let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            for (i, x) in row.iter_mut().enumerate() {
                let t = i as f64 / fs;
                *x = d.amplitude_uv * (std::f64::consts::TAU * d.frequency_hz * t + phase).sin();
            }
        }
    }

    let clean_data = &background + &p300;
    let contaminated = &(&clean_data + &blinks) + &drift;
    let names = default_channel_names(c_len);
    let clean = MultichannelRecording::new(fs, names.clone(), clean_data)?;
    let recording = MultichannelRecording::new(fs, names, contaminated)?;
    Ok((
        recording,
        GroundTruth {
            clean,
            background,
            p300,
            blinks,
            drift,
            events,
            blink_onsets_ms,
        },
    ))
}

/// Presses `latency_ms` after each target onset, each with probability
/// `hit_prob`.
pub fn synth_response_log(plan: &SessionPlan, latency_ms: f64, hit_prob: f64, seed: u64) -> Result<ResponseLog> {
    if !(0.0..=1.0).contains(&hit_prob) {
        return Err(Error::arg(format!("hit probability {hit_prob} must lie in [0, 1]")));
    }
    let soa = plan.config.timing.soa_ms as f64;
    if !(latency_ms > 0.0 && latency_ms < soa) {
        return Err(Error::arg(format!("latency {latency_ms} ms must lie in (0, {soa}) ms")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut presses = Vec::new();
    for trial in &plan.trials {
        for (i, e) in trial.events.iter().enumerate() {
            if e.is_target && rng.random_bool(hit_prob) {
                presses.push(trial.session_onset_ms(i) as f64 + latency_ms);
            }
        }
    }
    ResponseLog::new(presses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epoch::segment_epochs;
    use crate::protocol::{build_session, score_session, ResponseWindow, SessionConfig};
    use approx::assert_abs_diff_eq;

    fn quiet() -> SynthSpec {
        SynthSpec {
            noise_sigma_uv: 0.0,
            blink_amplitude_uv: 0.0,
            ..SynthSpec::default()
        }
    }

    fn plan() -> SessionPlan {
        build_session(&SessionConfig::minimal(5)).unwrap()
    }

    #[test]
    fn blink_template_shape() {
        let (mut peak, mut trough) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..=400_000 {
            let v = blink_template(i as f64 / 1000.0);
            peak = peak.max(v);
            trough = trough.min(v);
        }
        assert_abs_diff_eq!(peak, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(trough, -1.0, epsilon = 1e-9);
        let area: f64 = (0..400_000).map(|i| blink_template(i as f64 / 1000.0)).sum::<f64>() / 1000.0;
        assert!(area.abs() < 1e-6, "{area}");
        assert_eq!(blink_template(-1.0), 0.0);
        assert_eq!(blink_template(400.0), 0.0);
        // both ends are already negligible, so truncation adds no step
        assert!(blink_template(0.0).abs() < 2e-3 && blink_template(399.999).abs() < 2e-3);
    }

    #[test]
    fn noiseless_targets_carry_exact_bump() {
        let p = plan();
        let spec = quiet();
        let (rec, truth) = synth_session(&p, &spec).unwrap();
        let window = EpochWindow::standard(spec.sample_rate_hz);
        let targets = truth.target_onsets_ms();
        assert_eq!(targets.len(), 16);
        let epochs = segment_epochs(&rec, &targets, window).unwrap();
        let topo = p300_topography(8);
        for (ep, &onset) in epochs.iter().zip(&targets) {
            let start = crate::epoch::onset_sample(onset, 256.0) as usize - window.pre_samples;
            for i in 0..window.len() {
                let dt = (start + i) as f64 * 1000.0 / 256.0 - onset - 300.0;
                let bump = 5.0 * (-(dt * dt) / (2.0 * spec.p300_width_ms.powi(2))).exp();
                for (c, w) in topo.iter().enumerate() {
                    assert_abs_diff_eq!(ep.samples[[c, i]], w * bump, epsilon = 1e-12);
                }
            }
        }
        let non = segment_epochs(&rec, &truth.non_target_onsets_ms(), window).unwrap();
        let biggest = non
            .iter()
            .flat_map(|e| e.samples.iter().copied())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        // only the 5σ tail of a neighbouring target bump can reach in
        assert!(biggest < 1e-4, "{biggest}");
    }

    #[test]
    fn parts_sum_to_contaminated() {
        let spec = SynthSpec {
            drift: Some(Drift {
                amplitude_uv: 30.0,
                frequency_hz: 0.1,
            }),
            ..SynthSpec::default()
        };
        let (rec, truth) = synth_session(&plan(), &spec).unwrap();
        assert!(!truth.blink_onsets_ms.is_empty());
        for (c, row) in rec.data().rows().into_iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                let clean = truth.background[[c, i]] + truth.p300[[c, i]];
                assert_eq!(truth.clean.data()[[c, i]], clean);
                assert_eq!(v, clean + truth.blinks[[c, i]] + truth.drift[[c, i]]);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let p = plan();
        let a = synth_session(&p, &SynthSpec::default()).unwrap();
        let b = synth_session(&p, &SynthSpec::default()).unwrap();
        assert_eq!(a, b);
        let other = SynthSpec {
            seed: 1,
            ..SynthSpec::default()
        };
        assert_ne!(a.0, synth_session(&p, &other).unwrap().0);
    }

    #[test]
    fn noise_level_and_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 1 << 16;
        let x = pink_noise(&mut rng, n, 256.0, 1.0);
        let var = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(var, 1.0, epsilon = 1e-9);
        // band power between 2–4 Hz vs 16–32 Hz: equal octaves, equal power for 1/f
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let band = |lo: f64, hi: f64| -> f64 {
            let k0 = (lo * n as f64 / 256.0) as usize;
            let k1 = (hi * n as f64 / 256.0) as usize;
            buf[k0..k1].iter().map(|z| z.norm_sqr()).sum()
        };
        let ratio = band(2.0, 4.0) / band(16.0, 32.0);
        assert!((0.8..1.25).contains(&ratio), "{ratio}");
    }

    #[test]
    fn blinks_are_frontal() {
        let spec = SynthSpec {
            noise_sigma_uv: 0.0,
            p300_amplitude_uv: 0.0,
            ..SynthSpec::default()
        };
        let (_, truth) = synth_session(&plan(), &spec).unwrap();
        let peak = |c: usize| truth.blinks.row(c).iter().fold(0.0f64, |m, v| m.max(*v));
        assert_abs_diff_eq!(peak(0), 100.0, epsilon = 1.0);
        assert_abs_diff_eq!(peak(0) / peak(7), 3.0, epsilon = 1e-9);
        // expected count for 12/min over the session, allowing Poisson spread
        let minutes = truth.clean.n_samples() as f64 / 256.0 / 60.0;
        let n = truth.blink_onsets_ms.len() as f64;
        let expect = minutes * 60.0 / (60.0 / 12.0 + 0.4);
        assert!((n - expect).abs() < 4.0 * expect.sqrt(), "{n} vs {expect}");
    }

    #[test]
    fn spec_validation() {
        let p = plan();
        for bad in [
            SynthSpec {
                p300_latency_ms: 900.0,
                ..quiet()
            },
            SynthSpec {
                p300_latency_ms: -5.0,
                ..quiet()
            },
            SynthSpec {
                noise_sigma_uv: -1.0,
                ..quiet()
            },
            SynthSpec {
                n_channels: 0,
                ..quiet()
            },
            SynthSpec {
                p300_width_ms: 0.0,
                ..quiet()
            },
        ] {
            assert!(matches!(synth_session(&p, &bad), Err(Error::InvalidConfiguration(_))));
        }
    }

    #[test]
    fn response_logs() {
        let p = plan();
        let log = synth_response_log(&p, 500.0, 1.0, 1).unwrap();
        let scores = score_session(&p, &log, ResponseWindow::default()).unwrap();
        assert!(scores.iter().all(|s| s.hits == 1 && s.hit_latencies_ms == vec![500.0]));
        assert!(synth_response_log(&p, 500.0, 0.0, 1).unwrap().is_empty());
        assert!(synth_response_log(&p, 1000.0, 1.0, 1).is_err());
        assert!(synth_response_log(&p, 500.0, 1.5, 1).is_err());

        let mut cfg = SessionConfig::minimal(2);
        cfg.repetitions = 13;
        let big = build_session(&cfg).unwrap();
        assert!(big.trials.len() >= 200);
        let log = synth_response_log(&big, 450.0, 0.5, 77).unwrap();
        let hits: usize = score_session(&big, &log, ResponseWindow::default())
            .unwrap()
            .iter()
            .map(|s| s.hits)
            .sum();
        let ar = 100.0 * hits as f64 / big.trials.len() as f64;
        assert!((ar - 50.0).abs() <= 10.0, "{ar}");
    }
}
