use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recording::MultichannelRecording;

/// Event-locked window, in samples around the onset sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochWindow {
    pub pre_samples: usize,
    pub post_samples: usize,
}

impl EpochWindow {
    /// `round(pre_ms·fs/1000)` samples before and `round(post_ms·fs/1000)`
    /// from the onset on.
    pub fn from_ms(pre_ms: f64, post_ms: f64, sample_rate_hz: f64) -> Result<Self> {
        if !(pre_ms >= 0.0 && post_ms > 0.0 && sample_rate_hz > 0.0) {
            return Err(Error::arg("epoch window needs pre ≥ 0, post > 0 and a positive rate"));
        }
        Ok(Self {
            pre_samples: (pre_ms * sample_rate_hz / 1000.0).round() as usize,
            post_samples: (post_ms * sample_rate_hz / 1000.0).round() as usize,
        })
    }

    /// −100 … 800 ms.
    pub fn standard(sample_rate_hz: f64) -> Self {
        Self::from_ms(100.0, 800.0, sample_rate_hz).expect("standard window is valid")
    }

    pub fn len(&self) -> usize {
        self.pre_samples + self.post_samples
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Time of sample `i` relative to onset.
    pub fn time_ms(&self, i: usize, sample_rate_hz: f64) -> f64 {
        (i as f64 - self.pre_samples as f64) * 1000.0 / sample_rate_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    /// Channels × window samples, µV.
    pub samples: Array2<f64>,
    /// Index of the onset sample inside `samples`.
    pub onset_index: usize,
    pub onset_ms: f64,
    /// Position of the source event in the onset list.
    pub event_index: usize,
}

impl Epoch {
    /// Subtracts each channel's pre-onset mean. Epochs without a pre-onset
    /// segment are returned unchanged.
    pub fn baseline_corrected(&self) -> Epoch {
        let mut out = self.clone();
        if self.onset_index == 0 {
            return out;
        }
        let baseline = self
            .samples
            .slice(s![.., ..self.onset_index])
            .mean_axis(Axis(1))
            .expect("non-empty pre-window");
        for (mut row, b) in out.samples.rows_mut().into_iter().zip(baseline.iter()) {
            row -= *b;
        }
        out
    }
}

pub fn baseline_correct(epoch: &Epoch) -> Epoch {
    epoch.baseline_corrected()
}

/// Onset sample index for an onset time.
pub fn onset_sample(onset_ms: f64, sample_rate_hz: f64) -> i64 {
    (onset_ms * sample_rate_hz / 1000.0).round() as i64
}

/// Cuts one window per onset, `[onset − pre, onset + post)`.
pub fn segment_epochs(rec: &MultichannelRecording, onsets_ms: &[f64], window: EpochWindow) -> Result<Vec<Epoch>> {
    let fs = rec.sample_rate_hz();
    onsets_ms
        .iter()
        .enumerate()
        .map(|(event, &onset_ms)| {
            let onset = onset_sample(onset_ms, fs);
            let start = onset - window.pre_samples as i64;
            let end = onset + window.post_samples as i64;
            if !onset_ms.is_finite() || start < 0 || end > rec.n_samples() as i64 {
                return Err(Error::Boundary { event, onset_ms });
            }
            Ok(Epoch {
                samples: rec.data().slice(s![.., start as usize..end as usize]).to_owned(),
                onset_index: window.pre_samples,
                onset_ms,
                event_index: event,
            })
        })
        .collect()
}

/// Epochs cut from one recording, each labelled target or non-target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSet {
    pub sample_rate_hz: f64,
    pub channel_names: Vec<String>,
    pub window: EpochWindow,
    pub epochs: Vec<Epoch>,
    pub is_target: Vec<bool>,
}

impl EpochSet {
    /// Cuts an epoch at every onset and keeps its label.
    pub fn segment(
        rec: &MultichannelRecording,
        onsets_ms: &[f64],
        is_target: &[bool],
        window: EpochWindow,
    ) -> Result<Self> {
        if onsets_ms.len() != is_target.len() {
            return Err(Error::arg(format!(
                "{} onsets but {} labels",
                onsets_ms.len(),
                is_target.len()
            )));
        }
        Ok(Self {
            sample_rate_hz: rec.sample_rate_hz(),
            channel_names: rec.channel_names().to_vec(),
            window,
            epochs: segment_epochs(rec, onsets_ms, window)?,
            is_target: is_target.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn targets(&self) -> Vec<&Epoch> {
        self.select(true)
    }

    pub fn non_targets(&self) -> Vec<&Epoch> {
        self.select(false)
    }

    fn select(&self, target: bool) -> Vec<&Epoch> {
        self.epochs
            .iter()
            .zip(&self.is_target)
            .filter(|(_, &t)| t == target)
            .map(|(e, _)| e)
            .collect()
    }

    /// Same labels and metadata, each epoch passed through `f`.
    pub fn map_epochs(&self, f: impl Fn(&Epoch) -> Epoch) -> Self {
        Self {
            epochs: self.epochs.iter().map(f).collect(),
            ..self.clone()
        }
    }

    pub fn baseline_corrected(&self) -> Self {
        self.map_epochs(Epoch::baseline_corrected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_recording(c: usize, t: usize) -> MultichannelRecording {
        let data = Array2::from_shape_fn((c, t), |(ch, i)| (ch * 100_000 + i) as f64);
        MultichannelRecording::with_default_names(256.0, data).unwrap()
    }

    #[test]
    fn window_rounding() {
        let w = EpochWindow::standard(256.0);
        assert_eq!((w.pre_samples, w.post_samples, w.len()), (26, 205, 231));
        assert_eq!(w.time_ms(26, 256.0), 0.0);
    }

    #[test]
    fn slices_are_exact() {
        let rec = ramp_recording(8, 20 * 256);
        let onsets: Vec<f64> = (1..=16).map(|i| i as f64 * 1000.0).collect();
        let epochs = segment_epochs(&rec, &onsets, EpochWindow::standard(256.0)).unwrap();
        assert_eq!(epochs.len(), 16);
        for e in &epochs {
            assert_eq!(e.samples.dim(), (8, 231));
            assert_eq!(e.onset_index, 26);
        }
        let first = &epochs[0];
        assert_eq!(first.samples[[0, 0]], 230.0);
        assert_eq!(first.samples[[0, 230]], 460.0);
        assert_eq!(first.samples[[0, 26]], 256.0);
        for e in &epochs {
            let start = onset_sample(e.onset_ms, 256.0) as usize - 26;
            assert_eq!(e.samples, rec.data().slice(s![.., start..start + 231]));
        }
    }

    #[test]
    fn out_of_bounds_names_the_event() {
        let rec = ramp_recording(2, 2 * 256);
        let w = EpochWindow::standard(256.0);
        match segment_epochs(&rec, &[500.0, 50.0], w) {
            Err(Error::Boundary { event, .. }) => assert_eq!(event, 1),
            other => panic!("expected boundary error, got {other:?}"),
        }
        assert!(segment_epochs(&rec, &[1500.0], w).is_err());
    }

    #[test]
    fn baseline() {
        let constant = Epoch {
            samples: Array2::from_elem((2, 231), 5.0),
            onset_index: 26,
            onset_ms: 0.0,
            event_index: 0,
        };
        assert!(constant.baseline_corrected().samples.iter().all(|&x| x == 0.0));

        let step = Epoch {
            samples: Array2::from_shape_fn((2, 231), |(_, i)| if i >= 26 { 3.5 } else { 0.0 }),
            ..constant.clone()
        };
        assert_eq!(step.baseline_corrected(), step);

        let noisy = Epoch {
            samples: Array2::from_shape_fn((3, 231), |(c, i)| ((c * 7 + i * 13) % 17) as f64),
            ..constant.clone()
        };
        let shifted = Epoch {
            samples: &noisy.samples + 3.0,
            ..noisy.clone()
        };
        let a = noisy.baseline_corrected();
        let b = shifted.baseline_corrected();
        for (x, y) in a.samples.iter().zip(b.samples.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        for row in a.samples.rows() {
            let m: f64 = row.iter().take(26).sum::<f64>() / 26.0;
            assert!(m.abs() < 1e-12);
        }
        let twice = a.baseline_corrected();
        for (x, y) in a.samples.iter().zip(twice.samples.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn epoch_sets_keep_labels() {
        let rec = ramp_recording(2, 10 * 256);
        let set = EpochSet::segment(
            &rec,
            &[1000.0, 2000.0, 3000.0],
            &[false, true, false],
            EpochWindow::standard(256.0),
        )
        .unwrap();
        assert_eq!(set.targets().len(), 1);
        assert_eq!(set.targets()[0].onset_ms, 2000.0);
        assert_eq!(set.non_targets().len(), 2);
        let based = set.baseline_corrected();
        assert_eq!(based.is_target, set.is_target);
        assert!(EpochSet::segment(&rec, &[1000.0], &[], EpochWindow::standard(256.0)).is_err());
    }
}
