//! Condition averages, P300 window scoring and target/non-target separability.

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::epoch::{Epoch, EpochWindow};
use crate::error::{Error, Result};
use crate::stats::{self, RankTestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Target,
    NonTarget,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Target => "target",
            Condition::NonTarget => "non_target",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErpAverage {
    pub mean: Array2<f64>,
    pub n_epochs: usize,
    pub condition: Condition,
    pub window: EpochWindow,
    pub sample_rate_hz: f64,
}

impl ErpAverage {
    pub fn time_ms(&self, i: usize) -> f64 {
        self.window.time_ms(i, self.sample_rate_hz)
    }

    pub fn times_ms(&self) -> Vec<f64> {
        (0..self.mean.ncols()).map(|i| self.time_ms(i)).collect()
    }
}

/// Pointwise mean of same-shaped epochs.
pub fn grand_average<'a, I>(epochs: I, condition: Condition, sample_rate_hz: f64) -> Result<ErpAverage>
where
    I: IntoIterator<Item = &'a Epoch>,
{
    let mut iter = epochs.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::arg("grand average needs at least one epoch"))?;
    let mut sum = first.samples.clone();
    let mut n = 1usize;
    for e in iter {
        if e.samples.dim() != sum.dim() || e.onset_index != first.onset_index {
            return Err(Error::arg(format!(
                "epoch {} has shape {:?} but the first has {:?}",
                e.event_index,
                e.samples.dim(),
                sum.dim()
            )));
        }
        sum += &e.samples;
        n += 1;
    }
    sum /= n as f64;
    Ok(ErpAverage {
        window: EpochWindow {
            pre_samples: first.onset_index,
            post_samples: sum.ncols() - first.onset_index,
        },
        mean: sum,
        n_epochs: n,
        condition,
        sample_rate_hz,
    })
}

/// Post-stimulus interval in milliseconds, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWindow {
    pub start_ms: f64,
    pub end_ms: f64,
}

impl Default for ScoreWindow {
    fn default() -> Self {
        Self {
            start_ms: 250.0,
            end_ms: 500.0,
        }
    }
}

impl ScoreWindow {
    /// Sample range `[lo, hi)` of the window inside an epoch.
    pub fn sample_range(&self, window: EpochWindow, sample_rate_hz: f64) -> Result<(usize, usize)> {
        let last_ms = window.time_ms(window.len().saturating_sub(1), sample_rate_hz);
        if !(self.start_ms >= 0.0 && self.start_ms <= self.end_ms && self.end_ms <= last_ms) {
            return Err(Error::arg(format!(
                "score window [{}, {}] ms must lie within [0, {last_ms}] ms",
                self.start_ms, self.end_ms
            )));
        }
        let to_index = |ms: f64| window.pre_samples as f64 + ms * sample_rate_hz / 1000.0;
        let lo = (to_index(self.start_ms) - 1e-9).ceil() as usize;
        let hi = (to_index(self.end_ms) + 1e-9).floor() as usize + 1;
        if lo >= hi {
            return Err(Error::arg("score window contains no samples"));
        }
        Ok((lo, hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P300Score {
    pub window: ScoreWindow,
    pub per_channel_mean_uv: Vec<f64>,
    /// Latency of the largest sample in the window; earliest on ties.
    pub peak_latency_ms: Vec<f64>,
}

pub fn p300_score(erp: &ErpAverage, window: ScoreWindow) -> Result<P300Score> {
    let (lo, hi) = window.sample_range(erp.window, erp.sample_rate_hz)?;
    let seg = erp.mean.slice(s![.., lo..hi]);
    let per_channel_mean_uv = seg.mean_axis(Axis(1)).expect("non-empty window").to_vec();
    let peak_latency_ms = seg
        .rows()
        .into_iter()
        .map(|row| {
            let (best, _) = row.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
            );
            erp.time_ms(lo + best)
        })
        .collect();
    Ok(P300Score {
        window,
        per_channel_mean_uv,
        peak_latency_ms,
    })
}

/// Which channels feed the per-epoch feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "index")]
pub enum ChannelSelection {
    #[default]
    Average,
    Channel(usize),
}

/// Mean amplitude inside the score window for one epoch.
pub fn window_feature(
    epoch: &Epoch,
    window: ScoreWindow,
    sample_rate_hz: f64,
    channels: ChannelSelection,
) -> Result<f64> {
    let ew = EpochWindow {
        pre_samples: epoch.onset_index,
        post_samples: epoch.samples.ncols() - epoch.onset_index,
    };
    let (lo, hi) = window.sample_range(ew, sample_rate_hz)?;
    let seg = epoch.samples.slice(s![.., lo..hi]);
    match channels {
        ChannelSelection::Average => Ok(seg.mean().expect("non-empty window")),
        ChannelSelection::Channel(c) => {
            if c >= seg.nrows() {
                return Err(Error::arg(format!("channel {c} out of range")));
            }
            Ok(seg.row(c).mean().expect("non-empty window"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separability {
    pub auc: f64,
    pub rank_test: RankTestResult,
    pub window: ScoreWindow,
    pub channels: ChannelSelection,
    pub target_features: Vec<f64>,
    pub non_target_features: Vec<f64>,
}

/// AUC and rank-sum test of target against non-target window means.
pub fn separability(
    targets: &[&Epoch],
    non_targets: &[&Epoch],
    window: ScoreWindow,
    sample_rate_hz: f64,
    channels: ChannelSelection,
) -> Result<Separability> {
    if targets.len() < 2 || non_targets.len() < 2 {
        return Err(Error::arg(format!(
            "separability needs at least 2 epochs per condition, got {} and {}",
            targets.len(),
            non_targets.len()
        )));
    }
    let features = |set: &[&Epoch]| -> Result<Vec<f64>> {
        set.iter()
            .map(|e| window_feature(e, window, sample_rate_hz, channels))
            .collect()
    };
    let target_features = features(targets)?;
    let non_target_features = features(non_targets)?;
    Ok(Separability {
        auc: stats::auc(&target_features, &non_target_features)?,
        rank_test: stats::wilcoxon_rank_sum(&target_features, &non_target_features)?,
        window,
        channels,
        target_features,
        non_target_features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const FS: f64 = 256.0;

    fn epoch_from(mut f: impl FnMut(usize, usize) -> f64) -> Epoch {
        Epoch {
            samples: Array2::from_shape_fn((2, 231), |(c, i)| f(c, i)),
            onset_index: 26,
            onset_ms: 0.0,
            event_index: 0,
        }
    }

    fn bump(i: usize, center_ms: f64, amp: f64) -> f64 {
        let t = (i as f64 - 26.0) * 1000.0 / FS;
        amp * (-(t - center_ms).powi(2) / (2.0 * 50.0f64.powi(2))).exp()
    }

    #[test]
    fn averages() {
        let e = epoch_from(|c, i| (c * 3 + i) as f64);
        let single = grand_average([&e], Condition::Target, FS).unwrap();
        assert_eq!(single.mean, e.samples);
        assert_eq!(single.n_epochs, 1);
        assert_eq!(single.window, EpochWindow::standard(FS));

        let neg = Epoch {
            samples: -&e.samples,
            ..e.clone()
        };
        let zero = grand_average([&e, &neg], Condition::Target, FS).unwrap();
        assert!(zero.mean.iter().all(|&v| v == 0.0));

        let short = Epoch {
            samples: Array2::zeros((2, 100)),
            ..e.clone()
        };
        assert!(grand_average([&e, &short], Condition::Target, FS).is_err());
        assert!(grand_average(std::iter::empty::<&Epoch>(), Condition::Target, FS).is_err());
    }

    #[test]
    fn average_recovers_bump_within_sem() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 10.0).unwrap();
        let peak = 26 + (0.3 * FS).round() as usize;
        let epochs: Vec<Epoch> = (0..100)
            .map(|_| epoch_from(|_, i| bump(i, 300.0, 5.0) + noise.sample(&mut rng)))
            .collect();
        let erp = grand_average(&epochs, Condition::Target, FS).unwrap();
        let sem = 10.0 / 10.0;
        let expected = bump(peak, 300.0, 5.0);
        for c in 0..2 {
            assert!((erp.mean[[c, peak]] - expected).abs() < 3.0 * sem);
        }
    }

    #[test]
    fn averaging_is_order_free_and_linear() {
        let a = epoch_from(|c, i| ((c + 1) * i % 7) as f64);
        let b = epoch_from(|c, i| ((c + 2) * i % 5) as f64 - 2.0);
        let ab = grand_average([&a, &b], Condition::NonTarget, FS).unwrap();
        let ba = grand_average([&b, &a], Condition::NonTarget, FS).unwrap();
        assert_eq!(ab.mean, ba.mean);
        let a3 = Epoch {
            samples: &a.samples * 3.0,
            ..a.clone()
        };
        let b3 = Epoch {
            samples: &b.samples * 3.0,
            ..b.clone()
        };
        let scaled = grand_average([&a3, &b3], Condition::NonTarget, FS).unwrap();
        for (x, y) in scaled.mean.iter().zip(ab.mean.iter()) {
            assert_abs_diff_eq!(*x, 3.0 * y, epsilon = 1e-12);
        }
    }

    #[test]
    fn p300_scores() {
        let flat = grand_average([&epoch_from(|_, _| 0.0)], Condition::Target, FS).unwrap();
        let s = p300_score(&flat, ScoreWindow::default()).unwrap();
        assert_eq!(s.per_channel_mean_uv, vec![0.0, 0.0]);
        let first = flat.time_ms(ScoreWindow::default().sample_range(flat.window, FS).unwrap().0);
        assert!(first >= 250.0 && first - 250.0 < 1000.0 / FS);
        assert_eq!(s.peak_latency_ms, vec![first, first]);

        let pos = grand_average([&epoch_from(|_, i| bump(i, 300.0, 5.0))], Condition::Target, FS).unwrap();
        let sp = p300_score(&pos, ScoreWindow::default()).unwrap();
        for &lat in &sp.peak_latency_ms {
            assert!((lat - 300.0).abs() <= 1000.0 / FS);
        }
        let neg = grand_average([&epoch_from(|_, i| -bump(i, 300.0, 5.0))], Condition::Target, FS).unwrap();
        let sn = p300_score(&neg, ScoreWindow::default()).unwrap();
        assert!(sp.per_channel_mean_uv[0] > 0.0);
        assert_abs_diff_eq!(sn.per_channel_mean_uv[0], -sp.per_channel_mean_uv[0], epsilon = 1e-12);

        let bad = ScoreWindow {
            start_ms: 600.0,
            end_ms: 900.0,
        };
        assert!(p300_score(&pos, bad).is_err());
        let pre = ScoreWindow {
            start_ms: -50.0,
            end_ms: 100.0,
        };
        assert!(p300_score(&pos, pre).is_err());
    }

    #[test]
    fn window_mean_ignores_signal_outside_window() {
        let base = epoch_from(|c, i| bump(i, 320.0, 4.0 + c as f64));
        let (lo, hi) = ScoreWindow::default()
            .sample_range(EpochWindow::standard(FS), FS)
            .unwrap();
        let disturbed = epoch_from(|c, i| {
            let extra = if i < lo || i >= hi {
                50.0 * ((i * 7) as f64).sin()
            } else {
                0.0
            };
            bump(i, 320.0, 4.0 + c as f64) + extra
        });
        let a = p300_score(
            &grand_average([&base], Condition::Target, FS).unwrap(),
            ScoreWindow::default(),
        )
        .unwrap();
        let b = p300_score(
            &grand_average([&disturbed], Condition::Target, FS).unwrap(),
            ScoreWindow::default(),
        )
        .unwrap();
        assert_eq!(a.per_channel_mean_uv, b.per_channel_mean_uv);
    }

    #[test]
    fn separability_extremes() {
        let make = |level: f64| epoch_from(move |_, _| level);
        let t: Vec<Epoch> = [4.0, 5.0, 6.0].iter().map(|&v| make(v)).collect();
        let n: Vec<Epoch> = [1.0, 2.0, 3.0].iter().map(|&v| make(v)).collect();
        let tr: Vec<&Epoch> = t.iter().collect();
        let nr: Vec<&Epoch> = n.iter().collect();
        let sep = separability(&tr, &nr, ScoreWindow::default(), FS, ChannelSelection::Average).unwrap();
        assert_eq!(sep.auc, 1.0);
        assert_eq!(sep.rank_test.statistic, 15.0);
        assert_abs_diff_eq!(sep.rank_test.p_value, 0.1, epsilon = 1e-15);

        let same = separability(&tr, &tr, ScoreWindow::default(), FS, ChannelSelection::Channel(1)).unwrap();
        assert_eq!(same.auc, 0.5);
        assert!(separability(&tr[..1], &nr, ScoreWindow::default(), FS, ChannelSelection::Average).is_err());
        assert!(separability(&tr, &nr, ScoreWindow::default(), FS, ChannelSelection::Channel(5)).is_err());
    }
}
