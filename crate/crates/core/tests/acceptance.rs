//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always reach the
//! terminal. Criteria listed in `KNOWN_FAILING` are reported as FAIL but do
//! not fail the run; if one of them starts passing the run fails instead, so
//! the list cannot go stale.

use std::f64::consts::PI;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sabci::epoch::{Epoch, EpochSet, EpochWindow};
use sabci::erp::{grand_average, separability, ChannelSelection, Condition, ScoreWindow};
use sabci::filter::{bandlimit, design_butterworth, FilterKind, FilterSpec};
use sabci::memd::{memd_decompose, SiftConfig};
use sabci::pipeline::{
    clean_epoch_set, event_labels, run_pipeline, worst_channel_correlation, InputConfig, PipelineConfig,
};
use sabci::protocol::{build_session, SessionConfig, StimulusKey, TargetSchedule, STIMULI_PER_TRIAL};
use sabci::stats::{midranks, wilcoxon_rank_sum, PMethod};
use sabci::synth::{synth_session, SynthSpec};
use sabci::vbap::{direction_vector, ring_gain_vector, LoudspeakerRing, PanningMode, VirtualSource};
use sabci::Execution;

type Criterion = (u32, &'static str, fn() -> Outcome);

const KNOWN_FAILING: &[u32] = &[6, 7];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn vbap_correctness() -> Outcome {
    let start = Instant::now();
    let ring = LoudspeakerRing::regular(8, 1.5).unwrap();
    let (mut dir_err, mut pow_err) = (0.0f64, 0.0f64);
    for k in 0..720 {
        let az = -180.0 + 0.5 * k as f64;
        let p = direction_vector(az).unwrap();
        for c in [0.2, 1.0] {
            let g = ring_gain_vector(&ring, &VirtualSource::new(az, c).unwrap(), PanningMode::Virtual).unwrap();
            let r = g.rendered_direction(&ring);
            let norm = r[0].hypot(r[1]);
            dir_err = dir_err.max((r[0] / norm - p[0]).hypot(r[1] / norm - p[1]));
            pow_err = pow_err.max((g.power() - c).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        dir_err < 1e-9 && pow_err < 1e-9 && secs < 1.0,
        format!("max direction error {dir_err:.2e}, max |sum g^2 - c| {pow_err:.2e}, {secs:.3} s"),
    )
}

fn depth_ratio() -> Outcome {
    let ring = LoudspeakerRing::regular(8, 1.5).unwrap();
    let mut worst = 0.0f64;
    let mut last = 0.0;
    for k in 0..72 {
        let az = -180.0 + 5.0 * k as f64;
        let power = |c| {
            ring_gain_vector(&ring, &VirtualSource::new(az, c).unwrap(), PanningMode::Virtual)
                .unwrap()
                .power()
        };
        let db = 10.0 * (power(0.2) / power(1.0)).log10();
        worst = worst.max((db + 6.99).abs());
        last = db;
    }
    outcome(
        worst <= 0.01,
        format!("ratio {last:.4} dB, max deviation from -6.99 dB {worst:.4}"),
    )
}

fn butterworth() -> Outcome {
    let fs = 256.0;
    let design = |cutoff_hz, kind| {
        design_butterworth(
            FilterSpec {
                order: 5,
                cutoff_hz,
                kind,
            },
            fs,
        )
        .unwrap()
    };
    let hp = design(0.5, FilterKind::Highpass);
    let lp = design(20.0, FilterKind::Lowpass);
    let hp_dc = hp.response(0.0).norm();
    let lp_dc = lp.response(0.0).norm();
    let hp_cut = hp.magnitude_db(0.5);
    let lp_cut = lp.magnitude_db(20.0);
    let pass =
        hp_dc < 1e-12 && (lp_dc - 1.0).abs() < 1e-12 && (hp_cut + 3.01).abs() <= 0.1 && (lp_cut + 3.01).abs() <= 0.1;
    outcome(
        pass,
        format!("DC gains hp {hp_dc:.1e} lp {lp_dc:.12}; cutoff hp {hp_cut:.4} dB lp {lp_cut:.4} dB"),
    )
}

fn memd_completeness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let x = Array2::from_shape_fn((8, 512), |_| rng.random_range(-1.0..1.0));
    let start = Instant::now();
    let stack = memd_decompose(x.view(), &SiftConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let err = (&stack.reconstruct() - &x).mapv(|v| v * v).sum().sqrt() / x.mapv(|v| v * v).sum().sqrt();
    let aligned = stack.components().all(|c| c.dim() == (8, 512));
    outcome(
        err < 1e-8 && aligned && secs < 60.0,
        format!(
            "{} IMFs on all 8 channels, relative error {err:.2e}, {secs:.2} s",
            stack.n_imfs()
        ),
    )
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    sabci::stats::pearson(a, b).unwrap_or(0.0)
}

fn memd_separation() -> Outcome {
    let (fs, t) = (256.0, 1024);
    let tone = |f: f64, ch: usize, i: usize| (2.0 * PI * f * i as f64 / fs + 0.3 * ch as f64).sin();
    let slow = Array2::from_shape_fn((8, t), |(c, i)| (1.0 + 0.1 * c as f64) * tone(2.0, c, i));
    let fast = Array2::from_shape_fn((8, t), |(c, i)| (0.5 + 0.05 * c as f64) * tone(10.0, c, i));
    let x = &slow + &fast;
    let stack = memd_decompose(x.view(), &SiftConfig::default()).unwrap();
    let mut worst = f64::INFINITY;
    for c in 0..8 {
        for truth in [&slow, &fast] {
            let best = stack
                .imfs
                .iter()
                .map(|imf| correlation(&imf.row(c).to_vec(), &truth.row(c).to_vec()))
                .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.min(best);
        }
    }
    outcome(
        worst > 0.95,
        format!("worst best-matching IMF correlation {worst:.4} over 8 channels x 2 tones"),
    )
}

fn truth_epochs(rec: &sabci::MultichannelRecording, onsets: &[f64]) -> Vec<Epoch> {
    EpochSet::segment(
        rec,
        onsets,
        &vec![true; onsets.len()],
        EpochWindow::standard(rec.sample_rate_hz()),
    )
    .unwrap()
    .baseline_corrected()
    .epochs
}

/// Energy of (epoch − truth) summed over epochs, optionally after removing
/// each channel's epoch mean.
fn residual_energy(epochs: &[Epoch], truth: &[Epoch], demean: bool) -> f64 {
    epochs
        .iter()
        .zip(truth)
        .map(|(e, t)| {
            let mut r = &e.samples - &t.samples;
            if demean {
                for mut row in r.rows_mut() {
                    let m = row.mean().unwrap();
                    row -= m;
                }
            }
            r.mapv(|v| v * v).sum()
        })
        .sum()
}

fn artifact_cleaning() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in 0..3u64 {
        let session = SessionConfig {
            repetitions: 6,
            ..SessionConfig::minimal(seed)
        };
        let plan = build_session(&session).unwrap();
        let spec = SynthSpec {
            seed: 100 + seed,
            ..SynthSpec::default()
        };
        assert_eq!((spec.blink_amplitude_uv, spec.p300_amplitude_uv), (100.0, 5.0));
        let (rec, truth) = synth_session(&plan, &spec).unwrap();
        let filtered = bandlimit(&rec, Execution::Parallel).unwrap();
        let clean_filtered = bandlimit(&truth.clean, Execution::Parallel).unwrap();
        let onsets = truth.target_onsets_ms();
        let contaminated = EpochSet::segment(
            &filtered,
            &onsets,
            &vec![true; onsets.len()],
            EpochWindow::standard(256.0),
        )
        .unwrap()
        .baseline_corrected();
        let (cleaned, _) = clean_epoch_set(&contaminated, &SiftConfig::default(), 20.0, Execution::Parallel).unwrap();
        let reference = truth_epochs(&clean_filtered, &onsets);

        let erp_clean = grand_average(cleaned.epochs.iter(), Condition::Target, 256.0).unwrap();
        let erp_truth = grand_average(reference.iter(), Condition::Target, 256.0).unwrap();
        let r = worst_channel_correlation(&erp_clean, &erp_truth, 26).unwrap();

        let before = residual_energy(&contaminated.epochs, &reference, true);
        let after = residual_energy(&cleaned.epochs, &reference, true);
        let reduction = 1.0 - after / before;
        let strict = 1.0
            - residual_energy(&cleaned.epochs, &reference, false)
                / residual_energy(&contaminated.epochs, &reference, false);
        pass &= r >= 0.9 && reduction >= 0.9;
        lines.push(format!(
            "seed {seed}: {} targets, ERP corr {r:.3}, blink energy reduction {:.1}% (without demeaning {:.1}%)",
            onsets.len(),
            100.0 * reduction,
            100.0 * strict
        ));
    }
    outcome(pass, lines.join("; "))
}

fn p300_pipeline() -> Outcome {
    let session = SessionConfig {
        repetitions: 5,
        ..SessionConfig::minimal(7)
    };
    let plan = build_session(&session).unwrap();
    let spec = SynthSpec {
        seed: 107,
        noise_sigma_uv: 10.0,
        blink_amplitude_uv: 0.0,
        ..SynthSpec::default()
    };
    let (rec, _) = synth_session(&plan, &spec).unwrap();
    let (onsets, labels) = event_labels(&plan);
    let run = |rec: &sabci::MultichannelRecording| {
        let set = EpochSet::segment(rec, &onsets, &labels, EpochWindow::standard(256.0))
            .unwrap()
            .baseline_corrected();
        let s = separability(
            &set.targets(),
            &set.non_targets(),
            ScoreWindow::default(),
            256.0,
            ChannelSelection::Average,
        )
        .unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (t, n) = (mean(&s.target_features), mean(&s.non_target_features));
        (
            t,
            n,
            s.rank_test.p_value,
            s.auc,
            s.target_features.len(),
            s.non_target_features.len(),
        )
    };
    let (t, n, p, auc, nt, nn) = run(&bandlimit(&rec, Execution::Parallel).unwrap());
    let (rt, rn, rp, rauc, _, _) = run(&rec);
    outcome(
        nt >= 80 && nn >= 240 && t > n && p < 0.01 && auc > 0.8,
        format!(
            "{nt} targets / {nn} non-targets, band-limited: window mean {t:.2} vs {n:.2} uV, p {p:.2e}, AUC {auc:.3}; \
             unfiltered (diagnostic): {rt:.2} vs {rn:.2} uV, p {rp:.2e}, AUC {rauc:.3}"
        ),
    )
}

/// Two-sided exact p by listing every labelling of the pooled sample.
fn enumerated_p(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let (n, n1) = (pooled.len(), a.len());
    let centre = n1 as f64 * (n + 1) as f64 / 2.0;
    let w_obs: f64 = ranks[..n1].iter().sum();
    let (mut total, mut extreme) = (0u32, 0u32);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        if (w - centre).abs() >= (w_obs - centre).abs() - 1e-9 {
            extreme += 1;
        }
    }
    (w_obs, extreme as f64 / total as f64)
}

fn wilcoxon_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut cases, mut worst_p, mut worst_w) = (0, 0.0f64, 0.0f64);
    let mut all_exact = true;
    for n1 in 1..10usize {
        for n2 in 1..=(10 - n1) {
            for trial in 0..20 {
                // half the draws are continuous, half from a 4-letter alphabet to force ties
                let mut draw = || {
                    if trial % 2 == 0 {
                        rng.random::<f64>()
                    } else {
                        rng.random_range(0..4) as f64
                    }
                };
                let a: Vec<f64> = (0..n1).map(|_| draw()).collect();
                let b: Vec<f64> = (0..n2).map(|_| draw()).collect();
                let got = wilcoxon_rank_sum(&a, &b).unwrap();
                let (w, p) = enumerated_p(&a, &b);
                all_exact &= got.method == PMethod::Exact;
                worst_w = worst_w.max((got.statistic - w).abs());
                worst_p = worst_p.max((got.p_value - p).abs());
                cases += 1;
            }
        }
    }
    outcome(
        all_exact && worst_w == 0.0 && worst_p < 1e-12,
        format!("{cases} samples over all n1+n2 <= 10: max |dW| {worst_w}, max |dp| {worst_p:.1e}"),
    )
}

fn protocol() -> Outcome {
    let plan = build_session(&SessionConfig::default()).unwrap();
    let mut ok = true;
    for t in &plan.trials {
        let onsets: Vec<u64> = t.events.iter().map(|e| e.onset_ms).collect();
        ok &= onsets.windows(2).all(|w| w[1] - w[0] == 1000);
        ok &= t.events.iter().all(|e| e.duration_ms == 500);
        let mut keys: Vec<usize> = t.events.iter().map(|e| e.key().index().unwrap()).collect();
        keys.sort_unstable();
        keys.dedup();
        ok &= keys.len() == 16 && t.events.len() == STIMULI_PER_TRIAL;
        ok &= t.events.iter().filter(|e| e.is_target).count() == 1;
    }
    let chance = 100.0 / STIMULI_PER_TRIAL as f64;
    outcome(
        ok && chance == 6.25,
        format!(
            "{} trials: 1000 ms spacing, 500 ms stimuli, 16 unique keys, one target, chance {chance}%",
            plan.trials.len()
        ),
    )
}

fn determinism() -> Outcome {
    let mut cfg = PipelineConfig::default();
    if let InputConfig::Synthetic { session, .. } = &mut cfg.input {
        session.targets = TargetSchedule::Keys(StimulusKey::all().into_iter().step_by(4).collect());
    }
    cfg.sift.directions = 16;
    cfg.apply_seed(31);
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let mut seq = cfg.clone();
    seq.execution = Execution::Sequential;
    let runs = [
        run_pipeline(&cfg, dirs[0].path()).unwrap(),
        run_pipeline(&cfg, dirs[1].path()).unwrap(),
        run_pipeline(&seq, dirs[2].path()).unwrap(),
    ];
    let mut csvs = 0;
    let mut identical = true;
    for o in runs[0].outputs.iter().filter(|o| o.path.ends_with(".csv")) {
        let bytes = std::fs::read(dirs[0].path().join(&o.path)).unwrap();
        for d in &dirs[1..] {
            identical &= std::fs::read(d.path().join(&o.path)).unwrap() == bytes;
        }
        csvs += 1;
    }
    identical &= runs[0].outputs == runs[1].outputs && runs[0].outputs == runs[2].outputs;
    outcome(
        identical && csvs > 0,
        format!("{csvs} CSV outputs byte-identical across two parallel reruns and one sequential run"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "VBAP correctness", vbap_correctness),
        (2, "depth ratio", depth_ratio),
        (3, "Butterworth response", butterworth),
        (4, "MEMD completeness", memd_completeness),
        (5, "MEMD separation", memd_separation),
        (6, "artifact cleaning", artifact_cleaning),
        (7, "P300 separability", p300_pipeline),
        (8, "Wilcoxon exactness", wilcoxon_exactness),
        (9, "protocol", protocol),
        (10, "determinism", determinism),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let o = run();
        let known = KNOWN_FAILING.contains(&id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("[{tag}] criterion {id} {name}: {}", o.detail);
        if o.pass == known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
