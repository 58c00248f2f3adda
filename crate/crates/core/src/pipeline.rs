//! End-to-end batch run.
//!
//! Five stages: acquire (synthesize or load), bandlimit, epoch, clean,
//! analyze. Each stage's files are hashed into a JSON manifest as soon as the
//! stage finishes, so a failed run still documents what it produced. The
//! manifest embeds the full configuration; feeding it back in as the config
//! reproduces every output byte for byte.

use std::path::{Path, PathBuf};

use ndarray::s;
use serde::{Deserialize, Serialize};

use crate::epoch::{Epoch, EpochSet, EpochWindow};
use crate::erp::{
    grand_average, p300_score, separability, ChannelSelection, Condition, ErpAverage, P300Score, ScoreWindow,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::filter::{bandlimit_with, BandConfig};
use crate::io::{self, Format};
use crate::memd::{clean_stack, memd_decompose, RejectionMask, SiftConfig, DEFAULT_THRESHOLD_UV};
use crate::protocol::{build_session, score_session, ResponseLog, ResponseWindow, SessionConfig, SessionPlan};
use crate::recording::MultichannelRecording;
use crate::stats::{pairwise_latency_tests, pearson, psychophysics_table, GroupBy, PMethod};
use crate::synth::{synth_response_log, synth_session, GroundTruth, SynthSpec};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Simulated button presses for a synthetic session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponseSpec {
    pub latency_ms: f64,
    pub hit_prob: f64,
    pub seed: u64,
}

impl Default for ResponseSpec {
    fn default() -> Self {
        Self {
            latency_ms: 450.0,
            hit_prob: 0.9,
            seed: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputConfig {
    Synthetic {
        #[serde(default = "default_session")]
        session: SessionConfig,
        #[serde(default = "default_synth")]
        synth: SynthSpec,
        #[serde(default)]
        responses: ResponseSpec,
    },
    Files {
        recording: PathBuf,
        plan: PathBuf,
        #[serde(default)]
        responses: Option<PathBuf>,
    },
}

fn default_session() -> SessionConfig {
    SessionConfig::minimal(0)
}

fn default_synth() -> SynthSpec {
    SynthSpec {
        seed: 1,
        ..SynthSpec::default()
    }
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig::Synthetic {
            session: default_session(),
            synth: default_synth(),
            responses: ResponseSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input: InputConfig,
    pub band: BandConfig,
    pub epoch_pre_ms: f64,
    pub epoch_post_ms: f64,
    pub sift: SiftConfig,
    /// Skip MEMD entirely when false; epochs pass through unchanged.
    pub clean: bool,
    pub threshold_uv: f64,
    pub score_window: ScoreWindow,
    pub channels: ChannelSelection,
    pub response_window: ResponseWindow,
    pub group_by: Vec<GroupBy>,
    pub format: Format,
    pub execution: Execution,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: InputConfig::default(),
            band: BandConfig::default(),
            epoch_pre_ms: 100.0,
            epoch_post_ms: 800.0,
            sift: SiftConfig::default(),
            clean: true,
            threshold_uv: DEFAULT_THRESHOLD_UV,
            score_window: ScoreWindow::default(),
            channels: ChannelSelection::Average,
            response_window: ResponseWindow::default(),
            group_by: vec![GroupBy::Stimulus, GroupBy::System],
            format: Format::Csv,
            execution: Execution::default(),
        }
    }
}

impl PipelineConfig {
    /// Reads a config, or the `config` member of a run manifest.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let value = match value.get("config") {
            Some(inner) if value.get("stages").is_some() => inner.clone(),
            _ => value,
        };
        Ok(serde_json::from_value(value)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Derives the session, synth and response seeds from one value.
    pub fn apply_seed(&mut self, seed: u64) {
        if let InputConfig::Synthetic {
            session,
            synth,
            responses,
        } = &mut self.input
        {
            session.master_seed = seed;
            synth.seed = seed.wrapping_add(1);
            responses.seed = seed.wrapping_add(2);
        }
    }

    pub fn seeds(&self) -> Option<Seeds> {
        match &self.input {
            InputConfig::Synthetic {
                session,
                synth,
                responses,
            } => Some(Seeds {
                session: session.master_seed,
                synth: synth.seed,
                responses: responses.seed,
            }),
            InputConfig::Files { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.threshold_uv.is_finite() {
            return Err(Error::config("threshold must be finite"));
        }
        if !(self.epoch_pre_ms >= 0.0 && self.epoch_post_ms > 0.0) {
            return Err(Error::config("epoch window needs pre >= 0 and post > 0 ms"));
        }
        if self.score_window.start_ms.partial_cmp(&self.score_window.end_ms) != Some(std::cmp::Ordering::Less) {
            return Err(Error::config("score window must have start < end"));
        }
        if let InputConfig::Files {
            recording,
            plan,
            responses,
        } = &self.input
        {
            for p in [Some(recording), Some(plan), responses.as_ref()].into_iter().flatten() {
                if !p.is_file() {
                    return Err(Error::config(format!("input {} does not exist", p.display())));
                }
            }
        }
        if let InputConfig::Synthetic { synth, .. } = &self.input {
            synth.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub session: u64,
    pub synth: u64,
    pub responses: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Complete,
    Failed,
    NotRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub stage: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilitySummary {
    pub auc: f64,
    pub rank_sum: f64,
    pub p_value: f64,
    pub method: PMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_epochs: usize,
    pub n_targets: usize,
    pub n_non_targets: usize,
    /// (epoch, channel, component) contributions removed by cleaning.
    pub rejected_contributions: usize,
    pub epochs_with_rejections: usize,
    pub target: Option<P300Score>,
    pub non_target: Option<P300Score>,
    pub separability: Option<SeparabilitySummary>,
    /// Worst per-channel correlation between the cleaned target ERP and the
    /// artifact-free target ERP from 0 ms to the epoch end.
    pub truth_correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
    pub seeds: Option<Seeds>,
    pub stages: Vec<StageRecord>,
    pub outputs: Vec<OutputRecord>,
    /// False when any stage failed; the listed outputs are then partial.
    pub complete: bool,
    pub summary: Option<Summary>,
}

/// Decomposes every epoch, drops contributions over `threshold_uv`, and
/// re-applies the baseline (removing a blink from the pre-window shifts it).
pub fn clean_epoch_set(
    set: &EpochSet,
    sift: &SiftConfig,
    threshold_uv: f64,
    exec: Execution,
) -> Result<(EpochSet, Vec<RejectionMask>)> {
    let mut inner = *sift;
    if exec.is_parallel() {
        inner.execution = Execution::Sequential;
    }
    let cleaned: Vec<Result<(Epoch, RejectionMask)>> = exec.map_slice(&set.epochs, |e| {
        let stack = memd_decompose(e.samples.view(), &inner)?;
        let (kept, mask) = clean_stack(&stack, threshold_uv);
        let epoch = Epoch {
            samples: kept.reconstruct(),
            ..e.clone()
        };
        Ok((epoch.baseline_corrected(), mask))
    });
    let mut epochs = Vec::with_capacity(set.len());
    let mut masks = Vec::with_capacity(set.len());
    for r in cleaned {
        let (e, m) = r?;
        epochs.push(e);
        masks.push(m);
    }
    Ok((EpochSet { epochs, ..set.clone() }, masks))
}

/// Smallest per-channel Pearson correlation over samples `from..`.
pub fn worst_channel_correlation(a: &ErpAverage, b: &ErpAverage, from: usize) -> Result<f64> {
    if a.mean.dim() != b.mean.dim() || from >= a.mean.ncols() {
        return Err(Error::arg("ERPs differ in shape or the range is empty"));
    }
    let mut worst = f64::INFINITY;
    for c in 0..a.mean.nrows() {
        let x = a.mean.slice(s![c, from..]).to_vec();
        let y = b.mean.slice(s![c, from..]).to_vec();
        worst = worst.min(pearson(&x, &y)?);
    }
    Ok(worst)
}

struct Run<'a> {
    out: &'a Path,
    manifest: Manifest,
}

impl Run<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn record(&mut self, stage: &str, files: &[PathBuf]) -> Result<()> {
        for f in files {
            let rel = f
                .strip_prefix(self.out)
                .unwrap_or(f)
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            self.manifest.outputs.push(OutputRecord {
                path: rel,
                stage: stage.to_string(),
                sha256: io::sha256_file(f)?,
            });
        }
        Ok(())
    }

    fn stage<T>(&mut self, index: usize, f: impl FnOnce(&mut Self) -> Result<(T, Vec<PathBuf>)>) -> Result<T> {
        let name = self.manifest.stages[index].name.clone();
        let result = f(self).and_then(|(v, files)| {
            self.record(&name, &files)?;
            Ok(v)
        });
        match result {
            Ok(v) => {
                self.manifest.stages[index].status = StageStatus::Complete;
                Ok(v)
            }
            Err(e) => {
                self.manifest.stages[index].status = StageStatus::Failed;
                self.manifest.stages[index].error = Some(e.to_string());
                self.manifest.complete = false;
                // Best effort: the stage error is what the caller needs.
                let _ = io::write_json(&self.path(MANIFEST_FILE), &self.manifest);
                Err(e.in_stage(&name))
            }
        }
    }
}

struct Acquired {
    recording: MultichannelRecording,
    plan: SessionPlan,
    log: Option<ResponseLog>,
    truth: Option<GroundTruth>,
}

/// Session-clock onsets and target labels of every event.
pub fn event_labels(plan: &SessionPlan) -> (Vec<f64>, Vec<bool>) {
    plan.timeline().map(|(t, e)| (t as f64, e.is_target)).unzip()
}

/// Runs every stage into `out`, writing `manifest.json` last (or on failure).
pub fn run_pipeline(config: &PipelineConfig, out: &Path) -> Result<Manifest> {
    config.validate()?;
    std::fs::create_dir_all(out)?;
    let acquire = match config.input {
        InputConfig::Synthetic { .. } => "synth",
        InputConfig::Files { .. } => "load",
    };
    let stages = [acquire, "bandlimit", "epoch", "clean", "analyze"]
        .iter()
        .map(|n| StageRecord {
            name: n.to_string(),
            status: StageStatus::NotRun,
            error: None,
        })
        .collect();
    let mut run = Run {
        out,
        manifest: Manifest {
            tool: "sabci".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            seeds: config.seeds(),
            stages,
            outputs: Vec::new(),
            complete: true,
            summary: None,
        },
    };
    let fmt = config.format;
    let exec = config.execution;

    let acquired = run.stage(0, |run| acquire_input(config, run))?;

    let filtered = run.stage(1, |_| {
        Ok((bandlimit_with(&acquired.recording, config.band, exec)?, vec![]))
    })?;

    let (onsets, labels) = event_labels(&acquired.plan);
    let fs = filtered.sample_rate_hz();
    let window = EpochWindow::from_ms(config.epoch_pre_ms, config.epoch_post_ms, fs)?;
    let epochs = run.stage(2, |run| {
        let set = EpochSet::segment(&filtered, &onsets, &labels, window)?.baseline_corrected();
        let path = run.path(&format!("epochs.{}", fmt.extension()));
        io::write_epoch_set(&path, &set, fmt)?;
        let side = io::sidecar_path(&path);
        Ok((set, vec![path, side]))
    })?;

    let (cleaned, masks) = run.stage(3, |run| {
        if !config.clean {
            return Ok(((epochs.clone(), Vec::new()), vec![]));
        }
        let (set, masks) = clean_epoch_set(&epochs, &config.sift, config.threshold_uv, exec)?;
        let path = run.path(&format!("epochs_clean.{}", fmt.extension()));
        io::write_epoch_set(&path, &set, fmt)?;
        let side = io::sidecar_path(&path);
        let rej = run.path("rejections.csv");
        write_rejections_csv(&rej, &set, &masks)?;
        Ok(((set, masks), vec![path, side, rej]))
    })?;

    let summary = run.stage(4, |run| analyze(config, run, &acquired, &cleaned, &masks, window))?;
    run.manifest.summary = Some(summary);
    io::write_json(&run.path(MANIFEST_FILE), &run.manifest)?;
    Ok(run.manifest)
}

fn acquire_input(config: &PipelineConfig, run: &mut Run<'_>) -> Result<(Acquired, Vec<PathBuf>)> {
    let mut files = Vec::new();
    let acquired = match &config.input {
        InputConfig::Synthetic {
            session,
            synth,
            responses,
        } => {
            let plan = build_session(session)?;
            let (recording, truth) = synth_session(&plan, synth)?;
            let log = synth_response_log(&plan, responses.latency_ms, responses.hit_prob, responses.seed)?;
            let plan_path = run.path("plan.json");
            io::write_json(&plan_path, &plan)?;
            let timeline = run.path("timeline.csv");
            io::write_timeline_csv(&timeline, &plan)?;
            let presses = run.path("responses.csv");
            io::write_response_log(&presses, &log)?;
            let rec_path = run.path(&format!("recording.{}", config.format.extension()));
            io::write_recording(&rec_path, &recording, config.format)?;
            files.extend([plan_path, timeline, presses, io::sidecar_path(&rec_path), rec_path]);
            Acquired {
                recording,
                plan,
                log: Some(log),
                truth: Some(truth),
            }
        }
        InputConfig::Files {
            recording,
            plan,
            responses,
        } => Acquired {
            recording: io::read_recording(recording)?,
            plan: io::read_json(plan)?,
            log: responses.as_deref().map(io::read_response_log).transpose()?,
            truth: None,
        },
    };
    Ok((acquired, files))
}

pub fn write_rejections_csv(path: &Path, set: &EpochSet, masks: &[RejectionMask]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "onset_ms", "is_target", "components", "rejected"])?;
    for ((e, &t), m) in set.epochs.iter().zip(&set.is_target).zip(masks) {
        w.write_record([
            e.event_index.to_string(),
            e.onset_ms.to_string(),
            t.to_string(),
            m.rejected.len().to_string(),
            m.count().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn analyze(
    config: &PipelineConfig,
    run: &mut Run<'_>,
    acquired: &Acquired,
    cleaned: &EpochSet,
    masks: &[RejectionMask],
    window: EpochWindow,
) -> Result<(Summary, Vec<PathBuf>)> {
    let fs = cleaned.sample_rate_hz;
    let names = &cleaned.channel_names;
    let targets = cleaned.targets();
    let non_targets = cleaned.non_targets();
    let mut files = Vec::new();

    let mut averages = Vec::new();
    for (cond, epochs) in [(Condition::Target, &targets), (Condition::NonTarget, &non_targets)] {
        if epochs.is_empty() {
            averages.push(None);
            continue;
        }
        let erp = grand_average(epochs.iter().copied(), cond, fs)?;
        let path = run.path(&format!("erp_{}.csv", cond.as_str()));
        io::write_erp_csv(&path, &erp, names)?;
        files.push(path);
        averages.push(Some(erp));
    }
    let (erp_t, erp_n) = (averages[0].take(), averages[1].take());
    if let Some(t) = &erp_t {
        let path = run.path("erp.svg");
        io::write_erp_svg(&path, t, erp_n.as_ref(), config.score_window, config.channels)?;
        files.push(path);
    }
    let score = |e: &Option<ErpAverage>| e.as_ref().map(|e| p300_score(e, config.score_window)).transpose();

    let sep = if targets.len() >= 2 && non_targets.len() >= 2 {
        let s = separability(&targets, &non_targets, config.score_window, fs, config.channels)?;
        Some(SeparabilitySummary {
            auc: s.auc,
            rank_sum: s.rank_test.statistic,
            p_value: s.rank_test.p_value,
            method: s.rank_test.method,
        })
    } else {
        None
    };

    let mut truth_correlation = None;
    if let (Some(truth), Some(erp)) = (&acquired.truth, &erp_t) {
        let clean = bandlimit_with(&truth.clean, config.band, config.execution)?;
        let onsets = truth.target_onsets_ms();
        let set = EpochSet::segment(&clean, &onsets, &vec![true; onsets.len()], window)?.baseline_corrected();
        let truth_erp = grand_average(set.epochs.iter(), Condition::Target, fs)?;
        let path = run.path("erp_truth_target.csv");
        io::write_erp_csv(&path, &truth_erp, names)?;
        files.push(path);
        truth_correlation = Some(worst_channel_correlation(erp, &truth_erp, window.pre_samples)?);
    }

    if let Some(log) = &acquired.log {
        let scores = score_session(&acquired.plan, log, config.response_window)?;
        for &g in &config.group_by {
            let rows = psychophysics_table(&acquired.plan, &scores, g)?;
            let path = run.path(&format!("psychophysics_{}.csv", g.header()));
            io::write_psychophysics_csv(&path, g, &rows)?;
            files.push(path);
            let tests = pairwise_latency_tests(&acquired.plan, &scores, g)?;
            let path = run.path(&format!("pairwise_{}.csv", g.header()));
            io::write_pairwise_csv(&path, &tests)?;
            files.push(path);
        }
    }

    let summary = Summary {
        n_epochs: cleaned.len(),
        n_targets: targets.len(),
        n_non_targets: non_targets.len(),
        rejected_contributions: masks.iter().map(RejectionMask::count).sum(),
        epochs_with_rejections: masks.iter().filter(|m| m.any()).count(),
        target: score(&erp_t)?,
        non_target: score(&erp_n)?,
        separability: sep,
        truth_correlation,
    };
    let path = run.path("summary.json");
    io::write_json(&path, &summary)?;
    files.push(path);
    Ok((summary, files))
}
