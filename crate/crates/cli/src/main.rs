use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sabci::epoch::{EpochSet, EpochWindow};
use sabci::erp::{grand_average, p300_score, separability, ChannelSelection, Condition, P300Score, ScoreWindow};
use sabci::filter::{bandlimit_with, BandConfig};
use sabci::io::{self, Format, GainRow};
use sabci::memd::{memd_decompose, SiftConfig, DEFAULT_THRESHOLD_UV};
use sabci::pipeline::{
    clean_epoch_set, event_labels, run_pipeline, write_rejections_csv, PipelineConfig, ResponseSpec,
    SeparabilitySummary,
};
use sabci::protocol::{
    build_session, score_session, ResponseWindow, SessionConfig, SessionPlan, SoundSystem, StimulusEvent, Timbre,
    DIRECTIONS_DEG,
};
use sabci::stats::{pairwise_latency_tests, psychophysics_table, GroupBy};
use sabci::synth::{synth_response_log, synth_session, SynthSpec};
use sabci::vbap::{ring_gain_vector, LoudspeakerRing, PanningMode, RingSpec, VirtualSource};
use sabci::{Error, ErrorKind, Execution, MultichannelRecording, Result};

#[derive(Parser)]
#[command(name = "sabci", version, about = "Spatial auditory BCI batch tools")]
struct Cli {
    /// Seed for every random stream the command uses.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON configuration for the subcommand (a run manifest also works for `pipeline`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Sample data format: csv or binary.
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Run on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Loudspeaker gain vectors for an azimuth sweep at each depth.
    Gains {
        /// Loudspeaker azimuths, comma separated (default: regular octagon).
        #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
        ring: Option<List>,
        /// Source azimuths, comma separated; an empty string gives no rows.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
        azimuths: Option<List>,
        /// Depth settings c, comma separated.
        #[arg(long, value_parser = parse_list)]
        depths: Option<List>,
        /// real or virtual.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<PanningMode>,
        /// Also write a white-noise stimulus WAV per row.
        #[arg(long)]
        wav: bool,
    },
    /// Oddball session plan and its event timeline.
    Schedule {
        /// One timbre, one system, one repetition: the plain 16-trial sweep.
        #[arg(long)]
        minimal: bool,
    },
    /// Synthetic EEG session with ground truth.
    Synth,
    /// Band-limit a recording and cut baseline-corrected epochs.
    Preprocess {
        #[arg(long)]
        recording: PathBuf,
        #[arg(long)]
        plan: PathBuf,
    },
    /// MEMD artifact cleaning of an epoch set.
    Clean {
        #[arg(long)]
        epochs: PathBuf,
        /// Also write the IMFs of this epoch, one CSV per channel.
        #[arg(long)]
        imfs: Option<usize>,
    },
    /// Grand averages, P300 scores and target/non-target separability.
    Erp {
        #[arg(long)]
        epochs: PathBuf,
    },
    /// Behavioural accuracy and latency tables.
    Stats {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        /// Only trials of this sound system (real or virtual).
        #[arg(long, value_parser = parse_system)]
        system: Option<SoundSystem>,
        /// Only trials whose target has this depth.
        #[arg(long)]
        depth: Option<f64>,
    },
    /// Every stage end to end, with a run manifest.
    Pipeline,
}

/// Comma-separated numbers; clap would treat a bare `Vec` as repeated values.
#[derive(Debug, Clone)]
struct List(Vec<f64>);

fn parse_list(s: &str) -> std::result::Result<List, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()
        .map(List)
}

fn parse_mode(s: &str) -> std::result::Result<PanningMode, String> {
    match s {
        "real" => Ok(PanningMode::Real),
        "virtual" => Ok(PanningMode::Virtual),
        _ => Err(format!("{s:?} is not real or virtual")),
    }
}

fn parse_system(s: &str) -> std::result::Result<SoundSystem, String> {
    match s {
        "real" => Ok(SoundSystem::Real),
        "virtual" => Ok(SoundSystem::Virtual),
        _ => Err(format!("{s:?} is not real or virtual")),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct GainsConfig {
    ring: RingSpec,
    azimuths_deg: Vec<f64>,
    depths_c: Vec<f64>,
    mode: PanningMode,
    wav: bool,
}

impl Default for GainsConfig {
    fn default() -> Self {
        Self {
            ring: RingSpec {
                azimuths_deg: DIRECTIONS_DEG.to_vec(),
                radius_m: 1.5,
            },
            azimuths_deg: (0..8).map(|k| 45.0 * k as f64).collect(),
            depths_c: vec![1.0, 0.2],
            mode: PanningMode::Virtual,
            wav: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct SynthConfig {
    session: SessionConfig,
    synth: SynthSpec,
    responses: ResponseSpec,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            session: SessionConfig::minimal(0),
            synth: SynthSpec::default(),
            responses: ResponseSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct PreprocessConfig {
    band: BandConfig,
    epoch_pre_ms: f64,
    epoch_post_ms: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            band: BandConfig::default(),
            epoch_pre_ms: 100.0,
            epoch_post_ms: 800.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct CleanConfig {
    sift: SiftConfig,
    threshold_uv: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            sift: SiftConfig::default(),
            threshold_uv: DEFAULT_THRESHOLD_UV,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ErpConfig {
    score_window: ScoreWindow,
    channels: ChannelSelection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct StatsConfig {
    response_window: ResponseWindow,
    group_by: Vec<GroupBy>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            response_window: ResponseWindow::default(),
            group_by: vec![GroupBy::Stimulus, GroupBy::Direction, GroupBy::Depth, GroupBy::System],
        }
    }
}

#[derive(Serialize)]
struct ErpReport {
    target: Option<P300Score>,
    non_target: Option<P300Score>,
    separability: Option<SeparabilitySummary>,
}

struct Ctx {
    seed: Option<u64>,
    config: Option<PathBuf>,
    out: PathBuf,
    format: Format,
    exec: Execution,
    written: Vec<PathBuf>,
}

impl Ctx {
    fn load<T: DeserializeOwned + Default>(&self) -> Result<T> {
        match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::InvalidConfiguration(format!("{}: {e}", p.display())))?;
                Ok(serde_json::from_str(&text)?)
            }
            None => Ok(T::default()),
        }
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.written.push(p.clone());
        p
    }

    fn data_path(&mut self, stem: &str) -> PathBuf {
        let p = self.path(&format!("{stem}.{}", self.format.extension()));
        self.written.push(io::sidecar_path(&p));
        p
    }
}

fn cmd_gains(
    ctx: &mut Ctx,
    ring: Option<List>,
    azimuths: Option<List>,
    depths: Option<List>,
    mode: Option<PanningMode>,
    wav: bool,
) -> Result<()> {
    let mut cfg: GainsConfig = ctx.load()?;
    if let Some(List(r)) = ring {
        cfg.ring.azimuths_deg = r;
    }
    if let Some(List(a)) = azimuths {
        cfg.azimuths_deg = a;
    }
    if let Some(List(d)) = depths {
        cfg.depths_c = d;
    }
    cfg.mode = mode.unwrap_or(cfg.mode);
    cfg.wav |= wav;
    let ring = LoudspeakerRing::try_from(cfg.ring.clone())?;

    let mut rows = Vec::new();
    for &az in &cfg.azimuths_deg {
        for &c in &cfg.depths_c {
            let g = ring_gain_vector(&ring, &VirtualSource::new(az, c)?, cfg.mode)?;
            rows.push(GainRow {
                azimuth_deg: az,
                depth_c: c,
                gains: g.gains,
            });
        }
    }
    let path = ctx.path("gains.csv");
    io::write_gains_csv(&path, ring.len(), &rows)?;

    if cfg.wav {
        std::fs::create_dir_all(ctx.out.join("wav"))?;
        for row in &rows {
            let event = StimulusEvent {
                onset_ms: 0,
                duration_ms: 500,
                direction_deg: row.azimuth_deg,
                depth_c: row.depth_c,
                timbre: Timbre::WhiteNoise,
                is_target: false,
            };
            let feeds = io::render_stimulus(&ring, &event, cfg.mode, ctx.seed.unwrap_or(0))?;
            let path = ctx.path(&format!("wav/stimulus_{}_{}.wav", row.azimuth_deg, row.depth_c));
            io::write_wav(&path, &feeds, io::WAV_SAMPLE_RATE_HZ)?;
        }
    }
    Ok(())
}

fn cmd_schedule(ctx: &mut Ctx, minimal: bool) -> Result<()> {
    let mut cfg: SessionConfig = match (&ctx.config, minimal) {
        (None, true) => SessionConfig::minimal(0),
        _ => ctx.load()?,
    };
    if let Some(s) = ctx.seed {
        cfg.master_seed = s;
    }
    let plan = build_session(&cfg)?;
    io::write_json(&ctx.path("plan.json"), &plan)?;
    io::write_timeline_csv(&ctx.path("timeline.csv"), &plan)?;
    Ok(())
}

fn cmd_synth(ctx: &mut Ctx) -> Result<()> {
    let mut cfg: SynthConfig = ctx.load()?;
    if let Some(s) = ctx.seed {
        cfg.session.master_seed = s;
        cfg.synth.seed = s.wrapping_add(1);
        cfg.responses.seed = s.wrapping_add(2);
    }
    let plan = build_session(&cfg.session)?;
    let (rec, truth) = synth_session(&plan, &cfg.synth)?;
    let log = synth_response_log(
        &plan,
        cfg.responses.latency_ms,
        cfg.responses.hit_prob,
        cfg.responses.seed,
    )?;

    io::write_json(&ctx.path("synth_config.json"), &cfg)?;
    io::write_json(&ctx.path("plan.json"), &plan)?;
    io::write_timeline_csv(&ctx.path("timeline.csv"), &plan)?;
    io::write_response_log(&ctx.path("responses.csv"), &log)?;
    let fmt = ctx.format;
    io::write_recording(&ctx.data_path("recording"), &rec, fmt)?;
    io::write_recording(&ctx.data_path("clean_truth"), &truth.clean, fmt)?;
    for (name, data) in [
        ("background", &truth.background),
        ("p300", &truth.p300),
        ("blinks", &truth.blinks),
        ("drift", &truth.drift),
    ] {
        let component = rec.with_data(data.clone())?;
        io::write_recording(&ctx.data_path(&format!("{name}_truth")), &component, fmt)?;
    }
    Ok(())
}

fn cmd_preprocess(ctx: &mut Ctx, recording: &Path, plan: &Path) -> Result<()> {
    let cfg: PreprocessConfig = ctx.load()?;
    let rec: MultichannelRecording = io::read_recording(recording)?;
    let plan: SessionPlan = io::read_json(plan)?;
    let filtered = bandlimit_with(&rec, cfg.band, ctx.exec)?;
    let (onsets, labels) = event_labels(&plan);
    let window = EpochWindow::from_ms(cfg.epoch_pre_ms, cfg.epoch_post_ms, rec.sample_rate_hz())?;
    let set = EpochSet::segment(&filtered, &onsets, &labels, window)?.baseline_corrected();
    let fmt = ctx.format;
    io::write_epoch_set(&ctx.data_path("epochs"), &set, fmt)?;
    Ok(())
}

fn cmd_clean(ctx: &mut Ctx, epochs: &Path, imfs: Option<usize>) -> Result<()> {
    let cfg: CleanConfig = ctx.load()?;
    let set = io::read_epoch_set(epochs)?;
    if let Some(i) = imfs {
        let epoch = set
            .epochs
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("epoch {i} out of range (have {})", set.len())))?;
        let stack = memd_decompose(epoch.samples.view(), &cfg.sift)?;
        let dir = ctx.out.join("imfs");
        std::fs::create_dir_all(&dir)?;
        let files = io::write_imf_channel_csvs(&dir, &format!("epoch{i}"), &stack, &set.channel_names)?;
        ctx.written.extend(files);
    }
    let (cleaned, masks) = clean_epoch_set(&set, &cfg.sift, cfg.threshold_uv, ctx.exec)?;
    let fmt = ctx.format;
    io::write_epoch_set(&ctx.data_path("epochs_clean"), &cleaned, fmt)?;
    write_rejections_csv(&ctx.path("rejections.csv"), &cleaned, &masks)?;
    Ok(())
}

fn cmd_erp(ctx: &mut Ctx, epochs: &Path) -> Result<()> {
    let cfg: ErpConfig = ctx.load()?;
    let set = io::read_epoch_set(epochs)?;
    let fs = set.sample_rate_hz;
    let (targets, non_targets) = (set.targets(), set.non_targets());
    let mut erps = Vec::new();
    for (cond, group) in [(Condition::Target, &targets), (Condition::NonTarget, &non_targets)] {
        if group.is_empty() {
            erps.push(None);
            continue;
        }
        let erp = grand_average(group.iter().copied(), cond, fs)?;
        io::write_erp_csv(
            &ctx.path(&format!("erp_{}.csv", cond.as_str())),
            &erp,
            &set.channel_names,
        )?;
        erps.push(Some(erp));
    }
    let (t, n) = (erps[0].take(), erps[1].take());
    if let Some(t) = &t {
        io::write_erp_svg(&ctx.path("erp.svg"), t, n.as_ref(), cfg.score_window, cfg.channels)?;
    }
    let score = |e: &Option<_>| e.as_ref().map(|e| p300_score(e, cfg.score_window)).transpose();
    let sep = if targets.len() >= 2 && non_targets.len() >= 2 {
        let s = separability(&targets, &non_targets, cfg.score_window, fs, cfg.channels)?;
        Some(SeparabilitySummary {
            auc: s.auc,
            rank_sum: s.rank_test.statistic,
            p_value: s.rank_test.p_value,
            method: s.rank_test.method,
        })
    } else {
        None
    };
    let report = ErpReport {
        target: score(&t)?,
        non_target: score(&n)?,
        separability: sep,
    };
    io::write_json(&ctx.path("erp_summary.json"), &report)?;
    Ok(())
}

fn cmd_stats(
    ctx: &mut Ctx,
    plan: &Path,
    responses: &Path,
    system: Option<SoundSystem>,
    depth: Option<f64>,
) -> Result<()> {
    let cfg: StatsConfig = ctx.load()?;
    let mut plan: SessionPlan = io::read_json(plan)?;
    let log = io::read_response_log(responses)?;
    plan.trials.retain(|t| {
        system.is_none_or(|s| t.system == s)
            && depth.is_none_or(|c| t.target_index().is_some_and(|i| t.events[i].depth_c == c))
    });
    if plan.trials.is_empty() {
        return Err(Error::InvalidArgument("no trials match the filter".into()));
    }
    let scores = score_session(&plan, &log, cfg.response_window)?;
    for &g in &cfg.group_by {
        let rows = psychophysics_table(&plan, &scores, g)?;
        io::write_psychophysics_csv(&ctx.path(&format!("psychophysics_{}.csv", g.header())), g, &rows)?;
        let tests = pairwise_latency_tests(&plan, &scores, g)?;
        io::write_pairwise_csv(&ctx.path(&format!("pairwise_{}.csv", g.header())), &tests)?;
    }
    Ok(())
}

fn cmd_pipeline(ctx: &mut Ctx, format_flag: Option<Format>) -> Result<()> {
    let mut cfg = match &ctx.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = ctx.seed {
        cfg.apply_seed(s);
    }
    if let Some(f) = format_flag {
        cfg.format = f;
    }
    if ctx.exec == Execution::Sequential {
        cfg.execution = Execution::Sequential;
    }
    let manifest = run_pipeline(&cfg, &ctx.out)?;
    for o in &manifest.outputs {
        ctx.written.push(ctx.out.join(&o.path));
    }
    ctx.written.push(ctx.out.join(sabci::pipeline::MANIFEST_FILE));
    if let Some(r) = manifest.summary.and_then(|s| s.truth_correlation) {
        eprintln!("cleaned/truth target ERP correlation (worst channel): {r:.4}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let mut ctx = Ctx {
        seed: cli.seed,
        config: cli.config,
        out: cli.out,
        format: cli.format.unwrap_or_default(),
        exec: if cli.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
        written: Vec::new(),
    };
    if let Some(p) = &ctx.config {
        if !p.is_file() {
            return Err(Error::InvalidConfiguration(format!(
                "config {} does not exist",
                p.display()
            )));
        }
    }
    std::fs::create_dir_all(&ctx.out)?;
    match cli.command {
        Command::Gains {
            ring,
            azimuths,
            depths,
            mode,
            wav,
        } => cmd_gains(&mut ctx, ring, azimuths, depths, mode, wav)?,
        Command::Schedule { minimal } => cmd_schedule(&mut ctx, minimal)?,
        Command::Synth => cmd_synth(&mut ctx)?,
        Command::Preprocess { recording, plan } => cmd_preprocess(&mut ctx, &recording, &plan)?,
        Command::Clean { epochs, imfs } => cmd_clean(&mut ctx, &epochs, imfs)?,
        Command::Erp { epochs } => cmd_erp(&mut ctx, &epochs)?,
        Command::Stats {
            plan,
            responses,
            system,
            depth,
        } => cmd_stats(&mut ctx, &plan, &responses, system, depth)?,
        Command::Pipeline => cmd_pipeline(&mut ctx, cli.format)?,
    }
    Ok(ctx.written)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            })
        }
    }
}
