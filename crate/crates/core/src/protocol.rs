//! Oddball stimulus scheduling and behavioural response scoring.
//!
//! A trial presents all 16 stimuli (8 ring directions × 2 depths) once each in
//! random order, one of them being the attended target. Onsets are spaced by
//! the stimulus onset asynchrony (SOA, 1000 ms) and each sound lasts 500 ms.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`),
//! and permutations use the Fisher–Yates shuffle of `rand::seq::SliceRandom`,
//! so a seed yields the same plan on every platform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SOA_MS: u64 = 1000;
pub const STIMULUS_MS: u64 = 500;

/// The eight loudspeaker directions, ascending.
pub const DIRECTIONS_DEG: [f64; 8] = [-135.0, -90.0, -45.0, 0.0, 45.0, 90.0, 135.0, 180.0];
/// Near (reference) and far depth constants.
pub const DEPTHS_C: [f64; 2] = [1.0, 0.2];
pub const STIMULI_PER_TRIAL: usize = DIRECTIONS_DEG.len() * DEPTHS_C.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timbre {
    WhiteNoise,
    Midi,
    Effect,
}

impl Timbre {
    pub const ALL: [Timbre; 3] = [Timbre::WhiteNoise, Timbre::Midi, Timbre::Effect];

    pub fn as_str(self) -> &'static str {
        match self {
            Timbre::WhiteNoise => "white_noise",
            Timbre::Midi => "midi",
            Timbre::Effect => "effect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoundSystem {
    Real,
    Virtual,
}

impl SoundSystem {
    pub fn as_str(self) -> &'static str {
        match self {
            SoundSystem::Real => "real",
            SoundSystem::Virtual => "virtual",
        }
    }
}

/// One of the 16 (direction, depth) stimulus classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusKey {
    pub direction_deg: f64,
    pub depth_c: f64,
}

impl StimulusKey {
    /// The canonical 16 keys, direction-major.
    pub fn all() -> Vec<StimulusKey> {
        DIRECTIONS_DEG
            .iter()
            .flat_map(|&direction_deg| {
                DEPTHS_C
                    .iter()
                    .map(move |&depth_c| StimulusKey { direction_deg, depth_c })
            })
            .collect()
    }

    /// Position in [`StimulusKey::all`], if this is a canonical key.
    pub fn index(&self) -> Option<usize> {
        let d = DIRECTIONS_DEG.iter().position(|&a| a == self.direction_deg)?;
        let c = DEPTHS_C.iter().position(|&c| c == self.depth_c)?;
        Some(d * DEPTHS_C.len() + c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusEvent {
    /// Onset relative to the start of the trial.
    pub onset_ms: u64,
    pub duration_ms: u64,
    pub direction_deg: f64,
    pub depth_c: f64,
    pub timbre: Timbre,
    pub is_target: bool,
}

impl StimulusEvent {
    pub fn key(&self) -> StimulusKey {
        StimulusKey {
            direction_deg: self.direction_deg,
            depth_c: self.depth_c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub soa_ms: u64,
    pub stimulus_ms: u64,
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            soa_ms: SOA_MS,
            stimulus_ms: STIMULUS_MS,
        }
    }
}

impl Timing {
    fn validate(&self) -> Result<()> {
        if self.soa_ms == 0 || self.stimulus_ms == 0 {
            return Err(Error::config("SOA and stimulus length must be positive"));
        }
        if self.stimulus_ms > self.soa_ms {
            return Err(Error::config(format!(
                "stimulus length {} ms exceeds SOA {} ms",
                self.stimulus_ms, self.soa_ms
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    /// Session-clock time of the first onset.
    pub start_ms: u64,
    pub soa_ms: u64,
    pub system: SoundSystem,
    pub timbre: Timbre,
    pub target: StimulusKey,
    pub seed: u64,
    pub events: Vec<StimulusEvent>,
}

impl TrialPlan {
    /// Session-clock onset of event `i`.
    pub fn session_onset_ms(&self, i: usize) -> u64 {
        self.start_ms + self.events[i].onset_ms
    }

    pub fn end_ms(&self) -> u64 {
        self.start_ms + self.events.len() as u64 * self.soa_ms
    }

    pub fn target_index(&self) -> Option<usize> {
        self.events.iter().position(|e| e.is_target)
    }
}

/// A trial with default timing, starting at time zero on the real system.
pub fn build_trial(target: StimulusKey, timbre: Timbre, seed: u64) -> Result<TrialPlan> {
    build_trial_with(Timing::default(), SoundSystem::Real, target, timbre, seed)
}

pub fn build_trial_with(
    timing: Timing,
    system: SoundSystem,
    target: StimulusKey,
    timbre: Timbre,
    seed: u64,
) -> Result<TrialPlan> {
    timing.validate()?;
    if target.index().is_none() {
        return Err(Error::arg(format!(
            "target ({}°, c={}) is not one of the 16 stimulus classes",
            target.direction_deg, target.depth_c
        )));
    }
    let mut keys = StimulusKey::all();
    keys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let events = keys
        .into_iter()
        .enumerate()
        .map(|(i, key)| StimulusEvent {
            onset_ms: i as u64 * timing.soa_ms,
            duration_ms: timing.stimulus_ms,
            direction_deg: key.direction_deg,
            depth_c: key.depth_c,
            timbre,
            is_target: key == target,
        })
        .collect();
    Ok(TrialPlan {
        start_ms: 0,
        soa_ms: timing.soa_ms,
        system,
        timbre,
        target,
        seed,
        events,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "keys")]
pub enum TargetSchedule {
    /// Every one of the 16 keys serves as target in turn.
    Sweep,
    Keys(Vec<StimulusKey>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub timbres: Vec<Timbre>,
    pub systems: Vec<SoundSystem>,
    /// Trials per (system, timbre, target) combination.
    pub repetitions: u32,
    pub targets: TargetSchedule,
    pub master_seed: u64,
    pub timing: Timing,
    /// Silence before the first trial.
    pub lead_in_ms: u64,
    /// Silence between the last SOA slot of a trial and the next trial.
    pub inter_trial_ms: u64,
}

impl Default for SessionConfig {
    /// 2 trials × 3 timbres × 2 systems = 12 trials for each target key.
    fn default() -> Self {
        Self {
            timbres: Timbre::ALL.to_vec(),
            systems: vec![SoundSystem::Real, SoundSystem::Virtual],
            repetitions: 2,
            targets: TargetSchedule::Sweep,
            master_seed: 0,
            timing: Timing::default(),
            lead_in_ms: 5000,
            inter_trial_ms: 2000,
        }
    }
}

impl SessionConfig {
    /// One timbre, one system, one repetition: a 16-trial target sweep.
    pub fn minimal(master_seed: u64) -> Self {
        Self {
            timbres: vec![Timbre::WhiteNoise],
            systems: vec![SoundSystem::Real],
            repetitions: 1,
            master_seed,
            ..Self::default()
        }
    }

    fn target_keys(&self) -> Result<Vec<StimulusKey>> {
        match &self.targets {
            TargetSchedule::Sweep => Ok(StimulusKey::all()),
            TargetSchedule::Keys(keys) => {
                if let Some(bad) = keys.iter().find(|k| k.index().is_none()) {
                    return Err(Error::config(format!(
                        "target ({}°, c={}) is not one of the 16 stimulus classes",
                        bad.direction_deg, bad.depth_c
                    )));
                }
                Ok(keys.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub config: SessionConfig,
    pub trials: Vec<TrialPlan>,
}

impl SessionPlan {
    /// Every event in session order with its session-clock onset.
    pub fn timeline(&self) -> impl Iterator<Item = (u64, &StimulusEvent)> + '_ {
        self.trials
            .iter()
            .flat_map(|t| t.events.iter().map(move |e| (t.start_ms + e.onset_ms, e)))
    }

    pub fn end_ms(&self) -> u64 {
        self.trials.last().map_or(self.config.lead_in_ms, |t| t.end_ms())
    }
}

/// Builds the full cross product of trials.
///
/// Systems run as consecutive blocks in the configured order. Within a block
/// the (timbre, target, repetition) trials are shuffled by the master
/// generator, which then draws each trial's own seed.
pub fn build_session(config: &SessionConfig) -> Result<SessionPlan> {
    config.timing.validate()?;
    let targets = config.target_keys()?;
    if config.timbres.is_empty() || config.systems.is_empty() || config.repetitions == 0 || targets.is_empty() {
        return Err(Error::config(
            "session needs at least one timbre, system, repetition and target",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    let trial_span = STIMULI_PER_TRIAL as u64 * config.timing.soa_ms + config.inter_trial_ms;
    let mut trials = Vec::new();
    for &system in &config.systems {
        let mut block: Vec<(Timbre, StimulusKey)> = Vec::new();
        for &timbre in &config.timbres {
            for &target in &targets {
                for _ in 0..config.repetitions {
                    block.push((timbre, target));
                }
            }
        }
        block.shuffle(&mut rng);
        for (timbre, target) in block {
            let seed: u64 = rng.random();
            let mut trial = build_trial_with(config.timing, system, target, timbre, seed)?;
            trial.start_ms = config.lead_in_ms + trials.len() as u64 * trial_span;
            trials.push(trial);
        }
    }
    Ok(SessionPlan {
        config: config.clone(),
        trials,
    })
}

/// Button presses on the session clock, in milliseconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResponseLog {
    presses_ms: Vec<f64>,
}

impl ResponseLog {
    pub fn new(presses_ms: Vec<f64>) -> Result<Self> {
        if presses_ms.iter().any(|t| !t.is_finite()) {
            return Err(Error::arg("press timestamps must be finite"));
        }
        if presses_ms.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("press timestamps must be strictly increasing"));
        }
        Ok(Self { presses_ms })
    }

    pub fn presses_ms(&self) -> &[f64] {
        &self.presses_ms
    }

    pub fn is_empty(&self) -> bool {
        self.presses_ms.is_empty()
    }
}

/// Latency interval `(lo_ms, hi_ms]` after an onset within which a press
/// counts as a response to that stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseWindow {
    pub lo_ms: f64,
    pub hi_ms: f64,
}

impl Default for ResponseWindow {
    fn default() -> Self {
        Self {
            lo_ms: 0.0,
            hi_ms: SOA_MS as f64,
        }
    }
}

impl ResponseWindow {
    fn contains(&self, latency_ms: f64) -> bool {
        latency_ms > self.lo_ms && latency_ms <= self.hi_ms
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialScore {
    pub targets: usize,
    pub hits: usize,
    pub false_alarms: usize,
    pub hit_latencies_ms: Vec<f64>,
}

impl TrialScore {
    pub fn accuracy_percent(&self) -> f64 {
        accuracy_percent(self.hits, self.targets)
    }

    pub fn mean_latency_ms(&self) -> Option<f64> {
        mean(&self.hit_latencies_ms)
    }

    pub fn latency_sd_ms(&self) -> Option<f64> {
        population_sd(&self.hit_latencies_ms)
    }
}

pub(crate) fn accuracy_percent(hits: usize, targets: usize) -> f64 {
    if targets == 0 {
        0.0
    } else {
        100.0 * hits as f64 / targets as f64
    }
}

pub(crate) fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Population (divide-by-n) standard deviation.
pub(crate) fn population_sd(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
    Some(var.sqrt())
}

/// Scores one trial against a session-clock press log.
///
/// Each press belongs to the most recent onset strictly before it. A target
/// is hit by its first attributed press inside the window; attributed
/// presses after non-targets are false alarms. Presses outside every window
/// are ignored.
pub fn score_responses(trial: &TrialPlan, log: &ResponseLog, window: ResponseWindow) -> Result<TrialScore> {
    if trial.events.is_empty() {
        return Err(Error::arg("cannot score an empty trial"));
    }
    if !(window.lo_ms >= 0.0 && window.lo_ms < window.hi_ms && window.hi_ms <= trial.soa_ms as f64) {
        return Err(Error::arg(format!(
            "response window ({}, {}] must lie within (0, {}] ms",
            window.lo_ms, window.hi_ms, trial.soa_ms
        )));
    }
    let onsets: Vec<f64> = (0..trial.events.len())
        .map(|i| trial.session_onset_ms(i) as f64)
        .collect();
    let mut score = TrialScore {
        targets: trial.events.iter().filter(|e| e.is_target).count(),
        ..TrialScore::default()
    };
    let mut hit = vec![false; trial.events.len()];
    for &press in log.presses_ms() {
        let after = onsets.partition_point(|&t| t < press);
        if after == 0 {
            continue;
        }
        let i = after - 1;
        let latency = press - onsets[i];
        if !window.contains(latency) {
            continue;
        }
        if trial.events[i].is_target {
            if !hit[i] {
                hit[i] = true;
                score.hits += 1;
                score.hit_latencies_ms.push(latency);
            }
        } else {
            score.false_alarms += 1;
        }
    }
    Ok(score)
}

pub fn score_session(plan: &SessionPlan, log: &ResponseLog, window: ResponseWindow) -> Result<Vec<TrialScore>> {
    plan.trials.iter().map(|t| score_responses(t, log, window)).collect()
}
