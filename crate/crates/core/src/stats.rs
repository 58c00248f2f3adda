//! Rank statistics and behavioural summary tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::protocol::{self, SessionPlan, TrialPlan, TrialScore};

/// Largest pooled sample size for which p-values are computed exactly.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTestResult {
    /// Sum of the midranks of the first sample.
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    pub method: PMethod,
}

/// 1-based ranks with ties sharing the mean of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end) as f64 / 2.0 + 1.0;
        for &i in &order[start..=end] {
            ranks[i] = rank;
        }
        start = end + 1;
    }
    ranks
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::arg("rank test needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::arg("rank test samples must be finite"));
    }
    Ok(())
}

/// Two-sided Wilcoxon rank-sum (Mann–Whitney) test of `a` against `b`.
///
/// Exact for `n1 + n2 ≤ 12`, counting every assignment of the pooled
/// midranks to the first sample. Larger samples use the tie-corrected normal
/// approximation with continuity correction.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankTestResult> {
    check_samples(a, b)?;
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let statistic: f64 = ranks[..n1].iter().sum();
    let (p_value, method) = if n <= EXACT_MAX_N {
        (exact_p(&ranks, n1), PMethod::Exact)
    } else {
        (normal_p(&pooled, statistic, n1, n2), PMethod::NormalApprox)
    };
    Ok(RankTestResult {
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
        n1,
        n2,
        method,
    })
}

/// Exact two-sided p-value via the null distribution of doubled rank sums.
/// Doubled midranks are integers, so the tail comparison is exact.
fn exact_p(ranks: &[f64], n1: usize) -> f64 {
    let n = ranks.len();
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0u64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1;
    for &r in &doubled {
        for k in (1..=n1).rev() {
            for s in (r..=max_sum).rev() {
                ways[k][s] += ways[k - 1][s - r];
            }
        }
    }
    let expected2 = (n1 * (n + 1)) as i64;
    let observed2: i64 = doubled[..n1].iter().sum::<usize>() as i64;
    let observed_dev = (observed2 - expected2).abs();
    let total: u64 = ways[n1].iter().sum();
    let extreme: u64 = ways[n1]
        .iter()
        .enumerate()
        .filter(|&(s, _)| (s as i64 - expected2).abs() >= observed_dev)
        .map(|(_, &w)| w)
        .sum();
    extreme as f64 / total as f64
}

fn normal_p(pooled: &[f64], statistic: f64, n1: usize, n2: usize) -> f64 {
    let n = (n1 + n2) as f64;
    let mean = n1 as f64 * (n + 1.0) / 2.0;
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n1 as f64 * n2 as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((statistic - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2)
}

/// Probability that a draw from `a` exceeds one from `b`, ties counting half.
pub fn auc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_samples(a, b)?;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let n1 = a.len() as f64;
    let u = ranks[..a.len()].iter().sum::<f64>() - n1 * (n1 + 1.0) / 2.0;
    Ok(u / (n1 * b.len() as f64))
}

/// Pearson correlation of two equal-length series.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::arg(
            "correlation needs two equal-length series of at least 2 samples",
        ));
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::arg("correlation of a constant series is undefined"));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Grouping key for behavioural tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    /// Stimulus timbre.
    Stimulus,
    /// Target direction.
    Direction,
    /// Target depth.
    Depth,
    System,
}

impl GroupBy {
    pub fn header(self) -> &'static str {
        match self {
            GroupBy::Stimulus => "stimulus_type",
            GroupBy::Direction => "direction_deg",
            GroupBy::Depth => "depth_c",
            GroupBy::System => "system",
        }
    }

    /// Sortable key plus display label.
    fn key(self, trial: &TrialPlan) -> (i64, String) {
        match self {
            GroupBy::Stimulus => (trial.timbre as i64, trial.timbre.as_str().to_string()),
            GroupBy::Direction => (
                (trial.target.direction_deg * 1000.0).round() as i64,
                format!("{}", trial.target.direction_deg),
            ),
            GroupBy::Depth => (
                -(trial.target.depth_c * 1000.0).round() as i64,
                format!("{}", trial.target.depth_c),
            ),
            GroupBy::System => (trial.system as i64, trial.system.as_str().to_string()),
        }
    }
}

/// One AR / ART / σ row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsychophysicsRow {
    pub group: String,
    pub ar_percent: f64,
    pub art_ms: Option<f64>,
    pub sigma_ms: Option<f64>,
    pub targets: usize,
    pub hits: usize,
    pub false_alarms: usize,
}

fn grouped<'a>(
    plan: &'a SessionPlan,
    scores: &'a [TrialScore],
    group_by: GroupBy,
) -> Result<BTreeMap<(i64, String), Vec<&'a TrialScore>>> {
    if plan.trials.len() != scores.len() {
        return Err(Error::arg(format!(
            "{} scores for {} trials",
            scores.len(),
            plan.trials.len()
        )));
    }
    let mut groups: BTreeMap<(i64, String), Vec<&TrialScore>> = BTreeMap::new();
    for (trial, score) in plan.trials.iter().zip(scores) {
        groups.entry(group_by.key(trial)).or_default().push(score);
    }
    Ok(groups)
}

/// Aggregates per-trial scores into one row per group, in the group's
/// natural order. Groups without targets are skipped with a warning.
pub fn psychophysics_table(
    plan: &SessionPlan,
    scores: &[TrialScore],
    group_by: GroupBy,
) -> Result<Vec<PsychophysicsRow>> {
    let mut rows = Vec::new();
    for ((_, label), members) in grouped(plan, scores, group_by)? {
        let targets: usize = members.iter().map(|s| s.targets).sum();
        if targets == 0 {
            log::warn!("group {label} has no targets; row omitted");
            continue;
        }
        let hits: usize = members.iter().map(|s| s.hits).sum();
        let latencies: Vec<f64> = members
            .iter()
            .flat_map(|s| s.hit_latencies_ms.iter().copied())
            .collect();
        rows.push(PsychophysicsRow {
            group: label,
            ar_percent: protocol::accuracy_percent(hits, targets),
            art_ms: protocol::mean(&latencies),
            sigma_ms: protocol::population_sd(&latencies),
            targets,
            hits,
            false_alarms: members.iter().map(|s| s.false_alarms).sum(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub group_a: String,
    pub group_b: String,
    pub result: RankTestResult,
}

/// Rank-sum tests on pooled hit latencies for every pair of groups that
/// both have hits.
pub fn pairwise_latency_tests(
    plan: &SessionPlan,
    scores: &[TrialScore],
    group_by: GroupBy,
) -> Result<Vec<PairwiseTest>> {
    let groups: Vec<(String, Vec<f64>)> = grouped(plan, scores, group_by)?
        .into_iter()
        .map(|((_, label), members)| {
            let lat = members
                .iter()
                .flat_map(|s| s.hit_latencies_ms.iter().copied())
                .collect();
            (label, lat)
        })
        .filter(|(_, lat): &(String, Vec<f64>)| !lat.is_empty())
        .collect();
    let mut out = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            out.push(PairwiseTest {
                group_a: groups[i].0.clone(),
                group_b: groups[j].0.clone(),
                result: wilcoxon_rank_sum(&groups[i].1, &groups[j].1)?,
            });
        }
    }
    Ok(out)
}
