use std::path::Path;

use crate::erp::ErpAverage;
use crate::error::{Error, Result};
use crate::protocol::{ResponseLog, SessionPlan};
use crate::stats::{GroupBy, PMethod, PairwiseTest, PsychophysicsRow};

#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub azimuth_deg: f64,
    pub depth_c: f64,
    pub gains: Vec<f64>,
}

/// `azimuth_deg, depth_c, g_0 … g_{N−1}`; header only when `rows` is empty.
pub fn write_gains_csv(path: &Path, n_speakers: usize, rows: &[GainRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["azimuth_deg".to_string(), "depth_c".into()];
    header.extend((0..n_speakers).map(|i| format!("g_{i}")));
    w.write_record(&header)?;
    for row in rows {
        if row.gains.len() != n_speakers {
            return Err(Error::arg(format!(
                "gain row has {} entries for {n_speakers} speakers",
                row.gains.len()
            )));
        }
        let mut rec = vec![row.azimuth_deg.to_string(), row.depth_c.to_string()];
        rec.extend(row.gains.iter().map(|g| g.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Every event on the session clock.
pub fn write_timeline_csv(path: &Path, plan: &SessionPlan) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "onset_ms",
        "duration_ms",
        "direction_deg",
        "depth_c",
        "timbre",
        "is_target",
    ])?;
    for (onset, e) in plan.timeline() {
        w.write_record([
            onset.to_string(),
            e.duration_ms.to_string(),
            e.direction_deg.to_string(),
            e.depth_c.to_string(),
            e.timbre.as_str().to_string(),
            e.is_target.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_response_log(path: &Path, log: &ResponseLog) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["press_ms"])?;
    for p in log.presses_ms() {
        w.write_record([p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One timestamp per line in the first column; a non-numeric first line is
/// taken as a header.
pub fn read_response_log(path: &Path) -> Result<ResponseLog> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut presses = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let Some(field) = record.get(0).map(str::trim) else {
            continue;
        };
        match field.parse::<f64>() {
            Ok(v) => presses.push(v),
            Err(_) if i == 0 => {}
            Err(_) => return Err(Error::format(format!("line {}: {field:?} is not a time", i + 1))),
        }
    }
    ResponseLog::new(presses).map_err(|e| Error::format(e.to_string()))
}

/// `time_ms` then one column per channel.
pub fn write_erp_csv(path: &Path, erp: &ErpAverage, channel_names: &[String]) -> Result<()> {
    if channel_names.len() != erp.mean.nrows() {
        return Err(Error::arg("channel names do not match the ERP"));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["time_ms".to_string()];
    header.extend(channel_names.iter().cloned());
    w.write_record(&header)?;
    for (i, col) in erp.mean.columns().into_iter().enumerate() {
        let mut row = vec![erp.time_ms(i).to_string()];
        row.extend(col.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Group, AR, ART, σ, then the raw counts.
pub fn write_psychophysics_csv(path: &Path, group_by: GroupBy, rows: &[PsychophysicsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        group_by.header(),
        "ar_percent",
        "art_ms",
        "sigma_ms",
        "targets",
        "hits",
        "false_alarms",
    ])?;
    for r in rows {
        w.write_record([
            r.group.clone(),
            r.ar_percent.to_string(),
            opt(r.art_ms),
            opt(r.sigma_ms),
            r.targets.to_string(),
            r.hits.to_string(),
            r.false_alarms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pairwise_csv(path: &Path, tests: &[PairwiseTest]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["group_a", "group_b", "rank_sum", "p_value", "n_a", "n_b", "method"])?;
    for t in tests {
        let method = match t.result.method {
            PMethod::Exact => "exact",
            PMethod::NormalApprox => "normal",
        };
        w.write_record([
            t.group_a.clone(),
            t.group_b.clone(),
            t.result.statistic.to_string(),
            t.result.p_value.to_string(),
            t.result.n1.to_string(),
            t.result.n2.to_string(),
            method.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
