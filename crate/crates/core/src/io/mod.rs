//! File formats.
//!
//! Every data file has a JSON sidecar with the same stem holding the metadata
//! the samples alone cannot carry (sample rate, channel names, epoch labels).
//! Sample data is either CSV or the little-endian container in [`binary`];
//! readers tell the two apart by the container's magic bytes.

pub mod binary;
mod svg;
mod tables;
mod wav;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::epoch::{Epoch, EpochSet, EpochWindow};
use crate::error::{Error, Result};
use crate::memd::ImfStack;
use crate::recording::MultichannelRecording;

pub use binary::{BlockKind, Header, MAGIC, VERSION};
pub use svg::{erp_svg, write_erp_svg};
pub use tables::{
    read_response_log, write_erp_csv, write_gains_csv, write_pairwise_csv, write_psychophysics_csv, write_response_log,
    write_timeline_csv, GainRow,
};
pub use wav::{render_stimulus, write_wav, WAV_SAMPLE_RATE_HZ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Binary,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Binary => "bin",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "binary" | "bin" => Ok(Format::Binary),
            other => Err(Error::arg(format!("unknown format {other:?} (expected csv or binary)"))),
        }
    }
}

/// `foo.csv` → `foo.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut file = BufReader::new(File::open(path)?);
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn is_binary(path: &Path) -> Result<bool> {
    let mut magic = [0u8; 4];
    let mut f = File::open(path)?;
    let n = f.read(&mut magic)?;
    Ok(n == 4 && magic == MAGIC)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub sample_rate_hz: f64,
    pub channel_names: Vec<String>,
}

impl RecordingMeta {
    fn of(rec: &MultichannelRecording) -> Self {
        Self {
            sample_rate_hz: rec.sample_rate_hz(),
            channel_names: rec.channel_names().to_vec(),
        }
    }
}

fn f64_field(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::format(format!("line {line}: {s:?} is not a number")))
}

/// Writes a recording and its sidecar.
pub fn write_recording(path: &Path, rec: &MultichannelRecording, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(rec.channel_names())?;
            for col in rec.data().columns() {
                w.write_record(col.iter().map(|v| v.to_string()))?;
            }
            w.flush()?;
        }
        Format::Binary => {
            let header = Header::new(
                BlockKind::Recording,
                rec.sample_rate_hz(),
                1,
                rec.n_channels(),
                rec.n_samples(),
            )?;
            binary::write_file(path, &header, [rec.data().view()])?;
        }
    }
    write_json(&sidecar_path(path), &RecordingMeta::of(rec))
}

/// Reads a recording from CSV or binary, with its sidecar.
pub fn read_recording(path: &Path) -> Result<MultichannelRecording> {
    let meta: RecordingMeta = read_json(&sidecar_path(path))?;
    let data = if is_binary(path)? {
        let (header, mut blocks) = binary::read_file(path)?;
        header.expect_kind(BlockKind::Recording)?;
        if header.sample_rate_hz != meta.sample_rate_hz {
            return Err(Error::format("sample rate differs between container and sidecar"));
        }
        blocks
            .pop()
            .ok_or_else(|| Error::format("recording container has no block"))?
    } else {
        read_sample_csv(path, meta.channel_names.len())?
    };
    MultichannelRecording::new(meta.sample_rate_hz, meta.channel_names, data)
}

/// Header row plus one row per sample, `channels` numeric columns.
fn read_sample_csv(path: &Path, channels: usize) -> Result<Array2<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.len() != channels {
        return Err(Error::format(format!(
            "{} has {} columns but the sidecar lists {channels} channels",
            path.display(),
            r.headers()?.len()
        )));
    }
    let mut flat = Vec::new();
    let mut rows = 0;
    for (i, record) in r.records().enumerate() {
        let record = record?;
        for field in record.iter() {
            flat.push(f64_field(field, i + 2)?);
        }
        rows += 1;
    }
    let samples_by_channel =
        Array2::from_shape_vec((rows, channels), flat).map_err(|e| Error::format(e.to_string()))?;
    Ok(samples_by_channel.reversed_axes().as_standard_layout().into_owned())
}

/// Writes the IMFs and residue as one container, blocks in order with the
/// residue last.
pub fn write_imf_stack(path: &Path, stack: &ImfStack, sample_rate_hz: f64) -> Result<()> {
    let header = Header::new(
        BlockKind::ImfStack,
        sample_rate_hz,
        stack.n_imfs() + 1,
        stack.n_channels(),
        stack.n_samples(),
    )?;
    binary::write_file(path, &header, stack.components().map(|c| c.view()))
}

pub fn read_imf_stack(path: &Path) -> Result<(ImfStack, f64)> {
    let (header, mut blocks) = binary::read_file(path)?;
    header.expect_kind(BlockKind::ImfStack)?;
    let residue = blocks
        .pop()
        .ok_or_else(|| Error::format("IMF container has no residue"))?;
    Ok((ImfStack { imfs: blocks, residue }, header.sample_rate_hz))
}

/// One CSV per channel, columns `imf_0 … imf_{M−1}, residue`.
pub fn write_imf_channel_csvs(
    dir: &Path,
    stem: &str,
    stack: &ImfStack,
    channel_names: &[String],
) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::with_capacity(channel_names.len());
    for (c, name) in channel_names.iter().enumerate() {
        let path = dir.join(format!("{stem}_{name}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        let mut header: Vec<String> = (0..stack.n_imfs()).map(|k| format!("imf_{k}")).collect();
        header.push("residue".into());
        w.write_record(&header)?;
        for t in 0..stack.n_samples() {
            w.write_record(stack.components().map(|m| m[[c, t]].to_string()))?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSetMeta {
    pub sample_rate_hz: f64,
    pub channel_names: Vec<String>,
    pub window: EpochWindow,
    pub onsets_ms: Vec<f64>,
    pub event_indices: Vec<usize>,
    pub is_target: Vec<bool>,
}

/// Epochs as a container with one block per epoch, or a long CSV with
/// columns `epoch, sample, time_ms, <channels…>`.
pub fn write_epoch_set(path: &Path, set: &EpochSet, format: Format) -> Result<()> {
    let (c, t) = (set.channel_names.len(), set.window.len());
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            let mut header = vec!["epoch".to_string(), "sample".into(), "time_ms".into()];
            header.extend(set.channel_names.iter().cloned());
            w.write_record(&header)?;
            for (k, e) in set.epochs.iter().enumerate() {
                for i in 0..t {
                    let mut row = vec![
                        k.to_string(),
                        i.to_string(),
                        set.window.time_ms(i, set.sample_rate_hz).to_string(),
                    ];
                    row.extend(e.samples.column(i).iter().map(|v| v.to_string()));
                    w.write_record(&row)?;
                }
            }
            w.flush()?;
        }
        Format::Binary => {
            let header = Header::new(BlockKind::EpochSet, set.sample_rate_hz, set.len(), c, t)?;
            binary::write_file(path, &header, set.epochs.iter().map(|e| e.samples.view()))?;
        }
    }
    let meta = EpochSetMeta {
        sample_rate_hz: set.sample_rate_hz,
        channel_names: set.channel_names.clone(),
        window: set.window,
        onsets_ms: set.epochs.iter().map(|e| e.onset_ms).collect(),
        event_indices: set.epochs.iter().map(|e| e.event_index).collect(),
        is_target: set.is_target.clone(),
    };
    write_json(&sidecar_path(path), &meta)
}

pub fn read_epoch_set(path: &Path) -> Result<EpochSet> {
    let meta: EpochSetMeta = read_json(&sidecar_path(path))?;
    let (c, t, n) = (meta.channel_names.len(), meta.window.len(), meta.onsets_ms.len());
    if meta.event_indices.len() != n || meta.is_target.len() != n {
        return Err(Error::format("epoch sidecar lists differ in length"));
    }
    let blocks = if is_binary(path)? {
        let (header, blocks) = binary::read_file(path)?;
        header.expect_kind(BlockKind::EpochSet)?;
        blocks
    } else {
        let mut r = csv::Reader::from_path(path)?;
        let mut blocks = vec![Array2::zeros((c, t)); n];
        for (line, record) in r.records().enumerate() {
            let record = record?;
            if record.len() != c + 3 {
                return Err(Error::format(format!("line {}: expected {} fields", line + 2, c + 3)));
            }
            let k: usize = record[0].parse().map_err(|_| Error::format("bad epoch index"))?;
            let i: usize = record[1].parse().map_err(|_| Error::format("bad sample index"))?;
            if k >= n || i >= t {
                return Err(Error::format(format!("line {}: index out of range", line + 2)));
            }
            for ch in 0..c {
                blocks[k][[ch, i]] = f64_field(&record[3 + ch], line + 2)?;
            }
        }
        blocks
    };
    if blocks.len() != n || blocks.iter().any(|b| b.dim() != (c, t)) {
        return Err(Error::format("epoch data does not match its sidecar"));
    }
    let epochs = blocks
        .into_iter()
        .enumerate()
        .map(|(k, samples)| Epoch {
            samples,
            onset_index: meta.window.pre_samples,
            onset_ms: meta.onsets_ms[k],
            event_index: meta.event_indices[k],
        })
        .collect();
    Ok(EpochSet {
        sample_rate_hz: meta.sample_rate_hz,
        channel_names: meta.channel_names,
        window: meta.window,
        epochs,
        is_target: meta.is_target,
    })
}
