//! Little-endian sample container.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "SABC"
//!      4     2  version (u16, currently 1)
//!      6     2  kind (u16: 1 recording, 2 IMF stack, 3 epoch set)
//!      8     8  sample rate in Hz (f64)
//!     16     4  block count B (u32)
//!     20     4  channel count C (u32)
//!     24     4  samples per channel T (u32)
//!     28  8BCT  f64 samples: block-major, then channel, then time
//! ```
//!
//! A recording has one block. An IMF stack stores its IMFs in order followed
//! by the residue. An epoch set stores one block per epoch.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SABC";
pub const VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum BlockKind {
    Recording = 1,
    ImfStack = 2,
    EpochSet = 3,
}

impl BlockKind {
    fn from_u16(v: u16) -> Result<Self> {
        match v {
            1 => Ok(BlockKind::Recording),
            2 => Ok(BlockKind::ImfStack),
            3 => Ok(BlockKind::EpochSet),
            other => Err(Error::format(format!("unknown container kind {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub kind: BlockKind,
    pub sample_rate_hz: f64,
    pub blocks: u32,
    pub channels: u32,
    pub samples: u32,
}

impl Header {
    pub fn new(kind: BlockKind, sample_rate_hz: f64, blocks: usize, channels: usize, samples: usize) -> Result<Self> {
        let narrow = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::arg(format!("{what} {v} does not fit the container")))
        };
        Ok(Self {
            kind,
            sample_rate_hz,
            blocks: narrow(blocks, "block count")?,
            channels: narrow(channels, "channel count")?,
            samples: narrow(samples, "sample count")?,
        })
    }

    pub fn expect_kind(&self, kind: BlockKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::format(format!(
                "expected a {kind:?} container, found {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    fn write(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_u16::<LittleEndian>(VERSION)?;
        w.write_u16::<LittleEndian>(self.kind as u16)?;
        w.write_f64::<LittleEndian>(self.sample_rate_hz)?;
        w.write_u32::<LittleEndian>(self.blocks)?;
        w.write_u32::<LittleEndian>(self.channels)?;
        w.write_u32::<LittleEndian>(self.samples)?;
        Ok(())
    }

    fn read(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(Error::format("missing container magic"));
        }
        let version = r.read_u16::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported container version {version}")));
        }
        Ok(Self {
            kind: BlockKind::from_u16(r.read_u16::<LittleEndian>()?)?,
            sample_rate_hz: r.read_f64::<LittleEndian>()?,
            blocks: r.read_u32::<LittleEndian>()?,
            channels: r.read_u32::<LittleEndian>()?,
            samples: r.read_u32::<LittleEndian>()?,
        })
    }
}

pub fn write_to<'a>(
    w: &mut impl Write,
    header: &Header,
    blocks: impl IntoIterator<Item = ArrayView2<'a, f64>>,
) -> Result<()> {
    header.write(w)?;
    let shape = (header.channels as usize, header.samples as usize);
    let mut count = 0u32;
    for block in blocks {
        if block.dim() != shape {
            return Err(Error::arg(format!(
                "block {count} has shape {:?}, header says {shape:?}",
                block.dim()
            )));
        }
        for row in block.rows() {
            for &v in row {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        count += 1;
    }
    if count != header.blocks {
        return Err(Error::arg(format!(
            "wrote {count} blocks, header says {}",
            header.blocks
        )));
    }
    Ok(())
}

pub fn read_from(r: &mut impl Read) -> Result<(Header, Vec<Array2<f64>>)> {
    let header = Header::read(r)?;
    let (c, t) = (header.channels as usize, header.samples as usize);
    let mut blocks = Vec::with_capacity(header.blocks as usize);
    let mut buf = vec![0.0; c * t];
    for _ in 0..header.blocks {
        r.read_f64_into::<LittleEndian>(&mut buf)
            .map_err(|e| Error::format(format!("truncated container: {e}")))?;
        blocks.push(Array2::from_shape_vec((c, t), buf.clone()).expect("buffer sized to block"));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::format("trailing bytes after the last block"));
    }
    Ok((header, blocks))
}

pub fn write_file<'a>(
    path: &Path,
    header: &Header,
    blocks: impl IntoIterator<Item = ArrayView2<'a, f64>>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_to(&mut w, header, blocks)?;
    w.flush()?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<(Header, Vec<Array2<f64>>)> {
    read_from(&mut BufReader::new(File::open(path)?))
}
