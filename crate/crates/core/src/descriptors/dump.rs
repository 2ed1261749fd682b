//! Binary descriptor dump, little-endian:
//!
//! ```text
//! "HODG1" | u32 count | u32 len[5] (hog, hof, mbhx, mbhy, hodg)
//! per record: u32 start_frame | f32 mean_x | f32 mean_y | f32 values for each channel in order
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::TrajectoryDescriptor;
use crate::error::{Error, Result};

pub const DUMP_MAGIC: &[u8; 5] = b"HODG1";

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorDump {
    pub channel_lens: [usize; 5],
    pub records: Vec<TrajectoryDescriptor>,
}

impl DescriptorDump {
    /// Channel lengths come from the first record; an empty dump has all-zero lengths.
    pub fn new(records: Vec<TrajectoryDescriptor>) -> Result<Self> {
        let channel_lens = records
            .first()
            .map(|r| std::array::from_fn(|c| r.channels[c].len()))
            .unwrap_or([0; 5]);
        for (i, r) in records.iter().enumerate() {
            for c in 0..5 {
                if r.channels[c].len() != channel_lens[c] {
                    return Err(Error::invalid(format!("record {i}: channel {c} length differs from record 0")));
                }
            }
        }
        Ok(Self {
            channel_lens,
            records,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let rec_len = 12 + 4 * self.channel_lens.iter().sum::<usize>();
        let mut out = Vec::with_capacity(29 + rec_len * self.records.len());
        out.extend_from_slice(DUMP_MAGIC);
        out.extend((self.records.len() as u32).to_le_bytes());
        for l in self.channel_lens {
            out.extend((l as u32).to_le_bytes());
        }
        for r in &self.records {
            out.extend((r.start_frame as u32).to_le_bytes());
            out.extend((r.mean_x as f32).to_le_bytes());
            out.extend((r.mean_y as f32).to_le_bytes());
            for ch in &r.channels {
                for v in ch {
                    out.extend((*v as f32).to_le_bytes());
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let err = |msg: String| Error::Artifact {
            path: path.to_path_buf(),
            msg,
        };
        if bytes.len() < 5 || &bytes[..4] != b"HODG" {
            return Err(err("not a descriptor dump (missing HODG magic)".into()));
        }
        if &bytes[..5] != DUMP_MAGIC {
            return Err(err(format!(
                "unsupported descriptor dump version '{}', expected '{}'",
                String::from_utf8_lossy(&bytes[..5]),
                String::from_utf8_lossy(DUMP_MAGIC)
            )));
        }
        let mut rd = &bytes[5..];
        let u32_at = |rd: &mut &[u8]| -> Result<u32> {
            let mut b = [0u8; 4];
            rd.read_exact(&mut b).map_err(|_| err("truncated descriptor dump".into()))?;
            Ok(u32::from_le_bytes(b))
        };
        let count = u32_at(&mut rd)? as usize;
        let mut channel_lens = [0usize; 5];
        for l in &mut channel_lens {
            *l = u32_at(&mut rd)? as usize;
        }
        let rec_len = 12 + 4 * channel_lens.iter().sum::<usize>();
        if rd.len() != count * rec_len {
            return Err(err(format!(
                "payload of {} bytes does not hold {count} records of {rec_len} bytes",
                rd.len()
            )));
        }
        let mut records = Vec::with_capacity(count);
        for rec in rd.chunks_exact(rec_len) {
            let f32_at = |o: usize| f32::from_le_bytes(rec[o..o + 4].try_into().unwrap());
            let start_frame = u32::from_le_bytes(rec[0..4].try_into().unwrap()) as usize;
            let mut off = 12;
            let channels = std::array::from_fn(|c| {
                let v: Vec<f64> = (0..channel_lens[c]).map(|i| f32_at(off + 4 * i) as f64).collect();
                off += 4 * channel_lens[c];
                v
            });
            records.push(TrajectoryDescriptor {
                start_frame,
                mean_x: f32_at(4) as f64,
                mean_y: f32_at(8) as f64,
                channels,
            });
        }
        Ok(Self {
            channel_lens,
            records,
        })
    }
}

pub fn write_descriptor_dump(path: impl AsRef<Path>, dump: &DescriptorDump) -> Result<()> {
    let path = path.as_ref();
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&dump.encode()))
        .map_err(|e| Error::io(path, e))
}

pub fn read_descriptor_dump(path: impl AsRef<Path>) -> Result<DescriptorDump> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    DescriptorDump::decode(&bytes, path)
}
