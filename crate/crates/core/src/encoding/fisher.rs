use std::io::Write;
use std::path::Path;

use super::gmm::{posteriors_into, precompute, GmmCodebook};
use crate::descriptors::Channel;
use crate::error::{Error, Result};
use crate::par;

const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct FisherVector {
    pub channel: Channel,
    /// `K × D`, component-major.
    pub values: Vec<f64>,
    pub normalized: bool,
}

/// First-order Fisher statistics, before any normalization:
///
/// `G(k, d) = 1 / (N √w_k) · Σ_i γ_k(x_i) (x_id − μ_kd) / σ_kd`
pub fn fisher_first_order(cb: &GmmCodebook, descriptors: &[Vec<f64>]) -> Result<Vec<f64>> {
    if descriptors.is_empty() {
        return Err(Error::invalid("cannot encode an empty descriptor set"));
    }
    if let Some(bad) = descriptors.iter().find(|x| x.len() != cb.d) {
        return Err(Error::invalid(format!(
            "descriptor dimension {} does not match codebook dimension {}",
            bad.len(),
            cb.d
        )));
    }
    let (k, d) = (cb.k, cb.d);
    let (consts, inv) = precompute(cb);
    let std: Vec<f64> = cb.variances.iter().map(|v| v.sqrt()).collect();
    let partials = par::map_chunks(descriptors, CHUNK, |chunk| {
        let mut acc = vec![0.0; k * d];
        let mut gamma = vec![0.0; k];
        for x in chunk {
            posteriors_into(cb, &consts, &inv, x, &mut gamma);
            for (c, &g) in gamma.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let mu = cb.mean(c);
                let row = &mut acc[c * d..(c + 1) * d];
                for i in 0..d {
                    row[i] += g * (x[i] - mu[i]);
                }
            }
        }
        acc
    });
    let mut g = vec![0.0; k * d];
    for p in &partials {
        g.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    let n = descriptors.len() as f64;
    for c in 0..k {
        let scale = 1.0 / (n * cb.weights[c].sqrt());
        for i in 0..d {
            g[c * d + i] *= scale / std[c * d + i];
        }
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite Fisher vector entry".into()));
    }
    Ok(g)
}

/// Signed square root per element followed by global l2 normalization.
/// An all-zero vector stays zero.
pub fn ssr_l2_normalize(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = x.signum() * x.abs().sqrt();
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

pub fn fisher_encode(cb: &GmmCodebook, descriptors: &[Vec<f64>], channel: Channel) -> Result<FisherVector> {
    let mut values = fisher_first_order(cb, descriptors)?;
    ssr_l2_normalize(&mut values);
    Ok(FisherVector {
        channel,
        values,
        normalized: true,
    })
}

/// Concatenates per-channel vectors in canonical channel order, regardless
/// of the order they are passed in.
pub fn concat_channels(fvs: &[FisherVector]) -> Result<Vec<f64>> {
    let mut slots: [Option<&FisherVector>; 5] = Default::default();
    for fv in fvs {
        let slot = &mut slots[fv.channel.index()];
        if slot.is_some() {
            return Err(Error::invalid(format!("channel {} given twice", fv.channel)));
        }
        *slot = Some(fv);
    }
    Ok(slots
        .iter()
        .flatten()
        .flat_map(|fv| fv.values.iter().copied())
        .collect())
}

pub const FV_MAGIC: &[u8; 5] = b"FVEC1";

/// Video-level vectors with `u16` label ids (`u16::MAX` = unlabeled).
#[derive(Debug, Clone, PartialEq)]
pub struct FvDump {
    pub dim: usize,
    pub rows: Vec<(u16, Vec<f64>)>,
}

impl FvDump {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + self.rows.len() * (2 + 4 * self.dim));
        out.extend_from_slice(FV_MAGIC);
        out.extend((self.rows.len() as u32).to_le_bytes());
        out.extend((self.dim as u32).to_le_bytes());
        for (label, v) in &self.rows {
            out.extend(label.to_le_bytes());
            for x in v {
                out.extend((*x as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let err = |msg: String| Error::Artifact {
            path: path.to_path_buf(),
            msg,
        };
        if bytes.len() < 13 || &bytes[..4] != b"FVEC" {
            return Err(err("not a Fisher vector dump (missing FVEC magic)".into()));
        }
        if &bytes[..5] != FV_MAGIC {
            return Err(err(format!(
                "unsupported Fisher vector dump version '{}'",
                String::from_utf8_lossy(&bytes[..5])
            )));
        }
        let count = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
        let rec = 2 + 4 * dim;
        let payload = &bytes[13..];
        if payload.len() != count * rec {
            return Err(err(format!("payload of {} bytes does not hold {count} rows of dim {dim}", payload.len())));
        }
        let rows = payload
            .chunks_exact(rec)
            .map(|r| {
                let label = u16::from_le_bytes([r[0], r[1]]);
                let v = r[2..]
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                    .collect();
                (label, v)
            })
            .collect();
        Ok(Self { dim, rows })
    }
}

pub fn write_fv_dump(path: impl AsRef<Path>, dump: &FvDump) -> Result<()> {
    let path = path.as_ref();
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&dump.encode()))
        .map_err(|e| Error::io(path, e))
}

pub fn read_fv_dump(path: impl AsRef<Path>) -> Result<FvDump> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    FvDump::decode(&bytes, path)
}
