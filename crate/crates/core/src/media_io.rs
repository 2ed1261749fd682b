//! Frame and sequence I/O.
//!
//! RGB frames are binary PPM (P6, maxval 255) and depth frames binary PGM
//! (P5, maxval 65535, big-endian samples, millimeters, 0 = missing). A JSON
//! manifest ties the two streams together. Samples are never rescaled on load.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest frame side that fits one 32×32 window plus a 16-pixel block margin.
pub const MIN_FRAME_SIDE: usize = 48;

/// Frames in one trajectory; shorter sequences cannot produce descriptors.
pub const MIN_SEQUENCE_FRAMES: usize = 15;

/// Invalid-depth sentinel in millimeters.
pub const DEPTH_INVALID: u16 = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples.
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    /// Row-major depth in millimeters.
    pub data: Vec<u16>,
}

/// 8-bit luma plane used for block matching and HOG.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::invalid(format!(
                "rgb frame {width}x{height} needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Luma with weights 0.299/0.587/0.114, rounded to nearest.
    pub fn to_gray(&self) -> GrayFrame {
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect();
        GrayFrame {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
        .round()
        .min(255.0) as u8
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "depth frame {width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn at(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "gray frame {width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }
}

struct PnmHeader {
    width: usize,
    height: usize,
    maxval: usize,
    data_offset: usize,
}

fn parse_pnm_header(bytes: &[u8], magic: &[u8; 2], path: &Path) -> Result<PnmHeader> {
    let err = |offset: usize, msg: String| Error::Format {
        path: path.to_path_buf(),
        offset,
        msg,
    };
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(err(
            0,
            format!("expected magic {}", String::from_utf8_lossy(magic)),
        ));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // whitespace and '#' comments before each field
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            let name = ["width", "height", "maxval"][i];
            return Err(err(start, format!("expected {name}")));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(start, "header value out of range".into()))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(err(pos, "expected single whitespace after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(err(2, format!("empty image {width}x{height}")));
    }
    Ok(PnmHeader {
        width,
        height,
        maxval,
        data_offset: pos,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn decode_rgb(bytes: &[u8], path: &Path) -> Result<RgbFrame> {
    let h = parse_pnm_header(bytes, b"P6", path)?;
    if h.maxval != 255 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: h.data_offset,
            msg: format!("maxval {} unsupported, expected 255", h.maxval),
        });
    }
    let need = h.width * h.height * 3;
    let payload = &bytes[h.data_offset..];
    if payload.len() < need {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: bytes.len(),
            msg: format!("truncated payload: {} of {need} bytes", payload.len()),
        });
    }
    RgbFrame::new(h.width, h.height, payload[..need].to_vec())
}

pub fn decode_depth(bytes: &[u8], path: &Path) -> Result<DepthFrame> {
    let h = parse_pnm_header(bytes, b"P5", path)?;
    if h.maxval != 65535 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: h.data_offset,
            msg: format!("maxval {} unsupported, expected 65535", h.maxval),
        });
    }
    let need = h.width * h.height * 2;
    let payload = &bytes[h.data_offset..];
    if payload.len() < need {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: bytes.len(),
            msg: format!("truncated payload: {} of {need} bytes", payload.len()),
        });
    }
    let data = payload[..need]
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    DepthFrame::new(h.width, h.height, data)
}

pub fn encode_rgb(frame: &RgbFrame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.data);
    out
}

pub fn encode_depth(frame: &DepthFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", frame.width, frame.height).into_bytes();
    out.reserve(frame.data.len() * 2);
    for v in &frame.data {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn load_rgb_frame(path: impl AsRef<Path>) -> Result<RgbFrame> {
    let path = path.as_ref();
    decode_rgb(&read_file(path)?, path)
}

pub fn load_depth_frame(path: impl AsRef<Path>) -> Result<DepthFrame> {
    let path = path.as_ref();
    decode_depth(&read_file(path)?, path)
}

pub fn write_rgb_frame(path: impl AsRef<Path>, frame: &RgbFrame) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_rgb(frame)).map_err(|e| Error::io(path, e))
}

pub fn write_depth_frame(path: impl AsRef<Path>, frame: &DepthFrame) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_depth(frame)).map_err(|e| Error::io(path, e))
}

/// On-disk manifest layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestFile {
    pub frame_count: usize,
    pub rgb: Vec<PathBuf>,
    pub depth: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    /// Optional motion sidecar used instead of block matching.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<PathBuf>,
}

/// A validated sequence: equal-length stream lists with resolved paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceManifest {
    pub path: PathBuf,
    pub frame_count: usize,
    pub rgb_paths: Vec<PathBuf>,
    pub depth_paths: Vec<PathBuf>,
    pub label: Option<String>,
    pub fps_nominal: Option<f64>,
    pub motion_path: Option<PathBuf>,
    pub width: usize,
    pub height: usize,
}

/// Frames of a sequence held in memory.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub rgb: Vec<RgbFrame>,
    pub depth: Vec<DepthFrame>,
}

impl Sequence {
    pub fn new(rgb: Vec<RgbFrame>, depth: Vec<DepthFrame>) -> Result<Self> {
        if rgb.len() != depth.len() {
            return Err(Error::invalid(format!(
                "{} rgb frames but {} depth frames",
                rgb.len(),
                depth.len()
            )));
        }
        let Some(first) = rgb.first() else {
            return Err(Error::invalid("empty sequence"));
        };
        let (w, h) = (first.width, first.height);
        if w < MIN_FRAME_SIDE || h < MIN_FRAME_SIDE {
            return Err(Error::invalid(format!(
                "frames {w}x{h} smaller than {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}"
            )));
        }
        for (i, (r, d)) in rgb.iter().zip(&depth).enumerate() {
            if (r.width, r.height) != (w, h) || (d.width, d.height) != (w, h) {
                return Err(Error::invalid(format!(
                    "frame {i}: dimensions differ from frame 0 ({w}x{h})"
                )));
            }
        }
        Ok(Self { rgb, depth })
    }

    pub fn len(&self) -> usize {
        self.rgb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rgb.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rgb[0].width, self.rgb[0].height)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads and validates a manifest. Relative paths resolve against the
/// manifest's directory; the first frame pair is decoded to check that the
/// two streams agree in size.
pub fn open_sequence(manifest_path: impl AsRef<Path>) -> Result<SequenceManifest> {
    let path = manifest_path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ManifestFile = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let merr = |msg: String| Error::Manifest {
        path: path.to_path_buf(),
        msg,
    };
    if file.rgb.len() != file.depth.len() || file.rgb.len() != file.frame_count {
        return Err(merr(format!(
            "list length mismatch: frame_count {}, {} rgb paths, {} depth paths",
            file.frame_count,
            file.rgb.len(),
            file.depth.len()
        )));
    }
    if file.frame_count < MIN_SEQUENCE_FRAMES {
        return Err(merr(format!(
            "sequence shorter than trajectory length ({} < {MIN_SEQUENCE_FRAMES} frames)",
            file.frame_count
        )));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let rgb_paths: Vec<_> = file.rgb.iter().map(|p| resolve(base, p)).collect();
    let depth_paths: Vec<_> = file.depth.iter().map(|p| resolve(base, p)).collect();
    for p in rgb_paths.iter().chain(&depth_paths) {
        if !p.is_file() {
            return Err(merr(format!("missing frame file {}", p.display())));
        }
    }
    let rgb0 = load_rgb_frame(&rgb_paths[0])?;
    let depth0 = load_depth_frame(&depth_paths[0])?;
    if (rgb0.width, rgb0.height) != (depth0.width, depth0.height) {
        return Err(merr(format!(
            "dimension mismatch: rgb {}x{} vs depth {}x{}",
            rgb0.width, rgb0.height, depth0.width, depth0.height
        )));
    }
    let motion_path = file.motion.as_deref().map(|p| resolve(base, p));
    Ok(SequenceManifest {
        path: path.to_path_buf(),
        frame_count: file.frame_count,
        rgb_paths,
        depth_paths,
        label: file.label,
        fps_nominal: file.fps,
        motion_path,
        width: rgb0.width,
        height: rgb0.height,
    })
}

impl SequenceManifest {
    /// Decodes every frame of the sequence.
    pub fn load(&self) -> Result<Sequence> {
        let rgb = crate::par::map(&self.rgb_paths, |p| load_rgb_frame(p))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let depth = crate::par::map(&self.depth_paths, |p| load_depth_frame(p))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Sequence::new(rgb, depth).map_err(|e| Error::Manifest {
            path: self.path.clone(),
            msg: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn black_ppm() {
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend([0u8; 12]);
        let f = decode_rgb(&bytes, p()).unwrap();
        assert_eq!((f.width, f.height), (2, 2));
        assert_eq!(f.data, vec![0u8; 12]);
    }

    #[test]
    fn ppm_truncated() {
        let mut bytes = b"P6 4 4 255\n".to_vec();
        bytes.extend([0u8; 24]);
        match decode_rgb(&bytes, p()) {
            Err(Error::Format { offset, msg, .. }) => {
                assert_eq!(offset, bytes.len());
                assert!(msg.contains("truncated"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ppm_bad_maxval_and_magic() {
        let mut bytes = b"P6\n1 1\n65535\n".to_vec();
        bytes.extend([0u8; 6]);
        assert!(matches!(decode_rgb(&bytes, p()), Err(Error::Format { .. })));
        assert!(matches!(
            decode_rgb(b"P3\n1 1\n255\n000", p()),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(matches!(
            decode_rgb(b"P6\n1 x\n255\n000", p()),
            Err(Error::Format { offset: 5, .. })
        ));
    }

    #[test]
    fn ppm_header_comments() {
        let mut bytes = b"P6\n# made by hand\n1 1\n255\n".to_vec();
        bytes.extend([1u8, 2, 3]);
        assert_eq!(decode_rgb(&bytes, p()).unwrap().data, vec![1, 2, 3]);
    }

    #[test]
    fn constant_pgm() {
        let mut bytes = b"P5\n2 2\n65535\n".to_vec();
        for _ in 0..4 {
            bytes.extend(1000u16.to_be_bytes());
        }
        let d = decode_depth(&bytes, p()).unwrap();
        assert_eq!(d.data, vec![1000; 4]);
    }

    #[test]
    fn pgm_big_endian() {
        let bytes = [b"P5 1 1 65535\n".as_slice(), &[0x03, 0xE8]].concat();
        assert_eq!(decode_depth(&bytes, p()).unwrap().data, vec![1000]);
    }

    #[test]
    fn pgm_errors() {
        assert!(decode_depth(b"P5 1 1 255\n\x00", p()).is_err());
        assert!(decode_depth(b"P5 2 1 65535\n\x00\x01", p()).is_err());
        assert!(decode_depth(b"P5 2", p()).is_err());
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_rgb_frame("/nonexistent/x.ppm"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn gray_weights() {
        assert_eq!(luma(255, 255, 255), 255);
        assert_eq!(luma(0, 0, 0), 0);
        assert_eq!(luma(100, 0, 0), 30);
        assert_eq!(luma(0, 100, 0), 59);
        assert_eq!(luma(0, 0, 100), 11);
    }

    #[test]
    fn sequence_checks_size() {
        let r = RgbFrame::new(40, 40, vec![0; 40 * 40 * 3]).unwrap();
        let d = DepthFrame::new(40, 40, vec![0; 1600]).unwrap();
        assert!(Sequence::new(vec![r], vec![d]).is_err());
    }
}
