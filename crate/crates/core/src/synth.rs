//! Seeded synthetic RGBD action sequences.
//!
//! Three classes, each a smoothly textured patch over a static textured
//! background at 3000 mm:
//!
//! * `translate`: the patch slides along +x and sits at background depth, so
//!   its depth image is flat.
//! * `rotate`: a disk spins in place; its depth is a tilted plane whose slope
//!   direction turns with the texture.
//! * `approach`: slides exactly like `translate` in RGB, but its depth is a
//!   dome that rises toward the camera every frame. Only depth tells it apart.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media_io::{
    self, DepthFrame, ManifestFile, RgbFrame, Sequence, SequenceManifest, MIN_FRAME_SIDE,
    MIN_SEQUENCE_FRAMES,
};

const BACKGROUND_DEPTH: f64 = 3000.0;
const TEXTURE_CELL: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthClass {
    Translate,
    Rotate,
    Approach,
}

impl SynthClass {
    pub const ALL: [SynthClass; 3] = [SynthClass::Translate, SynthClass::Rotate, SynthClass::Approach];

    pub fn name(self) -> &'static str {
        match self {
            SynthClass::Translate => "translate",
            SynthClass::Rotate => "rotate",
            SynthClass::Approach => "approach",
        }
    }
}

impl std::str::FromStr for SynthClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SynthClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown synthetic class '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub class: SynthClass,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub texture_seed: u64,
    /// Pixels per frame for the sliding classes; rotation speed is 3° per unit.
    pub magnitude: u32,
}

impl SynthSpec {
    pub fn new(class: SynthClass) -> Self {
        Self {
            class,
            frames: 30,
            width: 160,
            height: 128,
            texture_seed: 0,
            magnitude: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames < MIN_SEQUENCE_FRAMES {
            return Err(Error::Config(format!(
                "synthetic sequence needs at least {MIN_SEQUENCE_FRAMES} frames"
            )));
        }
        if self.width < MIN_FRAME_SIDE.max(96) || self.height < MIN_FRAME_SIDE.max(96) {
            return Err(Error::Config("synthetic frames must be at least 96x96".into()));
        }
        let travel = 8 + self.magnitude as usize * (self.frames - 1) + 48;
        if matches!(self.class, SynthClass::Translate | SynthClass::Approach) && travel + 8 > self.width {
            return Err(Error::Config(format!(
                "patch travel of {travel}px does not fit a {}px wide frame",
                self.width
            )));
        }
        Ok(())
    }
}

/// Smooth value-noise texture: random lattice every few pixels, bilinear in between.
struct Texture {
    w: usize,
    h: usize,
    lattice: Vec<[f64; 3]>,
}

impl Texture {
    fn new(w: usize, h: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Self {
        let (lw, lh) = (w / TEXTURE_CELL + 2, h / TEXTURE_CELL + 2);
        let lattice = (0..lw * lh)
            .map(|_| std::array::from_fn(|_| rng.random_range(lo..hi)))
            .collect();
        Self { w: lw, h: lh, lattice }
    }

    fn sample(&self, x: f64, y: f64) -> [u8; 3] {
        let fx = (x / TEXTURE_CELL as f64).clamp(0.0, (self.w - 2) as f64);
        let fy = (y / TEXTURE_CELL as f64).clamp(0.0, (self.h - 2) as f64);
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        let (tx, ty) = (fx - ix as f64, fy - iy as f64);
        let at = |x: usize, y: usize| self.lattice[y * self.w + x];
        let (a, b, c, d) = (at(ix, iy), at(ix + 1, iy), at(ix, iy + 1), at(ix + 1, iy + 1));
        std::array::from_fn(|k| {
            let top = a[k] * (1.0 - tx) + b[k] * tx;
            let bot = c[k] * (1.0 - tx) + d[k] * tx;
            (top * (1.0 - ty) + bot * ty).round().clamp(0.0, 255.0) as u8
        })
    }
}

/// Renders a sequence in memory. Identical inputs give identical frames.
pub fn render_sequence(spec: &SynthSpec, seed: u64) -> Result<Sequence> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut tex_rng = ChaCha8Rng::seed_from_u64(spec.texture_seed);
    let background = Texture::new(w, h, 40.0, 140.0, &mut tex_rng);
    let patch_tex = Texture::new(64, 64, 110.0, 250.0, &mut tex_rng);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patch = 48usize;
    let x0 = 8 + rng.random_range(0..=4) as usize;
    let y0 = ((h - patch) / 2) as i64 + rng.random_range(-8..=8);
    let tilt = rng.random_range(0.0..360.0f64);
    let m = spec.magnitude as f64;

    let mut rgb_frames = Vec::with_capacity(spec.frames);
    let mut depth_frames = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let mut rgb = Vec::with_capacity(w * h * 3);
        let mut depth = Vec::with_capacity(w * h);
        let tf = t as f64;
        for y in 0..h {
            for x in 0..w {
                let (xf, yf) = (x as f64, y as f64);
                let mut color = background.sample(xf, yf);
                let mut z = BACKGROUND_DEPTH;
                match spec.class {
                    SynthClass::Translate | SynthClass::Approach => {
                        let px = xf - (x0 as f64 + m * tf);
                        let py = yf - y0 as f64;
                        let half = patch as f64 / 2.0;
                        if (0.0..patch as f64).contains(&px) && (0.0..patch as f64).contains(&py) {
                            color = patch_tex.sample(px + 4.0, py + 4.0);
                            if spec.class == SynthClass::Approach {
                                let r = ((px - half + 0.5).powi(2) + (py - half + 0.5).powi(2)).sqrt() / half;
                                if r < 1.0 {
                                    let lift = 300.0 + 40.0 * tf;
                                    z -= lift * (0.5 * PI * r).cos().powi(2);
                                }
                            }
                        }
                    }
                    SynthClass::Rotate => {
                        let (cx, cy) = (w as f64 / 2.0, y0 as f64 + patch as f64 / 2.0);
                        let (dx, dy) = (xf + 0.5 - cx, yf + 0.5 - cy);
                        let radius = patch as f64 / 2.0;
                        if dx.hypot(dy) < radius {
                            let angle = (3.0 * m * tf).to_radians();
                            let (s, c) = angle.sin_cos();
                            // inverse-rotate into texture coordinates
                            let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
                            color = patch_tex.sample(u + 32.0, v + 32.0);
                            let dir = (tilt + 3.0 * m * tf).to_radians();
                            z = 2600.0 + 8.0 * (dx * dir.cos() + dy * dir.sin());
                        }
                    }
                }
                rgb.extend_from_slice(&color);
                depth.push(z.round().clamp(1.0, 65535.0) as u16);
            }
        }
        // sparse sensor dropouts
        for _ in 0..(w * h / 1000) {
            let i = rng.random_range(0..w * h);
            depth[i] = media_io::DEPTH_INVALID;
        }
        rgb_frames.push(RgbFrame::new(w, h, rgb)?);
        depth_frames.push(DepthFrame::new(w, h, depth)?);
    }
    Sequence::new(rgb_frames, depth_frames)
}

/// Renders a sequence and writes `rgb_NNN.ppm`, `depth_NNN.pgm` and
/// `manifest.json` into `out_dir`.
pub fn synth_sequence(spec: &SynthSpec, seed: u64, out_dir: impl AsRef<Path>) -> Result<SequenceManifest> {
    let out_dir = out_dir.as_ref();
    let seq = render_sequence(spec, seed)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rgb = Vec::new();
    let mut depth = Vec::new();
    for (t, (r, d)) in seq.rgb.iter().zip(&seq.depth).enumerate() {
        let rn = PathBuf::from(format!("rgb_{t:03}.ppm"));
        let dn = PathBuf::from(format!("depth_{t:03}.pgm"));
        media_io::write_rgb_frame(out_dir.join(&rn), r)?;
        media_io::write_depth_frame(out_dir.join(&dn), d)?;
        rgb.push(rn);
        depth.push(dn);
    }
    let manifest = ManifestFile {
        frame_count: seq.len(),
        rgb,
        depth,
        label: Some(spec.class.name().to_string()),
        fps: Some(30.0),
        motion: None,
    };
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::invalid(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    media_io::open_sequence(&path)
}

/// Train/test split over sequence manifests, paths relative to the split file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub train: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
}

/// Writes `per_class` sequences of every class under `out_dir`, the first
/// `train_per_class` of each going to the train split, and a `split.json`.
pub fn synth_corpus(
    out_dir: impl AsRef<Path>,
    template: &SynthSpec,
    per_class: usize,
    train_per_class: usize,
    seed: u64,
) -> Result<PathBuf> {
    let out_dir = out_dir.as_ref();
    if train_per_class == 0 || train_per_class >= per_class {
        return Err(Error::Config(format!(
            "train_per_class must be in 1..{per_class}, got {train_per_class}"
        )));
    }
    let mut jobs = Vec::new();
    for (ci, class) in SynthClass::ALL.into_iter().enumerate() {
        for i in 0..per_class {
            let spec = SynthSpec {
                class,
                texture_seed: seed.wrapping_mul(1_000_003).wrapping_add((ci * 1000 + i) as u64),
                ..*template
            };
            let rel = PathBuf::from(format!("{}_{i:02}", class.name()));
            jobs.push((spec, seed.wrapping_add((ci * 7919 + i) as u64), rel, i < train_per_class));
        }
    }
    let made = crate::par::map(&jobs, |(spec, s, rel, _)| synth_sequence(spec, *s, out_dir.join(rel)));
    let mut split = SplitManifest { train: vec![], test: vec![] };
    for ((_, _, rel, train), m) in jobs.iter().zip(made) {
        m?;
        let p = rel.join("manifest.json");
        if *train {
            split.train.push(p);
        } else {
            split.test.push(p);
        }
    }
    let path = out_dir.join("split.json");
    let text = serde_json::to_string_pretty(&split).map_err(|e| Error::invalid(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
