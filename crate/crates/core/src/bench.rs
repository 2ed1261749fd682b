//! Throughput measurement for the extraction pipelines.
//!
//! Motion fields are obtained before timing starts, the way a compressed
//! stream hands over its decoded vectors. The timed stages are frame
//! preparation (`io`), trajectory construction (`motion`) and descriptor
//! computation (`descriptors`).

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::descriptors::{extract_descriptors, ChannelMask, DescriptorConfig, ExtractionInput};
use crate::error::{Error, Result};
use crate::media_io::{Sequence, SequenceManifest};
use crate::motion::{build_trajectories, MotionField, TrajectoryParams};
use crate::par;
use crate::pipeline::{gray_frames, sequence_motion, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BenchPipeline {
    #[serde(rename = "rgb-trio")]
    RgbTrio,
    #[serde(rename = "hodg")]
    Hodg,
    #[serde(rename = "combined")]
    Combined,
}

impl BenchPipeline {
    pub fn mask(self) -> ChannelMask {
        match self {
            BenchPipeline::RgbTrio => ChannelMask::RGB_TRIO,
            BenchPipeline::Hodg => ChannelMask::HODG,
            BenchPipeline::Combined => ChannelMask::ALL,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BenchPipeline::RgbTrio => "rgb-trio",
            BenchPipeline::Hodg => "hodg",
            BenchPipeline::Combined => "combined",
        }
    }
}

impl std::str::FromStr for BenchPipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgb-trio" => Ok(BenchPipeline::RgbTrio),
            "hodg" => Ok(BenchPipeline::Hodg),
            "combined" => Ok(BenchPipeline::Combined),
            other => Err(Error::Config(format!(
                "unknown pipeline '{other}' (expected rgb-trio, hodg or combined)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageSeconds {
    pub io: f64,
    pub motion: f64,
    pub descriptors: f64,
}

impl StageSeconds {
    pub fn total(&self) -> f64 {
        self.io + self.motion + self.descriptors
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpsReport {
    pub pipeline: String,
    pub frames_processed: usize,
    /// Wall time of the median repeat.
    pub wall_seconds: f64,
    pub fps: f64,
    pub stages: StageSeconds,
    /// Decoding and motion preparation done once before timing.
    pub preload_seconds: f64,
    pub workers: usize,
    pub repeats: usize,
    pub warmup: usize,
    pub trajectories: usize,
}

impl FpsReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "pipeline    {}", self.pipeline);
        let _ = writeln!(out, "frames      {}", self.frames_processed);
        let _ = writeln!(out, "trajectories {}", self.trajectories);
        let _ = writeln!(out, "wall        {:.4} s (median of {})", self.wall_seconds, self.repeats);
        let _ = writeln!(out, "fps         {:.1}", self.fps);
        let _ = writeln!(out, "  io          {:.4} s", self.stages.io);
        let _ = writeln!(out, "  motion      {:.4} s", self.stages.motion);
        let _ = writeln!(out, "  descriptors {:.4} s", self.stages.descriptors);
        let _ = writeln!(out, "preload     {:.4} s", self.preload_seconds);
        let _ = writeln!(out, "workers     {}", self.workers);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchOptions {
    pub repeats: usize,
    pub warmup: usize,
    /// 1 times a single worker; 0 uses the default pool.
    pub workers: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            repeats: 5,
            warmup: 1,
            workers: 1,
        }
    }
}

impl BenchOptions {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        Ok(())
    }
}

/// Runs `run` `warmup` times untimed and `repeats` times timed, returning the
/// median repeat by wall time together with that repeat's own result.
pub fn median_of<R>(repeats: usize, warmup: usize, mut run: impl FnMut() -> R) -> (f64, R) {
    assert!(repeats > 0, "repeats must be positive");
    for _ in 0..warmup {
        run();
    }
    let mut timed: Vec<(f64, R)> = (0..repeats)
        .map(|_| {
            let t = Instant::now();
            let r = run();
            (t.elapsed().as_secs_f64(), r)
        })
        .collect();
    timed.sort_by(|a, b| a.0.total_cmp(&b.0));
    timed.swap_remove(repeats / 2)
}

/// One pass over a preloaded sequence; returns stage times and trajectory count.
pub fn run_once(
    seq: &Sequence,
    fields: &[MotionField],
    mask: ChannelMask,
    params: &TrajectoryParams,
    cfg: &DescriptorConfig,
) -> Result<(StageSeconds, usize)> {
    let t = Instant::now();
    let gray = if mask.needs_rgb() { gray_frames(seq) } else { Vec::new() };
    let io = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let trajectories = build_trajectories(fields, seq.dims(), params);
    let motion = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let input = ExtractionInput {
        gray: &gray,
        depth: &seq.depth,
        fields,
    };
    let descs = extract_descriptors(&trajectories, &input, cfg, mask)?;
    let descriptors = t.elapsed().as_secs_f64();
    std::hint::black_box(&descs);
    Ok((StageSeconds { io, motion, descriptors }, trajectories.len()))
}

pub fn measure_fps_preloaded(
    seq: &Sequence,
    fields: &[MotionField],
    pipeline: BenchPipeline,
    opts: &BenchOptions,
    config: &PipelineConfig,
) -> Result<FpsReport> {
    opts.validate()?;
    config.validate()?;
    let params = config.trajectory_params();
    let mask = pipeline.mask();
    let body = || median_of(opts.repeats, opts.warmup, || run_once(seq, fields, mask, &params, &config.descriptor));
    let (wall, res) = if opts.workers == 0 {
        body()
    } else {
        par::with_workers(opts.workers, body)
    };
    let (stages, trajectories) = res?;
    Ok(FpsReport {
        pipeline: pipeline.name().to_string(),
        frames_processed: seq.len(),
        wall_seconds: wall,
        fps: seq.len() as f64 / wall.max(f64::MIN_POSITIVE),
        stages,
        preload_seconds: 0.0,
        workers: if opts.workers == 0 { default_workers() } else { opts.workers },
        repeats: opts.repeats,
        warmup: opts.warmup,
        trajectories,
    })
}

/// Loads the sequence and its motion, then times the selected pipeline.
pub fn measure_fps(
    manifest: &SequenceManifest,
    pipeline: BenchPipeline,
    opts: &BenchOptions,
    config: &PipelineConfig,
) -> Result<FpsReport> {
    opts.validate()?;
    let t = Instant::now();
    let seq = manifest.load()?;
    let fields = sequence_motion(Some(manifest), &gray_frames(&seq), config)?;
    let preload = t.elapsed().as_secs_f64();
    let mut report = measure_fps_preloaded(&seq, &fields, pipeline, opts, config)?;
    report.preload_seconds = preload;
    Ok(report)
}

fn default_workers() -> usize {
    if par::is_parallel() {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        1
    }
}
