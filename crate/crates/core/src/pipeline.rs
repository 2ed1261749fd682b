//! Configuration and the end-to-end extract → encode → classify driver.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::classify::{evaluate, train_svm, EvalReport, SvmModel, SvmParams};
use crate::descriptors::{
    extract_descriptors, Channel, ChannelMask, DescriptorConfig, ExtractionInput, TrajectoryDescriptor,
};
use crate::encoding::{concat_channels, fisher_encode, train_gmm, FvDump, GmmCodebook, GmmParams, Pca};
use crate::error::{Error, Result, StageExt};
use crate::media_io::{self, GrayFrame, Sequence, SequenceManifest};
use crate::motion::{
    build_trajectories, estimate_sequence_motion, read_motion_sidecar, MotionField, TrajectoryParams,
    DEFAULT_BLOCK_SIZE, DEFAULT_SEARCH_RANGE,
};
use crate::par;
use crate::synth::SplitManifest;

/// Which descriptor channels feed the video representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelSet {
    /// HOG, HOF, MBHx and MBHy.
    #[serde(rename = "rgb-trio")]
    RgbTrio,
    #[serde(rename = "hodg")]
    Hodg,
    #[serde(rename = "rgb+hodg", alias = "combined")]
    RgbHodg,
}

impl ChannelSet {
    pub const ALL: [ChannelSet; 3] = [ChannelSet::RgbTrio, ChannelSet::Hodg, ChannelSet::RgbHodg];

    pub fn mask(self) -> ChannelMask {
        match self {
            ChannelSet::RgbTrio => ChannelMask::RGB_TRIO,
            ChannelSet::Hodg => ChannelMask::HODG,
            ChannelSet::RgbHodg => ChannelMask::ALL,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelSet::RgbTrio => "rgb-trio",
            ChannelSet::Hodg => "hodg",
            ChannelSet::RgbHodg => "rgb+hodg",
        }
    }

    /// Row label in the style `MF(RGB)`, `MF(HODG)`, `MF(RGB+HODG)`.
    pub fn row_label(self) -> &'static str {
        match self {
            ChannelSet::RgbTrio => "MF(RGB)",
            ChannelSet::Hodg => "MF(HODG)",
            ChannelSet::RgbHodg => "MF(RGB+HODG)",
        }
    }
}

impl std::str::FromStr for ChannelSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgb-trio" | "rgb" => Ok(ChannelSet::RgbTrio),
            "hodg" => Ok(ChannelSet::Hodg),
            "rgb+hodg" | "combined" => Ok(ChannelSet::RgbHodg),
            other => Err(Error::Config(format!(
                "unknown channel set '{other}' (expected rgb-trio, hodg or rgb+hodg)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub block_size: usize,
    pub search_range: usize,
    pub tau: f64,
    pub stride: usize,
    pub descriptor: DescriptorConfig,
    pub gmm: GmmParams,
    /// PCA output dimension per channel; `None` disables PCA.
    pub pca_dim: Option<usize>,
    pub svm: SvmParams,
    pub channels: ChannelSet,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            block_size: DEFAULT_BLOCK_SIZE,
            search_range: DEFAULT_SEARCH_RANGE,
            tau: 1.0,
            stride: 5,
            descriptor: DescriptorConfig::default(),
            gmm: GmmParams::default(),
            pca_dim: None,
            svm: SvmParams::default(),
            channels: ChannelSet::RgbHodg,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.block_size == 0 {
            return bad("block_size must be positive".into());
        }
        if self.search_range == 0 {
            return bad("search_range must be at least 1".into());
        }
        if !(self.tau >= 0.0) {
            return bad(format!("tau must be >= 0, got {}", self.tau));
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        self.descriptor.validate()?;
        if self.gmm.k == 0 || self.gmm.max_iter == 0 || self.gmm.subsample_cap == 0 {
            return bad("gmm.k, gmm.max_iter and gmm.subsample_cap must be positive".into());
        }
        if !(self.gmm.variance_floor_ratio > 0.0) {
            return bad("gmm.variance_floor_ratio must be positive".into());
        }
        if self.pca_dim == Some(0) {
            return bad("pca_dim must be positive when set".into());
        }
        if !(self.svm.c > 0.0) || self.svm.epochs == 0 || !(self.svm.bias_scale >= 0.0) {
            return bad("svm.C and svm.epochs must be positive, svm.bias_scale non-negative".into());
        }
        Ok(())
    }

    pub fn trajectory_params(&self) -> TrajectoryParams {
        TrajectoryParams {
            stride: self.stride,
            tau: self.tau,
            length: self.descriptor.traj_len,
            window: self.descriptor.window,
        }
    }

    /// Parses a config. A `version` key is optional but must match when present.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        if let Some(obj) = v.as_object_mut() {
            if let Some(ver) = obj.remove("version") {
                if ver.as_u64() != Some(artifact::ARTIFACT_VERSION) {
                    return Err(Error::Config(format!(
                        "stale config version {ver}, expected {}",
                        artifact::ARTIFACT_VERSION
                    )));
                }
            }
        }
        let cfg: PipelineConfig = serde_json::from_value(v).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pretty JSON with the artifact `version` field.
    pub fn to_json(&self) -> String {
        artifact::to_json(self).expect("config serializes to an object")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

pub fn gray_frames(seq: &Sequence) -> Vec<GrayFrame> {
    par::map(&seq.rgb, |f| f.to_gray())
}

/// Motion for a sequence: the manifest's sidecar when present, else block matching.
pub fn sequence_motion(
    manifest: Option<&SequenceManifest>,
    gray: &[GrayFrame],
    config: &PipelineConfig,
) -> Result<Vec<MotionField>> {
    if let Some(path) = manifest.and_then(|m| m.motion_path.as_ref()) {
        let fields = read_motion_sidecar(path)?;
        if fields.len() + 1 < gray.len() {
            return Err(Error::invalid(format!(
                "{}: {} motion fields for {} frames",
                path.display(),
                fields.len(),
                gray.len()
            )));
        }
        return Ok(fields);
    }
    estimate_sequence_motion(gray, config.block_size, config.search_range)
}

/// Trajectory descriptors for one loaded sequence.
pub fn extract_sequence(
    seq: &Sequence,
    fields: &[MotionField],
    gray: &[GrayFrame],
    config: &PipelineConfig,
    mask: ChannelMask,
) -> Result<Vec<TrajectoryDescriptor>> {
    let trajectories = build_trajectories(fields, seq.dims(), &config.trajectory_params());
    let input = ExtractionInput {
        gray,
        depth: &seq.depth,
        fields,
    };
    extract_descriptors(&trajectories, &input, &config.descriptor, mask)
}

/// Loads a manifest and extracts its descriptors.
pub fn extract_manifest(manifest: &SequenceManifest, config: &PipelineConfig, mask: ChannelMask) -> Result<Vec<TrajectoryDescriptor>> {
    let seq = manifest.load().stage("load")?;
    let gray = gray_frames(&seq);
    let fields = sequence_motion(Some(manifest), &gray, config).stage("motion")?;
    extract_sequence(&seq, &fields, &gray, config, mask).stage("extract")
}

/// Per-channel encoder: optional PCA followed by a GMM codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEncoder {
    pub channel: Channel,
    pub pca: Option<Pca>,
    pub codebook: GmmCodebook,
}

impl ChannelEncoder {
    fn project(&self, rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        match &self.pca {
            Some(p) => rows.iter().map(|r| p.project(r)).collect(),
            None => rows,
        }
    }
}

fn channel_rows(descs: &[TrajectoryDescriptor], channel: Channel) -> Vec<Vec<f64>> {
    descs.iter().map(|d| d.get(channel).to_vec()).collect()
}

/// Fits PCA (when configured) and the GMM for one channel on training descriptors.
pub fn train_channel_encoder(
    train: &[&[TrajectoryDescriptor]],
    channel: Channel,
    config: &PipelineConfig,
) -> Result<ChannelEncoder> {
    let rows: Vec<Vec<f64>> = train.iter().flat_map(|d| channel_rows(d, channel)).collect();
    let seed = config.gmm.seed.wrapping_add(channel.index() as u64);
    let pca = match config.pca_dim {
        Some(dim) => {
            let mut p = Pca::fit(&rows, dim, seed, config.gmm.subsample_cap)?;
            p.channel = Some(channel);
            Some(p)
        }
        None => None,
    };
    let mut enc = ChannelEncoder {
        channel,
        pca,
        codebook: GmmCodebook {
            k: 0,
            d: 0,
            weights: vec![],
            means: vec![],
            variances: vec![],
            seed,
            variance_floor: 0.0,
            channel: Some(channel),
        },
    };
    let rows = enc.project(rows);
    let params = GmmParams { seed, ..config.gmm };
    let mut trained = train_gmm(&rows, &params)?;
    trained.codebook.channel = Some(channel);
    enc.codebook = trained.codebook;
    Ok(enc)
}

/// Concatenated normalized Fisher vectors of one video.
pub fn encode_video(encoders: &[ChannelEncoder], descs: &[TrajectoryDescriptor]) -> Result<Vec<f64>> {
    let fvs = encoders
        .iter()
        .map(|e| fisher_encode(&e.codebook, &e.project(channel_rows(descs, e.channel)), e.channel))
        .collect::<Result<Vec<_>>>()?;
    concat_channels(&fvs)
}

/// Class-name table for `u16` label ids in Fisher vector dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub classes: Vec<String>,
}

impl LabelMap {
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a String>) -> Self {
        let mut classes: Vec<String> = labels.into_iter().cloned().collect();
        classes.sort();
        classes.dedup();
        Self { classes }
    }

    pub fn id(&self, label: &str) -> u16 {
        self.classes
            .iter()
            .position(|c| c == label)
            .map_or(u16::MAX, |i| i as u16)
    }

    pub fn name(&self, id: u16) -> Option<&str> {
        self.classes.get(id as usize).map(String::as_str)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: EvalReport,
    pub model: SvmModel,
    pub encoders: Vec<ChannelEncoder>,
    pub train_descriptor_counts: Vec<usize>,
    pub test_descriptor_counts: Vec<usize>,
}

fn read_split(path: &Path) -> Result<(Vec<SequenceManifest>, Vec<SequenceManifest>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let split: SplitManifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let open = |list: &[PathBuf]| -> Result<Vec<SequenceManifest>> {
        list.iter()
            .map(|p| {
                let m = media_io::open_sequence(base.join(p))?;
                if m.label.is_none() {
                    return Err(Error::Manifest {
                        path: m.path.clone(),
                        msg: "split sequences need a label".into(),
                    });
                }
                Ok(m)
            })
            .collect()
    };
    let train = open(&split.train)?;
    let test = open(&split.test)?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid(format!("{}: train and test splits must be non-empty", path.display())));
    }
    Ok((train, test))
}

/// Runs extract → GMM (train split only) → Fisher encode → SVM → evaluate.
/// When `out_dir` is given, every artifact is written there.
pub fn run_pipeline(config: &PipelineConfig, split_path: impl AsRef<Path>, out_dir: Option<&Path>) -> Result<PipelineOutput> {
    config.validate()?;
    let (train, test) = read_split(split_path.as_ref()).stage("split")?;
    let mask = config.channels.mask();
    let extract_all = |ms: &[SequenceManifest]| -> Result<Vec<Vec<TrajectoryDescriptor>>> {
        par::map(ms, |m| {
            extract_manifest(m, config, mask).map_err(|e| Error::Manifest {
                path: m.path.clone(),
                msg: e.to_string(),
            })
        })
        .into_iter()
        .collect()
    };
    let train_desc = extract_all(&train).stage("extract")?;
    let test_desc = extract_all(&test).stage("extract")?;

    let train_refs: Vec<&[TrajectoryDescriptor]> = train_desc.iter().map(Vec::as_slice).collect();
    let encoders = mask
        .channels()
        .into_iter()
        .map(|c| train_channel_encoder(&train_refs, c, config).map_err(|e| e.in_stage(c.name())))
        .collect::<Result<Vec<_>>>()
        .stage("train-gmm")?;

    let encode_all = |descs: &[Vec<TrajectoryDescriptor>], ms: &[SequenceManifest]| -> Result<Vec<Vec<f64>>> {
        descs
            .iter()
            .zip(ms)
            .map(|(d, m)| {
                encode_video(&encoders, d).map_err(|e| Error::Manifest {
                    path: m.path.clone(),
                    msg: e.to_string(),
                })
            })
            .collect()
    };
    let train_fv = encode_all(&train_desc, &train).stage("encode")?;
    let test_fv = encode_all(&test_desc, &test).stage("encode")?;
    let label_of = |m: &SequenceManifest| m.label.clone().unwrap_or_default();
    let train_labels: Vec<String> = train.iter().map(label_of).collect();
    let test_labels: Vec<String> = test.iter().map(label_of).collect();

    let model = train_svm(&train_fv, &train_labels, &config.svm).stage("train-svm")?;
    let report = evaluate(&model, &test_fv, &test_labels).stage("eval")?;

    if let Some(dir) = out_dir {
        write_run_artifacts(dir, config, &encoders, &model, &report, (&train_fv, &train_labels), (&test_fv, &test_labels))
            .stage("write")?;
    }
    Ok(PipelineOutput {
        report,
        model,
        encoders,
        train_descriptor_counts: train_desc.iter().map(Vec::len).collect(),
        test_descriptor_counts: test_desc.iter().map(Vec::len).collect(),
    })
}

fn write_run_artifacts(
    dir: &Path,
    config: &PipelineConfig,
    encoders: &[ChannelEncoder],
    model: &SvmModel,
    report: &EvalReport,
    train: (&[Vec<f64>], &[String]),
    test: (&[Vec<f64>], &[String]),
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg_path = dir.join("config.json");
    std::fs::write(&cfg_path, config.to_json()).map_err(|e| Error::io(&cfg_path, e))?;
    for e in encoders {
        artifact::write_json(dir.join(format!("codebook_{}.json", e.channel)), &e.codebook)?;
        if let Some(p) = &e.pca {
            artifact::write_json(dir.join(format!("pca_{}.json", e.channel)), p)?;
        }
    }
    let labels = LabelMap::from_labels(train.1);
    for (name, (fv, labs)) in [("train", train), ("test", test)] {
        let dump = FvDump {
            dim: fv.first().map_or(0, Vec::len),
            rows: fv.iter().zip(labs).map(|(v, l)| (labels.id(l), v.clone())).collect(),
        };
        crate::encoding::write_fv_dump(dir.join(format!("{name}.fvec")), &dump)?;
        artifact::write_json(dir.join(format!("{name}.fvec.labels.json")), &labels)?;
    }
    artifact::write_json(dir.join("model.json"), model)?;
    artifact::write_json(dir.join("report.json"), report)?;
    let txt = dir.join("report.txt");
    std::fs::write(&txt, report.to_table()).map_err(|e| Error::io(&txt, e))
}
