use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hodg::artifact;
use hodg::bench::{measure_fps, BenchOptions, BenchPipeline};
use hodg::classify::{evaluate, format_map_table, train_svm, SvmModel};
use hodg::descriptors::{read_descriptor_dump, write_descriptor_dump, Channel, DescriptorDump, TrajectoryDescriptor};
use hodg::encoding::{read_fv_dump, train_gmm, write_fv_dump, FvDump, GmmCodebook, Pca};
use hodg::media_io::open_sequence;
use hodg::motion::format_motion_sidecar;
use hodg::pipeline::{
    encode_video, extract_manifest, gray_frames, run_pipeline, ChannelEncoder, ChannelSet, LabelMap, PipelineConfig,
};
use hodg::synth::{synth_corpus, synth_sequence, SynthClass, SynthSpec};
use hodg::{Error, Result};

#[derive(Parser)]
#[command(name = "hodg", version, about = "RGB-D action recognition from motion vectors and depth gradients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic RGB-D sequence, or a labelled corpus with --corpus.
    Synth(SynthArgs),
    /// Estimate block motion for a sequence and write a motion sidecar.
    MotionEstimate(MotionArgs),
    /// Extract trajectory descriptors for a sequence.
    Extract(ExtractArgs),
    /// Fit a GMM codebook (and optional PCA) for one channel.
    TrainGmm(TrainGmmArgs),
    /// Fisher-encode descriptor dumps into a vector dump.
    Encode(EncodeArgs),
    /// Train one-vs-rest linear SVMs on a Fisher vector dump.
    TrainSvm(TrainSvmArgs),
    /// Score a Fisher vector dump and report per-class AP and mAP.
    Eval(EvalArgs),
    /// Measure extraction throughput on one sequence.
    Bench(BenchArgs),
    /// Run the whole pipeline on a train/test split.
    Run(RunArgs),
}

#[derive(Args, Default)]
struct Tunables {
    /// Pipeline configuration JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long)]
    search_range: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    /// rgb-trio, hodg or rgb+hodg
    #[arg(long)]
    channels: Option<String>,
    /// GMM components
    #[arg(long = "k")]
    k: Option<usize>,
    /// SVM regularization
    #[arg(long = "c")]
    c: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pca_dim: Option<usize>,
}

impl Tunables {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.block_size {
            cfg.block_size = v;
        }
        if let Some(v) = self.search_range {
            cfg.search_range = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.stride {
            cfg.stride = v;
        }
        if let Some(v) = &self.channels {
            cfg.channels = v.parse()?;
        }
        if let Some(v) = self.k {
            cfg.gmm.k = v;
        }
        if let Some(v) = self.c {
            cfg.svm.c = v;
        }
        if let Some(v) = self.seed {
            cfg.gmm.seed = v;
            cfg.svm.seed = v;
        }
        if self.pca_dim.is_some() {
            cfg.pca_dim = self.pca_dim;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// translate, rotate or approach (ignored with --corpus)
    #[arg(long, default_value = "translate")]
    class: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    texture_seed: u64,
    #[arg(long, default_value_t = 30)]
    frames: usize,
    #[arg(long, default_value_t = 160)]
    width: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
    #[arg(long, default_value_t = 2)]
    magnitude: u32,
    /// Write every class plus a split.json instead of one sequence.
    #[arg(long)]
    corpus: bool,
    #[arg(long, default_value_t = 15)]
    per_class: usize,
    #[arg(long, default_value_t = 10)]
    train_per_class: usize,
}

#[derive(Args)]
struct MotionArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tune: Tunables,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Descriptor dump to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tune: Tunables,
}

#[derive(Args)]
struct TrainGmmArgs {
    /// hog, hof, mbhx, mbhy or hodg
    #[arg(long)]
    channel: String,
    /// Descriptor dumps of training videos.
    #[arg(long, num_args = 1.., required = true)]
    descriptors: Vec<PathBuf>,
    /// Codebook JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// PCA JSON to write when --pca-dim is set.
    #[arg(long)]
    pca_out: Option<PathBuf>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[command(flatten)]
    tune: Tunables,
}

#[derive(Args)]
struct EncodeArgs {
    /// Directory holding codebook_<channel>.json (and pca_<channel>.json).
    #[arg(long)]
    codebook_dir: PathBuf,
    /// One descriptor dump per video.
    #[arg(long, num_args = 1.., required = true)]
    descriptors: Vec<PathBuf>,
    /// One label per dump, in the same order.
    #[arg(long, num_args = 0..)]
    label: Vec<String>,
    /// Reuse the class table of an existing `.labels.json`.
    #[arg(long)]
    label_map: Option<PathBuf>,
    /// Fisher vector dump to write; labels go to `<out>.labels.json`.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tune: Tunables,
}

#[derive(Args)]
struct TrainSvmArgs {
    #[arg(long)]
    fv: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[command(flatten)]
    tune: Tunables,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    fv: PathBuf,
    /// Report JSON to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// rgb-trio, hodg or combined
    #[arg(long, default_value = "hodg")]
    pipeline: String,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tune: Tunables,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    split: PathBuf,
    /// Artifact directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run rgb-trio, hodg and rgb+hodg and print a comparison table.
    #[arg(long)]
    compare: bool,
    #[command(flatten)]
    tune: Tunables,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::MotionEstimate(a) => motion_estimate(a),
        Command::Extract(a) => extract(a),
        Command::TrainGmm(a) => train_gmm_cmd(a),
        Command::Encode(a) => encode(a),
        Command::TrainSvm(a) => train_svm_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Run(a) => run(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        class: a.class.parse::<SynthClass>()?,
        frames: a.frames,
        width: a.width,
        height: a.height,
        texture_seed: a.texture_seed,
        magnitude: a.magnitude,
    };
    spec.validate()?;
    if a.corpus {
        let split = synth_corpus(&a.out, &spec, a.per_class, a.train_per_class, a.seed)?;
        println!("{}", split.display());
    } else {
        let m = synth_sequence(&spec, a.seed, &a.out)?;
        println!("{}", m.path.display());
    }
    Ok(())
}

fn motion_estimate(a: MotionArgs) -> Result<()> {
    let cfg = a.tune.resolve()?;
    let manifest = open_sequence(&a.manifest)?;
    let seq = manifest.load()?;
    let fields = hodg::motion::estimate_sequence_motion(&gray_frames(&seq), cfg.block_size, cfg.search_range)?;
    write_text(&a.out, &format_motion_sidecar(&fields))
}

fn extract(a: ExtractArgs) -> Result<()> {
    let cfg = a.tune.resolve()?;
    let manifest = open_sequence(&a.manifest)?;
    let descs = extract_manifest(&manifest, &cfg, cfg.channels.mask())?;
    eprintln!("{} trajectories", descs.len());
    write_descriptor_dump(&a.out, &DescriptorDump::new(descs)?)
}

fn parse_channel(s: &str) -> Result<Channel> {
    Channel::from_name(s).ok_or_else(|| Error::Config(format!("unknown channel '{s}'")))
}

fn load_channel_rows(paths: &[PathBuf], channel: Channel) -> Result<Vec<Vec<Vec<f64>>>> {
    paths
        .iter()
        .map(|p| {
            let dump = read_descriptor_dump(p)?;
            if dump.channel_lens[channel.index()] == 0 && !dump.records.is_empty() {
                return Err(Error::Artifact {
                    path: p.clone(),
                    msg: format!("dump has no {channel} channel"),
                });
            }
            Ok(dump.records.iter().map(|d: &TrajectoryDescriptor| d.get(channel).to_vec()).collect())
        })
        .collect()
}

fn train_gmm_cmd(a: TrainGmmArgs) -> Result<()> {
    let cfg = a.tune.resolve()?;
    let channel = parse_channel(&a.channel)?;
    let mut rows: Vec<Vec<f64>> = load_channel_rows(&a.descriptors, channel)?.into_iter().flatten().collect();
    if let Some(dim) = cfg.pca_dim {
        let out = a
            .pca_out
            .as_ref()
            .ok_or_else(|| Error::Config("--pca-dim needs --pca-out".into()))?;
        let mut pca = Pca::fit(&rows, dim, cfg.gmm.seed, cfg.gmm.subsample_cap)?;
        pca.channel = Some(channel);
        rows = rows.iter().map(|r| pca.project(r)).collect();
        artifact::write_json(out, &pca)?;
    }
    let mut params = cfg.gmm;
    if let Some(m) = a.max_iter {
        params.max_iter = m;
    }
    let mut trained = train_gmm(&rows, &params)?;
    trained.codebook.channel = Some(channel);
    eprintln!(
        "{} iterations, final mean log-likelihood {:.6}{}",
        trained.log_likelihood.len(),
        trained.log_likelihood.last().copied().unwrap_or(f64::NAN),
        if trained.converged { "" } else { " (not converged)" }
    );
    artifact::write_json(&a.out, &trained.codebook)
}

fn labels_path(fv: &Path) -> PathBuf {
    let mut s = fv.as_os_str().to_owned();
    s.push(".labels.json");
    PathBuf::from(s)
}

fn encode(a: EncodeArgs) -> Result<()> {
    let cfg = a.tune.resolve()?;
    if !a.label.is_empty() && a.label.len() != a.descriptors.len() {
        return Err(Error::Config(format!(
            "{} labels for {} descriptor dumps",
            a.label.len(),
            a.descriptors.len()
        )));
    }
    let encoders = cfg
        .channels
        .mask()
        .channels()
        .into_iter()
        .map(|channel| {
            let codebook: GmmCodebook = artifact::read_json(a.codebook_dir.join(format!("codebook_{channel}.json")))?;
            let pca_path = a.codebook_dir.join(format!("pca_{channel}.json"));
            let pca = if pca_path.exists() {
                Some(artifact::read_json::<Pca>(&pca_path)?)
            } else {
                None
            };
            Ok(ChannelEncoder { channel, pca, codebook })
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = match &a.label_map {
        Some(p) => artifact::read_json::<LabelMap>(p)?,
        None => LabelMap::from_labels(&a.label),
    };
    let mut rows = Vec::with_capacity(a.descriptors.len());
    for (i, p) in a.descriptors.iter().enumerate() {
        let dump = read_descriptor_dump(p)?;
        let fv = encode_video(&encoders, &dump.records).map_err(|e| Error::Artifact {
            path: p.clone(),
            msg: e.to_string(),
        })?;
        let id = a.label.get(i).map_or(u16::MAX, |l| labels.id(l));
        rows.push((id, fv));
    }
    let dump = FvDump {
        dim: rows.first().map_or(0, |r| r.1.len()),
        rows,
    };
    write_fv_dump(&a.out, &dump)?;
    artifact::write_json(labels_path(&a.out), &labels)
}

fn labelled_rows(fv: &Path) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let dump = read_fv_dump(fv)?;
    let lp = labels_path(fv);
    let map: LabelMap = artifact::read_json(&lp)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (id, v) in dump.rows {
        let name = map.name(id).ok_or_else(|| Error::Artifact {
            path: lp.clone(),
            msg: format!("label id {id} has no class"),
        })?;
        x.push(v);
        y.push(name.to_string());
    }
    Ok((x, y))
}

fn train_svm_cmd(a: TrainSvmArgs) -> Result<()> {
    let cfg = a.tune.resolve()?;
    let mut params = cfg.svm;
    if let Some(e) = a.epochs {
        params.epochs = e;
    }
    let (x, y) = labelled_rows(&a.fv)?;
    let model = train_svm(&x, &y, &params)?;
    artifact::write_json(&a.out, &model)
}

fn eval(a: EvalArgs) -> Result<()> {
    let model: SvmModel = artifact::read_json(&a.model)?;
    let (x, y) = labelled_rows(&a.fv)?;
    let report = evaluate(&model, &x, &y)?;
    print!("{}", report.to_table());
    match &a.out {
        Some(p) => artifact::write_json(p, &report),
        None => Ok(()),
    }
}

fn bench(a: BenchArgs) -> Result<()> {
    let cfg = a.tune.resolve()?;
    let pipeline: BenchPipeline = a.pipeline.parse()?;
    let opts = BenchOptions {
        repeats: a.repeats,
        warmup: a.warmup,
        workers: a.workers,
    };
    opts.validate()?;
    let manifest = open_sequence(&a.manifest)?;
    let report = measure_fps(&manifest, pipeline, &opts, &cfg)?;
    print!("{}", report.to_table());
    match &a.out {
        Some(p) => artifact::write_json(p, &report),
        None => Ok(()),
    }
}

fn run(a: RunArgs) -> Result<()> {
    let cfg = a.tune.resolve()?;
    if !a.compare {
        let out = run_pipeline(&cfg, &a.split, a.out.as_deref())?;
        print!("{}", out.report.to_table());
        return Ok(());
    }
    let mut rows = Vec::new();
    for set in ChannelSet::ALL {
        let c = PipelineConfig { channels: set, ..cfg.clone() };
        let dir = a.out.as_ref().map(|d| d.join(set.name()));
        let out = run_pipeline(&c, &a.split, dir.as_deref())?;
        rows.push((set.row_label().to_string(), vec![out.report.map]));
    }
    print!("{}", format_map_table(&["mAP"], &rows));
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
