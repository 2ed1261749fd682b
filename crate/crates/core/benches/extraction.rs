use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use hodg::descriptors::{extract_descriptors, ChannelMask, DescriptorConfig, ExtractionInput};
use hodg::encoding::{train_gmm, GmmParams};
use hodg::motion::{build_trajectories, estimate_sequence_motion, TrajectoryParams};
use hodg::par;
use hodg::pipeline::gray_frames;
use hodg::synth::{render_sequence, SynthClass, SynthSpec};

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", true), ("sequential", false)]
}

fn run<R>(parallel: bool, f: impl FnOnce() -> R) -> R {
    if parallel {
        f()
    } else {
        par::sequential(f)
    }
}

fn bench_pipeline(c: &mut Criterion) {
    let seq = render_sequence(&SynthSpec::new(SynthClass::Approach), 0).unwrap();
    let gray = gray_frames(&seq);
    let fields = estimate_sequence_motion(&gray, 16, 7).unwrap();
    let cfg = DescriptorConfig::default();
    let trajs = build_trajectories(&fields, seq.dims(), &TrajectoryParams::default());
    let input = ExtractionInput {
        gray: &gray,
        depth: &seq.depth,
        fields: &fields,
    };

    let mut g = c.benchmark_group("motion-estimation");
    g.sample_size(10);
    for (name, p) in modes() {
        g.bench_function(name, |b| b.iter(|| run(p, || estimate_sequence_motion(black_box(&gray), 16, 7).unwrap())));
    }
    g.finish();

    for (label, mask) in [("descriptors-hodg", ChannelMask::HODG), ("descriptors-rgb-trio", ChannelMask::RGB_TRIO)] {
        let mut g = c.benchmark_group(label);
        g.sample_size(20);
        for (name, p) in modes() {
            g.bench_function(name, |b| {
                b.iter(|| run(p, || extract_descriptors(black_box(&trajs), &input, &cfg, mask).unwrap()))
            });
        }
        g.finish();
    }

    let descs = extract_descriptors(&trajs, &input, &cfg, ChannelMask::HODG).unwrap();
    let rows: Vec<Vec<f64>> = descs.iter().cycle().take(2000).map(|d| d.hodg().to_vec()).collect();
    let params = GmmParams {
        k: 16,
        max_iter: 10,
        ..GmmParams::default()
    };
    let mut g = c.benchmark_group("gmm-em");
    g.sample_size(10);
    for (name, p) in modes() {
        g.bench_function(name, |b| b.iter(|| run(p, || train_gmm(black_box(&rows), &params).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, bench_pipeline);
criterion_main!(benches);
