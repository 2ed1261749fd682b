mod common;

use hodg::artifact;
use hodg::descriptors::Channel;
use hodg::encoding::{
    fisher_encode, fisher_first_order, log_likelihood, posteriors, train_gmm, GmmCodebook, GmmParams, Pca,
};
use hodg::par;
use hodg::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use common::*;

fn blobs(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let centers: Vec<Vec<f64>> = (0..4).map(|_| (0..d).map(|_| r.random_range(-5.0..5.0)).collect()).collect();
    (0..n)
        .map(|i| centers[i % 4].iter().map(|c| c + r.random_range(-1.0..1.0)).collect())
        .collect()
}

#[test]
fn em_trace_non_decreasing_for_several_seeds() {
    let xs = blobs(1500, 6, 1);
    for seed in 0..5 {
        let params = GmmParams {
            k: 6,
            seed,
            max_iter: 40,
            ..GmmParams::default()
        };
        let g = train_gmm(&xs, &params).unwrap();
        for w in g.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "seed {seed}: {w:?}");
        }
        // the trace ends at the returned codebook's likelihood
        let last = *g.log_likelihood.last().unwrap();
        assert!((log_likelihood(&g.codebook, &xs) - last).abs() < 1e-9 || g.converged);
    }
}

#[test]
fn codebook_artifact_round_trip_and_stale_version() {
    let xs = blobs(800, 3, 2);
    let mut cb = train_gmm(&xs, &GmmParams { k: 4, ..GmmParams::default() }).unwrap().codebook;
    cb.channel = Some(Channel::Hodg);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cb.json");
    artifact::write_json(&p, &cb).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.contains("\"version\": 1") && text.contains("\"K\": 4") && text.contains("\"D\": 3"));
    let back: GmmCodebook = artifact::read_json(&p).unwrap();
    assert_eq!(back, cb);
    std::fs::write(&p, text.replace("\"version\": 1", "\"version\": 0")).unwrap();
    let err = artifact::read_json::<GmmCodebook>(&p).unwrap_err();
    assert!(err.to_string().contains("stale artifact version"), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn training_errors() {
    let xs = blobs(50, 3, 3);
    assert!(matches!(train_gmm(&xs, &GmmParams { k: 8, ..GmmParams::default() }), Err(Error::InvalidInput(_))));
    let same = vec![vec![1.0, 2.0]; 200];
    let err = train_gmm(&same, &GmmParams { k: 2, ..GmmParams::default() }).unwrap_err();
    assert!(err.to_string().contains("degenerate"), "{err}");
    let mut bad = blobs(200, 2, 4);
    bad[3][1] = f64::NAN;
    assert_eq!(train_gmm(&bad, &GmmParams { k: 2, ..GmmParams::default() }).unwrap_err().exit_code(), 4);
}

#[test]
fn fisher_vectors_deterministic_across_modes() {
    let xs = blobs(2000, 5, 5);
    let cb = train_gmm(&xs, &GmmParams { k: 8, ..GmmParams::default() }).unwrap().codebook;
    let a = fisher_encode(&cb, &xs[..700], Channel::Hog).unwrap();
    let b = par::sequential(|| fisher_encode(&cb, &xs[..700], Channel::Hog)).unwrap();
    assert_eq!(a.values, b.values);
}

#[test]
fn pca_projection_keeps_variance_order() {
    let mut r = rng(6);
    let xs: Vec<Vec<f64>> = (0..500)
        .map(|_| {
            let (a, b, c) = (r.random_range(-10.0..10.0), r.random_range(-3.0..3.0), r.random_range(-0.1..0.1));
            vec![a + c, b, a - c, b * 0.5]
        })
        .collect();
    let p = Pca::fit(&xs, 2, 0, 10_000).unwrap();
    let z: Vec<Vec<f64>> = xs.iter().map(|x| p.project(x)).collect();
    let var = |i: usize| z.iter().map(|v| v[i] * v[i]).sum::<f64>() / z.len() as f64;
    assert!(var(0) > var(1) && var(1) > 1.0);
    let json = artifact::to_json(&p).unwrap();
    let back: Pca = artifact::from_json(&json, std::path::Path::new("p.json")).unwrap();
    assert_eq!(back, p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn posteriors_sum_to_one(seed in any::<u64>(), k in 1usize..6, d in 1usize..5) {
        let mut r = rng(seed);
        let cb = random_codebook(k, d, &mut r);
        let x: Vec<f64> = (0..d).map(|_| r.random_range(-50.0..50.0)).collect();
        let g = posteriors(&cb, &x);
        prop_assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(g.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn normalized_fv_unit_norm_and_permutation_invariant(seed in any::<u64>(), k in 1usize..6, d in 1usize..5, n in 1usize..30) {
        let mut r = rng(seed);
        let cb = random_codebook(k, d, &mut r);
        let mut xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
        let a = fisher_encode(&cb, &xs, Channel::Hof).unwrap();
        let norm = a.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(a.normalized);
        prop_assert!((norm - 1.0).abs() < 1e-9 || norm == 0.0);
        xs.shuffle(&mut r);
        let b = fisher_encode(&cb, &xs, Channel::Hof).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn first_order_is_scaled_mean_gradient(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (k, d, n) = (3, 3, 15);
        let mut cb = random_codebook(k, d, &mut r);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
        let g = fisher_first_order(&cb, &xs).unwrap();
        let h = 1e-5;
        for i in 0..k * d {
            let m = cb.means[i];
            cb.means[i] = m + h;
            let up = gmm_total_log_likelihood(&cb, &xs);
            cb.means[i] = m - h;
            let dn = gmm_total_log_likelihood(&cb, &xs);
            cb.means[i] = m;
            let want = (up - dn) / (2.0 * h) * cb.variances[i].sqrt() / (n as f64 * cb.weights[i / d].sqrt());
            prop_assert!((g[i] - want).abs() <= 1e-4 * want.abs().max(1e-6), "{} vs {}", g[i], want);
        }
    }
}
