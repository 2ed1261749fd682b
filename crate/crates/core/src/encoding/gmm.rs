//! Diagonal-covariance Gaussian mixture trained with k-means++ seeding and EM.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descriptors::Channel;
use crate::error::{Error, Result};
use crate::par;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Samples per E-step chunk. Partial sums are reduced in chunk order, so the
/// result does not depend on the number of workers.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Variance floor as a fraction of the mean per-dimension sample variance.
    pub variance_floor_ratio: f64,
    /// Training samples kept after a seeded uniform subsample.
    pub subsample_cap: usize,
    /// Stop once the relative log-likelihood gain drops below this.
    pub tolerance: f64,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self {
            k: 64,
            seed: 0,
            max_iter: 100,
            variance_floor_ratio: 1e-4,
            subsample_cap: 200_000,
            tolerance: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmCodebook {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub weights: Vec<f64>,
    /// Row-major `K × D`.
    pub means: Vec<f64>,
    /// Row-major `K × D` diagonal entries.
    pub variances: Vec<f64>,
    pub seed: u64,
    pub variance_floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<Channel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedGmm {
    pub codebook: GmmCodebook,
    /// Mean per-sample log-likelihood before each M-step and after the last.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

impl GmmCodebook {
    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.d..(k + 1) * self.d]
    }

    pub fn variance(&self, k: usize) -> &[f64] {
        &self.variances[k * self.d..(k + 1) * self.d]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("codebook: {m}")));
        if self.k == 0 || self.d == 0 {
            return bad("K and D must be positive".into());
        }
        if self.weights.len() != self.k
            || self.means.len() != self.k * self.d
            || self.variances.len() != self.k * self.d
        {
            return bad("array sizes do not match K and D".into());
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 || self.weights.iter().any(|&w| !(w > 0.0)) {
            return bad(format!("weights must be positive and sum to 1 (sum {total})"));
        }
        if self.variances.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return bad("variances must be positive and finite".into());
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return bad("means must be finite".into());
        }
        Ok(())
    }

    /// Per-component constant `ln w_k - ½(D ln 2π + Σ ln σ²)` and inverse variances.
    fn precompute(&self) -> (Vec<f64>, Vec<f64>) {
        let consts = (0..self.k)
            .map(|k| {
                let log_det: f64 = self.variance(k).iter().map(|v| v.ln()).sum();
                self.weights[k].ln() - 0.5 * (self.d as f64 * LN_2PI + log_det)
            })
            .collect();
        let inv = self.variances.iter().map(|v| 1.0 / v).collect();
        (consts, inv)
    }

    /// Writes `ln(w_k N(x; μ_k, σ²_k))` into `out` and returns the log-sum-exp.
    fn log_joint(&self, consts: &[f64], inv_var: &[f64], x: &[f64], out: &mut [f64]) -> f64 {
        let d = self.d;
        let mut max = f64::NEG_INFINITY;
        for k in 0..self.k {
            let mu = &self.means[k * d..(k + 1) * d];
            let iv = &inv_var[k * d..(k + 1) * d];
            let mut q = 0.0;
            for i in 0..d {
                let diff = x[i] - mu[i];
                q += diff * diff * iv[i];
            }
            out[k] = consts[k] - 0.5 * q;
            max = max.max(out[k]);
        }
        let s: f64 = out.iter().map(|l| (l - max).exp()).sum();
        max + s.ln()
    }
}

/// Soft assignments `γ_k(x)`, computed in log space with max subtraction.
pub fn posteriors(cb: &GmmCodebook, x: &[f64]) -> Vec<f64> {
    let (consts, inv) = cb.precompute();
    let mut out = vec![0.0; cb.k];
    let lse = cb.log_joint(&consts, &inv, x, &mut out);
    out.iter_mut().for_each(|l| *l = (*l - lse).exp());
    out
}

pub(crate) fn posteriors_into(cb: &GmmCodebook, consts: &[f64], inv: &[f64], x: &[f64], out: &mut [f64]) -> f64 {
    let lse = cb.log_joint(consts, inv, x, out);
    out.iter_mut().for_each(|l| *l = (*l - lse).exp());
    lse
}

pub(crate) fn precompute(cb: &GmmCodebook) -> (Vec<f64>, Vec<f64>) {
    cb.precompute()
}

/// Mean per-sample log-likelihood.
pub fn log_likelihood(cb: &GmmCodebook, samples: &[Vec<f64>]) -> f64 {
    let (consts, inv) = cb.precompute();
    let partial = par::map_chunks(samples, CHUNK, |chunk| {
        let mut buf = vec![0.0; cb.k];
        chunk.iter().map(|x| cb.log_joint(&consts, &inv, x, &mut buf)).sum::<f64>()
    });
    partial.iter().sum::<f64>() / samples.len() as f64
}

/// Seeded uniform subsample without replacement, original order kept.
pub fn subsample<T: Clone>(items: &[T], cap: usize, seed: u64) -> Vec<T> {
    if items.len() <= cap {
        return items.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, items.len(), cap).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i].clone()).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp(samples: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let n = samples.len();
    let mut centers = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = samples.iter().map(|x| sq_dist(x, &samples[centers[0]])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid(format!(
                "fewer than K = {k} distinct samples; cannot seed the mixture"
            )));
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in dist.iter().enumerate() {
            acc += d;
            if d > 0.0 && acc > target {
                pick = Some(i);
                break;
            }
        }
        // rounding can leave `target` past the final sum
        let pick = pick.unwrap_or_else(|| dist.iter().rposition(|&d| d > 0.0).unwrap());
        centers.push(pick);
        let c = &samples[pick];
        let updated = par::map(samples, |x| sq_dist(x, c));
        for (d, u) in dist.iter_mut().zip(updated) {
            *d = d.min(u);
        }
    }
    Ok(centers)
}

struct Stats {
    s0: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
    ll: f64,
}

impl Stats {
    fn zeros(k: usize, d: usize) -> Self {
        Self {
            s0: vec![0.0; k],
            s1: vec![0.0; k * d],
            s2: vec![0.0; k * d],
            ll: 0.0,
        }
    }

    fn add(&mut self, o: &Stats) {
        let sum = |a: &mut Vec<f64>, b: &Vec<f64>| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        sum(&mut self.s0, &o.s0);
        sum(&mut self.s1, &o.s1);
        sum(&mut self.s2, &o.s2);
        self.ll += o.ll;
    }
}

fn e_step(cb: &GmmCodebook, samples: &[Vec<f64>]) -> Stats {
    let (consts, inv) = cb.precompute();
    let (k, d) = (cb.k, cb.d);
    let partials = par::map_chunks(samples, CHUNK, |chunk| {
        let mut st = Stats::zeros(k, d);
        let mut gamma = vec![0.0; k];
        for x in chunk {
            st.ll += posteriors_into(cb, &consts, &inv, x, &mut gamma);
            for (c, &g) in gamma.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                st.s0[c] += g;
                let s1 = &mut st.s1[c * d..(c + 1) * d];
                let s2 = &mut st.s2[c * d..(c + 1) * d];
                for i in 0..d {
                    s1[i] += g * x[i];
                    s2[i] += g * x[i] * x[i];
                }
            }
        }
        st
    });
    let mut total = Stats::zeros(k, d);
    for p in &partials {
        total.add(p);
    }
    total
}

fn m_step(cb: &mut GmmCodebook, st: &Stats, n: usize) {
    let d = cb.d;
    // components that lost all responsibility keep their parameters
    let min_mass = 1e-10 * n as f64;
    for k in 0..cb.k {
        if st.s0[k] < min_mass {
            continue;
        }
        for i in 0..d {
            let mean = st.s1[k * d + i] / st.s0[k];
            let var = st.s2[k * d + i] / st.s0[k] - mean * mean;
            cb.means[k * d + i] = mean;
            cb.variances[k * d + i] = var.max(cb.variance_floor);
        }
    }
    let masses: Vec<f64> = st.s0.iter().map(|&m| m.max(min_mass).max(f64::MIN_POSITIVE)).collect();
    let total: f64 = masses.iter().sum();
    cb.weights = masses.iter().map(|m| m / total).collect();
}

/// Fits a `K`-component diagonal GMM.
///
/// Seeds with k-means++ (hard assignment to the chosen centers gives the
/// initial weights, means and variances), then runs EM until `max_iter`
/// M-steps or until the relative log-likelihood gain falls below
/// `params.tolerance`. Variances are clamped to
/// `variance_floor_ratio × mean per-dimension variance`.
pub fn train_gmm(samples: &[Vec<f64>], params: &GmmParams) -> Result<TrainedGmm> {
    let k = params.k;
    if k == 0 {
        return Err(Error::Config("K must be positive".into()));
    }
    let Some(d) = samples.first().map(Vec::len) else {
        return Err(Error::invalid("no training samples"));
    };
    if d == 0 {
        return Err(Error::invalid("descriptor dimension is zero"));
    }
    if samples.iter().any(|s| s.len() != d) {
        return Err(Error::invalid("training samples have inconsistent dimensions"));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite training sample".into()));
    }
    let samples = subsample(samples, params.subsample_cap, params.seed ^ 0x5eed_5a3b);
    let n = samples.len();
    if n < 10 * k {
        return Err(Error::invalid(format!(
            "{n} samples too few for K = {k} (need at least {})",
            10 * k
        )));
    }

    let mut global_mean = vec![0.0; d];
    for x in &samples {
        global_mean.iter_mut().zip(x).for_each(|(m, v)| *m += v);
    }
    global_mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut global_var = vec![0.0; d];
    for x in &samples {
        for i in 0..d {
            global_var[i] += (x[i] - global_mean[i]).powi(2);
        }
    }
    let mean_var = global_var.iter().sum::<f64>() / (n * d) as f64;
    if !(mean_var > 0.0) {
        return Err(Error::invalid("degenerate training set: all samples identical"));
    }
    let variance_floor = params.variance_floor_ratio * mean_var;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let centers = kmeans_pp(&samples, k, &mut rng)?;

    // hard assignment to the seeds, ties to the lower index
    let assign = par::map(&samples, |x| {
        let mut best = (f64::INFINITY, 0);
        for (c, &ci) in centers.iter().enumerate() {
            let dist = sq_dist(x, &samples[ci]);
            if dist < best.0 {
                best = (dist, c);
            }
        }
        best.1
    });
    let mut st = Stats::zeros(k, d);
    for (x, &c) in samples.iter().zip(&assign) {
        st.s0[c] += 1.0;
        for i in 0..d {
            st.s1[c * d + i] += x[i];
            st.s2[c * d + i] += x[i] * x[i];
        }
    }
    let mut cb = GmmCodebook {
        k,
        d,
        weights: vec![1.0 / k as f64; k],
        means: centers.iter().flat_map(|&c| samples[c].clone()).collect(),
        variances: vec![variance_floor.max(mean_var); k * d],
        seed: params.seed,
        variance_floor,
        channel: None,
    };
    // the hard-assignment M-step, with centered second moments for stability
    for c in 0..k {
        let mass = st.s0[c];
        for i in 0..d {
            cb.means[c * d + i] = st.s1[c * d + i] / mass;
        }
    }
    let mut sq = vec![0.0; k * d];
    for (x, &c) in samples.iter().zip(&assign) {
        for i in 0..d {
            sq[c * d + i] += (x[i] - cb.means[c * d + i]).powi(2);
        }
    }
    for c in 0..k {
        for i in 0..d {
            cb.variances[c * d + i] = (sq[c * d + i] / st.s0[c]).max(variance_floor);
        }
    }
    cb.weights = st.s0.iter().map(|m| m / n as f64).collect();

    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..params.max_iter {
        let stats = e_step(&cb, &samples);
        let ll = stats.ll / n as f64;
        if !ll.is_finite() {
            return Err(Error::Numeric("log-likelihood became non-finite during EM".into()));
        }
        if let Some(&prev) = trace.last() {
            trace.push(ll);
            if (ll - prev).abs() < params.tolerance * f64::abs(prev) {
                converged = true;
                break;
            }
        } else {
            trace.push(ll);
        }
        m_step(&mut cb, &stats, n);
    }
    if !converged {
        trace.push(log_likelihood(&cb, &samples));
    }
    cb.validate().map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(TrainedGmm {
        codebook: cb,
        log_likelihood: trace,
        converged,
    })
}
