use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub seed: u64,
    /// Maximum passes over the data.
    pub epochs: usize,
    /// Stop when `(primal - dual) <= tolerance * primal`.
    pub tolerance: f64,
    /// Value of the constant feature appended for the bias term.
    pub bias_scale: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 100.0,
            seed: 0,
            epochs: 1000,
            tolerance: 1e-4,
            bias_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub classes: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    #[serde(rename = "C")]
    pub c: f64,
    pub seed: u64,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dual coordinate descent for the L2-regularized hinge-loss SVM
/// `½‖w‖² + C Σ max(0, 1 − y_i w·x̂_i)` with `x̂ = [x, bias_scale]`.
/// Returns the augmented weight vector (bias last).
fn solve_binary(x: &[Vec<f64>], y: &[f64], params: &SvmParams, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = x.len();
    let d = x[0].len();
    let bs = params.bias_scale;
    let c = params.c;
    let qd: Vec<f64> = x.iter().map(|xi| dot(xi, xi) + bs * bs).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let margin = |w: &[f64], i: usize| dot(&w[..d], &x[i]) + w[d] * bs;

    for _ in 0..params.epochs {
        order.shuffle(rng);
        for &i in &order {
            if qd[i] <= 0.0 {
                continue;
            }
            let g = y[i] * margin(&w, i) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            if pg == 0.0 {
                continue;
            }
            let old = alpha[i];
            alpha[i] = (old - g / qd[i]).clamp(0.0, c);
            let step = (alpha[i] - old) * y[i];
            if step != 0.0 {
                for (wj, xj) in w[..d].iter_mut().zip(&x[i]) {
                    *wj += step * xj;
                }
                w[d] += step * bs;
            }
        }
        let wsq = dot(&w, &w);
        let hinge: f64 = (0..n).map(|i| (1.0 - y[i] * margin(&w, i)).max(0.0)).sum();
        let primal = 0.5 * wsq + c * hinge;
        let dual = alpha.iter().sum::<f64>() - 0.5 * wsq;
        if primal - dual <= params.tolerance * primal.abs() {
            break;
        }
    }
    w
}

/// Trains one binary SVM per class (class members positive, all others
/// negative). Classes are the sorted distinct labels. Each class uses its own
/// seeded stream for the per-epoch visiting order.
pub fn train_svm(features: &[Vec<f64>], labels: &[String], params: &SvmParams) -> Result<SvmModel> {
    if features.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if features.len() < 2 {
        return Err(Error::invalid("need at least two training samples"));
    }
    let d = features[0].len();
    if features.iter().any(|f| f.len() != d) {
        return Err(Error::invalid("feature rows have inconsistent dimensions"));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite feature value".into()));
    }
    if !(params.c > 0.0) || !params.c.is_finite() {
        return Err(Error::Config(format!("C must be positive, got {}", params.c)));
    }
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::invalid("training set has a single class"));
    }
    let solved = par::map_range(0..classes.len(), |ci| {
        let y: Vec<f64> = labels
            .iter()
            .map(|l| if *l == classes[ci] { 1.0 } else { -1.0 })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(ci as u64);
        solve_binary(features, &y, params, &mut rng)
    });
    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    for mut w in solved {
        let b = w.pop().unwrap() * params.bias_scale;
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("SVM weights diverged".into()));
        }
        weights.push(w);
        biases.push(b);
    }
    Ok(SvmModel {
        classes,
        weights,
        biases,
        c: params.c,
        seed: params.seed,
    })
}

/// `score_c = w_c · x + b_c`, uncalibrated.
pub fn predict_scores(model: &SvmModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.dim() {
        return Err(Error::invalid(format!(
            "feature dimension {} does not match model dimension {}",
            x.len(),
            model.dim()
        )));
    }
    Ok(model
        .weights
        .iter()
        .zip(&model.biases)
        .map(|(w, b)| dot(w, x) + b)
        .collect())
}

/// Index of the highest-scoring class; ties go to the lower index.
pub fn predict(model: &SvmModel, x: &[f64]) -> Result<usize> {
    let s = predict_scores(model, x)?;
    Ok(s.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0)
}
