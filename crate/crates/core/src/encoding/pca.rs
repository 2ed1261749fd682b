//! Optional per-channel PCA applied before the GMM. Off by default.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::gmm::subsample;
use crate::descriptors::Channel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub channel: Option<Channel>,
    pub input_dim: usize,
    pub output_dim: usize,
    pub mean: Vec<f64>,
    /// Row-major `output_dim × input_dim`, rows ordered by decreasing variance.
    pub components: Vec<f64>,
    pub seed: u64,
}

impl Pca {
    /// Fits on a seeded subsample of at most `cap` rows. Each component's sign
    /// is fixed so its largest-magnitude entry is positive.
    pub fn fit(samples: &[Vec<f64>], output_dim: usize, seed: u64, cap: usize) -> Result<Self> {
        let input_dim = samples
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("PCA needs at least one sample"))?;
        if output_dim == 0 || output_dim > input_dim {
            return Err(Error::Config(format!(
                "PCA output dimension {output_dim} outside 1..={input_dim}"
            )));
        }
        if samples.iter().any(|s| s.len() != input_dim) {
            return Err(Error::invalid("PCA samples have inconsistent dimensions"));
        }
        let rows = subsample(samples, cap, seed);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; input_dim];
        for r in &rows {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
        }
        let mut cov = DMatrix::<f64>::zeros(input_dim, input_dim);
        for r in &rows {
            let c: Vec<f64> = r.iter().zip(&mean).map(|(v, m)| v - m).collect();
            for i in 0..input_dim {
                for j in i..input_dim {
                    cov[(i, j)] += c[i] * c[j];
                }
            }
        }
        for i in 0..input_dim {
            for j in i..input_dim {
                let v = cov[(i, j)] / n;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..input_dim).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut components = Vec::with_capacity(output_dim * input_dim);
        for &c in order.iter().take(output_dim) {
            let col = eig.eigenvectors.column(c);
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            components.extend(col.iter().map(|v| v * sign));
        }
        Ok(Self {
            channel: None,
            input_dim,
            output_dim,
            mean,
            components,
            seed,
        })
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .chunks(self.input_dim)
            .map(|row| row.iter().zip(x).zip(&self.mean).map(|((w, v), m)| w * (v - m)).sum())
            .collect()
    }
}
