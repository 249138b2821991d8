//! Task heads and losses.
//!
//! Both losses return the gradient with respect to the fused node outputs so
//! it can be chained into the aggregation head's backward pass.

use crate::error::{LionError, Result};
use crate::mag::Csr;
use crate::rng::Rng;

/// Affine task head on top of the fused representation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major out_dim x in_dim.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl LinearHead {
    pub fn init(seed: u64, in_dim: usize, out_dim: usize) -> Self {
        let mut rng = Rng::new(seed).fork(12);
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        LinearHead {
            in_dim,
            out_dim,
            w: (0..in_dim * out_dim).map(|_| rng.uniform_in(-bound, bound)).collect(),
            b: vec![0.0; out_dim],
        }
    }

    pub fn logits(&self, z: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|i| {
                self.b[i]
                    + self.w[i * self.in_dim..(i + 1) * self.in_dim]
                        .iter()
                        .zip(z)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn predict(&self, z: &[f64]) -> usize {
        let logits = self.logits(z);
        logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Loss value plus gradients for the head and the fused outputs.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    /// Same shape as the forward outputs; zero outside the batch.
    pub d_z: Vec<Vec<f64>>,
    pub d_w: Vec<f64>,
    pub d_b: Vec<f64>,
}

/// Softmax cross-entropy over a linear head, averaged over `batch` nodes.
pub fn classification_loss(
    z: &[Vec<f64>],
    batch: &[usize],
    labels: &[usize],
    head: &LinearHead,
) -> Result<LossGrad> {
    if batch.is_empty() {
        return Err(LionError::Argument("classification_loss: empty batch".into()));
    }
    let d_f = head.in_dim;
    let c = head.out_dim;
    let mut loss = 0.0;
    let mut d_z = vec![vec![0.0; d_f]; z.len()];
    let mut d_w = vec![0.0; head.w.len()];
    let mut d_b = vec![0.0; c];
    let inv = 1.0 / batch.len() as f64;
    for &u in batch {
        let label = labels[u];
        if label >= c {
            return Err(LionError::Argument(format!(
                "classification_loss: label {label} out of range for {c} classes"
            )));
        }
        let logits = head.logits(&z[u]);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        loss -= ((exps[label] / total).ln()) * inv;
        for i in 0..c {
            let p = exps[i] / total;
            let d_logit = (p - if i == label { 1.0 } else { 0.0 }) * inv;
            d_b[i] += d_logit;
            let w_row = &head.w[i * d_f..(i + 1) * d_f];
            let dw_row = &mut d_w[i * d_f..(i + 1) * d_f];
            for j in 0..d_f {
                dw_row[j] += d_logit * z[u][j];
                d_z[u][j] += d_logit * w_row[j];
            }
        }
    }
    Ok(LossGrad {
        loss,
        d_z,
        d_w,
        d_b,
    })
}

/// Dot-product similarity between two fused node vectors.
pub fn link_score(z_u: &[f64], z_v: &[f64]) -> f64 {
    z_u.iter().zip(z_v).map(|(a, b)| a * b).sum()
}

/// Binary cross-entropy with logits over positive and negative node pairs;
/// the score is the dot product of the endpoints.
pub fn link_loss(
    z: &[Vec<f64>],
    positives: &[(usize, usize)],
    negatives: &[(usize, usize)],
) -> Result<LossGrad> {
    let total_pairs = positives.len() + negatives.len();
    if total_pairs == 0 {
        return Err(LionError::Argument("link_loss: no pairs".into()));
    }
    let d_f = z.first().map_or(0, |v| v.len());
    let mut loss = 0.0;
    let mut d_z = vec![vec![0.0; d_f]; z.len()];
    let inv = 1.0 / total_pairs as f64;
    let mut accumulate = |u: usize, v: usize, positive: bool| {
        let s = link_score(&z[u], &z[v]);
        // softplus in a saturation-safe form
        let softplus = |x: f64| {
            if x > 30.0 {
                x
            } else {
                (1.0 + x.exp()).ln()
            }
        };
        let sigma = 1.0 / (1.0 + (-s).exp());
        let (l, d_s) = if positive {
            (softplus(-s), sigma - 1.0)
        } else {
            (softplus(s), sigma)
        };
        loss += l * inv;
        for j in 0..d_f {
            d_z[u][j] += d_s * inv * z[v][j];
            d_z[v][j] += d_s * inv * z[u][j];
        }
    };
    for &(u, v) in positives {
        accumulate(u, v, true);
    }
    for &(u, v) in negatives {
        accumulate(u, v, false);
    }
    Ok(LossGrad {
        loss,
        d_z,
        d_w: Vec::new(),
        d_b: Vec::new(),
    })
}

/// Uniform negative pairs that are not edges (and not self-pairs) of `csr`.
pub fn sample_negative_pairs(csr: &Csr, count: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    let n = csr.n_nodes();
    let mut out = Vec::with_capacity(count);
    let mut guard = 0usize;
    while out.len() < count && guard < count * 1000 {
        guard += 1;
        let u = rng.below(n);
        let v = rng.below(n);
        if u != v && !csr.has_edge(u, v) {
            out.push((u, v));
        }
    }
    out
}
