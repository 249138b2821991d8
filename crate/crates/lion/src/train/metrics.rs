//! Evaluation metrics: classification, ranking, clustering.
//!
//! Ranking ties are broken pessimistically (a tied candidate counts as
//! ranked ahead of the query's target), so MRR/Hits are reproducible and
//! conservative.

use crate::error::{LionError, Result};

/// Fraction of exact matches.
pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.is_empty() || preds.len() != labels.len() {
        return Err(LionError::Argument(format!(
            "accuracy: {} predictions vs {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// Unweighted mean of per-class F1 scores over every class present in the
/// labels or predictions; empty-class F1 counts as zero.
pub fn macro_f1(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.is_empty() || preds.len() != labels.len() {
        return Err(LionError::Argument(format!(
            "macro_f1: {} predictions vs {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let n_classes = preds.iter().chain(labels).copied().max().unwrap_or(0) + 1;
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fnn = vec![0usize; n_classes];
    for (&p, &l) in preds.iter().zip(labels) {
        if p == l {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fnn[l] += 1;
        }
    }
    let mut total = 0.0;
    for c in 0..n_classes {
        let denom = 2 * tp[c] + fp[c] + fnn[c];
        if denom > 0 {
            total += 2.0 * tp[c] as f64 / denom as f64;
        }
    }
    Ok(total / n_classes as f64)
}

/// Pessimistic rank of the target among candidate scores: 1 plus the number
/// of other candidates scoring greater than or equal to it.
pub fn pessimistic_rank(target_score: f64, other_scores: &[f64]) -> usize {
    1 + other_scores.iter().filter(|&&s| s >= target_score).count()
}

/// Mean reciprocal rank over 1-indexed ranks.
pub fn mrr(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(LionError::Argument("mrr: no queries".into()));
    }
    Ok(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

/// Fraction of queries whose target lands in the top k.
pub fn hits_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(LionError::Argument("hits_at_k: k must be positive".into()));
    }
    if ranks.is_empty() {
        return Err(LionError::Argument("hits_at_k: no queries".into()));
    }
    Ok(ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64)
}

fn contingency(a: &[usize], b: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64) {
    let ka = a.iter().copied().max().unwrap_or(0) + 1;
    let kb = b.iter().copied().max().unwrap_or(0) + 1;
    let mut table = vec![vec![0.0; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1.0;
    }
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    (table, rows, cols, a.len() as f64)
}

/// Normalized mutual information `2 I(Y, C) / (H(Y) + H(C))`; two trivial
/// (zero-entropy) partitions count as a perfect match.
pub fn nmi(assignments: &[usize], labels: &[usize]) -> Result<f64> {
    if assignments.is_empty() || assignments.len() != labels.len() {
        return Err(LionError::Argument(format!(
            "nmi: {} assignments vs {} labels",
            assignments.len(),
            labels.len()
        )));
    }
    let (table, rows, cols, n) = contingency(assignments, labels);
    let entropy = |counts: &[f64]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / n;
                -p * p.ln()
            })
            .sum()
    };
    let h_a = entropy(&rows);
    let h_b = entropy(&cols);
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0.0 {
                mi += (nij / n) * ((n * nij) / (rows[i] * cols[j])).ln();
            }
        }
    }
    if h_a + h_b == 0.0 {
        return Ok(1.0);
    }
    Ok((2.0 * mi / (h_a + h_b)).clamp(0.0, 1.0))
}

/// Adjusted Rand index; a degenerate (zero) denominator means the partitions
/// agree perfectly.
pub fn ari(assignments: &[usize], labels: &[usize]) -> Result<f64> {
    if assignments.is_empty() || assignments.len() != labels.len() {
        return Err(LionError::Argument(format!(
            "ari: {} assignments vs {} labels",
            assignments.len(),
            labels.len()
        )));
    }
    let (table, rows, cols, n) = contingency(assignments, labels);
    let choose2 = |x: f64| x * (x - 1.0) / 2.0;
    let sum_ij: f64 = table.iter().flatten().map(|&x| choose2(x)).sum();
    let sum_a: f64 = rows.iter().map(|&x| choose2(x)).sum();
    let sum_b: f64 = cols.iter().map(|&x| choose2(x)).sum();
    let expected = sum_a * sum_b / choose2(n);
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((sum_ij - expected) / (max_index - expected))
}
