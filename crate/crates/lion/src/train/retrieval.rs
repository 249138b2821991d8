//! Cross-modal retrieval evaluation over a shared embedding space.

use crate::error::{LionError, Result};
use crate::train::metrics::{hits_at_k, mrr, pessimistic_rank};

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Ranks each query's ground-truth candidate by cosine similarity
/// (pessimistic ties) and reports (MRR, Hits@k).
pub fn retrieval_eval(
    queries: &[Vec<f64>],
    candidates: &[Vec<f64>],
    ground_truth: &[usize],
    k: usize,
) -> Result<(f64, f64)> {
    if queries.len() != ground_truth.len() {
        return Err(LionError::Argument(format!(
            "retrieval_eval: {} queries vs {} ground-truth entries",
            queries.len(),
            ground_truth.len()
        )));
    }
    let ranks = retrieval_ranks(queries, candidates, ground_truth)?;
    Ok((mrr(&ranks)?, hits_at_k(&ranks, k)?))
}

/// Pessimistic rank of the true candidate per query.
pub fn retrieval_ranks(
    queries: &[Vec<f64>],
    candidates: &[Vec<f64>],
    ground_truth: &[usize],
) -> Result<Vec<usize>> {
    let mut ranks = Vec::with_capacity(queries.len());
    for (q, &gt) in queries.iter().zip(ground_truth) {
        if gt >= candidates.len() {
            return Err(LionError::Argument(format!(
                "retrieval_eval: ground truth {gt} out of range for {} candidates",
                candidates.len()
            )));
        }
        let target = cosine(q, &candidates[gt]);
        let others: Vec<f64> = candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != gt)
            .map(|(_, c)| cosine(q, c))
            .collect();
        ranks.push(pessimistic_rank(target, &others));
    }
    Ok(ranks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn identical_sets_give_perfect_mrr() {
        let mut rng = Rng::new(50);
        let emb: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..4).map(|_| rng.normal()).collect())
            .collect();
        let gt: Vec<usize> = (0..10).collect();
        let (m, h) = retrieval_eval(&emb, &emb, &gt, 3).unwrap();
        assert_eq!(m, 1.0);
        assert_eq!(h, 1.0);
    }

    #[test]
    fn reversed_similarity_hand_case() {
        // three orthogonal queries, ground truth pointing at the candidate
        // each query is least similar to: every true target ranks last (3),
        // so MRR = 1/3 and Hits@1 = 0.
        let queries = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let candidates = vec![
            vec![-1.0, 0.5, 0.5],
            vec![0.5, -1.0, 0.5],
            vec![0.5, 0.5, -1.0],
        ];
        let gt = vec![0, 1, 2];
        let ranks = retrieval_ranks(&queries, &candidates, &gt).unwrap();
        assert_eq!(ranks, vec![3, 3, 3]);
        let (m, h1) = retrieval_eval(&queries, &candidates, &gt, 1).unwrap();
        assert!((m - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(h1, 0.0);
    }

    #[test]
    fn random_embeddings_match_uniform_rank_expectation() {
        // with independent random embeddings the true candidate's rank is
        // uniform on 1..=n, so E[MRR] = H_n / n.
        let n = 1000;
        let mut rng = Rng::new(51);
        let queries: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..8).map(|_| rng.normal()).collect())
            .collect();
        let candidates: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..8).map(|_| rng.normal()).collect())
            .collect();
        let gt: Vec<usize> = (0..n).collect();
        let (m, _) = retrieval_eval(&queries, &candidates, &gt, 3).unwrap();
        let nf = n as f64;
        let harmonic: f64 = (1..=n).map(|r| 1.0 / r as f64).sum();
        let expect = harmonic / nf;
        let second_moment: f64 = (1..=n).map(|r| 1.0 / (r as f64).powi(2)).sum::<f64>() / nf;
        let var = second_moment - expect * expect;
        let sigma = (var / nf).sqrt();
        assert!(
            (m - expect).abs() < 3.0 * sigma,
            "mrr {m}, expect {expect} +- {sigma}"
        );
    }
}
