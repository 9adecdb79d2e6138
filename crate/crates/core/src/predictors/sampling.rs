//! Sublist-sampling predictors (RSD, UEF) over an NQC base estimator.

use itertools::Itertools;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::score::{nqc, Norm, ScoreList};
use crate::correlation::{permutation_tau, Tau};
use crate::error::{Error, Result};
use crate::stats::mean;
use crate::trec_io::{EmbeddingTable, RankedList};

/// Upper bound on the number of sublists exhaustive mode will enumerate.
pub const MAX_EXHAUSTIVE: u128 = 100_000;

/// How sublists of the top-k are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sampling {
    /// Number of sublists when sampling.
    pub samples: usize,
    /// Sublist size `k'`.
    pub sub: usize,
    /// Enumerate all `C(len, k')` sublists instead of sampling.
    pub exhaustive: bool,
    pub seed: u64,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
        if acc > MAX_EXHAUSTIVE * 1000 {
            return acc;
        }
    }
    acc
}

/// Index sets (each ascending) of the sublists to evaluate.
pub fn sublists(len: usize, sampling: &Sampling) -> Result<Vec<Vec<usize>>> {
    let sub = sampling.sub;
    if sub < 2 {
        return Err(Error::Compute(format!("sublist size {sub} must be at least 2")));
    }
    if sub > len {
        return Err(Error::Compute(format!(
            "sublist size {sub} exceeds list length {len}"
        )));
    }
    if sampling.exhaustive {
        let count = binomial(len, sub);
        if count > MAX_EXHAUSTIVE {
            return Err(Error::Compute(format!(
                "exhaustive enumeration of C({len}, {sub}) sublists exceeds {MAX_EXHAUSTIVE}"
            )));
        }
        return Ok((0..len).combinations(sub).collect());
    }
    if sampling.samples == 0 {
        return Err(Error::Compute("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    Ok((0..sampling.samples)
        .map(|_| {
            let mut idx = index::sample(&mut rng, len, sub).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect())
}

/// Robust standard deviation: mean NQC over sublists of the top `k`.
pub fn rsd(list: &ScoreList, k: usize, norm: Norm, sampling: &Sampling) -> Result<f64> {
    let top = list.top(k);
    let estimates = sublists(top.len(), sampling)?
        .into_iter()
        .map(|idx| {
            let scores: Vec<f64> = idx.iter().map(|&i| top[i]).collect();
            // the divisor still comes from the full list
            Ok(crate::stats::population_std(&scores) / norm.divisor(list))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean(&estimates))
}

/// Agreement weight `(1 + τ) / 2` between the original order of `vectors`
/// and their order by descending cosine similarity to the centroid of the
/// `sample` rows. `norms` holds the Euclidean norm of each vector.
pub fn rerank_weight(vectors: &[&[f64]], norms: &[f64], sample: &[usize]) -> f64 {
    let dim = vectors[0].len();
    let mut centroid = vec![0.0; dim];
    for &i in sample {
        for (c, v) in centroid.iter_mut().zip(vectors[i]) {
            *c += v;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= sample.len() as f64);
    let centroid_norm = centroid.iter().map(|c| c * c).sum::<f64>().sqrt();
    let sims: Vec<f64> = vectors
        .iter()
        .zip(norms)
        .map(|(v, &n)| {
            if n == 0.0 || centroid_norm == 0.0 {
                0.0
            } else {
                v.iter().zip(&centroid).map(|(a, b)| a * b).sum::<f64>() / (n * centroid_norm)
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    // stable: equal similarities keep their original order
    order.sort_by(|&a, &b| sims[b].partial_cmp(&sims[a]).unwrap_or(std::cmp::Ordering::Equal));
    match permutation_tau(&order) {
        Tau::Defined(t) => (1.0 + t) / 2.0,
        Tau::Undefined(_) => 1.0,
    }
}

/// Utility estimation: mean over sampled sublists of `w · NQC(top-k)`, where
/// `w` measures how well a centroid re-ranking of the top-k preserves the
/// original order. Without embeddings every `w` is 1.
pub fn uef(
    cell: &RankedList,
    embeddings: Option<&EmbeddingTable>,
    k: usize,
    norm: Norm,
    sampling: &Sampling,
) -> Result<f64> {
    let list = ScoreList::new(cell.scores())?;
    let base = nqc(&list, k, norm)?;
    let Some(table) = embeddings else {
        return Ok(base);
    };
    let top = cell.top_k(k);
    let vectors = top
        .iter()
        .map(|e| {
            table.get(&e.doc_id).ok_or_else(|| {
                Error::Compute(format!("no embedding for document {}", e.doc_id))
            })
        })
        .collect::<Result<Vec<&[f64]>>>()?;
    let norms: Vec<f64> = vectors
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let weighted: Vec<f64> = sublists(top.len(), sampling)?
        .iter()
        .map(|idx| rerank_weight(&vectors, &norms, idx) * base)
        .collect();
    Ok(mean(&weighted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::population_std;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sampling(samples: usize, sub: usize, exhaustive: bool) -> Sampling {
        Sampling {
            samples,
            sub,
            exhaustive,
            seed: 13,
        }
    }

    #[test]
    fn exhaustive_rsd_example() {
        let s = ScoreList::new(vec![3.0, 2.0, 1.0]).unwrap();
        let v = rsd(&s, 100, Norm::None, &sampling(1, 2, true)).unwrap();
        assert_abs_diff_eq!(v, (0.5 + 1.0 + 0.5) / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.666667, epsilon = 1e-6);
    }

    #[test]
    fn full_size_single_sample_is_nqc() {
        let s = ScoreList::new(vec![9.0, 5.0, 4.0, 1.0]).unwrap();
        let v = rsd(&s, 100, Norm::MeanAbs, &sampling(1, 4, false)).unwrap();
        assert_eq!(v, nqc(&s, 100, Norm::MeanAbs).unwrap());
    }

    #[test]
    fn equal_scores_give_zero() {
        let s = ScoreList::new(vec![2.0; 8]).unwrap();
        assert_eq!(rsd(&s, 100, Norm::None, &sampling(5, 3, false)).unwrap(), 0.0);
    }

    #[test]
    fn sampling_errors() {
        let s = ScoreList::new(vec![3.0, 2.0, 1.0]).unwrap();
        assert!(rsd(&s, 100, Norm::None, &sampling(1, 4, false)).is_err());
        assert!(rsd(&s, 100, Norm::None, &sampling(1, 1, false)).is_err());
        assert!(rsd(&s, 100, Norm::None, &sampling(0, 2, false)).is_err());
        let long = ScoreList::new((0..60).rev().map(f64::from).collect()).unwrap();
        assert!(rsd(&long, 100, Norm::None, &sampling(1, 30, true)).is_err());
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let s = ScoreList::new((0..50).rev().map(|i| f64::from(i).sqrt()).collect()).unwrap();
        let a = rsd(&s, 100, Norm::None, &sampling(20, 10, false)).unwrap();
        let b = rsd(&s, 100, Norm::None, &sampling(20, 10, false)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let other = Sampling { seed: 14, ..sampling(20, 10, false) };
        assert_ne!(a, rsd(&s, 100, Norm::None, &other).unwrap());
    }

    fn cell(n: usize) -> RankedList {
        RankedList::from_scores("q", "r", (0..n).map(|i| (format!("d{i}"), (n - i) as f64 * 1.5))).unwrap()
    }

    #[test]
    fn uef_without_embeddings_is_nqc() {
        let c = cell(6);
        let s = ScoreList::new(c.scores()).unwrap();
        let v = uef(&c, None, 100, Norm::MeanAbs, &sampling(10, 3, false)).unwrap();
        assert_eq!(v, nqc(&s, 100, Norm::MeanAbs).unwrap());
    }

    #[test]
    fn uef_weight_extremes() {
        let c = cell(2);
        let base = nqc(&ScoreList::new(c.scores()).unwrap(), 100, Norm::None).unwrap();
        // centroid (1, 0.5): d1 is closer than d0, so the order flips
        let flipped: EmbeddingTable =
            [("d0", vec![1.0, 0.0]), ("d1", vec![1.0, 1.0])].into_iter().collect();
        assert_eq!(uef(&c, Some(&flipped), 100, Norm::None, &sampling(1, 2, false)).unwrap(), 0.0);
        let kept: EmbeddingTable =
            [("d0", vec![1.0, 1.0]), ("d1", vec![1.0, 0.0])].into_iter().collect();
        assert_eq!(uef(&c, Some(&kept), 100, Norm::None, &sampling(1, 2, false)).unwrap(), base);
    }

    #[test]
    fn uef_missing_vector() {
        let c = cell(3);
        let t: EmbeddingTable = [("d0", vec![1.0]), ("d1", vec![2.0])].into_iter().collect();
        let err = uef(&c, Some(&t), 100, Norm::None, &sampling(1, 2, false)).unwrap_err();
        assert!(err.to_string().contains("d2"));
    }

    #[test]
    fn rerank_weight_matches_reference() {
        use crate::correlation::kendall_tau_b_bruteforce;
        use crate::predictors::embedding::cosine;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        use rand::Rng;
        for _ in 0..50 {
            let n = rng.gen_range(2..20);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let vectors: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let norms: Vec<f64> = rows.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
            let sample: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
            if sample.is_empty() {
                continue;
            }
            // reference: explicit centroid, cosine, stable sort, brute-force tau
            let mut centroid = vec![0.0; 4];
            for &i in &sample {
                for d in 0..4 {
                    centroid[d] += rows[i][d] / sample.len() as f64;
                }
            }
            let sims: Vec<f64> = rows.iter().map(|r| cosine(r, &centroid)).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| sims[b].partial_cmp(&sims[a]).unwrap());
            let mut new_pos = vec![0.0; n];
            for (p, &d) in order.iter().enumerate() {
                new_pos[d] = p as f64;
            }
            let orig: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let t = kendall_tau_b_bruteforce(&orig, &new_pos).unwrap().value().unwrap();
            let w = rerank_weight(&vectors, &norms, &sample);
            assert!((w - (1.0 + t) / 2.0).abs() < 1e-12, "{w} vs {t}");
        }
    }

    fn desc_scores() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((0u8..6).prop_map(f64::from), 2..12).prop_map(|mut v| {
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            v
        })
    }

    proptest! {
        #[test]
        fn exhaustive_matches_enumeration(v in desc_scores(), sub in 2usize..12) {
            prop_assume!(sub <= v.len());
            let s = ScoreList::new(v.clone()).unwrap();
            let got = rsd(&s, 100, Norm::None, &sampling(1, sub, true)).unwrap();
            // independent enumeration via bitmasks
            let n = v.len();
            let mut vals = Vec::new();
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize == sub {
                    let chosen: Vec<f64> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| v[i]).collect();
                    vals.push(population_std(&chosen));
                }
            }
            let expected = vals.iter().sum::<f64>() / vals.len() as f64;
            prop_assert!((got - expected).abs() <= 1e-12, "{} vs {}", got, expected);
        }
    }
}
