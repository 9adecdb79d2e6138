use crate::error::{Error, Result};
use crate::trec_io::{EmbeddingTable, RankedList};

/// Cosine similarity; 0 if either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Negated diameter of the top-`k` document embeddings: minus the largest
/// pairwise Euclidean distance. Tighter clusters score higher.
pub fn dm(cell: &RankedList, embeddings: &EmbeddingTable, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Compute("dm needs k >= 1".into()));
    }
    let vectors = cell
        .top_k(k)
        .iter()
        .map(|e| {
            embeddings.get(&e.doc_id).ok_or_else(|| {
                Error::Compute(format!("no embedding for document {}", e.doc_id))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut diameter = 0.0f64;
    for (i, a) in vectors.iter().enumerate() {
        for b in &vectors[i + 1..] {
            diameter = diameter.max(euclidean(a, b));
        }
    }
    Ok(-diameter)
}
