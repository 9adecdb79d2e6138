//! Predictors computed from the retrieval score distribution alone.

use crate::error::{Error, Result};
use crate::stats::{mean, population_std};

/// Floor for normalization divisors.
pub const NORM_EPSILON: f64 = 1e-9;

/// Retrieval scores of one ranked list, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreList {
    scores: Vec<f64>,
}

impl ScoreList {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Compute("empty score list".into()));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Validation("non-finite score".into()));
        }
        if scores.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Validation("scores must be in descending order".into()));
        }
        Ok(Self { scores })
    }

    /// The complete list.
    pub fn full(&self) -> &[f64] {
        &self.scores
    }

    /// The first `min(k, len)` scores.
    pub fn top(&self, k: usize) -> &[f64] {
        &self.scores[..k.min(self.scores.len())]
    }

    pub fn top_opt(&self, k: Option<usize>) -> &[f64] {
        k.map_or(self.full(), |k| self.top(k))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Shifts every score by `eps - min` so the smallest becomes `eps`.
    /// Lists whose scores are already positive are returned unchanged.
    pub fn shifted_positive(&self, eps: f64) -> ScoreList {
        let min = self.scores.iter().copied().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            return self.clone();
        }
        ScoreList {
            scores: self.scores.iter().map(|s| s - min + eps).collect(),
        }
    }

    /// `|mean(full list)|` floored at [`NORM_EPSILON`].
    pub fn mean_abs(&self) -> f64 {
        mean(&self.scores).abs().max(NORM_EPSILON)
    }
}

/// Resolved score-normalization divisor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    None,
    /// `|mean|` of the full list's scores.
    MeanAbs,
    /// A collection score supplied by the user; its magnitude is used.
    Provided(f64),
}

impl Norm {
    pub fn divisor(self, list: &ScoreList) -> f64 {
        match self {
            Norm::None => 1.0,
            Norm::MeanAbs => list.mean_abs(),
            Norm::Provided(c) => c.abs().max(NORM_EPSILON),
        }
    }
}

/// Normalized query clarity: `σ(top-k) / D`.
pub fn nqc(list: &ScoreList, k: usize, norm: Norm) -> Result<f64> {
    if k == 0 {
        return Err(Error::Compute("nqc needs k >= 1".into()));
    }
    Ok(population_std(list.top(k)) / norm.divisor(list))
}

/// Weighted information gain: mean of `(s_i - c)` over the top `k`, divided
/// by `sqrt(query_len)` (1 when unknown).
pub fn wig(list: &ScoreList, k: usize, collection_score: f64, query_len: Option<u32>) -> Result<f64> {
    if k == 0 {
        return Err(Error::Compute("wig needs k >= 1".into()));
    }
    let top = list.top(k);
    let len = f64::from(query_len.unwrap_or(1).max(1));
    let gain: f64 = top.iter().map(|s| s - collection_score).sum::<f64>() / top.len() as f64;
    Ok(gain / len.sqrt())
}

/// Largest population standard deviation over the prefixes `top-1 ..= top-len`.
pub fn sigma_max(scores: &[f64], norm_divisor: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Compute("sigma_max on empty score list".into()));
    }
    // Welford; keeps all-equal prefixes at exactly zero
    let (mut m, mut m2, mut best) = (0.0f64, 0.0f64, 0.0f64);
    for (i, &s) in scores.iter().enumerate() {
        let n = (i + 1) as f64;
        let delta = s - m;
        m += delta / n;
        m2 += delta * (s - m);
        best = best.max((m2 / n).max(0.0).sqrt());
    }
    Ok(best / norm_divisor)
}

/// Standard deviation of the prefix of scores at least `x · s_1`.
pub fn n_sigma_frac(scores: &[f64], x: f64, norm_divisor: f64) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::Compute(format!("fraction x={x} outside (0, 1]")));
    }
    let first = *scores
        .first()
        .ok_or_else(|| Error::Compute("n_sigma_frac on empty score list".into()))?;
    let threshold = x * first;
    let len = 1 + scores[1..].iter().take_while(|&&s| s >= threshold).count();
    Ok(population_std(&scores[..len]) / norm_divisor)
}

/// Score magnitude and variance: `mean(s_i · |ln(s_i / μ̄)|) / D` over the top `k`.
///
/// Every top-k score must be positive; see [`ScoreList::shifted_positive`].
pub fn smv(list: &ScoreList, k: usize, norm: Norm) -> Result<f64> {
    if k == 0 {
        return Err(Error::Compute("smv needs k >= 1".into()));
    }
    let top = list.top(k);
    if let Some(s) = top.iter().find(|&&s| s <= 0.0) {
        return Err(Error::Compute(format!(
            "smv needs positive scores, found {s} (enable shift for this ranker)"
        )));
    }
    let mu = mean(top);
    let sum: f64 = top.iter().map(|&s| s * (s / mu).ln().abs()).sum();
    Ok(sum / top.len() as f64 / norm.divisor(list))
}

/// Exponents of the score-normalized NQC generalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScnqcParams {
    /// Exponent on the normalization divisor.
    pub alpha: f64,
    /// Deviation exponent; 2 gives a standard deviation.
    pub beta: f64,
    /// Exponent on per-document weights.
    pub gamma: f64,
}

impl Default for ScnqcParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            gamma: 0.0,
        }
    }
}

/// `((1/k') Σ w_i^γ |s_i - μ̄|^β)^(1/β) / D^α`; with the default parameters
/// this is [`nqc`].
pub fn scnqc(
    list: &ScoreList,
    k: usize,
    params: ScnqcParams,
    doc_weights: Option<&[f64]>,
    norm: Norm,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::Compute("scnqc needs k >= 1".into()));
    }
    if params.beta <= 0.0 {
        return Err(Error::Compute("scnqc needs beta > 0".into()));
    }
    let top = list.top(k);
    if let Some(w) = doc_weights {
        if w.len() < top.len() {
            return Err(Error::Compute(format!(
                "{} document weights for {} scores",
                w.len(),
                top.len()
            )));
        }
    }
    let mu = mean(top);
    let sum: f64 = top
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let w = doc_weights.map_or(1.0, |w| w[i]).powf(params.gamma);
            w * (s - mu).abs().powf(params.beta)
        })
        .sum();
    let spread = (sum / top.len() as f64).powf(1.0 / params.beta);
    Ok(spread / norm.divisor(list).powf(params.alpha))
}

/// `λ · base(original) + (1 - λ) · mean(base(variants))`; just `base(original)`
/// without variants.
pub fn qv_combine(original: f64, variants: &[f64], lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Compute(format!("lambda={lambda} outside [0, 1]")));
    }
    if variants.is_empty() {
        return Ok(original);
    }
    Ok(lambda * original + (1.0 - lambda) * mean(variants))
}

/// Query-variant NQC: combines NQC of the original list with NQC of each variant's list.
pub fn qv_nqc(
    original: &ScoreList,
    variants: &[ScoreList],
    lambda: f64,
    k: usize,
    norm: impl Fn(&ScoreList) -> Norm,
) -> Result<f64> {
    let base = nqc(original, k, norm(original))?;
    let others = variants
        .iter()
        .map(|v| nqc(v, k, norm(v)))
        .collect::<Result<Vec<_>>>()?;
    qv_combine(base, &others, lambda)
}
