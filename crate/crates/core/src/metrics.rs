//! Target effectiveness measures: AP@k and nDCG@k with trec_eval conventions.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::Grid;
use crate::trec_io::{JudgmentSet, RankedList, RunMatrix};

pub const DEFAULT_REL_THRESHOLD: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Ap,
    Ndcg,
}

/// A target metric such as `ap@50` or `ndcg@10`.
///
/// `rel_threshold` is the minimum grade counted as relevant by AP; nDCG uses
/// the grade itself as gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub cutoff: usize,
    pub rel_threshold: u32,
}

impl MetricSpec {
    pub fn ap(cutoff: usize) -> Self {
        Self {
            kind: MetricKind::Ap,
            cutoff,
            rel_threshold: DEFAULT_REL_THRESHOLD,
        }
    }

    pub fn ndcg(cutoff: usize) -> Self {
        Self {
            kind: MetricKind::Ndcg,
            cutoff,
            rel_threshold: DEFAULT_REL_THRESHOLD,
        }
    }

    pub fn with_rel_threshold(mut self, rel_threshold: u32) -> Self {
        self.rel_threshold = rel_threshold;
        self
    }

    pub fn evaluate(&self, list: &RankedList, judgments: &JudgmentSet) -> f64 {
        match self.kind {
            MetricKind::Ap => {
                average_precision_at_k(list, judgments, self.cutoff, self.rel_threshold)
            }
            MetricKind::Ndcg => ndcg_at_k(list, judgments, self.cutoff),
        }
    }

    /// True when the query has nothing the metric can reward.
    fn is_zero_relevant(&self, query_id: &str, judgments: &JudgmentSet) -> bool {
        match self.kind {
            MetricKind::Ap => judgments.num_relevant(query_id, self.rel_threshold) == 0,
            MetricKind::Ndcg => judgments.query_grades(query_id).all(|g| g == 0),
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MetricKind::Ap => {
                write!(f, "ap@{}", self.cutoff)?;
                if self.rel_threshold != DEFAULT_REL_THRESHOLD {
                    write!(f, ":rel={}", self.rel_threshold)?;
                }
                Ok(())
            }
            MetricKind::Ndcg => write!(f, "ndcg@{}", self.cutoff),
        }
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Config(format!("invalid metric {s:?}: {why}"));
        let (head, suffix) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        let (name, cutoff) = head
            .split_once('@')
            .ok_or_else(|| bad("expected <name>@<cutoff>"))?;
        let cutoff: usize = cutoff.parse().map_err(|_| bad("cutoff is not an integer"))?;
        if cutoff == 0 {
            return Err(bad("cutoff must be at least 1"));
        }
        let mut spec = match name.to_ascii_lowercase().as_str() {
            "ap" | "map" => MetricSpec::ap(cutoff),
            "ndcg" => MetricSpec::ndcg(cutoff),
            _ => return Err(bad("unknown metric (expected ap or ndcg)")),
        };
        if let Some(suffix) = suffix {
            let rel = suffix
                .strip_prefix("rel=")
                .ok_or_else(|| bad("only the :rel=<grade> suffix is supported"))?;
            if spec.kind != MetricKind::Ap {
                return Err(bad("rel threshold only applies to ap"));
            }
            let rel: u32 = rel.parse().map_err(|_| bad("rel is not an integer"))?;
            if rel == 0 {
                return Err(bad("rel must be at least 1"));
            }
            spec.rel_threshold = rel;
        }
        Ok(spec)
    }
}

impl Serialize for MetricSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// AP truncated at rank `k`, normalized by the number of relevant judged
/// documents `R` (trec_eval `map_cut`). Returns 0 when `R = 0`.
pub fn average_precision_at_k(
    list: &RankedList,
    judgments: &JudgmentSet,
    k: usize,
    rel_threshold: u32,
) -> f64 {
    let total_relevant = judgments.num_relevant(list.query_id(), rel_threshold);
    if total_relevant == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, entry) in list.top_k(k).iter().enumerate() {
        if judgments.grade(list.query_id(), &entry.doc_id) >= rel_threshold {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total_relevant as f64
}

/// nDCG at rank `k` with linear gain and `log2(i + 1)` discount; the ideal
/// ranking is built from every judged document of the query. Returns 0 when
/// the ideal DCG is 0.
pub fn ndcg_at_k(list: &RankedList, judgments: &JudgmentSet, k: usize) -> f64 {
    let discount = |i: usize| ((i + 2) as f64).log2();
    let dcg: f64 = list
        .top_k(k)
        .iter()
        .enumerate()
        .map(|(i, e)| judgments.grade(list.query_id(), &e.doc_id) as f64 / discount(i))
        .sum();
    let mut ideal: Vec<u32> = judgments
        .query_grades(list.query_id())
        .filter(|&g| g > 0)
        .collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| g as f64 / discount(i))
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Metric values `μ` for every `(query, ranker)` cell.
#[derive(Debug, Clone, Serialize)]
pub struct EffectivenessMatrix {
    pub metric: MetricSpec,
    pub grid: Grid,
    /// Queries without any judged document the metric can reward; their cells are 0.
    pub zero_relevant: Vec<String>,
}

impl EffectivenessMatrix {
    /// Wraps precomputed values, checking they lie in `[0, 1]`.
    pub fn from_grid(metric: MetricSpec, grid: Grid) -> Result<Self> {
        if let Some(v) = grid.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Validation(format!(
                "effectiveness value {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            metric,
            grid,
            zero_relevant: Vec::new(),
        })
    }
}

pub fn effectiveness_matrix(
    runs: &RunMatrix,
    judgments: &JudgmentSet,
    metric: MetricSpec,
) -> Result<EffectivenessMatrix> {
    let m = runs.num_rankers();
    let values: Vec<f64> = (0..runs.num_queries() * m)
        .into_par_iter()
        .map(|idx| metric.evaluate(runs.cell(idx / m, idx % m), judgments))
        .collect();
    let zero_relevant: Vec<String> = runs
        .queries()
        .iter()
        .filter(|q| metric.is_zero_relevant(q, judgments))
        .cloned()
        .collect();
    if !zero_relevant.is_empty() {
        warn!(
            "{metric}: {} queries have no relevant judgments and score 0: {}",
            zero_relevant.len(),
            zero_relevant.join(", ")
        );
    }
    let grid = Grid::new(runs.queries().to_vec(), runs.rankers().to_vec(), values)?;
    Ok(EffectivenessMatrix {
        metric,
        grid,
        zero_relevant,
    })
}
