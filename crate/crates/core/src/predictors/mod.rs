//! Query performance predictors and the prediction matrix builder.
//!
//! Predictors are configured with a compact grammar,
//! `<kind>[:key=value,...]`, for example `nqc:k=100,norm=mean_abs`,
//! `sigma_frac:x=0.5`, `uef:k=100,samples=30,sub=50,seed=13` or
//! `external:file=bertqpp.tsv`. Every kind accepts `name=<label>` to set the
//! row label used in reports.

pub mod embedding;
pub mod sampling;
pub mod score;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::debug;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::Grid;
use crate::stats::mean;
use crate::trec_io::{CollectionScores, EmbeddingTable, ExternalPredictions, QueryMeta, RunMatrix};

pub use embedding::dm;
pub use sampling::{rsd, uef, Sampling};
pub use score::{
    n_sigma_frac, nqc, qv_combine, qv_nqc, scnqc, sigma_max, smv, wig, Norm, ScnqcParams,
    ScoreList,
};

pub const DEFAULT_SEED: u64 = 13;
const SHIFT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PredictorKind {
    Nqc,
    Wig,
    SigmaMax,
    SigmaFrac,
    Smv,
    Uef,
    Rsd,
    Scnqc,
    QvNqc,
    Dm,
    External,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 11] = [
        PredictorKind::Nqc,
        PredictorKind::Wig,
        PredictorKind::SigmaMax,
        PredictorKind::SigmaFrac,
        PredictorKind::Smv,
        PredictorKind::Uef,
        PredictorKind::Rsd,
        PredictorKind::Scnqc,
        PredictorKind::QvNqc,
        PredictorKind::Dm,
        PredictorKind::External,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PredictorKind::Nqc => "nqc",
            PredictorKind::Wig => "wig",
            PredictorKind::SigmaMax => "sigma_max",
            PredictorKind::SigmaFrac => "sigma_frac",
            PredictorKind::Smv => "smv",
            PredictorKind::Uef => "uef",
            PredictorKind::Rsd => "rsd",
            PredictorKind::Scnqc => "scnqc",
            PredictorKind::QvNqc => "qv_nqc",
            PredictorKind::Dm => "dm",
            PredictorKind::External => "external",
        }
    }

    /// Keys accepted in the predictor string besides `name`.
    fn keys(self) -> &'static [&'static str] {
        match self {
            PredictorKind::Nqc | PredictorKind::Wig | PredictorKind::SigmaMax => &["k", "norm"],
            PredictorKind::SigmaFrac => &["k", "x", "norm"],
            PredictorKind::Smv => &["k", "norm", "shift"],
            PredictorKind::Uef | PredictorKind::Rsd => {
                &["k", "norm", "samples", "sub", "exhaustive", "seed"]
            }
            PredictorKind::Scnqc => &["k", "norm", "alpha", "beta", "gamma"],
            PredictorKind::QvNqc => &["k", "norm", "lambda"],
            PredictorKind::Dm => &["k"],
            PredictorKind::External => &["file"],
        }
    }

    pub fn uses_embeddings(self) -> bool {
        matches!(self, PredictorKind::Dm | PredictorKind::Uef)
    }
}

impl FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PredictorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown predictor {s:?}")))
    }
}

/// How retrieval scores are normalized (and, for WIG, which collection score
/// is subtracted).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    None,
    /// `|mean|` of the full retrieved list.
    MeanAbs,
    /// Collection scores from a side file.
    Provided,
}

impl NormMode {
    fn name(self) -> &'static str {
        match self {
            NormMode::None => "none",
            NormMode::MeanAbs => "mean_abs",
            NormMode::Provided => "provided",
        }
    }
}

impl FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NormMode::None),
            "mean_abs" => Ok(NormMode::MeanAbs),
            "provided" => Ok(NormMode::Provided),
            other => Err(Error::Config(format!(
                "unknown norm {other:?} (expected none, mean_abs or provided)"
            ))),
        }
    }
}

/// A fully-defaulted predictor configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSpec {
    pub kind: PredictorKind,
    pub name: Option<String>,
    /// Cutoff depth; `None` means the whole list.
    pub k: Option<usize>,
    pub x: f64,
    pub norm: NormMode,
    pub samples: usize,
    pub sub: usize,
    pub exhaustive: bool,
    pub lambda: f64,
    pub scnqc: ScnqcParams,
    pub shift: bool,
    /// Overrides the run-wide seed.
    pub seed: Option<u64>,
    pub file: Option<String>,
}

impl PredictorSpec {
    /// Default hyperparameters for `kind`.
    pub fn new(kind: PredictorKind) -> Self {
        let (k, norm) = match kind {
            PredictorKind::Wig => (Some(5), NormMode::MeanAbs),
            PredictorKind::Dm => (Some(5), NormMode::None),
            PredictorKind::SigmaMax | PredictorKind::SigmaFrac => (None, NormMode::None),
            PredictorKind::External => (None, NormMode::None),
            _ => (Some(100), NormMode::MeanAbs),
        };
        Self {
            kind,
            name: None,
            k,
            x: 0.5,
            norm,
            samples: 30,
            sub: 50,
            exhaustive: false,
            lambda: 0.5,
            scnqc: ScnqcParams::default(),
            shift: false,
            seed: None,
            file: None,
        }
    }

    pub fn external(file: impl Into<String>) -> Self {
        Self {
            file: Some(file.into()),
            ..Self::new(PredictorKind::External)
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Row label: the explicit name, else the file stem for external
    /// predictions, else the kind.
    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        if let (PredictorKind::External, Some(f)) = (self.kind, &self.file) {
            return Path::new(f)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| f.clone());
        }
        self.kind.name().to_string()
    }

    fn k_or_all(&self) -> usize {
        self.k.unwrap_or(usize::MAX)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("predictor {}: {m}", self.kind.name())));
        if self.k == Some(0) {
            return bad("k must be at least 1".into());
        }
        if !(self.x > 0.0 && self.x <= 1.0) {
            return bad(format!("x={} outside (0, 1]", self.x));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda={} outside [0, 1]", self.lambda));
        }
        if !(self.scnqc.beta > 0.0 && self.scnqc.beta.is_finite()) {
            return bad(format!("beta={} must be positive", self.scnqc.beta));
        }
        if !self.scnqc.alpha.is_finite() || !self.scnqc.gamma.is_finite() {
            return bad("alpha and gamma must be finite".into());
        }
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if self.sub < 2 {
            return bad("sub must be at least 2".into());
        }
        if self.kind == PredictorKind::External && self.file.is_none() {
            return bad("file=<path> is required".into());
        }
        if let Some(n) = &self.name {
            if n.is_empty() || n.contains([',', ':', '\t', '\n']) {
                return bad(format!("invalid name {n:?}"));
            }
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || {
            Error::Config(format!(
                "predictor {}: invalid value {value:?} for {key}",
                self.kind.name()
            ))
        };
        let float = || value.parse::<f64>().map_err(|_| bad());
        let boolean = || value.parse::<bool>().map_err(|_| bad());
        match key {
            "name" => self.name = Some(value.to_string()),
            "k" => {
                self.k = if value == "all" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad())?)
                }
            }
            "x" => self.x = float()?,
            "norm" => self.norm = value.parse()?,
            "samples" => self.samples = value.parse().map_err(|_| bad())?,
            "sub" => self.sub = value.parse().map_err(|_| bad())?,
            "exhaustive" => self.exhaustive = boolean()?,
            "seed" => self.seed = Some(value.parse().map_err(|_| bad())?),
            "lambda" => self.lambda = float()?,
            "alpha" => self.scnqc.alpha = float()?,
            "beta" => self.scnqc.beta = float()?,
            "gamma" => self.scnqc.gamma = float()?,
            "shift" => self.shift = boolean()?,
            "file" => self.file = Some(value.to_string()),
            _ => unreachable!("keys are checked before set"),
        }
        Ok(())
    }
}

impl FromStr for PredictorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k.trim(), Some(r)),
            None => (s.trim(), None),
        };
        let kind: PredictorKind = kind.parse()?;
        let mut spec = PredictorSpec::new(kind);
        for pair in rest.into_iter().flat_map(|r| r.split(',')).filter(|p| !p.trim().is_empty()) {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                Error::Config(format!("predictor {s:?}: expected key=value, got {pair:?}"))
            })?;
            let key = key.trim();
            if key != "name" && !kind.keys().contains(&key) {
                return Err(Error::Config(format!(
                    "predictor {}: unknown key {key:?} (accepted: name, {})",
                    kind.name(),
                    kind.keys().join(", ")
                )));
            }
            spec.set(key, value.trim())?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for PredictorSpec {
    /// Canonical form listing every applicable key; parses back to an equal spec.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        for key in self.kind.keys() {
            let v = match *key {
                "k" => self.k.map_or("all".to_string(), |k| k.to_string()),
                "x" => self.x.to_string(),
                "norm" => self.norm.name().to_string(),
                "samples" => self.samples.to_string(),
                "sub" => self.sub.to_string(),
                "exhaustive" => self.exhaustive.to_string(),
                "seed" => match self.seed {
                    Some(s) => s.to_string(),
                    None => continue,
                },
                "lambda" => self.lambda.to_string(),
                "alpha" => self.scnqc.alpha.to_string(),
                "beta" => self.scnqc.beta.to_string(),
                "gamma" => self.scnqc.gamma.to_string(),
                "shift" => self.shift.to_string(),
                "file" => self.file.clone().unwrap_or_default(),
                _ => continue,
            };
            parts.push(format!("{key}={v}"));
        }
        if let Some(n) = &self.name {
            parts.push(format!("name={n}"));
        }
        write!(f, "{}", self.kind.name())?;
        if !parts.is_empty() {
            write!(f, ":{}", parts.join(","))?;
        }
        Ok(())
    }
}

impl Serialize for PredictorSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Optional inputs some predictors need beyond the ranked lists.
#[derive(Debug, Clone, Default)]
pub struct SideInputs {
    pub embeddings: Option<EmbeddingTable>,
    pub query_meta: BTreeMap<String, QueryMeta>,
    pub collection_scores: Option<CollectionScores>,
    /// External predictions keyed by the `file` value of their spec.
    pub external: BTreeMap<String, ExternalPredictions>,
}

/// Estimates `φ` for every `(query, ranker)` cell.
#[derive(Debug, Clone, Serialize)]
pub struct PredictionMatrix {
    pub label: String,
    pub spec: PredictorSpec,
    pub grid: Grid,
}

impl PredictionMatrix {
    pub fn from_grid(label: impl Into<String>, spec: PredictorSpec, grid: Grid) -> Self {
        Self {
            label: label.into(),
            spec,
            grid,
        }
    }
}

/// Per-cell RNG seed derived from the run seed and the cell ids, so results
/// do not depend on evaluation order.
pub fn cell_seed(seed: u64, query_id: &str, ranker_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(query_id.as_bytes());
    h.update([0u8]);
    h.update(ranker_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields 32 bytes"))
}

fn resolve_norm(
    mode: NormMode,
    side: &SideInputs,
    query_id: &str,
    ranker_id: &str,
) -> Result<Norm> {
    Ok(match mode {
        NormMode::None => Norm::None,
        NormMode::MeanAbs => Norm::MeanAbs,
        NormMode::Provided => Norm::Provided(provided_score(side, query_id, ranker_id)?),
    })
}

fn provided_score(side: &SideInputs, query_id: &str, ranker_id: &str) -> Result<f64> {
    side.collection_scores
        .as_ref()
        .and_then(|c| c.get(query_id, ranker_id))
        .ok_or_else(|| {
            Error::Compute(format!(
                "norm=provided but no collection score for ({query_id}, {ranker_id})"
            ))
        })
}

fn predict_cell(
    runs: &RunMatrix,
    i: usize,
    j: usize,
    spec: &PredictorSpec,
    side: &SideInputs,
) -> Result<f64> {
    let cell = runs.cell(i, j);
    let (qid, rid) = (cell.query_id(), cell.ranker_id());
    let list = ScoreList::new(cell.scores())?;
    let norm = resolve_norm(spec.norm, side, qid, rid)?;
    let k = spec.k_or_all();
    let sampling = || Sampling {
        samples: spec.samples,
        sub: spec.sub,
        exhaustive: spec.exhaustive,
        seed: cell_seed(spec.seed.unwrap_or(DEFAULT_SEED), qid, rid),
    };
    let embeddings = || {
        side.embeddings.as_ref().ok_or_else(|| {
            Error::Compute(format!("predictor {} needs document embeddings", spec.kind.name()))
        })
    };
    match spec.kind {
        PredictorKind::Nqc => nqc(&list, k, norm),
        PredictorKind::Wig => {
            let c = match spec.norm {
                NormMode::None => 0.0,
                NormMode::MeanAbs => mean(list.full()),
                NormMode::Provided => provided_score(side, qid, rid)?,
            };
            let query_len = side.query_meta.get(qid).and_then(|m| m.term_count);
            wig(&list, k, c, query_len)
        }
        PredictorKind::SigmaMax => sigma_max(list.top(k), norm.divisor(&list)),
        PredictorKind::SigmaFrac => n_sigma_frac(list.top(k), spec.x, norm.divisor(&list)),
        PredictorKind::Smv => {
            if spec.shift {
                smv(&list.shifted_positive(SHIFT_EPSILON), k, norm)
            } else {
                smv(&list, k, norm)
            }
        }
        PredictorKind::Rsd => rsd(&list, k, norm, &sampling()),
        PredictorKind::Uef => uef(cell, side.embeddings.as_ref(), k, norm, &sampling()),
        PredictorKind::Scnqc => scnqc(&list, k, spec.scnqc, None, norm),
        PredictorKind::QvNqc => {
            let mut variants = Vec::new();
            let ids = side.query_meta.get(qid).map(|m| m.variants.as_slice()).unwrap_or(&[]);
            for v in ids {
                match runs.list(v, rid) {
                    Some(l) if !l.is_empty() => variants.push((v.as_str(), ScoreList::new(l.scores())?)),
                    _ => debug!("variant {v} of {qid} not retrieved by {rid}; skipped"),
                }
            }
            let base = nqc(&list, k, norm)?;
            let others = variants
                .iter()
                .map(|(v, sl)| nqc(sl, k, resolve_norm(spec.norm, side, v, rid)?))
                .collect::<Result<Vec<f64>>>()?;
            qv_combine(base, &others, spec.lambda)
        }
        PredictorKind::Dm => dm(cell, embeddings()?, k),
        PredictorKind::External => unreachable!("external predictions are not computed per cell"),
    }
}

/// Builds the `queries × rankers` prediction matrix for one predictor.
///
/// Cells are evaluated in parallel; each sampling predictor draws from its own
/// RNG stream (see [`cell_seed`]), so the result is identical to a sequential
/// evaluation.
pub fn build_prediction_matrix(
    runs: &RunMatrix,
    spec: &PredictorSpec,
    side: &SideInputs,
) -> Result<PredictionMatrix> {
    spec.validate()?;
    let label = spec.label();
    let values: Vec<f64> = if spec.kind == PredictorKind::External {
        let file = spec.file.as_deref().unwrap_or_default();
        let ext = side.external.get(file).ok_or_else(|| {
            Error::Config(format!("external predictions {file} were not loaded"))
        })?;
        ext.check_coverage(runs)?;
        runs.cells()
            .map(|(q, r)| ext.get(q, r).expect("coverage checked"))
            .collect()
    } else {
        let m = runs.num_rankers();
        (0..runs.num_queries() * m)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / m, idx % m);
                predict_cell(runs, i, j, spec, side).map_err(|e| {
                    Error::Compute(format!(
                        "{label} at ({}, {}): {e}",
                        runs.queries()[i],
                        runs.rankers()[j]
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?
    };
    let grid = Grid::new(runs.queries().to_vec(), runs.rankers().to_vec(), values)?;
    Ok(PredictionMatrix { label, spec: spec.clone(), grid })
}
