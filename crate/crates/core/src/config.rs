//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "runs": {"bm25": "runs/bm25.run", "dense": "runs/dense.run"},
//!   "qrels": "qrels.txt",
//!   "metrics": ["ap@50", "ndcg@10"],
//!   "predictors": ["nqc", "wig", "external:file=preds/bertqpp.tsv"],
//!   "seed": 13,
//!   "output": {"dir": "report", "formats": ["csv", "markdown"]}
//! }
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::correlation::TauVariant;
use crate::error::{Error, Result};
use crate::metrics::MetricSpec;
use crate::predictors::{PredictorKind, PredictorSpec, DEFAULT_SEED};
use crate::report::Format;
use crate::significance::check_alpha;
use crate::trec_io::MissingPolicy;

const REQUIRED: [&str; 4] = ["runs", "qrels", "metrics", "predictors"];
const OPTIONAL: [&str; 11] = [
    "queries",
    "embeddings",
    "query_meta",
    "collection_scores",
    "policy",
    "tau",
    "alpha",
    "bonferroni",
    "seed",
    "output",
    "description",
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    formats: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    runs: BTreeMap<String, String>,
    qrels: String,
    metrics: Vec<String>,
    predictors: Vec<String>,
    queries: Option<Vec<String>>,
    embeddings: Option<String>,
    query_meta: Option<String>,
    collection_scores: Option<String>,
    policy: Option<MissingPolicy>,
    tau: Option<TauVariant>,
    alpha: Option<f64>,
    bonferroni: Option<bool>,
    seed: Option<u64>,
    output: Option<RawOutput>,
    #[allow(dead_code)]
    description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "report".to_string(),
            formats: vec![Format::Csv],
        }
    }
}

/// A validated configuration. Paths are kept as written and resolved
/// against `base_dir` on use, so the serialized form (and its hash) does not
/// depend on where the experiment directory lives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalConfig {
    #[serde(skip)]
    pub base_dir: PathBuf,
    pub runs: BTreeMap<String, String>,
    pub qrels: String,
    pub queries: Option<Vec<String>>,
    pub metrics: Vec<MetricSpec>,
    pub predictors: Vec<PredictorSpec>,
    pub embeddings: Option<String>,
    pub query_meta: Option<String>,
    pub collection_scores: Option<String>,
    pub policy: MissingPolicy,
    pub tau: TauVariant,
    pub alpha: f64,
    pub bonferroni: bool,
    pub seed: u64,
    pub output: OutputConfig,
}

impl EvalConfig {
    /// A config with defaults for everything but the required fields.
    pub fn new(
        base_dir: impl Into<PathBuf>,
        runs: BTreeMap<String, String>,
        qrels: impl Into<String>,
        metrics: Vec<MetricSpec>,
        predictors: Vec<PredictorSpec>,
    ) -> Self {
        Self {
            base_dir: base_dir.into(),
            runs,
            qrels: qrels.into(),
            queries: None,
            metrics,
            predictors,
            embeddings: None,
            query_meta: None,
            collection_scores: None,
            policy: MissingPolicy::default(),
            tau: TauVariant::default(),
            alpha: 0.05,
            bonferroni: false,
            seed: DEFAULT_SEED,
            output: OutputConfig::default(),
        }
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        self.base_dir.join(path)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    /// Paths of external prediction files keyed by the predictor's `file` value.
    pub fn external_files(&self) -> BTreeMap<String, PathBuf> {
        self.predictors
            .iter()
            .filter(|p| p.kind == PredictorKind::External)
            .filter_map(|p| p.file.as_ref())
            .map(|f| (f.clone(), self.resolve(f)))
            .collect()
    }

    /// Predictor specs with the run seed filled in where none was given.
    pub fn effective_predictors(&self) -> Vec<PredictorSpec> {
        self.predictors
            .iter()
            .map(|p| {
                let mut p = p.clone();
                if matches!(p.kind, PredictorKind::Rsd | PredictorKind::Uef) && p.seed.is_none() {
                    p.seed = Some(self.seed);
                }
                p
            })
            .collect()
    }

    /// Checks invariants and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        if self.runs.is_empty() {
            return Err(Error::Config("at least one run is required".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::Config("at least one metric is required".into()));
        }
        if self.predictors.is_empty() {
            return Err(Error::Config("at least one predictor is required".into()));
        }
        check_alpha(self.alpha)?;
        let mut labels = BTreeSet::new();
        for p in &self.predictors {
            if !labels.insert(p.label()) {
                return Err(Error::Config(format!(
                    "predictor label {} is used twice; set name=<label>",
                    p.label()
                )));
            }
        }
        let mut metrics = BTreeSet::new();
        for m in &self.metrics {
            if !metrics.insert(m.to_string()) {
                return Err(Error::Config(format!("metric {m} is listed twice")));
            }
        }
        if let Some(q) = &self.queries {
            if q.is_empty() {
                return Err(Error::Config("queries must not be empty when given".into()));
            }
        }
        let needs_embeddings = self.predictors.iter().any(|p| p.kind == PredictorKind::Dm);
        if needs_embeddings && self.embeddings.is_none() {
            return Err(Error::Config("predictor dm requires \"embeddings\"".into()));
        }
        let mut files: Vec<(String, &str)> = self
            .runs
            .iter()
            .map(|(r, p)| (format!("run for {r}"), p.as_str()))
            .collect();
        files.push(("qrels".into(), &self.qrels));
        for (what, p) in [
            ("embeddings", &self.embeddings),
            ("query_meta", &self.query_meta),
            ("collection_scores", &self.collection_scores),
        ] {
            if let Some(p) = p {
                files.push((what.into(), p));
            }
        }
        for p in &self.predictors {
            if let Some(f) = &p.file {
                files.push((format!("predictor {}", p.label()), f));
            }
        }
        let missing: Vec<String> = files
            .iter()
            .filter(|(_, p)| !self.resolve(p).is_file())
            .map(|(what, p)| format!("{what}: {}", self.resolve(p).display()))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!(
                "missing input files: {}",
                missing.join("; ")
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Parses and validates a config document; `base_dir` anchors relative paths.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<EvalConfig> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
    let Value::Object(obj) = &value else {
        return Err(Error::Config("config must be a JSON object".into()));
    };
    let unknown: Vec<&str> = obj
        .keys()
        .map(String::as_str)
        .filter(|k| !REQUIRED.contains(k) && !OPTIONAL.contains(k))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Config(format!(
            "unknown config keys: {}",
            unknown.join(", ")
        )));
    }
    let missing: Vec<&str> = REQUIRED
        .iter()
        .copied()
        .filter(|k| !obj.contains_key(*k))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "missing required keys: {}",
            missing.join(", ")
        )));
    }
    let raw: RawConfig =
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;

    let metrics = raw
        .metrics
        .iter()
        .map(|m| m.parse::<MetricSpec>())
        .collect::<Result<Vec<_>>>()?;
    let predictors = raw
        .predictors
        .iter()
        .map(|p| p.parse::<PredictorSpec>())
        .collect::<Result<Vec<_>>>()?;
    let output = match raw.output {
        None => OutputConfig::default(),
        Some(o) => OutputConfig {
            dir: o.dir.unwrap_or_else(|| OutputConfig::default().dir),
            formats: match o.formats {
                None => OutputConfig::default().formats,
                Some(f) => f.iter().map(|s| s.parse()).collect::<Result<Vec<Format>>>()?,
            },
        },
    };
    let cfg = EvalConfig {
        base_dir: base_dir.to_path_buf(),
        runs: raw.runs,
        qrels: raw.qrels,
        queries: raw.queries,
        metrics,
        predictors,
        embeddings: raw.embeddings,
        query_meta: raw.query_meta,
        collection_scores: raw.collection_scores,
        policy: raw.policy.unwrap_or_default(),
        tau: raw.tau.unwrap_or_default(),
        alpha: raw.alpha.unwrap_or(0.05),
        bonferroni: raw.bonferroni.unwrap_or(false),
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        output,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<EvalConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}
