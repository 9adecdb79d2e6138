//! End-to-end orchestration: files on disk to a [`ReportBundle`].

use std::collections::{BTreeMap, BTreeSet};

use log::info;
use rayon::prelude::*;

use crate::config::EvalConfig;
use crate::error::{Error, Result, Stage};
use crate::framework::{Evaluation, Evaluator, MeasureKind};
use crate::metrics::{effectiveness_matrix, EffectivenessMatrix};
use crate::predictors::{build_prediction_matrix, PredictionMatrix, SideInputs};
use crate::report::{Provenance, ReportBundle, SignificanceReport};
use crate::significance::significance_matrix;
use crate::trec_io::{
    assemble_run_matrix, load_collection_scores, load_embeddings, load_prediction_file,
    load_qrels, load_query_meta, load_run_file, JudgmentSet, MissingPolicy, RunMatrix,
};

/// Parsed and validated inputs.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub runs: RunMatrix,
    pub judgments: JudgmentSet,
    pub side: SideInputs,
}

/// Tags an input error with the stage that raised it.
fn input_stage(e: Error) -> Error {
    let stage = match &e {
        Error::Parse { .. } | Error::Io { .. } => Stage::Parse,
        Error::Config(_) => Stage::Config,
        _ => Stage::Validate,
    };
    e.at(stage)
}

pub fn load_inputs(cfg: &EvalConfig) -> Result<Inputs> {
    cfg.validate().map_err(|e| e.at(Stage::Config))?;
    let judgments = load_qrels(&cfg.resolve(&cfg.qrels)).map_err(input_stage)?;
    let declared_queries = match &cfg.queries {
        Some(q) => q.clone(),
        None => judgments.queries(),
    };
    let mut runs = BTreeMap::new();
    for (rid, path) in &cfg.runs {
        runs.insert(rid.clone(), load_run_file(&cfg.resolve(path), rid).map_err(input_stage)?);
    }
    let rankers: Vec<String> = cfg.runs.keys().cloned().collect();
    let mut matrix =
        assemble_run_matrix(runs, &declared_queries, &rankers, cfg.policy).map_err(input_stage)?;

    let mut side = SideInputs::default();
    for (file, path) in cfg.external_files() {
        let label = cfg
            .predictors
            .iter()
            .find(|p| p.file.as_deref() == Some(file.as_str()))
            .map(|p| p.label())
            .unwrap_or_else(|| file.clone());
        let preds = load_prediction_file(&path, &label).map_err(input_stage)?;
        side.external.insert(file, preds);
    }
    match cfg.policy {
        MissingPolicy::Strict => {
            for ext in side.external.values() {
                ext.check_coverage(&matrix).map_err(input_stage)?;
            }
        }
        MissingPolicy::Intersect if !side.external.is_empty() => {
            let mut keep: BTreeSet<String> = matrix.queries().iter().cloned().collect();
            for ext in side.external.values() {
                let covered = ext.covered_queries(matrix.rankers());
                keep.retain(|q| covered.contains(q));
            }
            if keep.len() < matrix.num_queries() {
                info!(
                    "intersect policy: {} of {} queries lack external predictions and are dropped",
                    matrix.num_queries() - keep.len(),
                    matrix.num_queries()
                );
            }
            matrix = matrix.restrict_queries(&keep).map_err(input_stage)?;
        }
        MissingPolicy::Intersect => {}
    }
    if let Some(p) = &cfg.embeddings {
        side.embeddings = Some(load_embeddings(&cfg.resolve(p)).map_err(input_stage)?);
    }
    if let Some(p) = &cfg.query_meta {
        side.query_meta = load_query_meta(&cfg.resolve(p)).map_err(input_stage)?;
    }
    if let Some(p) = &cfg.collection_scores {
        side.collection_scores = Some(load_collection_scores(&cfg.resolve(p)).map_err(input_stage)?);
    }
    info!(
        "loaded {} queries x {} rankers ({} dropped)",
        matrix.num_queries(),
        matrix.num_rankers(),
        matrix.dropped_queries().len()
    );
    Ok(Inputs {
        runs: matrix,
        judgments,
        side,
    })
}

/// One effectiveness matrix per configured metric.
pub fn compute_effectiveness(cfg: &EvalConfig, inputs: &Inputs) -> Result<Vec<EffectivenessMatrix>> {
    cfg.metrics
        .iter()
        .map(|m| effectiveness_matrix(&inputs.runs, &inputs.judgments, *m))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at(Stage::Metrics))
}

/// One prediction matrix per configured predictor, in config order.
pub fn compute_predictions(cfg: &EvalConfig, inputs: &Inputs) -> Result<Vec<PredictionMatrix>> {
    cfg.effective_predictors()
        .par_iter()
        .map(|p| build_prediction_matrix(&inputs.runs, p, &inputs.side))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at(Stage::Predict))
}

fn significance_reports(cfg: &EvalConfig, evaluations: &[Evaluation]) -> Result<Vec<SignificanceReport>> {
    let mut out = Vec::new();
    for ev in evaluations {
        for setting in [MeasureKind::Srmq, MeasureKind::Mrsq] {
            let vectors: Vec<(String, Vec<Option<f64>>)> = ev
                .results
                .iter()
                .map(|r| {
                    let s = if setting == MeasureKind::Srmq { &r.srmq } else { &r.mrsq };
                    (r.predictor_id.clone(), s.vector())
                })
                .collect();
            out.push(SignificanceReport {
                metric: ev.metric,
                setting,
                matrix: significance_matrix(&vectors, cfg.alpha, cfg.bonferroni)?,
            });
        }
    }
    Ok(out)
}

/// Runs every stage and assembles the report bundle. Errors carry the stage
/// they were raised in.
pub fn run_pipeline(cfg: &EvalConfig) -> Result<ReportBundle> {
    let inputs = load_inputs(cfg)?;
    let effectiveness = compute_effectiveness(cfg, &inputs)?;
    let predictions = compute_predictions(cfg, &inputs)?;
    let evaluator = Evaluator::new(cfg.tau);
    let evaluations = effectiveness
        .iter()
        .map(|mu| evaluator.evaluate_all(mu, &predictions))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at(Stage::Evaluate))?;
    let significance =
        significance_reports(cfg, &evaluations).map_err(|e| e.at(Stage::Significance))?;
    Ok(ReportBundle {
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            tau: cfg.tau,
            alpha: cfg.alpha,
            bonferroni: cfg.bonferroni,
            policy: cfg.policy,
        },
        queries: inputs.runs.queries().to_vec(),
        rankers: inputs.runs.rankers().to_vec(),
        dropped_queries: inputs.runs.dropped_queries().to_vec(),
        predictors: cfg.effective_predictors(),
        zero_relevant: effectiveness
            .iter()
            .map(|m| (m.metric.to_string(), m.zero_relevant.clone()))
            .collect(),
        evaluations,
        significance,
    })
}
