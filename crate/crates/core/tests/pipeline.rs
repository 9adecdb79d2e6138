mod common;

use std::fs;

use qppm_core::config::load_config;
use qppm_core::error::{Error, Stage};
use qppm_core::framework::MeasureKind;
use qppm_core::report::{render_table, write_reports, Format};
use qppm_core::pipeline::{compute_predictions, load_inputs};
use qppm_core::run_pipeline;
use qppm_core::trec_io::MissingPolicy;

#[test]
fn main_table_matches_golden() {
    let cfg = load_config(&common::fixture("trec/config.json")).unwrap();
    let bundle = run_pipeline(&cfg).unwrap();
    let golden = fs::read_to_string(common::fixture("trec/golden_table.csv")).unwrap();
    assert_eq!(render_table(&bundle, Format::Csv), golden);
    assert_eq!(bundle.queries.len(), 5);
    assert_eq!(bundle.rankers, vec!["bm25", "dense", "rerank"]);
}

#[test]
fn external_predictor_has_a_row() {
    let cfg = load_config(&common::fixture("trec/config.json")).unwrap();
    let bundle = run_pipeline(&cfg).unwrap();
    let csv = render_table(&bundle, Format::Csv);
    assert!(csv.lines().any(|l| l.starts_with("prior,ap@50,")));
    assert_eq!(bundle.evaluations[0].results[2].predictor_id, "prior");
}

#[test]
fn rerun_gives_identical_bundle() {
    let cfg = load_config(&common::fixture("trec/config.json")).unwrap();
    let a = run_pipeline(&cfg).unwrap();
    let b = run_pipeline(&cfg).unwrap();
    assert_eq!(a.digest(), b.digest());
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_reports(&a, da.path(), &[Format::Csv, Format::Markdown, Format::Latex]).unwrap();
    write_reports(&b, db.path(), &[Format::Csv, Format::Markdown, Format::Latex]).unwrap();
    assert_eq!(common::read_tree(da.path()), common::read_tree(db.path()));
}

#[test]
fn dissociation_orderings() {
    let cfg = load_config(&common::fixture("dissociation/config.json")).unwrap();
    let bundle = run_pipeline(&cfg).unwrap();
    let ev = &bundle.evaluations[0];
    let (a, b) = (&ev.results[0], &ev.results[1]);
    assert_eq!((a.predictor_id.as_str(), b.predictor_id.as_str()), ("across_queries", "across_rankers"));
    let v = |r: &qppm_core::EvalResult, k| r.measure(k).value().unwrap();
    assert!(v(a, MeasureKind::Srmq) > v(b, MeasureKind::Srmq));
    assert!(v(a, MeasureKind::Mrsq) < v(b, MeasureKind::Mrsq));
}

#[test]
fn stage_tagged_errors() {
    let dir = tempfile::tempdir().unwrap();
    let trec = common::fixture("trec");
    for f in ["bm25.run", "dense.run", "rerank.run", "qrels.txt", "prior.tsv"] {
        fs::copy(trec.join(f), dir.path().join(f)).unwrap();
    }
    let cfg_path = dir.path().join("config.json");
    fs::copy(trec.join("config.json"), &cfg_path).unwrap();

    // a malformed run line is a parse error
    let mut run = fs::read_to_string(dir.path().join("dense.run")).unwrap();
    run.push_str("q1 Q0 broken\n");
    fs::write(dir.path().join("dense.run"), &run).unwrap();
    let err = run_pipeline(&load_config(&cfg_path).unwrap()).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: Stage::Parse, .. }), "{err}");
    assert!(err.is_input_error());
    fs::copy(trec.join("dense.run"), dir.path().join("dense.run")).unwrap();

    // an incomplete external file fails under strict and shrinks Q under intersect
    let prior = fs::read_to_string(dir.path().join("prior.tsv")).unwrap();
    let trimmed: String = prior.lines().filter(|l| !l.starts_with("q3\t")).map(|l| format!("{l}\n")).collect();
    fs::write(dir.path().join("prior.tsv"), trimmed).unwrap();
    let mut cfg = load_config(&cfg_path).unwrap();
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: Stage::Validate, .. }), "{err}");
    assert!(err.to_string().contains("(q3, bm25)"), "{err}");
    cfg.policy = MissingPolicy::Intersect;
    let bundle = run_pipeline(&cfg).unwrap();
    assert_eq!(bundle.queries, vec!["q1", "q2", "q4", "q5"]);
    assert_eq!(bundle.dropped_queries, vec!["q3"]);
}

#[test]
fn sampling_predictors_follow_the_run_seed() {
    let w = common::synthetic_workload(6, 3, 5);
    let mut cfg = load_config(&w.config).unwrap();
    let inputs = load_inputs(&cfg).unwrap();
    let a = compute_predictions(&cfg, &inputs).unwrap();
    let again = compute_predictions(&cfg, &inputs).unwrap();
    cfg.seed = 6;
    let b = compute_predictions(&cfg, &inputs).unwrap();
    let by = |m: &[qppm_core::PredictionMatrix], l: &str| m.iter().find(|p| p.label == l).unwrap().grid.clone();
    assert_eq!(by(&a, "rsd"), by(&again, "rsd"));
    assert_ne!(by(&a, "rsd"), by(&b, "rsd"));
    assert_ne!(by(&a, "uef"), by(&b, "uef"));
    assert_eq!(by(&a, "nqc"), by(&b, "nqc"));
}
