//! Readers and validators for the text formats the toolkit consumes.
//!
//! * TREC run files: `qid Q0 docid rank score tag`, whitespace separated.
//! * qrels: `qid iter docid grade`, whitespace separated.
//! * prediction TSV: `qid<TAB>ranker_id<TAB>score`, optional `qid...` header.
//! * embedding TSV: `doc_id<TAB>v1,v2,...,vd`.
//! * query-meta TSV: `qid<TAB>term_count<TAB>variant_ids` (variants comma separated, optional).
//! * collection-score TSV: `qid<TAB>score` or `qid<TAB>ranker_id<TAB>score`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub query_id: String,
    pub doc_id: String,
    pub rank: u32,
    pub score: f64,
    pub tag: String,
}

/// Scored documents retrieved by one ranker for one query.
///
/// Entries are kept in descending score order with ascending `doc_id` as the
/// tiebreak, and ranks renumbered `1..=len`. The rank column of the source
/// file is advisory only.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    query_id: String,
    ranker_id: String,
    entries: Vec<RunEntry>,
}

fn by_score_then_doc(a: &RunEntry, b: &RunEntry) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

impl RankedList {
    /// Validates and normalizes `entries`. Every entry must carry `query_id`.
    pub fn new(
        query_id: impl Into<String>,
        ranker_id: impl Into<String>,
        mut entries: Vec<RunEntry>,
    ) -> Result<Self> {
        let query_id = query_id.into();
        let ranker_id = ranker_id.into();
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.query_id != query_id {
                return Err(Error::Validation(format!(
                    "entry for query {} placed in list of query {query_id}",
                    e.query_id
                )));
            }
            if !e.score.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite score {} for ({query_id}, {}) in run {ranker_id}",
                    e.score, e.doc_id
                )));
            }
            if !seen.insert(e.doc_id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate (query, doc) pair ({query_id}, {}) in run {ranker_id}",
                    e.doc_id
                )));
            }
        }
        entries.sort_by(by_score_then_doc);
        for (i, e) in entries.iter_mut().enumerate() {
            e.rank = i as u32 + 1;
        }
        Ok(Self {
            query_id,
            ranker_id,
            entries,
        })
    }

    /// Builds a list from `(doc_id, score)` pairs; handy for fixtures.
    pub fn from_scores<D: Into<String>>(
        query_id: &str,
        ranker_id: &str,
        docs: impl IntoIterator<Item = (D, f64)>,
    ) -> Result<Self> {
        let entries = docs
            .into_iter()
            .map(|(doc, score)| RunEntry {
                query_id: query_id.to_string(),
                doc_id: doc.into(),
                rank: 0,
                score,
                tag: ranker_id.to_string(),
            })
            .collect();
        Self::new(query_id, ranker_id, entries)
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn ranker_id(&self) -> &str {
        &self.ranker_id
    }

    pub fn entries(&self) -> &[RunEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The first `min(k, len)` entries.
    pub fn top_k(&self, k: usize) -> &[RunEntry] {
        &self.entries[..k.min(self.entries.len())]
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.score).collect()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    /// Writes the list back in 6-column run format.
    pub fn write_trec<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.entries {
            writeln!(
                out,
                "{} Q0 {} {} {} {}",
                e.query_id, e.doc_id, e.rank, e.score, e.tag
            )?;
        }
        Ok(())
    }
}

fn parse_err(source_name: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source_name.to_string(),
        line,
        message: message.into(),
    }
}

/// Yields `(line_number, trimmed_line)` for non-blank lines.
fn lines<'a, R: BufRead + 'a>(
    source: R,
    source_name: &'a str,
) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    source
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| match line {
            Err(e) => Some(Err(Error::io(format!("reading {source_name}"), e))),
            Ok(l) => {
                let l = l.trim_end_matches(['\r', '\n']).to_string();
                if l.trim().is_empty() {
                    None
                } else {
                    Some(Ok((i + 1, l)))
                }
            }
        })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))
}

/// Parses a TREC run file. See [`parse_run_file_named`].
pub fn parse_run_file<R: BufRead>(
    source: R,
    ranker_id: &str,
) -> Result<BTreeMap<String, RankedList>> {
    parse_run_file_named(source, ranker_id, ranker_id)
}

/// Parses a TREC run file into one normalized [`RankedList`] per query.
/// `source_name` only feeds diagnostics.
pub fn parse_run_file_named<R: BufRead>(
    source: R,
    source_name: &str,
    ranker_id: &str,
) -> Result<BTreeMap<String, RankedList>> {
    let mut by_query: BTreeMap<String, Vec<RunEntry>> = BTreeMap::new();
    for item in lines(source, source_name) {
        let (no, line) = item?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(parse_err(
                source_name,
                no,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        let rank: u32 = fields[3]
            .parse()
            .map_err(|_| parse_err(source_name, no, format!("invalid rank {:?}", fields[3])))?;
        let score: f64 = fields[4]
            .parse()
            .map_err(|_| parse_err(source_name, no, format!("invalid score {:?}", fields[4])))?;
        by_query
            .entry(fields[0].to_string())
            .or_default()
            .push(RunEntry {
                query_id: fields[0].to_string(),
                doc_id: fields[2].to_string(),
                rank,
                score,
                tag: fields[5].to_string(),
            });
    }
    by_query
        .into_iter()
        .map(|(qid, entries)| {
            let list = RankedList::new(qid.clone(), ranker_id, entries)?;
            Ok((qid, list))
        })
        .collect()
}

pub fn load_run_file(path: &Path, ranker_id: &str) -> Result<BTreeMap<String, RankedList>> {
    parse_run_file_named(open(path)?, &path.display().to_string(), ranker_id)
}

/// Graded relevance judgments. Unjudged pairs have grade 0.
#[derive(Debug, Clone, Default)]
pub struct JudgmentSet {
    grades: HashMap<String, HashMap<String, u32>>,
    replaced: usize,
}

impl JudgmentSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a judgment, returning the previous grade if the pair was already judged.
    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u32) -> Option<u32> {
        let prev = self
            .grades
            .entry(query_id.to_string())
            .or_default()
            .insert(doc_id.to_string(), grade);
        if prev.is_some() {
            self.replaced += 1;
        }
        prev
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.grades
            .get(query_id)
            .and_then(|docs| docs.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    /// Grades of every judged document of `query_id`, in no particular order.
    pub fn query_grades(&self, query_id: &str) -> impl Iterator<Item = u32> + '_ {
        self.grades
            .get(query_id)
            .into_iter()
            .flat_map(|docs| docs.values().copied())
    }

    pub fn num_relevant(&self, query_id: &str, rel_threshold: u32) -> usize {
        self.query_grades(query_id)
            .filter(|&g| g >= rel_threshold)
            .count()
    }

    /// Judged query ids in lexicographic order.
    pub fn queries(&self) -> Vec<String> {
        let mut q: Vec<String> = self.grades.keys().cloned().collect();
        q.sort();
        q
    }

    pub fn len(&self) -> usize {
        self.grades.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of judgments overwritten by a later line for the same pair.
    pub fn replaced(&self) -> usize {
        self.replaced
    }
}

pub fn parse_qrels<R: BufRead>(source: R) -> Result<JudgmentSet> {
    parse_qrels_named(source, "qrels")
}

/// Parses qrels. Repeated `(qid, docid)` pairs keep the last grade.
pub fn parse_qrels_named<R: BufRead>(source: R, source_name: &str) -> Result<JudgmentSet> {
    let mut set = JudgmentSet::new();
    for item in lines(source, source_name) {
        let (no, line) = item?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(
                source_name,
                no,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let grade: i64 = fields[3]
            .parse()
            .map_err(|_| parse_err(source_name, no, format!("invalid grade {:?}", fields[3])))?;
        if grade < 0 {
            return Err(Error::Validation(format!(
                "{source_name}:{no}: negative grade {grade} for ({}, {})",
                fields[0], fields[2]
            )));
        }
        let grade = u32::try_from(grade).map_err(|_| {
            parse_err(source_name, no, format!("grade {grade} out of range"))
        })?;
        if let Some(prev) = set.insert(fields[0], fields[2], grade) {
            warn!(
                "{source_name}:{no}: repeated judgment for ({}, {}), {prev} replaced by {grade}",
                fields[0], fields[2]
            );
        }
    }
    Ok(set)
}

pub fn load_qrels(path: &Path) -> Result<JudgmentSet> {
    parse_qrels_named(open(path)?, &path.display().to_string())
}

/// Splits a strictly tab-delimited line.
fn tsv_fields(line: &str) -> Vec<&str> {
    line.split('\t').collect()
}

fn is_header(line: &str) -> bool {
    line.starts_with("qid")
}

/// Precomputed predictor estimates for `(query, ranker)` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalPredictions {
    pub predictor_id: String,
    pub values: BTreeMap<(String, String), f64>,
}

impl ExternalPredictions {
    pub fn get(&self, query_id: &str, ranker_id: &str) -> Option<f64> {
        self.values
            .get(&(query_id.to_string(), ranker_id.to_string()))
            .copied()
    }

    /// Cells of `matrix` this file has no value for, in matrix order.
    pub fn missing_cells(&self, matrix: &RunMatrix) -> Vec<(String, String)> {
        matrix
            .cells()
            .filter(|(q, r)| self.get(q, r).is_none())
            .map(|(q, r)| (q.to_string(), r.to_string()))
            .collect()
    }

    /// Errors unless every cell of `matrix` is covered.
    pub fn check_coverage(&self, matrix: &RunMatrix) -> Result<()> {
        let missing = self.missing_cells(matrix);
        if missing.is_empty() {
            return Ok(());
        }
        Err(Error::Validation(format!(
            "predictions {} do not cover {} of {} cells; missing: {}",
            self.predictor_id,
            missing.len(),
            matrix.num_queries() * matrix.num_rankers(),
            format_cells(&missing)
        )))
    }

    /// Query ids for which every ranker in `rankers` has a value.
    pub fn covered_queries(&self, rankers: &[String]) -> BTreeSet<String> {
        let mut per_query: BTreeMap<&str, usize> = BTreeMap::new();
        let wanted: BTreeSet<&str> = rankers.iter().map(String::as_str).collect();
        for (q, r) in self.values.keys() {
            if wanted.contains(r.as_str()) {
                *per_query.entry(q.as_str()).or_default() += 1;
            }
        }
        per_query
            .into_iter()
            .filter(|&(_, n)| n == wanted.len())
            .map(|(q, _)| q.to_string())
            .collect()
    }
}

fn format_cells(cells: &[(String, String)]) -> String {
    const SHOWN: usize = 10;
    let mut s = cells
        .iter()
        .take(SHOWN)
        .map(|(q, r)| format!("({q}, {r})"))
        .collect::<Vec<_>>()
        .join(", ");
    if cells.len() > SHOWN {
        s.push_str(&format!(" and {} more", cells.len() - SHOWN));
    }
    s
}

pub fn parse_prediction_file<R: BufRead>(
    source: R,
    predictor_id: &str,
) -> Result<ExternalPredictions> {
    parse_prediction_file_named(source, predictor_id, predictor_id)
}

pub fn parse_prediction_file_named<R: BufRead>(
    source: R,
    source_name: &str,
    predictor_id: &str,
) -> Result<ExternalPredictions> {
    let mut values = BTreeMap::new();
    for (idx, item) in lines(source, source_name).enumerate() {
        let (no, line) = item?;
        if idx == 0 && is_header(&line) {
            continue;
        }
        let fields = tsv_fields(&line);
        if fields.len() != 3 {
            return Err(parse_err(
                source_name,
                no,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let value: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(source_name, no, format!("invalid score {:?}", fields[2])))?;
        if !value.is_finite() {
            return Err(Error::Validation(format!(
                "{source_name}:{no}: non-finite prediction for ({}, {})",
                fields[0], fields[1]
            )));
        }
        let key = (fields[0].to_string(), fields[1].to_string());
        if values.insert(key, value).is_some() {
            return Err(Error::Validation(format!(
                "{source_name}:{no}: duplicate prediction for ({}, {})",
                fields[0], fields[1]
            )));
        }
    }
    Ok(ExternalPredictions {
        predictor_id: predictor_id.to_string(),
        values,
    })
}

pub fn load_prediction_file(path: &Path, predictor_id: &str) -> Result<ExternalPredictions> {
    parse_prediction_file_named(open(path)?, &path.display().to_string(), predictor_id)
}

/// Dense document vectors keyed by doc id.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: Option<usize>,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// `None` for an empty table.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn get(&self, doc_id: &str) -> Option<&[f64]> {
        self.vectors.get(doc_id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, doc_id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let doc_id = doc_id.into();
        if vector.is_empty() {
            return Err(Error::Validation(format!("empty vector for {doc_id}")));
        }
        if let Some(d) = self.dim {
            if d != vector.len() {
                return Err(Error::Validation(format!(
                    "vector for {doc_id} has dimension {}, expected {d}",
                    vector.len()
                )));
            }
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite component in vector for {doc_id}"
            )));
        }
        self.dim = Some(vector.len());
        self.vectors.insert(doc_id, vector);
        Ok(())
    }
}

impl<S: Into<String>> FromIterator<(S, Vec<f64>)> for EmbeddingTable {
    /// Panics on inconsistent vectors; use [`EmbeddingTable::insert`] for fallible construction.
    fn from_iter<I: IntoIterator<Item = (S, Vec<f64>)>>(iter: I) -> Self {
        let mut table = EmbeddingTable::default();
        for (doc, v) in iter {
            table.insert(doc, v).expect("consistent embedding vectors");
        }
        table
    }
}

pub fn parse_embeddings<R: BufRead>(source: R) -> Result<EmbeddingTable> {
    parse_embeddings_named(source, "embeddings")
}

pub fn parse_embeddings_named<R: BufRead>(source: R, source_name: &str) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::default();
    for item in lines(source, source_name) {
        let (no, line) = item?;
        let fields = tsv_fields(&line);
        if fields.len() != 2 {
            return Err(parse_err(
                source_name,
                no,
                format!("expected 2 tab-separated fields, found {}", fields.len()),
            ));
        }
        let vector = fields[1]
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| {
                parse_err(source_name, no, format!("invalid vector for {}", fields[0]))
            })?;
        table
            .insert(fields[0], vector)
            .map_err(|e| match e {
                Error::Validation(m) => Error::Validation(format!("{source_name}:{no}: {m}")),
                other => other,
            })?;
    }
    Ok(table)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    parse_embeddings_named(open(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryMeta {
    pub query_id: String,
    pub text: Option<String>,
    /// Number of query terms.
    pub term_count: Option<u32>,
    pub variants: Vec<String>,
}

/// Parses query metadata: `qid<TAB>term_count<TAB>variants[<TAB>text]`.
/// Empty `term_count` means unknown.
pub fn parse_query_meta<R: BufRead>(source: R) -> Result<BTreeMap<String, QueryMeta>> {
    parse_query_meta_named(source, "query-meta")
}

pub fn parse_query_meta_named<R: BufRead>(
    source: R,
    source_name: &str,
) -> Result<BTreeMap<String, QueryMeta>> {
    let mut out = BTreeMap::new();
    for (idx, item) in lines(source, source_name).enumerate() {
        let (no, line) = item?;
        if idx == 0 && is_header(&line) {
            continue;
        }
        let fields = tsv_fields(&line);
        if fields.len() < 2 || fields.len() > 4 {
            return Err(parse_err(
                source_name,
                no,
                format!("expected 2 to 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let term_count = match fields[1].trim() {
            "" => None,
            t => {
                let n: u32 = t
                    .parse()
                    .map_err(|_| parse_err(source_name, no, format!("invalid term count {t:?}")))?;
                if n == 0 {
                    return Err(Error::Validation(format!(
                        "{source_name}:{no}: term count must be at least 1"
                    )));
                }
                Some(n)
            }
        };
        let variants = fields
            .get(2)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default();
        let text = fields.get(3).map(|t| t.to_string()).filter(|t| !t.is_empty());
        let meta = QueryMeta {
            query_id: fields[0].to_string(),
            text,
            term_count,
            variants,
        };
        if out.insert(meta.query_id.clone(), meta).is_some() {
            return Err(Error::Validation(format!(
                "{source_name}:{no}: duplicate query {}",
                fields[0]
            )));
        }
    }
    Ok(out)
}

pub fn load_query_meta(path: &Path) -> Result<BTreeMap<String, QueryMeta>> {
    parse_query_meta_named(open(path)?, &path.display().to_string())
}

/// User-supplied collection scores for score normalization. A per-cell value
/// takes precedence over a per-query one.
#[derive(Debug, Clone, Default)]
pub struct CollectionScores {
    per_query: HashMap<String, f64>,
    per_cell: HashMap<(String, String), f64>,
}

impl CollectionScores {
    pub fn get(&self, query_id: &str, ranker_id: &str) -> Option<f64> {
        self.per_cell
            .get(&(query_id.to_string(), ranker_id.to_string()))
            .or_else(|| self.per_query.get(query_id))
            .copied()
    }

    pub fn set_query(&mut self, query_id: impl Into<String>, value: f64) {
        self.per_query.insert(query_id.into(), value);
    }

    pub fn set_cell(&mut self, query_id: impl Into<String>, ranker_id: impl Into<String>, value: f64) {
        self.per_cell.insert((query_id.into(), ranker_id.into()), value);
    }
}

pub fn parse_collection_scores<R: BufRead>(source: R, source_name: &str) -> Result<CollectionScores> {
    let mut out = CollectionScores::default();
    for (idx, item) in lines(source, source_name).enumerate() {
        let (no, line) = item?;
        if idx == 0 && is_header(&line) {
            continue;
        }
        let fields = tsv_fields(&line);
        let raw = match fields.len() {
            2 => fields[1],
            3 => fields[2],
            n => {
                return Err(parse_err(
                    source_name,
                    no,
                    format!("expected 2 or 3 tab-separated fields, found {n}"),
                ))
            }
        };
        let value: f64 = raw
            .trim()
            .parse()
            .map_err(|_| parse_err(source_name, no, format!("invalid score {raw:?}")))?;
        if !value.is_finite() {
            return Err(Error::Validation(format!(
                "{source_name}:{no}: non-finite collection score"
            )));
        }
        if fields.len() == 2 {
            out.set_query(fields[0], value);
        } else {
            out.set_cell(fields[0], fields[1], value);
        }
    }
    Ok(out)
}

pub fn load_collection_scores(path: &Path) -> Result<CollectionScores> {
    parse_collection_scores(open(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    /// Every declared `(query, ranker)` cell must have a ranked list.
    #[default]
    Strict,
    /// Restrict the query axis to queries every ranker retrieved for.
    Intersect,
}

impl std::str::FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(MissingPolicy::Strict),
            "intersect" => Ok(MissingPolicy::Intersect),
            other => Err(Error::Config(format!(
                "unknown policy {other:?} (expected strict or intersect)"
            ))),
        }
    }
}

/// Ranked lists indexed by query (rows) and ranker (columns).
///
/// Both axes are sorted lexicographically. Lists for queries outside the
/// query axis (e.g. query variants) are retained and reachable through
/// [`RunMatrix::list`].
#[derive(Debug, Clone)]
pub struct RunMatrix {
    queries: Vec<String>,
    rankers: Vec<String>,
    lists: BTreeMap<(String, String), RankedList>,
    dropped_queries: Vec<String>,
}

impl RunMatrix {
    pub fn queries(&self) -> &[String] {
        &self.queries
    }

    pub fn rankers(&self) -> &[String] {
        &self.rankers
    }

    pub fn num_queries(&self) -> usize {
        self.queries.len()
    }

    pub fn num_rankers(&self) -> usize {
        self.rankers.len()
    }

    /// Declared queries removed by the intersect policy.
    pub fn dropped_queries(&self) -> &[String] {
        &self.dropped_queries
    }

    pub fn list(&self, query_id: &str, ranker_id: &str) -> Option<&RankedList> {
        self.lists
            .get(&(query_id.to_string(), ranker_id.to_string()))
    }

    /// The list at row `i`, column `j`.
    pub fn cell(&self, i: usize, j: usize) -> &RankedList {
        self.list(&self.queries[i], &self.rankers[j])
            .expect("run matrix cells are validated at assembly")
    }

    /// `(query, ranker)` ids in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (&str, &str)> {
        self.queries.iter().flat_map(move |q| {
            self.rankers
                .iter()
                .map(move |r| (q.as_str(), r.as_str()))
        })
    }

    /// A copy restricted to `keep` (intersected with the current query axis).
    pub fn restrict_queries(&self, keep: &BTreeSet<String>) -> Result<RunMatrix> {
        let mut out = self.clone();
        let (kept, dropped): (Vec<String>, Vec<String>) =
            self.queries.iter().cloned().partition(|q| keep.contains(q));
        if kept.is_empty() {
            return Err(Error::Config(
                "query axis is empty after restriction".to_string(),
            ));
        }
        out.queries = kept;
        out.dropped_queries.extend(dropped);
        out.dropped_queries.sort();
        Ok(out)
    }
}

/// Builds the run matrix from per-ranker parse results.
///
/// `runs` maps ranker id to that ranker's lists keyed by query id.
pub fn assemble_run_matrix(
    runs: BTreeMap<String, BTreeMap<String, RankedList>>,
    declared_queries: &[String],
    declared_rankers: &[String],
    policy: MissingPolicy,
) -> Result<RunMatrix> {
    let queries: BTreeSet<String> = declared_queries.iter().cloned().collect();
    let rankers: BTreeSet<String> = declared_rankers.iter().cloned().collect();
    if rankers.is_empty() {
        return Err(Error::Config("no rankers declared".to_string()));
    }
    if queries.is_empty() {
        return Err(Error::Config("no queries declared".to_string()));
    }
    for r in &rankers {
        if !runs.contains_key(r) {
            return Err(Error::Config(format!("no run supplied for ranker {r}")));
        }
    }

    let present = |q: &str, r: &str| runs.get(r).is_some_and(|lists| lists.contains_key(q));
    let missing: Vec<(String, String)> = queries
        .iter()
        .flat_map(|q| rankers.iter().map(move |r| (q.clone(), r.clone())))
        .filter(|(q, r)| !present(q, r))
        .collect();

    let (kept, dropped): (Vec<String>, Vec<String>) = match policy {
        MissingPolicy::Strict => {
            if !missing.is_empty() {
                return Err(Error::Validation(format!(
                    "{} missing (query, ranker) cells: {}",
                    missing.len(),
                    format_cells(&missing)
                )));
            }
            (queries.into_iter().collect(), Vec::new())
        }
        MissingPolicy::Intersect => {
            let incomplete: BTreeSet<&str> = missing.iter().map(|(q, _)| q.as_str()).collect();
            let (kept, dropped): (Vec<String>, Vec<String>) = queries
                .iter()
                .cloned()
                .partition(|q| !incomplete.contains(q.as_str()));
            if !dropped.is_empty() {
                info!(
                    "intersect policy dropped {} of {} queries: {}",
                    dropped.len(),
                    declared_queries.len(),
                    dropped.join(", ")
                );
            }
            (kept, dropped)
        }
    };
    if kept.is_empty() {
        return Err(Error::Config(
            "no query is retrieved by every ranker".to_string(),
        ));
    }

    let lists = runs
        .into_iter()
        .filter(|(r, _)| rankers.contains(r))
        .flat_map(|(r, lists)| {
            lists
                .into_iter()
                .map(move |(q, list)| ((q, r.clone()), list))
        })
        .collect();

    Ok(RunMatrix {
        queries: kept,
        rankers: rankers.into_iter().collect(),
        lists,
        dropped_queries: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Result<BTreeMap<String, RankedList>> {
        parse_run_file(text.as_bytes(), "t")
    }

    #[test]
    fn run_line_maps_fields() {
        let lists = run("q1 Q0 d5 1 12.5 bm25").unwrap();
        let e = &lists["q1"].entries()[0];
        assert_eq!(e.query_id, "q1");
        assert_eq!(e.doc_id, "d5");
        assert_eq!(e.rank, 1);
        assert_eq!(e.score, 12.5);
        assert_eq!(e.tag, "bm25");
    }

    #[test]
    fn run_is_resorted_by_score() {
        let lists = run("q1 Q0 d1 2 3.0 t\nq1 Q0 d2 1 7.0 t\n").unwrap();
        let l = &lists["q1"];
        assert_eq!(l.doc_ids().collect::<Vec<_>>(), ["d2", "d1"]);
        assert_eq!(l.entries().iter().map(|e| e.rank).collect::<Vec<_>>(), [1, 2]);
    }

    #[test]
    fn score_ties_break_by_doc_id() {
        let lists = run("q1 Q0 b 1 5.0 t\nq1 Q0 a 2 5.0 t\n").unwrap();
        assert_eq!(lists["q1"].doc_ids().collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn run_errors() {
        match run("q1 Q0 d1 1 2.0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match run("q1 Q0 d1 1 2.0 t\n\nq1 Q0 d2 1 abc t\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(run("q1 Q0 d1 x 2.0 t"), Err(Error::Parse { .. })));
        let err = run("q1 Q0 d1 1 2.0 t\nq1 Q0 d1 2 1.0 t\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("(q1, d1)"));
        assert!(matches!(run("q1 Q0 d1 1 NaN t"), Err(Error::Validation(_))));
        assert!(matches!(run("q1 Q0 d1 1 inf t"), Err(Error::Validation(_))));
    }

    #[test]
    fn any_token_in_second_field() {
        let lists = run("q1 iter d1 1 1.0 t").unwrap();
        assert_eq!(lists["q1"].len(), 1);
    }

    #[test]
    fn qrels_basics() {
        let j = parse_qrels("q1 0 d5 2\n".as_bytes()).unwrap();
        assert_eq!(j.grade("q1", "d5"), 2);
        assert_eq!(j.grade("q1", "d9"), 0);
        assert_eq!(j.grade("q7", "d5"), 0);
        assert!(matches!(
            parse_qrels("q1 0 d5 -1".as_bytes()),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_qrels("q1 0 d5".as_bytes()),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_qrels("q1 0 d5 high".as_bytes()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn qrels_repeat_keeps_last() {
        let j = parse_qrels("q1 0 d5 2\nq1 0 d5 1\n".as_bytes()).unwrap();
        assert_eq!(j.grade("q1", "d5"), 1);
        assert_eq!(j.replaced(), 1);
        assert_eq!(j.len(), 1);
    }

    #[test]
    fn prediction_file() {
        let p = parse_prediction_file("qid\tranker\tscore\nq1\tbm25\t0.42\n".as_bytes(), "x")
            .unwrap();
        assert_eq!(p.get("q1", "bm25"), Some(0.42));
        assert!(matches!(
            parse_prediction_file("q1\tbm25\t0.4\nq1\tbm25\t0.5\n".as_bytes(), "x"),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_prediction_file("q1\tbm25\tnan\n".as_bytes(), "x"),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_prediction_file("q1 bm25 0.4\n".as_bytes(), "x"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn prediction_coverage_names_missing_cell() {
        let queries: Vec<String> = (0..97).map(|i| format!("q{i:02}")).collect();
        let runs: BTreeMap<String, BTreeMap<String, RankedList>> = [(
            "bm25".to_string(),
            queries
                .iter()
                .map(|q| {
                    (
                        q.clone(),
                        RankedList::from_scores(q, "bm25", [("d1", 1.0)]).unwrap(),
                    )
                })
                .collect(),
        )]
        .into_iter()
        .collect();
        let m = assemble_run_matrix(runs, &queries, &["bm25".to_string()], MissingPolicy::Strict)
            .unwrap();
        let text: String = queries
            .iter()
            .filter(|q| q.as_str() != "q42")
            .map(|q| format!("{q}\tbm25\t0.5\n"))
            .collect();
        let p = parse_prediction_file(text.as_bytes(), "x").unwrap();
        let err = p.check_coverage(&m).unwrap_err().to_string();
        assert!(err.contains("(q42, bm25)"), "{err}");
        assert!(err.contains("1 of 97"), "{err}");
    }

    #[test]
    fn embeddings() {
        let t = parse_embeddings("d1\t0.0,0.0\nd2\t3.0,4.0\n".as_bytes()).unwrap();
        assert_eq!(t.dim(), Some(2));
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("d2"), Some(&[3.0, 4.0][..]));
        let err = parse_embeddings("d1\t0.0,0.0\nd2\t3.0,4.0\nd3\t1.0\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("d3"), "{err}");
        assert!(parse_embeddings("d1\t0.0,inf\n".as_bytes()).is_err());
        let empty = parse_embeddings("".as_bytes()).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.dim(), None);
    }

    #[test]
    fn query_meta() {
        let m = parse_query_meta("qid\tterms\tvariants\nq1\t4\tv1,v2\nq2\t\t\n".as_bytes())
            .unwrap();
        assert_eq!(m["q1"].term_count, Some(4));
        assert_eq!(m["q1"].variants, ["v1", "v2"]);
        assert_eq!(m["q2"].term_count, None);
        assert!(m["q2"].variants.is_empty());
        assert!(parse_query_meta("q1\t0\n".as_bytes()).is_err());
    }

    #[test]
    fn collection_scores() {
        let c = parse_collection_scores("q1\t2.5\nq1\tbm25\t3.0\n".as_bytes(), "cs").unwrap();
        assert_eq!(c.get("q1", "bm25"), Some(3.0));
        assert_eq!(c.get("q1", "dense"), Some(2.5));
        assert_eq!(c.get("q2", "dense"), None);
    }

    fn runs_2x2(missing_q2_in_b: bool) -> BTreeMap<String, BTreeMap<String, RankedList>> {
        let mut runs = BTreeMap::new();
        for r in ["A", "B"] {
            let mut lists = BTreeMap::new();
            for q in ["q1", "q2"] {
                if missing_q2_in_b && r == "B" && q == "q2" {
                    continue;
                }
                lists.insert(
                    q.to_string(),
                    RankedList::from_scores(q, r, [("d1", 1.0)]).unwrap(),
                );
            }
            runs.insert(r.to_string(), lists);
        }
        runs
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn assemble_policies() {
        let q = ids(&["q2", "q1"]);
        let r = ids(&["B", "A"]);
        let m = assemble_run_matrix(runs_2x2(false), &q, &r, MissingPolicy::Strict).unwrap();
        assert_eq!(m.queries(), ids(&["q1", "q2"]));
        assert_eq!(m.rankers(), ids(&["A", "B"]));
        assert_eq!(m.cells().count(), 4);

        let m = assemble_run_matrix(runs_2x2(true), &q, &r, MissingPolicy::Intersect).unwrap();
        assert_eq!(m.queries(), ids(&["q1"]));
        assert_eq!(m.dropped_queries(), ids(&["q2"]));

        let err = assemble_run_matrix(runs_2x2(true), &q, &r, MissingPolicy::Strict).unwrap_err();
        assert!(err.to_string().contains("(q2, B)"), "{err}");
    }

    #[test]
    fn assemble_rejects_empty_axes() {
        let err = assemble_run_matrix(runs_2x2(false), &ids(&["q9"]), &ids(&["A"]), MissingPolicy::Intersect)
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(assemble_run_matrix(runs_2x2(false), &[], &ids(&["A"]), MissingPolicy::Strict).is_err());
        assert!(assemble_run_matrix(runs_2x2(false), &ids(&["q1"]), &[], MissingPolicy::Strict).is_err());
    }
}
