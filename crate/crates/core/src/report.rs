//! Report bundle and its renderings (CSV, Markdown, LaTeX, TSV dumps).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::correlation::{Tau, TauVariant};
use crate::error::{Error, Result};
use crate::framework::{Evaluation, MeasureKind, UnitSummary};
use crate::matrix::Grid;
use crate::metrics::MetricSpec;
use crate::predictors::PredictorSpec;
use crate::significance::SignificanceMatrix;
use crate::trec_io::MissingPolicy;

pub const TABLE_HEADER: [&str; 6] = ["predictor", "metric", "srmq", "mrsq", "mrmq", "f1"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Markdown,
    Latex,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Markdown => "md",
            Format::Latex => "tex",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            "latex" | "tex" => Ok(Format::Latex),
            other => Err(Error::Config(format!(
                "unknown format {other:?} (expected csv, markdown or latex)"
            ))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Markdown => "markdown",
            Format::Latex => "latex",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub tau: TauVariant,
    pub alpha: f64,
    pub bonferroni: bool,
    pub policy: MissingPolicy,
}

/// Significance tests over one unit axis (rankers for SRMQ, queries for MRSQ).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceReport {
    pub metric: MetricSpec,
    pub setting: MeasureKind,
    pub matrix: SignificanceMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub provenance: Provenance,
    pub queries: Vec<String>,
    pub rankers: Vec<String>,
    pub dropped_queries: Vec<String>,
    pub predictors: Vec<PredictorSpec>,
    /// One per metric, in config order.
    pub evaluations: Vec<Evaluation>,
    pub significance: Vec<SignificanceReport>,
    /// Queries with no relevant judgment, per metric.
    pub zero_relevant: BTreeMap<String, Vec<String>>,
}

impl ReportBundle {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    /// SHA-256 of the JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

fn latex_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\textbackslash{}"),
            '&' | '%' | '$' | '#' | '_' | '{' | '}' => {
                out.push('\\');
                out.push(c);
            }
            '~' => out.push_str("\\textasciitilde{}"),
            '^' => out.push_str("\\textasciicircum{}"),
            '<' => out.push_str("\\textless{}"),
            '>' => out.push_str("\\textgreater{}"),
            _ => out.push(c),
        }
    }
    out
}

/// Renders a rectangular table. `align` holds one LaTeX column letter per column.
pub fn render_rows(format: Format, header: &[String], rows: &[Vec<String>], align: &str) -> String {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            w.write_record(header).expect("in-memory write");
            for r in rows {
                w.write_record(r).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
        }
        Format::Markdown => {
            let line = |cells: &[String]| {
                let cells: Vec<String> = cells.iter().map(|c| c.replace('|', "\\|")).collect();
                format!("| {} |\n", cells.join(" | "))
            };
            let mut out = line(header);
            let rule: Vec<String> = align
                .chars()
                .map(|a| if a == 'r' { "---:".to_string() } else { "---".to_string() })
                .collect();
            out.push_str(&format!("|{}|\n", rule.join("|")));
            for r in rows {
                out.push_str(&line(r));
            }
            out
        }
        Format::Latex => {
            let line = |cells: &[String]| {
                let cells: Vec<String> = cells.iter().map(|c| latex_escape(c)).collect();
                format!("{} \\\\\n", cells.join(" & "))
            };
            let mut out = format!("\\begin{{tabular}}{{{align}}}\n\\hline\n");
            out.push_str(&line(header));
            out.push_str("\\hline\n");
            for r in rows {
                out.push_str(&line(r));
            }
            out.push_str("\\hline\n\\end{tabular}\n");
            out
        }
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Main table: one row per predictor and metric with the four measures.
pub fn render_table(bundle: &ReportBundle, format: Format) -> String {
    let mut rows = Vec::new();
    for (i, p) in bundle.predictors.iter().enumerate() {
        for ev in &bundle.evaluations {
            let r = &ev.results[i];
            let mut row = vec![p.label(), ev.metric.to_string()];
            row.extend(MeasureKind::ALL.iter().map(|&k| r.measure(k).to_string()));
            rows.push(row);
        }
    }
    render_rows(format, &strings(&TABLE_HEADER), &rows, "llrrrr")
}

/// Pairwise grid (upper triangle, `>`/`<`/`=` from the row's side, `*` when
/// significant) or, for CSV, the long form `a,b,direction,p,significant`.
pub fn render_significance(matrix: &SignificanceMatrix, format: Format) -> String {
    if format == Format::Csv {
        let rows: Vec<Vec<String>> = matrix
            .pairs
            .iter()
            .map(|p| {
                vec![
                    p.a.clone(),
                    p.b.clone(),
                    p.direction.to_string(),
                    p.p_value().map_or("n/a".to_string(), |v| format!("{v:.6}")),
                    p.significant.to_string(),
                ]
            })
            .collect();
        return render_rows(
            format,
            &strings(&["a", "b", "direction", "p", "significant"]),
            &rows,
            "lllrl",
        );
    }
    let ids = &matrix.predictors;
    let mut header = vec![String::new()];
    header.extend(ids.iter().skip(1).cloned());
    let rows: Vec<Vec<String>> = ids
        .iter()
        .enumerate()
        .take(ids.len().saturating_sub(1))
        .map(|(i, a)| {
            let mut row = vec![a.clone()];
            for (j, b) in ids.iter().enumerate().skip(1) {
                row.push(if j <= i {
                    String::new()
                } else {
                    let p = matrix.get(a, b).expect("every pair is tested");
                    format!("{}{}", p.direction.symbol(), if p.significant { "*" } else { "" })
                });
            }
            row
        })
        .collect();
    let align = format!("l{}", "c".repeat(header.len() - 1));
    render_rows(format, &header, &rows, &align)
}

/// Correlation between measures across predictors, per metric.
pub fn render_cross_measure(bundle: &ReportBundle, format: Format) -> String {
    let rows: Vec<Vec<String>> = bundle
        .evaluations
        .iter()
        .flat_map(|ev| {
            ev.cross_measure.iter().map(|c| {
                vec![
                    ev.metric.to_string(),
                    c.a.to_string(),
                    c.b.to_string(),
                    c.tau.to_string(),
                    c.predictors.to_string(),
                ]
            })
        })
        .collect();
    render_rows(
        format,
        &strings(&["metric", "a", "b", "tau", "predictors"]),
        &rows,
        "lllrr",
    )
}

/// Standard deviation of each measure across predictors, per metric.
pub fn render_discriminativeness(bundle: &ReportBundle, format: Format) -> String {
    let rows: Vec<Vec<String>> = bundle
        .evaluations
        .iter()
        .map(|ev| {
            let mut row = vec![ev.metric.to_string()];
            row.extend(MeasureKind::ALL.iter().map(|k| ev.discriminativeness[k].to_string()));
            row
        })
        .collect();
    render_rows(
        format,
        &strings(&["metric", "srmq", "mrsq", "mrmq", "f1"]),
        &rows,
        "lrrrr",
    )
}

const UNIT_TAU_HEADER: &str = "metric\tsetting\tpredictor\tunit\ttau";

fn unit_rows(out: &mut String, metric: &MetricSpec, setting: MeasureKind, pred: &str, s: &UnitSummary) {
    for (unit, tau) in &s.per_unit {
        let v = match tau {
            Tau::Defined(v) => v.to_string(),
            Tau::Undefined(_) => {
                let reason = s
                    .excluded
                    .iter()
                    .find(|e| &e.unit == unit)
                    .map_or("undefined", |e| e.reason.as_str());
                format!("n/a({reason})")
            }
        };
        out.push_str(&format!("{metric}\t{setting}\t{pred}\t{unit}\t{v}\n"));
    }
}

/// Every per-ranker (SRMQ) and per-query (MRSQ) correlation as TSV, at full
/// precision so the significance tests can be re-run from it.
pub fn render_unit_taus(bundle: &ReportBundle) -> String {
    let mut out = format!("{UNIT_TAU_HEADER}\n");
    for ev in &bundle.evaluations {
        for r in &ev.results {
            unit_rows(&mut out, &ev.metric, MeasureKind::Srmq, &r.predictor_id, &r.srmq);
        }
        for r in &ev.results {
            unit_rows(&mut out, &ev.metric, MeasureKind::Mrsq, &r.predictor_id, &r.mrsq);
        }
    }
    out
}

/// Per-unit vectors for one `(metric, setting)` group of a τ dump.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitTauGroup {
    pub metric: String,
    pub setting: String,
    pub units: Vec<String>,
    pub vectors: Vec<(String, Vec<Option<f64>>)>,
}

/// Reads a dump written by [`render_unit_taus`]. Units missing for a
/// predictor count as undefined.
pub fn parse_unit_taus<R: BufRead>(source: R, source_name: &str) -> Result<Vec<UnitTauGroup>> {
    type Cells = BTreeMap<(String, String), Option<f64>>;
    let mut groups: Vec<(String, String, Vec<String>, Vec<String>, Cells)> = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {source_name}"), e))?;
        let parse_err = |message: String| Error::Parse {
            source_name: source_name.to_string(),
            line: i + 1,
            message,
        };
        if line.trim().is_empty() || (i == 0 && line == UNIT_TAU_HEADER) {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(parse_err(format!("expected 5 tab-separated fields, got {}", f.len())));
        }
        let tau = if f[4].starts_with("n/a") {
            None
        } else {
            let v: f64 = f[4]
                .parse()
                .map_err(|_| parse_err(format!("invalid tau {:?}", f[4])))?;
            if !(-1.0..=1.0).contains(&v) {
                return Err(parse_err(format!("tau {v} outside [-1, 1]")));
            }
            Some(v)
        };
        let pos = match groups.iter().position(|g| g.0 == f[0] && g.1 == f[1]) {
            Some(p) => p,
            None => {
                groups.push((f[0].into(), f[1].into(), vec![], vec![], BTreeMap::new()));
                groups.len() - 1
            }
        };
        let g = &mut groups[pos];
        if !g.2.iter().any(|p| p == f[2]) {
            g.2.push(f[2].to_string());
        }
        if !g.3.iter().any(|u| u == f[3]) {
            g.3.push(f[3].to_string());
        }
        if g.4.insert((f[2].to_string(), f[3].to_string()), tau).is_some() {
            return Err(parse_err(format!("duplicate entry for ({}, {})", f[2], f[3])));
        }
    }
    Ok(groups
        .into_iter()
        .map(|(metric, setting, preds, units, cells)| {
            let vectors = preds
                .iter()
                .map(|p| {
                    let v = units
                        .iter()
                        .map(|u| cells.get(&(p.clone(), u.clone())).copied().flatten())
                        .collect();
                    (p.clone(), v)
                })
                .collect();
            UnitTauGroup { metric, setting, units, vectors }
        })
        .collect())
}

/// A `query × ranker` matrix as TSV with full-precision values.
pub fn render_grid_tsv(grid: &Grid) -> String {
    let mut out = format!("qid\t{}\n", grid.rankers().join("\t"));
    for (i, q) in grid.queries().iter().enumerate() {
        let vals: Vec<String> = grid.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{q}\t{}\n", vals.join("\t")));
    }
    out
}

/// File-name-safe form of an id.
pub fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    written.push(path);
    Ok(())
}

/// Writes every rendering of the bundle into `dir`; returns the paths written.
pub fn write_reports(bundle: &ReportBundle, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut written = Vec::new();
    for &f in formats {
        let ext = f.extension();
        write(dir.join(format!("table.{ext}")), &render_table(bundle, f), &mut written)?;
        write(dir.join(format!("cross_measure.{ext}")), &render_cross_measure(bundle, f), &mut written)?;
        write(
            dir.join(format!("discriminativeness.{ext}")),
            &render_discriminativeness(bundle, f),
            &mut written,
        )?;
        for s in &bundle.significance {
            let name = format!("significance_{}_{}.{ext}", slug(&s.metric.to_string()), s.setting);
            write(dir.join(name), &render_significance(&s.matrix, f), &mut written)?;
        }
    }
    write(dir.join("unit_taus.tsv"), &render_unit_taus(bundle), &mut written)?;
    write(dir.join("bundle.json"), &bundle.to_json(), &mut written)?;
    Ok(written)
}
