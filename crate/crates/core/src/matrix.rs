use serde::Serialize;

use crate::error::{Error, Result};

/// Row-major `queries × rankers` array of reals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    queries: Vec<String>,
    rankers: Vec<String>,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(queries: Vec<String>, rankers: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if queries.is_empty() || rankers.is_empty() {
            return Err(Error::Validation("matrix axes must be non-empty".into()));
        }
        if values.len() != queries.len() * rankers.len() {
            return Err(Error::Validation(format!(
                "matrix has {} values, expected {}×{}",
                values.len(),
                queries.len(),
                rankers.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value at ({}, {})",
                queries[pos / rankers.len()],
                rankers[pos % rankers.len()]
            )));
        }
        Ok(Self {
            queries,
            rankers,
            values,
        })
    }

    /// Builds a grid from explicit rows; ids default to `q1..`/`r1..` when the id slices are empty.
    pub fn from_rows(queries: &[&str], rankers: &[&str], rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Validation("ragged matrix rows".into()));
        }
        let queries = if queries.is_empty() {
            (1..=rows.len()).map(|i| format!("q{i}")).collect()
        } else {
            queries.iter().map(|s| s.to_string()).collect()
        };
        let rankers = if rankers.is_empty() {
            (1..=width).map(|j| format!("r{j}")).collect()
        } else {
            rankers.iter().map(|s| s.to_string()).collect()
        };
        Self::new(queries, rankers, rows.concat())
    }

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

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.rankers.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.rankers.len();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(j)
            .step_by(self.rankers.len())
            .copied()
            .collect()
    }

    /// All values, row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn query_index(&self, query_id: &str) -> Option<usize> {
        self.queries.iter().position(|q| q == query_id)
    }

    pub fn ranker_index(&self, ranker_id: &str) -> Option<usize> {
        self.rankers.iter().position(|r| r == ranker_id)
    }

    pub fn same_axes(&self, other: &Grid) -> bool {
        self.queries == other.queries && self.rankers == other.rankers
    }

    /// Applies `f` to every value; fails if a result is non-finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Grid> {
        Grid::new(
            self.queries.clone(),
            self.rankers.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }
}
