//! Three-way evaluation of predictors against effectiveness.
//!
//! * SRMQ: per ranker, correlate `μ` and `φ` across queries (a column of the
//!   matrices), then average over rankers.
//! * MRSQ: per query, correlate across rankers (a row), then average over
//!   queries.
//! * MRMQ: one correlation over all `n·m` cells.
//!
//! Units whose correlation is undefined (one side all tied) are excluded from
//! the means and reported.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::correlation::{kendall_tau, Degeneracy, Tau, TauVariant};
use crate::error::{Error, Result};
use crate::matrix::Grid;
use crate::metrics::{EffectivenessMatrix, MetricSpec};
use crate::predictors::PredictionMatrix;
use crate::stats::{mean, sample_std};

/// A summary value, or why it could not be computed.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Defined(f64),
    Undefined(String),
}

impl Measure {
    pub fn undefined(reason: impl Into<String>) -> Self {
        Measure::Undefined(reason.into())
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Measure::Defined(v) => Some(*v),
            Measure::Undefined(_) => None,
        }
    }

    fn from_tau(tau: Tau) -> Self {
        match tau {
            Tau::Defined(v) => Measure::Defined(v),
            Tau::Undefined(_) => Measure::undefined("degenerate"),
        }
    }
}

impl fmt::Display for Measure {
    /// Four decimals, or `n/a(reason)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Defined(v) => write!(f, "{v:.4}"),
            Measure::Undefined(r) => write!(f, "n/a({r})"),
        }
    }
}

impl Serialize for Measure {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Measure::Defined(v) => s.serialize_f64(*v),
            Measure::Undefined(r) => s.collect_str(&format_args!("n/a({r})")),
        }
    }
}

/// The four summary measures, in report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Srmq,
    Mrsq,
    Mrmq,
    F1,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 4] = [
        MeasureKind::Srmq,
        MeasureKind::Mrsq,
        MeasureKind::Mrmq,
        MeasureKind::F1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Srmq => "srmq",
            MeasureKind::Mrsq => "mrsq",
            MeasureKind::Mrmq => "mrmq",
            MeasureKind::F1 => "f1",
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A unit (ranker or query) left out of a mean.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exclusion {
    pub unit: String,
    pub reason: String,
}

fn degeneracy_reason(d: Degeneracy) -> &'static str {
    match d {
        Degeneracy::X => "mu-tied",
        Degeneracy::Y => "phi-tied",
        Degeneracy::Both => "mu-and-phi-tied",
    }
}

fn serialize_taus<S: Serializer>(
    taus: &BTreeMap<String, Tau>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let mut map = s.serialize_map(Some(taus.len()))?;
    for (k, t) in taus {
        map.serialize_entry(k, &t.value())?;
    }
    map.end()
}

/// Per-unit correlations along one axis and their mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitSummary {
    #[serde(serialize_with = "serialize_taus")]
    pub per_unit: BTreeMap<String, Tau>,
    pub mean: Measure,
    pub excluded: Vec<Exclusion>,
}

impl UnitSummary {
    fn from_units(per_unit: BTreeMap<String, Tau>) -> Self {
        let defined: Vec<f64> = per_unit.values().filter_map(|t| t.value()).collect();
        let excluded = per_unit
            .iter()
            .filter_map(|(u, t)| match t {
                Tau::Undefined(d) => Some(Exclusion {
                    unit: u.clone(),
                    reason: degeneracy_reason(*d).to_string(),
                }),
                Tau::Defined(_) => None,
            })
            .collect();
        let mean = if defined.is_empty() {
            Measure::undefined("all-degenerate")
        } else {
            Measure::Defined(mean(&defined))
        };
        Self {
            per_unit,
            mean,
            excluded,
        }
    }

    fn singleton() -> Self {
        Self {
            per_unit: BTreeMap::new(),
            mean: Measure::undefined("singleton"),
            excluded: Vec::new(),
        }
    }

    /// Per-unit values in axis order, `None` where undefined.
    pub fn vector(&self) -> Vec<Option<f64>> {
        self.per_unit.values().map(|t| t.value()).collect()
    }
}

/// Every measure for one predictor against one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub predictor_id: String,
    pub srmq: UnitSummary,
    pub mrsq: UnitSummary,
    pub mrmq: Measure,
    pub f1: Measure,
}

impl EvalResult {
    pub fn measure(&self, kind: MeasureKind) -> &Measure {
        match kind {
            MeasureKind::Srmq => &self.srmq.mean,
            MeasureKind::Mrsq => &self.mrsq.mean,
            MeasureKind::Mrmq => &self.mrmq,
            MeasureKind::F1 => &self.f1,
        }
    }
}

/// Correlation between two measures across predictors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossMeasure {
    pub a: MeasureKind,
    pub b: MeasureKind,
    pub tau: Measure,
    /// Predictors with both measures defined.
    pub predictors: usize,
}

/// Results for all predictors against one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub metric: MetricSpec,
    pub results: Vec<EvalResult>,
    pub cross_measure: Vec<CrossMeasure>,
    pub discriminativeness: BTreeMap<MeasureKind, Measure>,
}

/// Harmonic combination `2ab / (a + b)` of the SRMQ and MRSQ means.
/// Negative inputs count as 0; the result is 0 when both are 0.
pub fn f1_combination(p_srmq: f64, p_mrsq: f64) -> f64 {
    let (a, b) = (p_srmq.max(0.0), p_mrsq.max(0.0));
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Sample standard deviation of a measure across predictors.
pub fn discriminativeness(values: &BTreeMap<String, f64>) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Singleton(values.len()));
    }
    let v: Vec<f64> = values.values().copied().collect();
    Ok(sample_std(&v))
}

/// Runs the analyses with a chosen correlation coefficient.
#[derive(Debug, Clone, Copy, Default)]
pub struct Evaluator {
    pub tau: TauVariant,
}

impl Evaluator {
    pub fn new(tau: TauVariant) -> Self {
        Self { tau }
    }

    fn check_axes(mu: &Grid, phi: &Grid) -> Result<()> {
        if mu.same_axes(phi) {
            Ok(())
        } else {
            Err(Error::Validation(
                "effectiveness and prediction matrices have different axes".into(),
            ))
        }
    }

    /// Correlation across queries for one ranker.
    pub fn srmq_per_ranker(&self, mu: &Grid, phi: &Grid, ranker_id: &str) -> Result<Tau> {
        Self::check_axes(mu, phi)?;
        let j = mu
            .ranker_index(ranker_id)
            .ok_or_else(|| Error::Validation(format!("unknown ranker {ranker_id}")))?;
        kendall_tau(&mu.column(j), &phi.column(j), self.tau)
    }

    /// Correlation across rankers for one query.
    pub fn mrsq_per_query(&self, mu: &Grid, phi: &Grid, query_id: &str) -> Result<Tau> {
        Self::check_axes(mu, phi)?;
        let i = mu
            .query_index(query_id)
            .ok_or_else(|| Error::Validation(format!("unknown query {query_id}")))?;
        kendall_tau(mu.row(i), phi.row(i), self.tau)
    }

    /// Per-ranker correlations with exclusions; a single query yields the
    /// `singleton` summary.
    pub fn srmq(&self, mu: &Grid, phi: &Grid) -> Result<UnitSummary> {
        Self::check_axes(mu, phi)?;
        if mu.num_queries() < 2 {
            return Ok(UnitSummary::singleton());
        }
        let per_unit = mu
            .rankers()
            .iter()
            .map(|r| Ok((r.clone(), self.srmq_per_ranker(mu, phi, r)?)))
            .collect::<Result<_>>()?;
        Ok(UnitSummary::from_units(per_unit))
    }

    pub fn mrsq(&self, mu: &Grid, phi: &Grid) -> Result<UnitSummary> {
        Self::check_axes(mu, phi)?;
        if mu.num_rankers() < 2 {
            return Ok(UnitSummary::singleton());
        }
        let per_unit = mu
            .queries()
            .iter()
            .map(|q| Ok((q.clone(), self.mrsq_per_query(mu, phi, q)?)))
            .collect::<Result<_>>()?;
        Ok(UnitSummary::from_units(per_unit))
    }

    /// Mean of the defined per-ranker correlations.
    pub fn srmq_mean(&self, mu: &Grid, phi: &Grid) -> Result<f64> {
        if mu.num_queries() < 2 {
            return Err(Error::Singleton(mu.num_queries()));
        }
        self.srmq(mu, phi)?
            .mean
            .value()
            .ok_or_else(|| Error::AllDegenerate("every ranker column is degenerate".into()))
    }

    /// Mean of the defined per-query correlations.
    pub fn mrsq_mean(&self, mu: &Grid, phi: &Grid) -> Result<f64> {
        if mu.num_rankers() < 2 {
            return Err(Error::Singleton(mu.num_rankers()));
        }
        self.mrsq(mu, phi)?
            .mean
            .value()
            .ok_or_else(|| Error::AllDegenerate("every query row is degenerate".into()))
    }

    /// One correlation over all cells.
    pub fn mrmq_global(&self, mu: &Grid, phi: &Grid) -> Result<f64> {
        Self::check_axes(mu, phi)?;
        match kendall_tau(mu.values(), phi.values(), self.tau)? {
            Tau::Defined(v) => Ok(v),
            Tau::Undefined(d) => Err(Error::Degenerate(format!("flattened sample is {d}"))),
        }
    }

    /// Correlation between two per-predictor measures; key sets must match.
    pub fn cross_measure_correlation(
        &self,
        a: &BTreeMap<String, f64>,
        b: &BTreeMap<String, f64>,
    ) -> Result<Tau> {
        if !a.keys().eq(b.keys()) {
            return Err(Error::Validation(
                "measures cover different predictors".into(),
            ));
        }
        let xs: Vec<f64> = a.values().copied().collect();
        let ys: Vec<f64> = b.values().copied().collect();
        kendall_tau(&xs, &ys, self.tau)
    }

    /// All measures for one predictor.
    pub fn evaluate(&self, mu: &Grid, phi: &Grid, predictor_id: &str) -> Result<EvalResult> {
        let srmq = self.srmq(mu, phi)?;
        let mrsq = self.mrsq(mu, phi)?;
        let mrmq = match self.mrmq_global(mu, phi) {
            Ok(v) => Measure::Defined(v),
            Err(Error::Degenerate(_)) => Measure::undefined("degenerate"),
            Err(Error::Singleton(_)) => Measure::undefined("singleton"),
            Err(e) => return Err(e),
        };
        let f1 = match (&srmq.mean, &mrsq.mean) {
            (Measure::Defined(a), Measure::Defined(b)) => Measure::Defined(f1_combination(*a, *b)),
            (Measure::Undefined(_), _) => Measure::undefined("srmq-undefined"),
            (_, Measure::Undefined(_)) => Measure::undefined("mrsq-undefined"),
        };
        Ok(EvalResult {
            predictor_id: predictor_id.to_string(),
            srmq,
            mrsq,
            mrmq,
            f1,
        })
    }

    /// Evaluates every predictor against `mu` and adds the cross-measure and
    /// discriminativeness analyses over the predictors.
    pub fn evaluate_all(
        &self,
        mu: &EffectivenessMatrix,
        phis: &[PredictionMatrix],
    ) -> Result<Evaluation> {
        if phis.is_empty() {
            return Err(Error::Config("no predictors to evaluate".into()));
        }
        let results = phis
            .par_iter()
            .map(|p| self.evaluate(&mu.grid, &p.grid, &p.label))
            .collect::<Result<Vec<_>>>()?;

        let defined = |kind: MeasureKind| -> BTreeMap<String, f64> {
            results
                .iter()
                .filter_map(|r| r.measure(kind).value().map(|v| (r.predictor_id.clone(), v)))
                .collect()
        };
        let mut cross_measure = Vec::new();
        for (i, &a) in MeasureKind::ALL.iter().enumerate() {
            for &b in &MeasureKind::ALL[i + 1..] {
                let (va, vb) = (defined(a), defined(b));
                let va: BTreeMap<String, f64> =
                    va.into_iter().filter(|(k, _)| vb.contains_key(k)).collect();
                let vb: BTreeMap<String, f64> =
                    vb.into_iter().filter(|(k, _)| va.contains_key(k)).collect();
                let tau = if va.len() < 2 {
                    Measure::undefined("fewer-than-2-predictors")
                } else {
                    Measure::from_tau(self.cross_measure_correlation(&va, &vb)?)
                };
                cross_measure.push(CrossMeasure {
                    a,
                    b,
                    tau,
                    predictors: va.len(),
                });
            }
        }
        let discriminativeness = MeasureKind::ALL
            .iter()
            .map(|&k| {
                let v = defined(k);
                let m = match discriminativeness(&v) {
                    Ok(s) => Measure::Defined(s),
                    Err(_) => Measure::undefined("fewer-than-2-predictors"),
                };
                (k, m)
            })
            .collect();
        Ok(Evaluation {
            metric: mu.metric,
            results,
            cross_measure,
            discriminativeness,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::kendall_tau_b_bruteforce;
    use crate::predictors::{PredictorKind, PredictorSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid(rows: &[Vec<f64>]) -> Grid {
        Grid::from_rows(&[], &[], rows).unwrap()
    }

    fn ev() -> Evaluator {
        Evaluator::default()
    }

    fn named(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn srmq_examples() {
        let mu = grid(&[vec![0.2], vec![0.5], vec![0.3]]);
        let phi = grid(&[vec![1.0], vec![9.0], vec![4.0]]);
        assert_eq!(ev().srmq_per_ranker(&mu, &phi, "r1").unwrap(), Tau::Defined(1.0));
        let neg = mu.map(|v| -v).unwrap();
        assert_eq!(ev().srmq_per_ranker(&mu, &neg, "r1").unwrap(), Tau::Defined(-1.0));
        assert_eq!(ev().srmq_per_ranker(&mu, &mu, "r1").unwrap(), Tau::Defined(1.0));
        let one = grid(&[vec![0.2, 0.3]]);
        assert!(matches!(ev().srmq_per_ranker(&one, &one, "r1"), Err(Error::Singleton(1))));
        assert!(matches!(ev().srmq_mean(&one, &one), Err(Error::Singleton(1))));
    }

    #[test]
    fn srmq_mean_exclusions() {
        // r1 defined (tau 1.0 after flip below gives 0.5 mean with r2 degenerate)
        let mu = grid(&[vec![0.1, 0.3], vec![0.2, 0.3], vec![0.3, 0.3], vec![0.4, 0.3]]);
        let phi = grid(&[vec![1.0, 1.0], vec![3.0, 2.0], vec![2.0, 3.0], vec![4.0, 4.0]]);
        let s = ev().srmq(&mu, &phi).unwrap();
        // r1: pairs over [1,3,2,4] vs increasing: 5 concordant, 1 discordant
        assert_abs_diff_eq!(s.mean.value().unwrap(), 4.0 / 6.0, epsilon = 1e-15);
        assert_eq!(
            s.excluded,
            vec![Exclusion { unit: "r2".into(), reason: "mu-tied".into() }]
        );
        let flat = grid(&[vec![0.3, 0.3], vec![0.3, 0.3]]);
        assert!(matches!(ev().srmq_mean(&flat, &flat), Err(Error::AllDegenerate(_))));
        let g = grid(&[vec![0.1, 0.2], vec![0.5, 0.6]]);
        assert_eq!(ev().srmq_mean(&g, &g).unwrap(), 1.0);
    }

    #[test]
    fn mrsq_examples() {
        let mu = grid(&[vec![0.2, 0.5, 0.3]]);
        let phi = grid(&[vec![0.9, 0.1, 0.4]]);
        assert_eq!(ev().mrsq_per_query(&mu, &phi, "q1").unwrap(), Tau::Defined(-1.0));
        assert_eq!(ev().mrsq_per_query(&mu, &mu, "q1").unwrap(), Tau::Defined(1.0));
        let tied = grid(&[vec![0.0, 0.0, 0.0], vec![0.1, 0.2, 0.3]]);
        let s = ev().mrsq(&tied, &grid(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]])).unwrap();
        assert_eq!(s.mean, Measure::Defined(1.0));
        assert_eq!(s.excluded.len(), 1);
        assert_eq!(s.excluded[0].unit, "q1");
        // per-query 1.0 and 0.0 average to 0.5
        let mu = grid(&[vec![0.1, 0.2, 0.3], vec![0.1, 0.2, 0.3]]);
        let phi = grid(&[vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 3.0]]);
        let per = ev().mrsq(&mu, &phi).unwrap();
        assert_abs_diff_eq!(per.per_unit["q2"].value().unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        let mu = grid(&[vec![0.1, 0.2], vec![0.1, 0.2]]);
        let phi = grid(&[vec![1.0, 2.0], vec![3.0, 3.0]]);
        assert_eq!(ev().mrsq_mean(&mu, &phi).unwrap(), 1.0);
        let phi = grid(&[vec![1.0, 2.0], vec![3.0, 3.0 + 1e-9]]);
        assert_eq!(ev().mrsq_mean(&mu, &phi).unwrap(), 1.0);
        let col = grid(&[vec![0.1], vec![0.2]]);
        assert!(matches!(ev().mrsq_mean(&col, &col), Err(Error::Singleton(1))));
        let flat = grid(&[vec![0.3, 0.3], vec![0.2, 0.2]]);
        assert!(matches!(ev().mrsq_mean(&flat, &flat), Err(Error::AllDegenerate(_))));
    }

    #[test]
    fn mrmq_examples() {
        let mu = grid(&[vec![0.1, 0.4], vec![0.3, 0.2]]);
        let phi = grid(&[vec![1.0, 4.0], vec![2.0, 3.0]]);
        let v = ev().mrmq_global(&mu, &phi).unwrap();
        assert_abs_diff_eq!(v, 4.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.666667, epsilon = 1e-6);
        assert_eq!(ev().mrmq_global(&mu, &mu).unwrap(), 1.0);
        let pair = grid(&[vec![0.1, 0.2]]);
        assert_eq!(ev().mrmq_global(&pair, &grid(&[vec![5.0, 7.0]])).unwrap(), 1.0);
        let flat = grid(&[vec![0.0, 0.0]]);
        assert!(matches!(ev().mrmq_global(&flat, &pair), Err(Error::Degenerate(_))));
    }

    #[test]
    fn f1_examples() {
        assert_abs_diff_eq!(f1_combination(0.4, 0.2), 0.266667, epsilon = 1e-6);
        assert_eq!(f1_combination(0.37, 0.37), 0.37);
        assert_eq!(f1_combination(0.4, 0.0), 0.0);
        assert_eq!(f1_combination(0.0, 0.0), 0.0);
        assert_eq!(f1_combination(-0.3, 0.5), 0.0);
    }

    #[test]
    fn cross_measure_examples() {
        let a = named(&[("m1", 0.1), ("m2", 0.3), ("m3", 0.2)]);
        let b = named(&[("m1", 0.5), ("m2", 0.9), ("m3", 0.7)]);
        assert_eq!(ev().cross_measure_correlation(&a, &b).unwrap(), Tau::Defined(1.0));
        assert_eq!(ev().cross_measure_correlation(&a, &a).unwrap(), Tau::Defined(1.0));
        let rev = named(&[("m1", 0.3), ("m2", 0.1), ("m3", 0.2)]);
        assert_eq!(ev().cross_measure_correlation(&a, &rev).unwrap(), Tau::Defined(-1.0));
        let other = named(&[("m1", 0.5), ("m2", 0.9), ("m4", 0.7)]);
        assert!(ev().cross_measure_correlation(&a, &other).is_err());
    }

    #[test]
    fn discriminativeness_examples() {
        assert_abs_diff_eq!(
            discriminativeness(&named(&[("a", 0.1), ("b", 0.2), ("c", 0.3)])).unwrap(),
            0.1,
            epsilon = 1e-15
        );
        assert_eq!(discriminativeness(&named(&[("a", 0.4), ("b", 0.4)])).unwrap(), 0.0);
        assert_abs_diff_eq!(
            discriminativeness(&named(&[("a", 0.0), ("b", 0.2)])).unwrap(),
            0.141421,
            epsilon = 1e-6
        );
        assert!(discriminativeness(&named(&[("a", 0.4)])).is_err());
    }

    fn prediction(label: &str, grid: Grid) -> PredictionMatrix {
        PredictionMatrix::from_grid(label, PredictorSpec::new(PredictorKind::Nqc), grid)
    }

    fn effectiveness(grid: Grid) -> EffectivenessMatrix {
        EffectivenessMatrix::from_grid(MetricSpec::ap(50), grid).unwrap()
    }

    #[test]
    fn evaluate_all_examples() {
        let g = grid(&[vec![0.1, 0.5, 0.2], vec![0.4, 0.3, 0.9], vec![0.6, 0.7, 0.8]]);
        let mu = effectiveness(g.clone());
        let out = ev().evaluate_all(&mu, &[prediction("ident", g.clone())]).unwrap();
        let r = &out.results[0];
        for k in MeasureKind::ALL {
            assert_eq!(r.measure(k), &Measure::Defined(1.0), "{k}");
        }
        assert_eq!(out.discriminativeness[&MeasureKind::Srmq], Measure::undefined("fewer-than-2-predictors"));

        let neg = g.map(|v| -v).unwrap();
        let out = ev()
            .evaluate_all(&mu, &[prediction("ident", g.clone()), prediction("neg", neg)])
            .unwrap();
        assert_eq!(out.results[1].srmq.mean, Measure::Defined(-1.0));
        assert_eq!(out.results[1].f1, Measure::Defined(0.0));
        let sm = out
            .cross_measure
            .iter()
            .find(|c| (c.a, c.b) == (MeasureKind::Srmq, MeasureKind::Mrsq))
            .unwrap();
        assert_eq!(sm.tau, Measure::Defined(1.0));
        assert_eq!(out.discriminativeness[&MeasureKind::Srmq].value().unwrap(), 2f64.sqrt());

        assert!(ev().evaluate_all(&mu, &[]).is_err());
        let other = Grid::from_rows(&["x", "y", "z"], &[], &[vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]]).unwrap();
        assert!(ev().evaluate_all(&mu, &[prediction("p", other)]).is_err());
    }

    #[test]
    fn undefined_measures_propagate() {
        let mu = effectiveness(grid(&[vec![0.2, 0.2], vec![0.3, 0.3]]));
        let out = ev().evaluate_all(&mu, &[prediction("p", grid(&[vec![1.0, 2.0], vec![3.0, 4.0]]))]).unwrap();
        let r = &out.results[0];
        assert_eq!(r.srmq.mean, Measure::Defined(1.0));
        assert_eq!(r.mrsq.mean, Measure::undefined("all-degenerate"));
        assert_eq!(r.f1, Measure::undefined("mrsq-undefined"));
        assert_eq!(r.mrsq.excluded.len(), 2);
        assert_eq!(r.mrsq.mean.to_string(), "n/a(all-degenerate)");
    }

    fn matrix_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>)> {
        (1usize..6, 1usize..6).prop_flat_map(|(n, m)| {
            let cells = n * m;
            (
                Just(n),
                Just(m),
                prop::collection::vec((0u8..5).prop_map(|v| f64::from(v) / 4.0), cells),
                prop::collection::vec(-3.0f64..3.0, cells),
            )
        })
    }

    fn build(n: usize, m: usize, v: Vec<f64>) -> Grid {
        let q: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
        let r: Vec<String> = (0..m).map(|j| format!("r{j}")).collect();
        Grid::new(q, r, v).unwrap()
    }

    proptest! {
        #[test]
        fn mrmq_matches_bruteforce((n, m, mu, phi) in matrix_strategy()) {
            prop_assume!(n * m >= 2);
            let (mu, phi) = (build(n, m, mu), build(n, m, phi));
            let fast = ev().mrmq_global(&mu, &phi).ok();
            let slow = kendall_tau_b_bruteforce(mu.values(), phi.values()).unwrap().value();
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn monotone_transform_invariance((n, m, mu, phi) in matrix_strategy()) {
            let (mu, phi) = (build(n, m, mu), build(n, m, phi));
            let moved = phi.map(|v| (2.0 * v).exp() + v.powi(3)).unwrap();
            let a = ev().evaluate(&mu, &phi, "p").unwrap();
            let b = ev().evaluate(&mu, &moved, "p").unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn means_invariant_under_axis_permutation((n, m, mu, phi) in matrix_strategy(), rot in 0usize..5) {
            let (g_mu, g_phi) = (build(n, m, mu.clone()), build(n, m, phi.clone()));
            // rotate the query order and reverse the ranker order
            let perm = |v: &[f64]| -> Vec<f64> {
                let mut out = Vec::with_capacity(v.len());
                for i in 0..n {
                    let src = (i + rot) % n;
                    for j in (0..m).rev() {
                        out.push(v[src * m + j]);
                    }
                }
                out
            };
            let (p_mu, p_phi) = (build(n, m, perm(&mu)), build(n, m, perm(&phi)));
            let a = ev().evaluate(&g_mu, &g_phi, "p").unwrap();
            let b = ev().evaluate(&p_mu, &p_phi, "p").unwrap();
            for k in MeasureKind::ALL {
                match (a.measure(k), b.measure(k)) {
                    (Measure::Defined(x), Measure::Defined(y)) => prop_assert!((x - y).abs() < 1e-12),
                    (x, y) => prop_assert_eq!(x, y),
                }
            }
        }
    }
}
