//! Paired two-tailed t-tests between predictors over per-unit correlations.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::{mean, sample_std};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation, ~15 significant digits).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
fn two_tailed(t: f64, df: u32) -> f64 {
    let df = f64::from(df);
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// `P(T <= t)` for Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: u32) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::Compute(format!("t statistic {t} is not finite")));
    }
    if df == 0 {
        return Err(Error::Compute("degrees of freedom must be at least 1".into()));
    }
    let tail = 0.5 * two_tailed(t, df);
    Ok(if t > 0.0 { 1.0 - tail } else { tail })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub t_stat: f64,
    pub df: u32,
    pub p_value: f64,
    pub mean_diff: f64,
}

/// Paired two-tailed t-test on `a - b`. Zero variance of the differences
/// gives `t = 0, p = 1`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Singleton(a.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Validation("paired samples contain non-finite values".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let df = (n - 1) as u32;
    let mean_diff = mean(&d);
    let sd = sample_std(&d);
    if sd == 0.0 {
        return Ok(TTestResult { t_stat: 0.0, df, p_value: 1.0, mean_diff });
    }
    let t_stat = mean_diff / (sd / (n as f64).sqrt());
    Ok(TTestResult {
        t_stat,
        df,
        p_value: two_tailed(t_stat, df).clamp(0.0, 1.0),
        mean_diff,
    })
}

/// Drops units undefined in either vector, then tests the rest.
pub fn paired_t_test_units(a: &[Option<f64>], b: &[Option<f64>]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "unit vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip();
    paired_t_test(&xs, &ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ABetter,
    BBetter,
    Tie,
    /// Fewer than two units defined for both predictors.
    Untestable,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::ABetter => Direction::BBetter,
            Direction::BBetter => Direction::ABetter,
            d => d,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Direction::ABetter => ">",
            Direction::BBetter => "<",
            Direction::Tie => "=",
            Direction::Untestable => "n/a",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::ABetter => "a_better",
            Direction::BBetter => "b_better",
            Direction::Tie => "tie",
            Direction::Untestable => "untestable",
        })
    }
}

/// Outcome for one unordered pair `{a, b}`, stated from `a`'s side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    pub direction: Direction,
    pub significant: bool,
    pub test: Option<TTestResult>,
}

impl PairComparison {
    pub fn p_value(&self) -> Option<f64> {
        self.test.map(|t| t.p_value)
    }

    fn swapped(&self) -> Self {
        Self {
            a: self.b.clone(),
            b: self.a.clone(),
            direction: self.direction.flip(),
            significant: self.significant,
            test: self.test.map(|t| TTestResult {
                t_stat: -t.t_stat,
                mean_diff: -t.mean_diff,
                ..t
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceMatrix {
    pub predictors: Vec<String>,
    pub alpha: f64,
    pub bonferroni: bool,
    /// Pairs `(i, j)` with `i < j` in predictor order.
    pub pairs: Vec<PairComparison>,
}

impl SignificanceMatrix {
    /// The comparison of `a` against `b`, in either order; `None` on the diagonal.
    pub fn get(&self, a: &str, b: &str) -> Option<PairComparison> {
        self.pairs.iter().find_map(|p| {
            if p.a == a && p.b == b {
                Some(p.clone())
            } else if p.a == b && p.b == a {
                Some(p.swapped())
            } else {
                None
            }
        })
    }

    /// Level each p-value is compared against.
    pub fn threshold(&self) -> f64 {
        if self.bonferroni && !self.pairs.is_empty() {
            self.alpha / self.pairs.len() as f64
        } else {
            self.alpha
        }
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha={alpha} must lie in (0, 1)")))
    }
}

/// Tests every pair of predictors. Vectors are per-unit correlations over a
/// shared unit axis, `None` where undefined (dropped pairwise).
pub fn significance_matrix(
    per_unit: &[(String, Vec<Option<f64>>)],
    alpha: f64,
    bonferroni: bool,
) -> Result<SignificanceMatrix> {
    check_alpha(alpha)?;
    let mut seen = BTreeSet::new();
    for (id, v) in per_unit {
        if !seen.insert(id) {
            return Err(Error::Validation(format!("predictor {id} listed twice")));
        }
        if v.len() != per_unit[0].1.len() {
            return Err(Error::Validation(format!(
                "predictor {id} has {} units, expected {}",
                v.len(),
                per_unit[0].1.len()
            )));
        }
    }
    let n_pairs = per_unit.len() * per_unit.len().saturating_sub(1) / 2;
    let level = if bonferroni && n_pairs > 0 {
        alpha / n_pairs as f64
    } else {
        alpha
    };
    let mut pairs = Vec::with_capacity(n_pairs);
    for (i, (a, va)) in per_unit.iter().enumerate() {
        for (b, vb) in &per_unit[i + 1..] {
            let test = match paired_t_test_units(va, vb) {
                Ok(t) => Some(t),
                Err(Error::Singleton(_)) => None,
                Err(e) => return Err(e),
            };
            let direction = match test {
                None => Direction::Untestable,
                Some(t) if t.mean_diff > 0.0 => Direction::ABetter,
                Some(t) if t.mean_diff < 0.0 => Direction::BBetter,
                Some(_) => Direction::Tie,
            };
            pairs.push(PairComparison {
                a: a.clone(),
                b: b.clone(),
                direction,
                significant: test.is_some_and(|t| t.p_value < level),
                test,
            });
        }
    }
    Ok(SignificanceMatrix {
        predictors: per_unit.iter().map(|(id, _)| id.clone()).collect(),
        alpha,
        bonferroni,
        pairs,
    })
}
