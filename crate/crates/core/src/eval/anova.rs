//! Least-squares comparison of score tables with one-hot encoded factors.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

use super::{Metric, ScoreRecord};

/// Significance threshold of the two-sided t-tests.
pub const SIGNIFICANCE: f64 = 0.05;

/// Relative size of a QR diagonal entry below which its column is treated
/// as collinear with the preceding ones.
const RANK_TOLERANCE: f64 = 1e-10;

/// Record attribute used as the compared factor of the additive design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Model,
    Head,
}

impl Factor {
    fn name(self) -> &'static str {
        match self {
            Factor::Model => "model",
            Factor::Head => "head",
        }
    }

    fn of(self, r: &ScoreRecord) -> &str {
        match self {
            Factor::Model => &r.model,
            Factor::Head => &r.head,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnovaDesign {
    /// `score = c0 + c_factor · I_factor + c_metric · I_metric + ε`.
    Additive {
        factor: Factor,
        reference_level: String,
        reference_metric: Metric,
    },
    /// `score = c0 + c_metric · I_metric + c_{head×metric} · I_{head×metric} + ε`:
    /// one offset per non-reference head and metric.
    HeadByMetric {
        reference_head: String,
        reference_metric: Metric,
    },
}

impl AnovaDesign {
    /// Models compared against D-Linear at the median level.
    pub fn models() -> Self {
        AnovaDesign::Additive {
            factor: Factor::Model,
            reference_level: "dlinear".into(),
            reference_metric: Metric::Sql50,
        }
    }

    /// Heads compared against NegBin separately for each metric.
    pub fn heads_by_metric() -> Self {
        AnovaDesign::HeadByMetric {
            reference_head: "negbin".into(),
            reference_metric: Metric::Rmsse,
        }
    }

    fn reference(&self) -> (String, Metric) {
        match self {
            AnovaDesign::Additive {
                reference_level,
                reference_metric,
                ..
            } => (reference_level.clone(), *reference_metric),
            AnovaDesign::HeadByMetric {
                reference_head,
                reference_metric,
            } => (reference_head.clone(), *reference_metric),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

impl Coefficient {
    pub fn significant(&self) -> bool {
        self.p_value < SIGNIFICANCE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaResult {
    pub coefficients: Vec<Coefficient>,
    /// Reference level of the compared factor and reference metric.
    pub reference: (String, Metric),
    pub sigma2: f64,
    pub n_obs: usize,
    pub dof: usize,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Design matrix rows in the (canonical) order of `fitted`.
    pub design: Vec<Vec<f64>>,
    /// Scores in the same order.
    pub response: Vec<f64>,
}

fn levels<'a>(records: &'a [ScoreRecord], f: impl Fn(&'a ScoreRecord) -> &'a str) -> BTreeSet<&'a str> {
    records.iter().map(f).collect()
}

fn require_reference(levels: &BTreeSet<&str>, reference: &str, what: &str) -> Result<()> {
    if !levels.contains(reference) {
        return Err(Error::Config(format!(
            "reference {what} `{reference}` not among {:?}",
            levels.iter().collect::<Vec<_>>()
        )));
    }
    if levels.len() < 2 {
        return Err(Error::Config(format!("{what} needs at least two levels, found {levels:?}")));
    }
    Ok(())
}

/// Fits the design by QR-factorized least squares and tests every
/// coefficient against zero.
pub fn anova(records: &[ScoreRecord], design: &AnovaDesign) -> Result<AnovaResult> {
    let mut records = records.to_vec();
    records.sort_by(|a, b| {
        (&a.dataset, &a.model, &a.head, a.run, a.metric)
            .cmp(&(&b.dataset, &b.model, &b.head, b.run, b.metric))
            .then(a.value.total_cmp(&b.value))
    });
    let metrics: BTreeSet<Metric> = records.iter().map(|r| r.metric).collect();
    let (reference, reference_metric) = design.reference();
    if !metrics.contains(&reference_metric) {
        return Err(Error::Config(format!("reference metric {reference_metric} has no records")));
    }
    let other_metrics: Vec<Metric> = metrics.iter().copied().filter(|&m| m != reference_metric).collect();

    let mut names = vec!["(Intercept)".to_string()];
    let rows: Vec<Vec<f64>> = match design {
        AnovaDesign::Additive { factor, .. } => {
            let lv = levels(&records, |r| factor.of(r));
            require_reference(&lv, &reference, factor.name())?;
            let others: Vec<&str> = lv.iter().copied().filter(|&l| l != reference).collect();
            names.extend(others.iter().map(|l| format!("{}={l}", factor.name())));
            names.extend(other_metrics.iter().map(|m| format!("metric={m}")));
            records
                .iter()
                .map(|r| {
                    let mut row = vec![1.0];
                    row.extend(others.iter().map(|&l| f64::from(u8::from(factor.of(r) == l))));
                    row.extend(other_metrics.iter().map(|&m| f64::from(u8::from(r.metric == m))));
                    row
                })
                .collect()
        }
        AnovaDesign::HeadByMetric { .. } => {
            let lv = levels(&records, |r| &r.head);
            require_reference(&lv, &reference, "head")?;
            let others: Vec<&str> = lv.iter().copied().filter(|&l| l != reference).collect();
            names.extend(other_metrics.iter().map(|m| format!("metric={m}")));
            let cells: Vec<(&str, Metric)> = others
                .iter()
                .flat_map(|&h| metrics.iter().map(move |&m| (h, m)))
                .collect();
            names.extend(cells.iter().map(|(h, m)| format!("head={h}:metric={m}")));
            records
                .iter()
                .map(|r| {
                    let mut row = vec![1.0];
                    row.extend(other_metrics.iter().map(|&m| f64::from(u8::from(r.metric == m))));
                    row.extend(cells.iter().map(|&(h, m)| f64::from(u8::from(r.head == h && r.metric == m))));
                    row
                })
                .collect()
        }
    };
    let y: Vec<f64> = records.iter().map(|r| r.value).collect();
    fit(rows, y, names, (reference, reference_metric))
}

/// Ordinary least squares of `y` on the rows of a design matrix.
pub fn fit(rows: Vec<Vec<f64>>, y: Vec<f64>, names: Vec<String>, reference: (String, Metric)) -> Result<AnovaResult> {
    let (n, k) = (rows.len(), names.len());
    if n <= k {
        return Err(Error::Config(format!(
            "{n} observations cannot estimate {k} coefficients with a residual variance"
        )));
    }
    let x = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    let collinear: Vec<String> = (0..k)
        .filter(|&j| r[(j, j)].abs() <= RANK_TOLERANCE * scale)
        .map(|j| names[j].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(Error::Design { columns: collinear });
    }
    let yv = DVector::from_vec(y.clone());
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerics("triangular solve failed".into()))?;
    let fitted_v = &x * &beta;
    let residuals: Vec<f64> = y.iter().zip(fitted_v.iter()).map(|(a, b)| a - b).collect();
    let dof = n - k;
    let sigma2 = residuals.iter().map(|e| e * e).sum::<f64>() / dof as f64;

    // (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Numerics("triangular inverse failed".into()))?;
    let cov = &r_inv * r_inv.transpose();
    let t_dist = StudentsT::new(0.0, 1.0, dof as f64).map_err(|e| Error::Numerics(e.to_string()))?;
    let coefficients = names
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let estimate = beta[j];
            let std_error = (sigma2 * cov[(j, j)]).sqrt();
            let (t_stat, p_value) = if std_error > 0.0 {
                let t = estimate / std_error;
                (t, 2.0 * t_dist.sf(t.abs()))
            } else if estimate != 0.0 {
                (estimate.signum() * f64::INFINITY, 0.0)
            } else {
                (f64::NAN, 1.0)
            };
            Coefficient {
                name,
                estimate,
                std_error,
                t_stat,
                p_value,
            }
        })
        .collect();
    Ok(AnovaResult {
        coefficients,
        reference,
        sigma2,
        n_obs: n,
        dof,
        fitted: fitted_v.iter().copied().collect(),
        residuals,
        design: rows,
        response: y,
    })
}

impl AnovaResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// CSV with header `term,estimate,std_error,t_stat,p_value,sig`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["term", "estimate", "std_error", "t_stat", "p_value", "sig"])?;
        for c in &self.coefficients {
            w.write_record([
                c.name.clone(),
                c.estimate.to_string(),
                c.std_error.to_string(),
                c.t_stat.to_string(),
                c.p_value.to_string(),
                if c.significant() { "*".into() } else { String::new() },
            ])?;
        }
        w.flush().map_err(|e| Error::io("<anova output>", e))?;
        Ok(())
    }

    /// Aligned plain-text table; `*` in the `sig` column marks p < 0.05.
    pub fn to_table(&self) -> String {
        let width = self.coefficients.iter().map(|c| c.name.len()).max().unwrap_or(4).max(4);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "reference levels: ({}, {}); n = {}, residual dof = {}, sigma^2 = {:.6e}",
            self.reference.0, self.reference.1, self.n_obs, self.dof, self.sigma2
        );
        let _ = writeln!(
            out,
            "{:<width$}  {:>12}  {:>12}  {:>10}  {:>10}  sig",
            "term", "estimate", "std_error", "t", "p"
        );
        for c in &self.coefficients {
            let _ = writeln!(
                out,
                "{:<width$}  {:>12.6}  {:>12.6}  {:>10.3}  {:>10.4}  {}",
                c.name,
                c.estimate,
                c.std_error,
                c.t_stat,
                c.p_value,
                if c.significant() { "*" } else { "" }
            );
        }
        out
    }
}
