use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{empirical_quantile, QuantileForecast, QUANTILE_LEVELS};

/// Pinball loss scaled by two, so that the median level gives the absolute
/// error.
pub fn quantile_loss(y: f64, yhat: f64, q: f64) -> f64 {
    if y < yhat {
        2.0 * (1.0 - q) * (yhat - y)
    } else {
        2.0 * q * (y - yhat)
    }
}

fn mean_quantile_loss(actual: &[f64], predicted: &[f64], q: f64) -> f64 {
    let total: f64 = actual.iter().zip(predicted).map(|(&y, &p)| quantile_loss(y, p, q)).sum();
    total / actual.len() as f64
}

fn mean_squared_error(actual: &[f64], predicted: &[f64]) -> f64 {
    let total: f64 = actual.iter().zip(predicted).map(|(&y, &p)| (y - p) * (y - p)).sum();
    total / actual.len() as f64
}

/// Mean quantile loss of `predicted` against `actual`, divided by the mean
/// quantile loss that the in-sample empirical `q`-quantile attains on
/// `in_sample`. `None` when that denominator is zero.
pub fn sql(in_sample: &[f64], actual: &[f64], predicted: &[f64], q: f64) -> Option<f64> {
    let mut sorted = in_sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let isq = vec![empirical_quantile(&sorted, q); in_sample.len()];
    let denominator = mean_quantile_loss(in_sample, &isq, q);
    (denominator > 0.0).then(|| mean_quantile_loss(actual, predicted, q) / denominator)
}

/// Root of the mean squared error of `mean_forecast` divided by the
/// in-sample mean squared error of the one-step naive forecast. `None` when
/// that denominator is zero or there are fewer than two in-sample values.
pub fn rmsse(in_sample: &[f64], actual: &[f64], mean_forecast: &[f64]) -> Option<f64> {
    if in_sample.len() < 2 {
        return None;
    }
    let t = in_sample.len();
    let denominator = mean_squared_error(&in_sample[1..], &in_sample[..t - 1]);
    (denominator > 0.0).then(|| (mean_squared_error(actual, mean_forecast) / denominator).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "sQL0.5")]
    Sql50,
    #[serde(rename = "sQL0.8")]
    Sql80,
    #[serde(rename = "sQL0.9")]
    Sql90,
    #[serde(rename = "sQL0.95")]
    Sql95,
    #[serde(rename = "sQL0.99")]
    Sql99,
    #[serde(rename = "RMSSE")]
    Rmsse,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Sql50,
        Metric::Sql80,
        Metric::Sql90,
        Metric::Sql95,
        Metric::Sql99,
        Metric::Rmsse,
    ];

    /// Index into [`QUANTILE_LEVELS`] for the sQL metrics.
    pub fn level_index(self) -> Option<usize> {
        match self {
            Metric::Sql50 => Some(0),
            Metric::Sql80 => Some(1),
            Metric::Sql90 => Some(2),
            Metric::Sql95 => Some(3),
            Metric::Sql99 => Some(4),
            Metric::Rmsse => None,
        }
    }

    pub fn level(self) -> Option<f64> {
        self.level_index().map(|k| QUANTILE_LEVELS[k])
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Sql50 => "sQL0.5",
            Metric::Sql80 => "sQL0.8",
            Metric::Sql90 => "sQL0.9",
            Metric::Sql95 => "sQL0.95",
            Metric::Sql99 => "sQL0.99",
            Metric::Rmsse => "RMSSE",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

/// Which observations a forecast is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalWindow {
    /// The test segment `T+1..=T+h`, step by step.
    #[default]
    Test,
    /// Every in-sample observation `1..=T`, each compared with the first
    /// forecast step. Used for self-consistency checks of local baselines.
    InSample,
}

/// All six metrics of one series; `None` marks a zero denominator.
pub fn score_series(values: &[f64], forecast: &QuantileForecast, ds: &Dataset, window: EvalWindow) -> [Option<f64>; 6] {
    let split = ds.split();
    let in_sample = &values[split.in_sample()];
    let (actual, n) = match window {
        EvalWindow::Test => (&values[split.test.clone()], split.test.len()),
        EvalWindow::InSample => (in_sample, in_sample.len()),
    };
    let path = |f: &dyn Fn(&crate::models::StepForecast) -> f64| -> Vec<f64> {
        match window {
            EvalWindow::Test => forecast.steps.iter().map(f).collect(),
            EvalWindow::InSample => vec![f(&forecast.steps[0]); n],
        }
    };
    Metric::ALL.map(|m| match m.level_index() {
        Some(k) => sql(in_sample, actual, &path(&|s| s.quantiles[k]), QUANTILE_LEVELS[k]),
        None => rmsse(in_sample, actual, &path(&|s| s.mean)),
    })
}

/// Unweighted mean of the unflagged scores, with the number of flagged
/// (excluded) series.
pub fn aggregate(scores: &[Option<f64>], what: &str) -> Result<(f64, usize)> {
    let kept: Vec<f64> = scores.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(Error::EmptyAggregate(what.to_string()));
    }
    Ok((kept.iter().sum::<f64>() / kept.len() as f64, scores.len() - kept.len()))
}

/// Per-series scores of a forecast set, one row per series and metrics in
/// [`Metric::ALL`] order. Forecast ids must match the dataset's exactly.
pub fn score_forecasts(ds: &Dataset, forecasts: &[QuantileForecast], window: EvalWindow) -> Result<Vec<[Option<f64>; 6]>> {
    let data_ids: HashSet<&str> = ds.series().iter().map(|s| s.id()).collect();
    let fc_ids: HashSet<&str> = forecasts.iter().map(|f| f.series_id.as_str()).collect();
    if data_ids != fc_ids || forecasts.len() != ds.len() {
        let mut missing: Vec<&str> = data_ids.difference(&fc_ids).copied().collect();
        let mut extra: Vec<&str> = fc_ids.difference(&data_ids).copied().collect();
        missing.sort_unstable();
        extra.sort_unstable();
        return Err(Error::Integrity {
            id: "<forecast>".into(),
            msg: format!("ids without forecast: {missing:?}; forecasts without series: {extra:?}"),
        });
    }
    ds.series()
        .iter()
        .map(|ts| {
            let fc = forecasts
                .iter()
                .find(|f| f.series_id == ts.id())
                .expect("id sets checked above");
            if fc.horizon() != ds.horizon() {
                return Err(Error::Integrity {
                    id: ts.id().to_string(),
                    msg: format!("forecast has {} steps, horizon is {}", fc.horizon(), ds.horizon()),
                });
            }
            Ok(score_series(ts.values(), fc, ds, window))
        })
        .collect()
}

/// One aggregated score of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub dataset: String,
    pub model: String,
    pub head: String,
    pub run: u64,
    pub metric: Metric,
    pub value: f64,
    /// Number of series excluded for a zero scaling denominator.
    pub flagged: usize,
}

/// Aggregates per-series scores into one record per metric.
pub fn score_records(
    per_series: &[[Option<f64>; 6]],
    dataset: &str,
    model: &str,
    head: &str,
    run: u64,
) -> Result<Vec<ScoreRecord>> {
    Metric::ALL
        .iter()
        .enumerate()
        .map(|(k, &metric)| {
            let column: Vec<Option<f64>> = per_series.iter().map(|row| row[k]).collect();
            let (value, flagged) = aggregate(&column, metric.name())?;
            Ok(ScoreRecord {
                dataset: dataset.into(),
                model: model.into(),
                head: head.into(),
                run,
                metric,
                value,
                flagged,
            })
        })
        .collect()
}

/// Writes records as CSV `dataset,model,head,run,metric,value,flagged`,
/// with or without the header row.
pub fn write_scores<W: Write>(writer: W, records: &[ScoreRecord], header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    if header && records.is_empty() {
        w.write_record(["dataset", "model", "head", "run", "metric", "value", "flagged"])?;
    }
    w.flush().map_err(|e| Error::io("<score output>", e))?;
    Ok(())
}

/// Per-series scores as CSV `id,sQL0.5,...,RMSSE`; a flagged score is an
/// empty cell.
pub fn write_series_scores<W: Write>(writer: W, ds: &Dataset, scores: &[[Option<f64>; 6]]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend(Metric::ALL.iter().map(|m| m.name().to_string()));
    w.write_record(&header)?;
    for (ts, row) in ds.series().iter().zip(scores) {
        let mut rec = vec![ts.id().to_string()];
        rec.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<score output>", e))?;
    Ok(())
}

pub fn read_scores<R: Read>(reader: R) -> Result<Vec<ScoreRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let rec: ScoreRecord = rec?;
        if !(rec.value.is_finite() && rec.value >= 0.0) {
            return Err(Error::Schema(format!(
                "score {} of {}/{} run {} is not a finite non-negative number",
                rec.value, rec.model, rec.metric, rec.run
            )));
        }
        out.push(rec);
    }
    Ok(out)
}
