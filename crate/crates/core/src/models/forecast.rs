use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Quantile levels reported by every forecaster.
pub const QUANTILE_LEVELS: [f64; 5] = [0.5, 0.8, 0.9, 0.95, 0.99];

const HEADER: [&str; 8] = ["id", "step", "mean", "q0.5", "q0.8", "q0.9", "q0.95", "q0.99"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepForecast {
    pub mean: f64,
    /// Quantiles at [`QUANTILE_LEVELS`], non-decreasing.
    pub quantiles: [f64; 5],
}

impl StepForecast {
    /// Builds a step, lifting any quantile that falls below its predecessor.
    pub fn new(mean: f64, mut quantiles: [f64; 5]) -> Self {
        for k in 1..quantiles.len() {
            if quantiles[k] < quantiles[k - 1] {
                quantiles[k] = quantiles[k - 1];
            }
        }
        Self { mean, quantiles }
    }

    pub fn quantile(&self, level: f64) -> Option<f64> {
        QUANTILE_LEVELS
            .iter()
            .position(|&q| q == level)
            .map(|k| self.quantiles[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileForecast {
    pub series_id: String,
    pub steps: Vec<StepForecast>,
    /// Set when the model input had to be zero-padded.
    pub padded: bool,
}

impl QuantileForecast {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn means(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.mean).collect()
    }

    /// The forecast path at quantile level index `k` of [`QUANTILE_LEVELS`].
    pub fn level_path(&self, k: usize) -> Vec<f64> {
        self.steps.iter().map(|s| s.quantiles[k]).collect()
    }
}

/// Writes forecasts with header `id,step,mean,q0.5,q0.8,q0.9,q0.95,q0.99`.
pub fn write_forecasts<W: Write>(writer: W, forecasts: &[QuantileForecast]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(HEADER)?;
    for fc in forecasts {
        for (k, step) in fc.steps.iter().enumerate() {
            let mut row = vec![fc.series_id.clone(), (k + 1).to_string(), step.mean.to_string()];
            row.extend(step.quantiles.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<forecast output>", e))?;
    Ok(())
}

/// Reads the format of [`write_forecasts`]. Series keep their order of
/// first appearance; steps must run `1..=h` in order.
pub fn read_forecasts<R: Read>(reader: R) -> Result<Vec<QuantileForecast>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().map(str::trim).ne(HEADER) {
        return Err(Error::Schema(format!(
            "forecast header must be `{}`, found `{}`",
            HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out: Vec<QuantileForecast> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let num = |c: usize| -> Result<f64> {
            record[c]
                .trim()
                .parse()
                .map_err(|_| Error::Schema(format!("line {}: `{}` is not a number", line + 2, &record[c])))
        };
        let id = record[0].trim().to_string();
        let step: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::Schema(format!("line {}: bad step `{}`", line + 2, &record[1])))?;
        let mut quantiles = [0.0; 5];
        for (k, q) in quantiles.iter_mut().enumerate() {
            *q = num(3 + k)?;
        }
        let entry = StepForecast {
            mean: num(2)?,
            quantiles,
        };
        match out.last_mut() {
            Some(fc) if fc.series_id == id => {
                if step != fc.steps.len() + 1 {
                    return Err(Error::Integrity {
                        id,
                        msg: format!("forecast step {step} out of order"),
                    });
                }
                fc.steps.push(entry);
            }
            _ => {
                if out.iter().any(|fc| fc.series_id == id) {
                    return Err(Error::Integrity {
                        id,
                        msg: "forecast rows of this series are not contiguous".into(),
                    });
                }
                if step != 1 {
                    return Err(Error::Integrity {
                        id,
                        msg: format!("forecast starts at step {step}"),
                    });
                }
                out.push(QuantileForecast {
                    series_id: id,
                    steps: vec![entry],
                    padded: false,
                });
            }
        }
    }
    Ok(out)
}
