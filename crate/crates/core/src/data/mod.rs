//! Series collections, splits and per-series statistics.
//!
//! Time indices are 1-based in files and in the vocabulary of windows
//! (`w` is the last index of a context window); slices into `values` are
//! 0-based half-open ranges.

mod batch;
mod config;
mod csv_io;
mod synthetic;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use batch::{make_batches, Batch, BatchStream};
pub use config::RunConfig;
pub use csv_io::{load_csv, read_series, write_csv, ColumnSpec};
pub use synthetic::{gen_seasonal, gen_synthetic, SeasonalSpec};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Freq {
    Daily,
    #[default]
    Monthly,
}

impl FromStr for Freq {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "daily" | "d" => Ok(Freq::Daily),
            "monthly" | "m" => Ok(Freq::Monthly),
            other => Err(Error::Config(format!("unknown frequency `{other}`"))),
        }
    }
}

impl fmt::Display for Freq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Freq::Daily => "daily",
            Freq::Monthly => "monthly",
        })
    }
}

/// Shape shared by every series of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesLayout {
    pub freq: Freq,
    pub horizon: usize,
    pub context: usize,
    /// Length `T` of the in-sample part (training plus validation).
    pub train_end: usize,
}

impl SeriesLayout {
    pub fn new(freq: Freq, horizon: usize, context: usize, train_end: usize) -> Result<Self> {
        let layout = Self {
            freq,
            horizon,
            context,
            train_end,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.context == 0 {
            return Err(Error::Config("horizon and context must be positive".into()));
        }
        if self.train_end <= self.horizon {
            return Err(Error::Config(format!(
                "train_end {} must exceed the horizon {} to leave a training range",
                self.train_end, self.horizon
            )));
        }
        Ok(())
    }

    /// Total series length `T + h`.
    pub fn len(&self) -> usize {
        self.train_end + self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn split(&self) -> SplitView {
        SplitView::new(self.train_end, self.horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    id: String,
    values: Vec<f64>,
    is_integer: bool,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if let Some((t, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain {
                id,
                t: t + 1,
                msg: format!("value {v} is not a non-negative real"),
            });
        }
        let is_integer = values.iter().all(|v| v.fract() == 0.0);
        Ok(Self { id, values, is_integer })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_integer(&self) -> bool {
        self.is_integer
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Index ranges of the three segments of a series of length `T + h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitView {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl SplitView {
    pub fn new(train_end: usize, horizon: usize) -> Self {
        let fit_end = train_end.saturating_sub(horizon);
        Self {
            train: 0..fit_end,
            validation: fit_end..train_end,
            test: train_end..train_end + horizon,
        }
    }

    /// Training plus validation, `1..=T`: everything a local model may see.
    pub fn in_sample(&self) -> Range<usize> {
        self.train.start..self.validation.end
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    series: Vec<TimeSeries>,
    layout: SeriesLayout,
}

impl Dataset {
    pub fn new(series: Vec<TimeSeries>, layout: SeriesLayout) -> Result<Self> {
        layout.validate()?;
        for ts in &series {
            if ts.len() != layout.len() {
                return Err(Error::Integrity {
                    id: ts.id.clone(),
                    msg: format!(
                        "length {} differs from train_end + horizon = {}",
                        ts.len(),
                        layout.len()
                    ),
                });
            }
        }
        Ok(Self { series, layout })
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn layout(&self) -> &SeriesLayout {
        &self.layout
    }

    pub fn horizon(&self) -> usize {
        self.layout.horizon
    }

    pub fn context(&self) -> usize {
        self.layout.context
    }

    pub fn train_end(&self) -> usize {
        self.layout.train_end
    }

    pub fn split(&self) -> SplitView {
        self.layout.split()
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Same series with a different context length.
    pub fn with_context(&self, context: usize) -> Result<Self> {
        let layout = SeriesLayout {
            context,
            ..self.layout
        };
        Dataset::new(self.series.clone(), layout)
    }

    pub fn stats(&self) -> Vec<SeriesStats> {
        let split = self.split();
        self.series.iter().map(|ts| compute_stats(ts, &split)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    /// Mean of the strictly positive training values, 1 for an all-zero series.
    pub scale: f64,
    /// Average demand interval; `+inf` when no training value is positive.
    pub adi: f64,
    pub cv2: f64,
    pub nonzero_count: usize,
}

/// Summary statistics over the training range of `split`.
pub fn compute_stats(ts: &TimeSeries, split: &SplitView) -> SeriesStats {
    let train = &ts.values()[split.train.clone()];
    let positive: Vec<f64> = train.iter().copied().filter(|&v| v > 0.0).collect();
    let n = positive.len();
    if n == 0 {
        return SeriesStats {
            scale: 1.0,
            adi: f64::INFINITY,
            cv2: 0.0,
            nonzero_count: 0,
        };
    }
    let mean = positive.iter().sum::<f64>() / n as f64;
    let cv2 = if n < 2 {
        0.0
    } else {
        let var = positive.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        var / (mean * mean)
    };
    SeriesStats {
        scale: mean,
        adi: train.len() as f64 / n as f64,
        cv2,
        nonzero_count: n,
    }
}
