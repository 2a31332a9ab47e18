//! Probabilistic forecasting for intermittent time series.
//!
//! The crate is organised around the pipeline a forecasting experiment goes
//! through:
//!
//! - [`data`]: series collections, train/validation/test splits, scale
//!   factors, batching of context windows and synthetic generators.
//! - [`dist`]: the negative binomial, hurdle-shifted negative binomial and
//!   Tweedie forecast distributions together with their link functions,
//!   likelihood gradients, samplers and quantiles.
//! - [`nn`]: a small reverse-mode engine (dense maps, ReLU, moving-average
//!   decomposition, distribution-head likelihood), Adam and the training loop.
//! - [`models`]: in-sample quantiles, iETS-lite, FNN and D-Linear behind a
//!   common [`models::QuantileForecast`] output.
//! - [`eval`]: quantile loss, scaled quantile loss, RMSSE, aggregation and the
//!   ANOVA comparison of score tables.

pub mod data;
pub mod dist;
pub mod error;
pub mod eval;
pub mod models;
pub mod nn;
pub mod seed;

pub use data::{Dataset, Freq, SeriesLayout, SeriesStats, SplitView, TimeSeries};
pub use dist::{DistParams, HeadKind, HsnbParams, NegBinParams, TweedieParams};
pub use error::{Error, Result};
pub use eval::{AnovaResult, Metric, ScoreRecord};
pub use models::{ModelKind, ModelSpec, QuantileForecast, QUANTILE_LEVELS};
pub use nn::{Checkpoint, TrainConfig};



