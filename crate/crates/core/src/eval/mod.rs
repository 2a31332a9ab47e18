//! Forecast scores and the regression-based comparison of score tables.

mod anova;
mod metrics;

pub use anova::{anova, fit, AnovaDesign, AnovaResult, Coefficient, Factor, SIGNIFICANCE};
pub use metrics::{
    aggregate, quantile_loss, read_scores, rmsse, score_forecasts, score_records, score_series, sql, write_scores,
    write_series_scores,
    EvalWindow, Metric, ScoreRecord,
};
