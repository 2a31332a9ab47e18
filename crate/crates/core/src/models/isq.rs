use crate::data::{SplitView, TimeSeries};

use super::{QuantileForecast, StepForecast, QUANTILE_LEVELS};

/// Smallest value `v` of `sorted` whose empirical CDF `#{y ≤ v}/n` reaches
/// `q`. `sorted` must be ascending and non-empty.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let nf = n as f64;
    let mut k = ((q * nf).ceil() as usize).clamp(1, n);
    while k > 1 && (k - 1) as f64 / nf >= q {
        k -= 1;
    }
    while k < n && (k as f64 / nf) < q {
        k += 1;
    }
    sorted[k - 1]
}

/// In-sample quantiles: every horizon step gets the empirical quantiles and
/// mean of the observations `1..=T`.
pub fn isq_forecast(ts: &TimeSeries, split: &SplitView) -> QuantileForecast {
    let mut sorted = ts.values()[split.in_sample()].to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let quantiles = QUANTILE_LEVELS.map(|q| empirical_quantile(&sorted, q));
    QuantileForecast {
        series_id: ts.id().to_string(),
        steps: vec![StepForecast::new(mean, quantiles); split.test.len()],
        padded: false,
    }
}
