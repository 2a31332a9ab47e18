use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::{SplitView, TimeSeries};
use crate::error::{Error, Result};
use crate::seed;

use super::isq::empirical_quantile;
use super::{QuantileForecast, StepForecast, QUANTILE_LEVELS};

/// Smoothing coefficients searched for both the occurrence and the demand
/// level.
pub const SMOOTHING_GRID: [f64; 6] = [0.01, 0.05, 0.1, 0.2, 0.3, 0.5];

/// Shape used in likelihoods when the positive demands have zero variance.
const MAX_SHAPE: f64 = 1e6;
const PROB_FLOOR: f64 = 1e-9;

/// Fitted state of the occurrence/demand decomposition after the last
/// in-sample observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrostonState {
    pub series_id: String,
    /// Occurrence probability level.
    pub occurrence: f64,
    /// Level of the positive demand sizes.
    pub demand: f64,
    pub alpha_occurrence: f64,
    pub alpha_demand: f64,
    /// Gamma shape of the positive demands; infinite when they never vary.
    pub shape: f64,
    /// No positive observation in sample; forecasts are identically zero.
    pub degenerate: bool,
}

fn gamma_log_pdf(y: f64, shape: f64, mean: f64) -> f64 {
    let k = shape.min(MAX_SHAPE);
    let rate = k / mean;
    k * rate.ln() + (k - 1.0) * y.ln() - rate * y - ln_gamma(k)
}

struct Filter {
    occurrence: f64,
    demand: f64,
}

impl Filter {
    fn update(&mut self, y: f64, alpha_o: f64, alpha_d: f64) {
        let o = if y > 0.0 { 1.0 } else { 0.0 };
        self.occurrence += alpha_o * (o - self.occurrence);
        if y > 0.0 {
            self.demand += alpha_d * (y - self.demand);
        }
    }
}

/// One-step-ahead negative log-likelihood of `y` and the final filter state.
fn run_filter(y: &[f64], init: (f64, f64), alpha_o: f64, alpha_d: f64, shape: f64) -> (f64, Filter) {
    let mut f = Filter {
        occurrence: init.0,
        demand: init.1,
    };
    let mut nll = 0.0;
    for &v in y {
        let p = f.occurrence.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        nll -= if v > 0.0 {
            p.ln() + gamma_log_pdf(v, shape, f.demand)
        } else {
            (1.0 - p).ln()
        };
        f.update(v, alpha_o, alpha_d);
    }
    (nll, f)
}

/// Fits iETS-lite on the in-sample range `1..=T`: exponential smoothing of
/// the occurrence indicator and of the positive demand sizes, with the
/// smoothing pair picked from `grid` by one-step-ahead likelihood under a
/// Bernoulli–gamma model. The gamma shape comes from the method of moments
/// on the positive values.
pub fn iets_lite_fit(ts: &TimeSeries, split: &SplitView, grid: &[f64]) -> CrostonState {
    let y = &ts.values()[split.in_sample()];
    let positive: Vec<f64> = y.iter().copied().filter(|&v| v > 0.0).collect();
    if positive.is_empty() {
        return CrostonState {
            series_id: ts.id().to_string(),
            occurrence: 0.0,
            demand: 0.0,
            alpha_occurrence: grid.first().copied().unwrap_or(0.1),
            alpha_demand: grid.first().copied().unwrap_or(0.1),
            shape: f64::INFINITY,
            degenerate: true,
        };
    }
    let n_pos = positive.len() as f64;
    let mean = positive.iter().sum::<f64>() / n_pos;
    let var = positive.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n_pos;
    let shape = if var > 0.0 { mean * mean / var } else { f64::INFINITY };
    let init = (n_pos / y.len() as f64, mean);

    let mut best: Option<(f64, f64, f64, Filter)> = None;
    for &alpha_o in grid {
        for &alpha_d in grid {
            let (nll, state) = run_filter(y, init, alpha_o, alpha_d, shape);
            if best.as_ref().is_none_or(|b| nll < b.0) {
                best = Some((nll, alpha_o, alpha_d, state));
            }
        }
    }
    let (_, alpha_o, alpha_d, state) = best.expect("non-empty smoothing grid");
    CrostonState {
        series_id: ts.id().to_string(),
        occurrence: state.occurrence,
        demand: state.demand,
        alpha_occurrence: alpha_o,
        alpha_demand: alpha_d,
        shape,
        degenerate: false,
    }
}

/// Simulated draws `[step][path]` of `n_samples` paths of length `h`. Each
/// path updates both levels with its own draws.
pub fn iets_lite_sample_paths(state: &CrostonState, h: usize, n_samples: usize, rng_seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut draws = vec![vec![0.0; n_samples]; h];
    if state.degenerate {
        return Ok(draws);
    }
    let mut rng = seed::rng(rng_seed);
    let gamma = if state.shape.is_finite() {
        Some(Gamma::new(state.shape, 1.0 / state.shape).map_err(|e| Error::InvalidParam(e.to_string()))?)
    } else {
        None
    };
    for path in 0..n_samples {
        let mut f = Filter {
            occurrence: state.occurrence,
            demand: state.demand,
        };
        for step in draws.iter_mut() {
            let v = if rng.random::<f64>() < f.occurrence {
                match &gamma {
                    Some(g) => f.demand * g.sample(&mut rng),
                    None => f.demand,
                }
            } else {
                0.0
            };
            step[path] = v;
            f.update(v, state.alpha_occurrence, state.alpha_demand);
        }
    }
    Ok(draws)
}

/// Summarizes simulated paths by the sample mean and empirical quantiles of
/// each step.
pub fn iets_lite_forecast(state: &CrostonState, h: usize, n_samples: usize, rng_seed: u64) -> Result<QuantileForecast> {
    if state.degenerate || n_samples == 0 {
        return Ok(QuantileForecast {
            series_id: state.series_id.clone(),
            steps: vec![StepForecast::new(0.0, [0.0; 5]); h],
            padded: false,
        });
    }
    let steps = iets_lite_sample_paths(state, h, n_samples, rng_seed)?
        .into_iter()
        .map(|mut d| {
            let mean = d.iter().sum::<f64>() / n_samples as f64;
            d.sort_by(f64::total_cmp);
            StepForecast::new(mean, QUANTILE_LEVELS.map(|q| empirical_quantile(&d, q)))
        })
        .collect();
    Ok(QuantileForecast {
        series_id: state.series_id.clone(),
        steps,
        padded: false,
    })
}
