//! Synthetic corpora with known generating processes.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{DistParams, NegBinParams};
use crate::error::{Error, Result};
use crate::seed::{self, streams};

use super::{Dataset, SeriesLayout, TimeSeries};

fn series_id(i: usize) -> String {
    format!("syn{i:05}")
}

/// `n` series of i.i.d. draws from `params`, one independent random stream
/// per series.
pub fn gen_synthetic(params: &DistParams, n: usize, layout: SeriesLayout, rng_seed: u64) -> Result<Dataset> {
    if params.mean() <= 0.0 && !matches!(params, DistParams::Hsnb(_)) {
        return Err(Error::InvalidParam("generating distribution has non-positive mean".into()));
    }
    let series = (0..n)
        .map(|i| {
            let mut rng = seed::stream(rng_seed, streams::SERIES_BASE + i as u64);
            let values = (0..layout.len()).map(|_| params.sample(&mut rng)).collect();
            TimeSeries::new(series_id(i), values)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(series, layout)
}

/// Intermittent series whose occurrence probability follows a seasonal
/// cycle with a random phase per series:
///
/// `π_t = clamp(base + amplitude · sin(2π (t + phase) / period), 0, 1)`
///
/// Positive demands are `1 + Z` with `Z` negative binomial of shape
/// `size_r` and a per-series mean drawn uniformly from `size_mean_range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalSpec {
    pub period: usize,
    pub base: f64,
    pub amplitude: f64,
    pub size_r: f64,
    pub size_mean_range: (f64, f64),
}

impl Default for SeasonalSpec {
    fn default() -> Self {
        Self {
            period: 12,
            base: 0.45,
            amplitude: 0.4,
            size_r: 2.0,
            size_mean_range: (0.5, 5.0),
        }
    }
}

pub fn gen_seasonal(spec: &SeasonalSpec, n: usize, layout: SeriesLayout, rng_seed: u64) -> Result<Dataset> {
    let (lo, hi) = spec.size_mean_range;
    if spec.period == 0 || !(spec.size_r > 0.0) || !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidParam(format!("invalid seasonal spec {spec:?}")));
    }
    let series = (0..n)
        .map(|i| {
            let mut rng = seed::stream(rng_seed, streams::SERIES_BASE + i as u64);
            let phase = rng.random_range(0..spec.period) as f64;
            let size_mean = if hi > lo { rng.random_range(lo..hi) } else { lo };
            let size = NegBinParams::from_logit(spec.size_r, (spec.size_r / size_mean).ln())?;
            let values = (0..layout.len())
                .map(|t| {
                    let angle = 2.0 * PI * (t as f64 + 1.0 + phase) / spec.period as f64;
                    let pi = (spec.base + spec.amplitude * angle.sin()).clamp(0.0, 1.0);
                    if rng.random::<f64>() < pi {
                        1.0 + size.sample(&mut rng)
                    } else {
                        0.0
                    }
                })
                .collect();
            TimeSeries::new(series_id(i), values)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(series, layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{compute_stats, Freq, SplitView};
    use crate::dist::{HsnbParams, TweedieParams};

    fn layout(len: usize) -> SeriesLayout {
        SeriesLayout::new(Freq::Monthly, 6, 12, len - 6).unwrap()
    }

    #[test]
    fn hurdle_with_zero_occurrence_is_all_zero() {
        let p = DistParams::Hsnb(HsnbParams::new(0.0, 2.0, 0.4).unwrap());
        let ds = gen_synthetic(&p, 20, layout(30), 5).unwrap();
        assert!(ds.series().iter().all(|s| s.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn count_kinds_yield_integer_series() {
        for p in [
            DistParams::NegBin(NegBinParams::new(0.75, 0.2).unwrap()),
            DistParams::Hsnb(HsnbParams::new(0.3, 1.5, 0.4).unwrap()),
        ] {
            let ds = gen_synthetic(&p, 10, layout(40), 9).unwrap();
            assert!(ds.series().iter().all(TimeSeries::is_integer));
        }
        let tw = DistParams::Tweedie(TweedieParams::new(3.0, 2.0, 1.5).unwrap());
        let ds = gen_synthetic(&tw, 10, layout(40), 9).unwrap();
        assert!(!ds.series().iter().all(TimeSeries::is_integer));
    }

    #[test]
    fn same_seed_same_corpus() {
        let p = DistParams::NegBin(NegBinParams::new(0.75, 0.2).unwrap());
        let a = gen_synthetic(&p, 5, layout(30), 1).unwrap();
        let b = gen_synthetic(&p, 5, layout(30), 1).unwrap();
        assert_eq!(a.series(), b.series());
    }

    #[test]
    fn figure_negbin_corpus_moments() {
        let p = DistParams::NegBin(NegBinParams::new(0.75, 0.2).unwrap());
        let ds = gen_synthetic(&p, 400, layout(500), 2).unwrap();
        let all: Vec<f64> = ds.series().iter().flat_map(|s| s.values().iter().copied()).collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 3.0).abs() < 4.0 * (15.0f64 / n).sqrt(), "mean {mean}");
        assert!((var - 15.0).abs() < 0.5, "var {var}");
    }

    #[test]
    fn hurdle_corpus_average_adi_near_six() {
        // With π = 1/6 the expected ADI of a long series is close to 1/π.
        let p = DistParams::Hsnb(HsnbParams::new(1.0 / 6.0, 1.0, 0.5).unwrap());
        let lay = SeriesLayout::new(Freq::Monthly, 6, 12, 600).unwrap();
        let ds = gen_synthetic(&p, 10_000, lay, 4).unwrap();
        let split = SplitView::new(600, 6);
        let adis: Vec<f64> = ds
            .series()
            .iter()
            .map(|s| compute_stats(s, &split).adi)
            .filter(|a| a.is_finite())
            .collect();
        let n = adis.len() as f64;
        let mean = adis.iter().sum::<f64>() / n;
        let sd = (adis.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        // E[T/N] for N ~ Binomial(594, 1/6) exceeds 6 by the delta-method
        // term 6 · (1 − π) / (T π) ≈ 0.05.
        let expected = 6.0 * (1.0 + (5.0 / 6.0) / (594.0 / 6.0));
        assert!((mean - expected).abs() < 4.0 * sd / n.sqrt(), "mean adi {mean}, expected {expected}");
    }

    #[test]
    fn seasonal_corpus_has_seasonal_occurrence() {
        let spec = SeasonalSpec::default();
        let ds = gen_seasonal(&spec, 200, layout(120), 3).unwrap();
        assert!(ds.series().iter().all(TimeSeries::is_integer));
        // Occurrence one half-period apart should be negatively correlated.
        let (mut same, mut opposite, mut count) = (0.0, 0.0, 0.0);
        for s in ds.series() {
            let o: Vec<f64> = s.values().iter().map(|&v| (v > 0.0) as u8 as f64).collect();
            for t in 12..o.len() {
                same += o[t] * o[t - 12];
                opposite += o[t] * o[t - 6];
                count += 1.0;
            }
        }
        assert!(same / count > opposite / count + 0.1);
    }
}
