use crate::data::Dataset;
use crate::dist::{self, DistParams};
use crate::error::{Error, Result};
use crate::nn::{self, clamp_kernel, Architecture, Checkpoint, EpochRecord, Network, TrainConfig, DEFAULT_KERNEL, FNN_HIDDEN};
use crate::seed::{self, streams};

use super::{ModelKind, ModelSpec, QuantileForecast, StepForecast, QUANTILE_LEVELS};

fn architecture(spec: &ModelSpec) -> Result<Architecture> {
    match spec.kind {
        ModelKind::Fnn => Ok(Architecture::Fnn {
            hidden: FNN_HIDDEN.to_vec(),
        }),
        ModelKind::Dlinear => Ok(Architecture::Dlinear {
            kernel: spec.kernel.unwrap_or_else(|| clamp_kernel(DEFAULT_KERNEL, spec.context)),
        }),
        kind => Err(Error::Config(format!("`{kind}` is not a global model"))),
    }
}

/// Network for a global spec with initialized parameters drawn from the
/// initialization stream of `rng_seed`.
pub fn build_network(spec: &ModelSpec, rng_seed: u64) -> Result<Network> {
    spec.validate()?;
    let arch = architecture(spec)?;
    let head = spec.head.expect("validated global spec has a head");
    let mut rng = seed::stream(rng_seed, streams::INIT);
    Network::initialized(arch, head, spec.context, spec.horizon, &mut rng)
}

/// Feed-forward network: five ReLU layers of 32 units, then a linear map to
/// all `h` heads at once.
pub fn build_fnn(spec: &ModelSpec, rng_seed: u64) -> Result<Network> {
    if spec.kind != ModelKind::Fnn {
        return Err(Error::Config(format!("build_fnn called with `{}`", spec.kind)));
    }
    build_network(spec, rng_seed)
}

/// D-Linear: moving-average decomposition of the context, one linear map
/// each for trend and remainder, outputs summed.
pub fn build_dlinear(spec: &ModelSpec, rng_seed: u64) -> Result<Network> {
    if spec.kind != ModelKind::Dlinear {
        return Err(Error::Config(format!("build_dlinear called with `{}`", spec.kind)));
    }
    build_network(spec, rng_seed)
}

/// Builds and trains a global model, returning the best checkpoint and the
/// per-epoch log.
pub fn train_global(spec: &ModelSpec, ds: &Dataset, cfg: &TrainConfig) -> Result<(Checkpoint, Vec<EpochRecord>)> {
    if spec.context != ds.context() || spec.horizon != ds.horizon() {
        return Err(Error::Config(format!(
            "model (context {}, horizon {}) does not match dataset (context {}, horizon {})",
            spec.context,
            spec.horizon,
            ds.context(),
            ds.horizon()
        )));
    }
    let net = build_network(spec, cfg.seed)?;
    let outcome = nn::train(net, ds, cfg)?;
    Ok((
        Checkpoint {
            network: outcome.network,
            best_epoch: outcome.best_epoch,
            seed: cfg.seed,
        },
        outcome.log,
    ))
}

/// Per series, the predictive distribution of every horizon step on the
/// original scale, together with the padding flag of its context.
pub fn predictive_distributions(ck: &Checkpoint, ds: &Dataset) -> Result<Vec<(Vec<DistParams>, bool)>> {
    let net = &ck.network;
    if net.horizon() != ds.horizon() {
        return Err(Error::Config(format!(
            "checkpoint horizon {} does not match dataset horizon {}",
            net.horizon(),
            ds.horizon()
        )));
    }
    let end = ds.train_end();
    ds.series()
        .iter()
        .zip(ds.stats())
        .map(|(ts, stats)| {
            let (context, padded) = nn::context_window(ts.values(), end, net.context());
            let x: Vec<f64> = context.iter().map(|v| v / stats.scale).collect();
            let dists = net
                .predict_raw(&x)?
                .iter()
                .map(|z| dist::link(net.head(), z)?.scale(stats.scale))
                .collect::<Result<Vec<_>>>()?;
            Ok((dists, padded))
        })
        .collect()
}

/// Analytic quantiles and means of the predictive distributions of every
/// series, using the last `c` in-sample values as context.
pub fn global_forecast(ck: &Checkpoint, ds: &Dataset) -> Result<Vec<QuantileForecast>> {
    predictive_distributions(ck, ds)?
        .into_iter()
        .zip(ds.series())
        .map(|((dists, padded), ts)| {
            let steps = dists
                .iter()
                .map(|d| {
                    let mut q = [0.0; 5];
                    for (k, &level) in QUANTILE_LEVELS.iter().enumerate() {
                        q[k] = d.quantile(level)?;
                    }
                    Ok(StepForecast::new(d.mean(), q))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(QuantileForecast {
                series_id: ts.id().to_string(),
                steps,
                padded,
            })
        })
        .collect()
}
