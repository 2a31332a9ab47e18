//! Forecasters behind a common quantile-forecast output.
//!
//! Local models ([`isq_forecast`], [`iets_lite_fit`]) are fit per series on
//! the in-sample range `1..=T`. Global models ([`build_fnn`],
//! [`build_dlinear`]) are trained once on all series and forecast from the
//! last `c` in-sample values of each series.

mod forecast;
mod global;
mod iets;
mod isq;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::HeadKind;
use crate::error::{Error, Result};

pub use forecast::{read_forecasts, write_forecasts, QuantileForecast, StepForecast, QUANTILE_LEVELS};
pub use global::{build_dlinear, build_fnn, build_network, global_forecast, predictive_distributions, train_global};
pub use iets::{iets_lite_fit, iets_lite_forecast, iets_lite_sample_paths, CrostonState, SMOOTHING_GRID};
pub use isq::{empirical_quantile, isq_forecast};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Isq,
    IetsLite,
    Fnn,
    Dlinear,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Isq, ModelKind::IetsLite, ModelKind::Fnn, ModelKind::Dlinear];

    pub fn is_global(self) -> bool {
        matches!(self, ModelKind::Fnn | ModelKind::Dlinear)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Isq => "isq",
            ModelKind::IetsLite => "iets",
            ModelKind::Fnn => "fnn",
            ModelKind::Dlinear => "dlinear",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "isq" => Ok(ModelKind::Isq),
            "iets" | "iets_lite" | "iets-lite" => Ok(ModelKind::IetsLite),
            "fnn" => Ok(ModelKind::Fnn),
            "dlinear" | "d-linear" => Ok(ModelKind::Dlinear),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

/// What to fit: the model kind, its distribution head (global models only)
/// and the window geometry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub head: Option<HeadKind>,
    pub context: usize,
    pub horizon: usize,
    /// D-Linear moving-average kernel; clamped to the context when unset.
    #[serde(default)]
    pub kernel: Option<usize>,
}

impl ModelSpec {
    pub fn local(kind: ModelKind, context: usize, horizon: usize) -> Self {
        Self {
            kind,
            head: None,
            context,
            horizon,
            kernel: None,
        }
    }

    pub fn global(kind: ModelKind, head: HeadKind, context: usize, horizon: usize) -> Self {
        Self {
            kind,
            head: Some(head),
            context,
            horizon,
            kernel: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind.is_global(), self.head) {
            (false, Some(h)) => Err(Error::Config(format!(
                "local model `{}` takes no distribution head (got `{h}`)",
                self.kind
            ))),
            (true, None) => Err(Error::Config(format!("global model `{}` needs a distribution head", self.kind))),
            _ if self.context == 0 || self.horizon == 0 => {
                Err(Error::Config("context and horizon must be positive".into()))
            }
            _ if self.kernel.is_some() && self.kind != ModelKind::Dlinear => {
                Err(Error::Config(format!("kernel applies to dlinear only, not `{}`", self.kind)))
            }
            _ => match self.kernel {
                Some(k) if k % 2 == 0 || k > 2 * self.context - 1 => Err(Error::Config(format!(
                    "kernel {k} must be odd and at most 2c−1 = {}",
                    2 * self.context - 1
                ))),
                _ => Ok(()),
            },
        }
    }
}
