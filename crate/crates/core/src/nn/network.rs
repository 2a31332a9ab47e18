use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::HeadKind;
use crate::error::{Error, Result};

use super::{NodeId, ParamTensor, Tape};

/// Hidden widths of the feed-forward network.
pub const FNN_HIDDEN: [usize; 5] = [32; 5];

/// Kernel used when none is configured, before clamping to the context.
pub const DEFAULT_KERNEL: usize = 25;

/// Largest odd kernel not above `kernel` that the moving average accepts for
/// `context` values.
pub fn clamp_kernel(kernel: usize, context: usize) -> usize {
    let k = kernel.min(2 * context - 1).max(1);
    if k % 2 == 0 {
        k - 1
    } else {
        k
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Architecture {
    Fnn { hidden: Vec<usize> },
    Dlinear { kernel: usize },
}

/// A multi-horizon network mapping `context` scaled observations to
/// `horizon` blocks of raw head values, laid out step by step.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: Architecture,
    head: HeadKind,
    context: usize,
    horizon: usize,
    params: ParamTensor,
}

impl Network {
    /// Registers the parameter slots of `arch` with all values zero.
    pub fn zeroed(arch: Architecture, head: HeadKind, context: usize, horizon: usize) -> Result<Self> {
        if context == 0 || horizon == 0 {
            return Err(Error::Shape(format!("context {context} and horizon {horizon} must be positive")));
        }
        let out = horizon * head.n_params();
        let mut params = ParamTensor::new();
        match &arch {
            Architecture::Fnn { hidden } => {
                let mut fan_in = context;
                for (i, &width) in hidden.iter().enumerate() {
                    if width == 0 {
                        return Err(Error::Shape("hidden layer of width 0".into()));
                    }
                    params.register(format!("hidden{i}.weight"), &[width, fan_in]);
                    params.register(format!("hidden{i}.bias"), &[width]);
                    fan_in = width;
                }
                params.register("out.weight", &[out, fan_in]);
                params.register("out.bias", &[out]);
            }
            Architecture::Dlinear { kernel } => {
                if kernel % 2 == 0 || *kernel > 2 * context - 1 {
                    return Err(Error::Config(format!(
                        "kernel {kernel} must be odd and at most 2c−1 = {}",
                        2 * context - 1
                    )));
                }
                params.register("trend.weight", &[out, context]);
                params.register("trend.bias", &[out]);
                params.register("remainder.weight", &[out, context]);
                params.register("remainder.bias", &[out]);
            }
        }
        Ok(Self {
            arch,
            head,
            context,
            horizon,
            params,
        })
    }

    /// Weights uniform in `±1/√fan_in`, biases zero except the output bias,
    /// which starts every step at a unit-mean distribution.
    pub fn initialized<R: Rng + ?Sized>(
        arch: Architecture,
        head: HeadKind,
        context: usize,
        horizon: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeroed(arch, head, context, horizon)?;
        let slots = net.params.slots().to_vec();
        let values = net.params.values_mut();
        for slot in &slots {
            if slot.shape.len() == 2 {
                let bound = 1.0 / (slot.shape[1] as f64).sqrt();
                for v in &mut values[slot.range()] {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
        let bias_slot = match net.arch {
            Architecture::Fnn { .. } => "out.bias",
            Architecture::Dlinear { .. } => "trend.bias",
        };
        let unit = head.unit_mean_bias();
        let bias = net.params.slice_mut(bias_slot).expect("output bias slot");
        for (i, b) in bias.iter_mut().enumerate() {
            *b = unit[i % unit.len()];
        }
        Ok(net)
    }

    pub fn from_parts(
        arch: Architecture,
        head: HeadKind,
        context: usize,
        horizon: usize,
        params: ParamTensor,
    ) -> Result<Self> {
        let reference = Self::zeroed(arch, head, context, horizon)?;
        if reference.params.slots() != params.slots() {
            return Err(Error::Shape("parameter slots do not match the architecture".into()));
        }
        Ok(Self { params, ..reference })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn head(&self) -> HeadKind {
        self.head
    }

    pub fn context(&self) -> usize {
        self.context
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn params(&self) -> &ParamTensor {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamTensor {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn offset(&self, name: &str) -> usize {
        self.params.slot(name).expect("registered slot").offset
    }

    /// Records the forward pass for one context window and returns the node
    /// holding `horizon × n_params` raw head values.
    pub fn forward(&self, tape: &mut Tape, x: &[f64]) -> Result<NodeId> {
        self.forward_with(tape, self.params.values(), x)
    }

    /// As [`forward`](Self::forward) with externally supplied parameter
    /// values (same layout).
    pub fn forward_with(&self, tape: &mut Tape, params: &[f64], x: &[f64]) -> Result<NodeId> {
        if x.len() != self.context {
            return Err(Error::Shape(format!(
                "context of length {} fed to a network expecting {}",
                x.len(),
                self.context
            )));
        }
        let out = self.horizon * self.head.n_params();
        let input = tape.input(x.to_vec());
        match &self.arch {
            Architecture::Fnn { hidden } => {
                let mut h = input;
                for (i, &width) in hidden.iter().enumerate() {
                    let w = self.offset(&format!("hidden{i}.weight"));
                    let b = self.offset(&format!("hidden{i}.bias"));
                    let z = tape.linear(params, w, b, width, h)?;
                    h = tape.relu(z);
                }
                tape.linear(params, self.offset("out.weight"), self.offset("out.bias"), out, h)
            }
            Architecture::Dlinear { kernel } => {
                let trend = tape.moving_average(input, *kernel)?;
                let remainder = tape.sub(input, trend)?;
                let a = tape.linear(params, self.offset("trend.weight"), self.offset("trend.bias"), out, trend)?;
                let b = tape.linear(
                    params,
                    self.offset("remainder.weight"),
                    self.offset("remainder.bias"),
                    out,
                    remainder,
                )?;
                tape.add(a, b)
            }
        }
    }

    /// Raw head values for one context window, split per horizon step.
    pub fn predict_raw(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let node = self.forward(&mut tape, x)?;
        Ok(tape
            .value(node)
            .chunks(self.head.n_params())
            .map(<[f64]>::to_vec)
            .collect())
    }

    /// Summed NLL of `targets` (length `horizon`) given context `x`, both on
    /// the original scale of a series with scale factor `scale`. The context
    /// is divided by `scale` before the forward pass. Returns the loss and
    /// adds its gradient into `grad`.
    pub fn nll_and_grad(&self, x: &[f64], targets: &[f64], scale: f64, grad: &mut [f64]) -> Result<f64> {
        let mut tape = Tape::new();
        let root = self.record_nll(&mut tape, self.params.values(), x, targets, scale)?;
        tape.backward(root, self.params.values(), grad);
        Ok(tape.value(root)[0])
    }

    pub fn nll(&self, x: &[f64], targets: &[f64], scale: f64) -> Result<f64> {
        self.nll_with(self.params.values(), x, targets, scale)
    }

    pub fn nll_with(&self, params: &[f64], x: &[f64], targets: &[f64], scale: f64) -> Result<f64> {
        let mut tape = Tape::new();
        let root = self.record_nll(&mut tape, params, x, targets, scale)?;
        Ok(tape.value(root)[0])
    }

    fn record_nll(&self, tape: &mut Tape, params: &[f64], x: &[f64], targets: &[f64], scale: f64) -> Result<NodeId> {
        if targets.len() != self.horizon {
            return Err(Error::Shape(format!(
                "{} targets for horizon {}",
                targets.len(),
                self.horizon
            )));
        }
        let scaled: Vec<f64> = x.iter().map(|v| v / scale).collect();
        let heads = self.forward_with(tape, params, &scaled)?;
        tape.head_nll(heads, self.head, targets, scale)
    }
}
