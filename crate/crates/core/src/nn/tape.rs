//! Reverse-mode gradient tape over vector-valued nodes.
//!
//! Parameters are not nodes: ops that read parameters record the offsets
//! into the [`ParamTensor`](super::ParamTensor) they used, and the backward
//! pass accumulates directly into a flat gradient of the same length.

use crate::dist::{self, HeadKind, LOG_LIKELIHOOD_FLOOR};
use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    Input,
    /// `W x + b` with `W` row-major `rows × cols`.
    Linear {
        input: NodeId,
        weight: usize,
        bias: usize,
        rows: usize,
        cols: usize,
    },
    Relu {
        input: NodeId,
    },
    /// Centred moving average with replicated boundary values.
    MovingAverage {
        input: NodeId,
        kernel: usize,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Sub {
        a: NodeId,
        b: NodeId,
    },
    /// Summed head negative log-likelihood; the local gradient is computed
    /// in the forward pass.
    HeadNll {
        input: NodeId,
        grad: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].value
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn input(&mut self, x: Vec<f64>) -> NodeId {
        self.push(x, Op::Input)
    }

    pub fn linear(&mut self, params: &[f64], weight: usize, bias: usize, rows: usize, input: NodeId) -> Result<NodeId> {
        let x = &self.nodes[input].value;
        let cols = x.len();
        if weight + rows * cols > params.len() || bias + rows > params.len() {
            return Err(Error::Shape(format!(
                "linear map {rows}x{cols} does not fit the parameter vector of length {}",
                params.len()
            )));
        }
        let w = &params[weight..weight + rows * cols];
        let b = &params[bias..bias + rows];
        let out = (0..rows)
            .map(|i| {
                let row = &w[i * cols..(i + 1) * cols];
                row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b[i]
            })
            .collect();
        Ok(self.push(
            out,
            Op::Linear {
                input,
                weight,
                bias,
                rows,
                cols,
            },
        ))
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let out = self.nodes[input].value.iter().map(|&v| v.max(0.0)).collect();
        self.push(out, Op::Relu { input })
    }

    pub fn moving_average(&mut self, input: NodeId, kernel: usize) -> Result<NodeId> {
        let out = moving_average(&self.nodes[input].value, kernel)?;
        Ok(self.push(out, Op::MovingAverage { input, kernel }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.elementwise(a, b, |x, y| x + y)?;
        Ok(self.push(out, Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.elementwise(a, b, |x, y| x - y)?;
        Ok(self.push(out, Op::Sub { a, b }))
    }

    fn elementwise(&self, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        if va.len() != vb.len() {
            return Err(Error::Shape(format!("operands of length {} and {}", va.len(), vb.len())));
        }
        Ok(va.iter().zip(vb).map(|(&x, &y)| f(x, y)).collect())
    }

    /// `−Σ_t log p(y_t | θ_t)` where `θ_t` is the head applied to the `t`-th
    /// block of `n_params` values of `input`, for a series with scale `scale`.
    /// Log-likelihood terms below [`LOG_LIKELIHOOD_FLOOR`] are clamped (with
    /// zero gradient).
    pub fn head_nll(&mut self, input: NodeId, head: HeadKind, targets: &[f64], scale: f64) -> Result<NodeId> {
        let z = &self.nodes[input].value;
        let p = head.n_params();
        if z.len() != targets.len() * p {
            return Err(Error::Shape(format!(
                "{} head values for {} targets of a {head} head",
                z.len(),
                targets.len()
            )));
        }
        let mut grad = vec![0.0; z.len()];
        let mut total = 0.0;
        for (t, &y) in targets.iter().enumerate() {
            let block = &z[t * p..(t + 1) * p];
            let (nll, g) = dist::scaled_nll_grad(head, block, y, scale)?;
            if nll > -LOG_LIKELIHOOD_FLOOR {
                total += -LOG_LIKELIHOOD_FLOOR;
            } else {
                total += nll;
                grad[t * p..(t + 1) * p].copy_from_slice(&g);
            }
        }
        Ok(self.push(vec![total], Op::HeadNll { input, grad }))
    }

    /// Back-propagates from the scalar node `root`, adding parameter
    /// gradients into `param_grad`. Each recorded op is visited once, in
    /// reverse order of recording.
    pub fn backward(&self, root: NodeId, params: &[f64], param_grad: &mut [f64]) {
        self.backward_with_seed(root, &[1.0], params, param_grad);
    }

    /// As [`backward`](Self::backward) with an explicit upstream gradient for
    /// `root` (which need not be scalar).
    pub fn backward_with_seed(&self, root: NodeId, seed: &[f64], params: &[f64], param_grad: &mut [f64]) {
        assert_eq!(seed.len(), self.nodes[root].value.len(), "seed gradient shape");
        let mut grads: Vec<Vec<f64>> = self.nodes.iter().map(|n| vec![0.0; n.value.len()]).collect();
        grads[root].copy_from_slice(seed);
        for id in (0..=root).rev() {
            let g = std::mem::take(&mut grads[id]);
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            match &self.nodes[id].op {
                Op::Input => {}
                &Op::Linear {
                    input,
                    weight,
                    bias,
                    rows,
                    cols,
                } => {
                    let x = &self.nodes[input].value;
                    let w = &params[weight..weight + rows * cols];
                    let dx = &mut grads[input];
                    for i in 0..rows {
                        let gi = g[i];
                        if gi == 0.0 {
                            continue;
                        }
                        param_grad[bias + i] += gi;
                        let row_grad = &mut param_grad[weight + i * cols..weight + (i + 1) * cols];
                        for (rg, &xj) in row_grad.iter_mut().zip(x) {
                            *rg += gi * xj;
                        }
                        for (dxj, &wij) in dx.iter_mut().zip(&w[i * cols..(i + 1) * cols]) {
                            *dxj += gi * wij;
                        }
                    }
                }
                &Op::Relu { input } => {
                    let x = &self.nodes[input].value;
                    for ((d, &gi), &xi) in grads[input].iter_mut().zip(&g).zip(x) {
                        if xi > 0.0 {
                            *d += gi;
                        }
                    }
                }
                &Op::MovingAverage { input, kernel } => {
                    let n = g.len() as isize;
                    let half = (kernel / 2) as isize;
                    let k = kernel as f64;
                    let dx = &mut grads[input];
                    for t in 0..n {
                        let share = g[t as usize] / k;
                        for j in -half..=half {
                            dx[(t + j).clamp(0, n - 1) as usize] += share;
                        }
                    }
                }
                &Op::Add { a, b } => {
                    grads[a].iter_mut().zip(&g).for_each(|(d, gi)| *d += gi);
                    grads[b].iter_mut().zip(&g).for_each(|(d, gi)| *d += gi);
                }
                &Op::Sub { a, b } => {
                    grads[a].iter_mut().zip(&g).for_each(|(d, gi)| *d += gi);
                    grads[b].iter_mut().zip(&g).for_each(|(d, gi)| *d -= gi);
                }
                Op::HeadNll { input, grad } => {
                    let upstream = g[0];
                    grads[*input].iter_mut().zip(grad).for_each(|(d, gi)| *d += upstream * gi);
                }
            }
        }
    }

    /// Smallest distance of any recorded ReLU input from the kink at zero.
    /// Finite-difference checks use it to skip non-differentiable points.
    pub fn relu_margin(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu { input } => self.nodes[input].value.iter().map(|v| v.abs()).reduce(f64::min),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Centred moving average of odd width `kernel` with the first and last
/// values replicated beyond the boundaries, so the output keeps the input
/// length.
pub fn moving_average(x: &[f64], kernel: usize) -> Result<Vec<f64>> {
    if kernel % 2 == 0 {
        return Err(Error::Config(format!("moving-average kernel must be odd, got {kernel}")));
    }
    if x.is_empty() || kernel > 2 * x.len() - 1 {
        return Err(Error::Config(format!(
            "moving-average kernel {kernel} exceeds 2c−1 for context {}",
            x.len()
        )));
    }
    let n = x.len() as isize;
    let half = (kernel / 2) as isize;
    Ok((0..n)
        .map(|t| (-half..=half).map(|j| x[(t + j).clamp(0, n - 1) as usize]).sum::<f64>() / kernel as f64)
        .collect())
}

/// Trend and remainder of `x`, with `remainder = x − trend` elementwise.
pub fn moving_average_decompose(x: &[f64], kernel: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let trend = moving_average(x, kernel)?;
    let remainder = x.iter().zip(&trend).map(|(a, b)| a - b).collect();
    Ok((trend, remainder))
}
