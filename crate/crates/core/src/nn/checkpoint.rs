//! Checkpoint files: one line of JSON metadata followed by the parameter
//! values as little-endian IEEE-754 doubles.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dist::HeadKind;
use crate::error::{Error, Result};

use super::{Architecture, LayerSlot, Network, ParamTensor};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Envelope {
    version: u32,
    model_kind: String,
    head_kind: HeadKind,
    context: usize,
    horizon: usize,
    architecture: Architecture,
    shapes: Vec<LayerSlot>,
    n_params: usize,
    best_epoch: usize,
    seed: u64,
}

/// A trained network together with the provenance needed to reuse it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub best_epoch: usize,
    pub seed: u64,
}

impl Checkpoint {
    pub fn model_kind(&self) -> &'static str {
        match self.network.arch() {
            Architecture::Fnn { .. } => "fnn",
            Architecture::Dlinear { .. } => "dlinear",
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let net = &self.network;
        let envelope = Envelope {
            version: CHECKPOINT_VERSION,
            model_kind: self.model_kind().into(),
            head_kind: net.head(),
            context: net.context(),
            horizon: net.horizon(),
            architecture: net.arch().clone(),
            shapes: net.params().slots().to_vec(),
            n_params: net.n_params(),
            best_epoch: self.best_epoch,
            seed: self.seed,
        };
        let io = |e| Error::io("<checkpoint>", e);
        serde_json::to_writer(&mut w, &envelope)?;
        w.write_all(b"\n").map_err(io)?;
        let mut blob = Vec::with_capacity(8 * net.n_params());
        for v in net.params().values() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&blob).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Self> {
        let io = |e| Error::io("<checkpoint>", e);
        let mut header = Vec::new();
        r.read_until(b'\n', &mut header).map_err(io)?;
        let envelope: Envelope = serde_json::from_slice(&header)?;
        if envelope.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                envelope.version
            )));
        }
        let mut blob = Vec::new();
        r.read_to_end(&mut blob).map_err(io)?;
        if blob.len() != 8 * envelope.n_params {
            return Err(Error::Shape(format!(
                "checkpoint declares {} parameters but holds {} bytes",
                envelope.n_params,
                blob.len()
            )));
        }
        let values = blob
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        let params = ParamTensor::from_parts(envelope.shapes, values)?;
        let network = Network::from_parts(
            envelope.architecture,
            envelope.head_kind,
            envelope.context,
            envelope.horizon,
            params,
        )?;
        Ok(Self {
            network,
            best_epoch: envelope.best_epoch,
            seed: envelope.seed,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }
}
