use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named region of a [`ParamTensor`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSlot {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl LayerSlot {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Flat vector of learnable parameters with a registry of named slices.
/// Slots are laid out back to back in registration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamTensor {
    values: Vec<f64>,
    slots: Vec<LayerSlot>,
}

impl ParamTensor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a zero-initialised slot and returns its offset.
    pub fn register(&mut self, name: impl Into<String>, shape: &[usize]) -> usize {
        let offset = self.values.len();
        let slot = LayerSlot {
            name: name.into(),
            offset,
            shape: shape.to_vec(),
        };
        self.values.resize(offset + slot.len(), 0.0);
        self.slots.push(slot);
        offset
    }

    /// Rebuilds a tensor from its slot registry and values.
    pub fn from_parts(slots: Vec<LayerSlot>, values: Vec<f64>) -> Result<Self> {
        let mut expected = 0;
        for slot in &slots {
            if slot.offset != expected {
                return Err(Error::Shape(format!("slot `{}` does not follow its predecessor", slot.name)));
            }
            expected += slot.len();
        }
        if expected != values.len() {
            return Err(Error::Shape(format!(
                "slots cover {expected} values but {} were given",
                values.len()
            )));
        }
        Ok(Self { values, slots })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn slots(&self) -> &[LayerSlot] {
        &self.slots
    }

    pub fn slot(&self, name: &str) -> Option<&LayerSlot> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn slice(&self, name: &str) -> Option<&[f64]> {
        self.slot(name).map(|s| &self.values[s.range()])
    }

    pub fn slice_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.slot(name)?.range();
        Some(&mut self.values[range])
    }
}
