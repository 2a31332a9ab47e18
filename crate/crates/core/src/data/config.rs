use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Freq, SeriesLayout};

/// Run configuration persisted as JSON next to experiment outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub freq: Freq,
    pub horizon: usize,
    pub context: usize,
    /// Defaults to series length minus horizon when absent.
    #[serde(default)]
    pub train_end: Option<usize>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_batch_size() -> usize {
    64
}

fn default_seed() -> u64 {
    1
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Layout for series of length `series_len`.
    pub fn layout(&self, series_len: usize) -> Result<SeriesLayout> {
        let train_end = match self.train_end {
            Some(t) => t,
            None => series_len.checked_sub(self.horizon).ok_or_else(|| {
                Error::Config(format!("series of length {series_len} shorter than horizon {}", self.horizon))
            })?,
        };
        SeriesLayout::new(self.freq, self.horizon, self.context, train_end)
    }
}
