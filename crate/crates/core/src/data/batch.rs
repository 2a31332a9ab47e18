use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

use super::Dataset;

/// A batch of `(series index, window end)` pairs. The window end `w` is the
/// 1-based index of the last context value: the context is
/// `y[w−c+1 ..= w]` and the targets are `y[w+1 ..= w+h]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub pairs: Vec<(usize, usize)>,
}

/// Endless stream of uniformly drawn training pairs.
#[derive(Debug, Clone)]
pub struct BatchStream {
    rng: seed::Rng,
    n_series: usize,
    first_end: usize,
    last_end: usize,
    batch_size: usize,
}

impl BatchStream {
    /// Inclusive range of admissible window ends, `[c, T − h]`.
    pub fn window_ends(&self) -> (usize, usize) {
        (self.first_end, self.last_end)
    }
}

impl Iterator for BatchStream {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        let pairs = (0..self.batch_size)
            .map(|_| {
                let i = self.rng.random_range(0..self.n_series);
                let w = self.rng.random_range(self.first_end..=self.last_end);
                (i, w)
            })
            .collect();
        Some(Batch { pairs })
    }
}

/// Samples training windows with replacement so that both the context and
/// the target window lie inside the training range `1..=T−h`.
pub fn make_batches(ds: &Dataset, batch_size: usize, rng_seed: u64) -> Result<BatchStream> {
    let c = ds.context();
    let fit_end = ds.train_end() - ds.horizon();
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    if ds.is_empty() {
        return Err(Error::Config("dataset has no series".into()));
    }
    if fit_end < c + ds.horizon() {
        return Err(Error::Config(format!(
            "no training window: T−h = {fit_end} leaves no room for context {c} plus horizon {}",
            ds.horizon()
        )));
    }
    Ok(BatchStream {
        rng: seed::rng(rng_seed),
        n_series: ds.len(),
        first_end: c,
        last_end: fit_end - ds.horizon(),
        batch_size,
    })
}
