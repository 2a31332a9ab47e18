//! Shared fixtures for the benchmarks.

use sparsecast::data::{gen_seasonal, SeasonalSpec};
use sparsecast::{Dataset, Freq, SeriesLayout};

/// Seasonal intermittent corpus of `n` series with 114 in-sample values,
/// horizon 6 and context 12.
pub fn seasonal_corpus(n: usize) -> Dataset {
    let layout = SeriesLayout::new(Freq::Monthly, 6, 12, 114).expect("valid layout");
    gen_seasonal(&SeasonalSpec::default(), n, layout, 1).expect("valid spec")
}
