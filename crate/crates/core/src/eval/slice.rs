//! The long-tail slice: examples whose target has few exposures.

use crate::data::{Example, Item, ItemStats};

/// Exposure count at `percentile` (nearest rank) of the catalog's per-item exposure
/// distribution. `percentile = 0` gives 0, so only never-exposed items qualify.
pub fn tail_threshold(catalog: &[Item], stats: &ItemStats, percentile: f64) -> u64 {
    let mut exposures: Vec<u64> = catalog.iter().map(|it| stats.exposures(it.item_key)).collect();
    if exposures.is_empty() || percentile <= 0.0 {
        return 0;
    }
    exposures.sort_unstable();
    let rank = ((percentile.min(100.0) / 100.0) * exposures.len() as f64).ceil() as usize;
    exposures[rank.clamp(1, exposures.len()) - 1]
}

/// Indices of the examples whose target's exposure count is at most the threshold.
/// Targets missing from the statistics count as zero exposure. `percentile >= 100`
/// keeps everything.
pub fn slice_tail(examples: &[Example], catalog: &[Item], stats: &ItemStats, percentile: f64) -> Vec<usize> {
    if percentile >= 100.0 {
        return (0..examples.len()).collect();
    }
    let threshold = tail_threshold(catalog, stats, percentile);
    (0..examples.len()).filter(|&i| stats.exposures(examples[i].target) <= threshold).collect()
}
