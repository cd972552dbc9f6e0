use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Example, ItemKey};

/// Raw engagement counters of one item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ItemCounts {
    pub exposures: u64,
    pub clicks: u64,
    pub likes: u64,
    pub shares: u64,
    pub comments: u64,
}

impl ItemCounts {
    pub fn as_array(&self) -> [u64; 5] {
        [self.exposures, self.clicks, self.likes, self.shares, self.comments]
    }
}

/// Per-item counters accumulated over a log window. Items never seen have all-zero
/// counts.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ItemStats {
    /// Trailing window in timestamp units; `None` covers the whole log.
    pub window: Option<u64>,
    pub counts: BTreeMap<ItemKey, ItemCounts>,
}

impl ItemStats {
    pub fn get(&self, key: ItemKey) -> ItemCounts {
        self.counts.get(&key).copied().unwrap_or_default()
    }

    pub fn exposures(&self, key: ItemKey) -> u64 {
        self.get(key).exposures
    }
}

/// Counts exposures, clicks, likes, shares and comments per target item over the
/// trailing `window` (examples with `timestamp > last - window`). The log must be
/// ordered by timestamp.
pub fn accumulate_stats(log: &[Example], window: Option<u64>) -> ItemStats {
    let mut stats = ItemStats { window, counts: BTreeMap::new() };
    let Some(last) = log.last().map(|e| e.timestamp) else {
        return stats;
    };
    for ex in log {
        if let Some(w) = window {
            if ex.timestamp.saturating_add(w) <= last {
                continue;
            }
        }
        let c = stats.counts.entry(ex.target).or_default();
        c.exposures += 1;
        if ex.is_positive() {
            c.clicks += 1;
            c.likes += u64::from(ex.engagement.like);
            c.shares += u64::from(ex.engagement.share);
            c.comments += u64::from(ex.engagement.comment);
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Engagement, UserKey};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ex(item: u64, label: u8, ts: u64) -> Example {
        Example {
            user_key: UserKey(0),
            target: ItemKey(item),
            history: vec![],
            label,
            timestamp: ts,
            engagement: Engagement { like: label == 1, share: false, comment: label == 1 },
        }
    }

    #[test]
    fn absent_item_is_zero() {
        let s = accumulate_stats(&[ex(1, 1, 0)], None);
        assert_eq!(s.get(ItemKey(2)), ItemCounts::default());
    }

    #[test]
    fn single_click() {
        let s = accumulate_stats(&[ex(1, 1, 0)], None);
        let c = s.get(ItemKey(1));
        assert_eq!((c.exposures, c.clicks), (1, 1));
    }

    #[test]
    fn window_keeps_trailing_events() {
        let log = [ex(1, 1, 0), ex(1, 0, 5), ex(1, 1, 9)];
        assert_eq!(accumulate_stats(&log, Some(5)).get(ItemKey(1)).exposures, 2);
        assert_eq!(accumulate_stats(&log, Some(1)).get(ItemKey(1)).exposures, 1);
        assert_eq!(accumulate_stats(&log, Some(100)).get(ItemKey(1)).exposures, 3);
    }

    #[test]
    fn matches_brute_force_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let log: Vec<Example> = (0..2000)
            .map(|t| {
                let mut e = ex(rng.random_range(0..50), rng.random_range(0..2), t);
                e.engagement.share = e.label == 1 && rng.random_bool(0.3);
                e
            })
            .collect();
        let window = 700;
        let s = accumulate_stats(&log, Some(window));
        for item in 0..50 {
            let mut want = ItemCounts::default();
            for e in &log {
                if e.target.0 == item && e.timestamp > 1999 - window {
                    want.exposures += 1;
                    if e.label == 1 {
                        want.clicks += 1;
                        want.likes += e.engagement.like as u64;
                        want.shares += e.engagement.share as u64;
                        want.comments += e.engagement.comment as u64;
                    }
                }
            }
            assert_eq!(s.get(ItemKey(item)), want);
        }
    }
}
