//! Small hand-built catalog and model shared by unit tests.

use super::network::FeatureIndex;
use super::params::{AblationFlags, GateNormalizer, ModelConfig, ModelParams};
use crate::data::{Example, Item, ItemCounts, ItemKey, ItemStats, UserKey};
use crate::embedding::SidVocab;
use crate::sid::compose;

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        embed_dim: 4,
        user_dim: 3,
        fusion_hidden: 3,
        gate_hidden: 4,
        autodis_buckets: 4,
        autodis_dim: 2,
        autodis_temperature: 1.0,
        backbone_hidden: 5,
        hid_buckets: 7,
        num_users: 3,
    }
}

pub fn fixture(flags: AblationFlags, zeros: bool) -> (ModelParams, FeatureIndex, Example) {
    let catalog: Vec<Item> = (0..6)
        .map(|i| Item {
            item_key: ItemKey(i),
            content_embedding: vec![0.0],
            sids: Some(compose([i % 3, i % 2, i], 100).unwrap()),
            latent_cluster: 0,
            idiosyncratic_bias: 0.0,
        })
        .collect();
    let mut stats = ItemStats::default();
    for i in 0..6 {
        stats.counts.insert(ItemKey(i), ItemCounts { exposures: 10 * i, clicks: 3 * i, likes: i, shares: 0, comments: 1 });
    }
    let vocab = SidVocab::build(catalog.iter().filter_map(|i| i.sids.as_ref())).unwrap();
    let norm = GateNormalizer::fit_catalog(&catalog, &stats);
    let params = if zeros {
        ModelParams::zeros(tiny_config(), flags, vocab, norm).unwrap()
    } else {
        ModelParams::init(tiny_config(), flags, vocab, norm, 3).unwrap()
    };
    let index = FeatureIndex::build(&catalog, &stats, &params);
    let ex = Example {
        user_key: UserKey(1),
        target: ItemKey(2),
        history: vec![ItemKey(0), ItemKey(4), ItemKey(99)],
        label: 1,
        timestamp: 0,
        engagement: Default::default(),
    };
    (params, index, ex)
}


/// `n` examples over the fixture catalog whose label is 1 exactly for even targets.
pub fn separable(n: usize, seed: u64) -> (ModelParams, Vec<super::network::ResolvedExample>) {
    use rand::{Rng, SeedableRng};
    let (params, index, _) = fixture(AblationFlags::default(), false);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..n)
        .map(|t| {
            let target = rng.random_range(0..6u64);
            let ex = Example {
                user_key: UserKey(rng.random_range(0..3)),
                target: ItemKey(target),
                history: (0..3).map(|_| ItemKey(rng.random_range(0..6))).collect(),
                label: u8::from(target % 2 == 0),
                timestamp: t as u64,
                engagement: Default::default(),
            };
            index.resolve(&ex, &params)
        })
        .collect();
    (params, examples)
}
