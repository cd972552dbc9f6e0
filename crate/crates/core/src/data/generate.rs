//! Synthetic catalog and interaction logs with planted head/tail structure.
//!
//! * Items belong to latent clusters; content embeddings are the cluster center plus
//!   isotropic Gaussian noise.
//! * Item popularity follows a Zipf law over a random permutation of the catalog.
//! * Each user favors two clusters. Histories are drawn from the user's interests,
//!   weighted by popularity within the cluster.
//! * Exposures come half from the user's interests and half from global popularity.
//! * `P(label = 1) = sigmoid(alpha * match(user, item) + beta * bias(item))` where
//!   `match` in `[-1, 1]` is the user's relative interest in the item's cluster and
//!   `bias ~ U(-1, 1)` is item-specific. Only the cluster part transfers across items
//!   sharing semantics; the bias can only be memorized, which in practice only works
//!   for items exposed often.
//! * Likes, shares and comments are Bernoulli-thinned clicks.
//! * The eval log is generated after the train log (all eval timestamps are later);
//!   stats are accumulated over the train log only.

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{accumulate_stats, DataError, Engagement, Example, Item, ItemKey, ItemStats, UserKey};
use crate::linalg::sigmoid;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub num_items: usize,
    pub num_users: usize,
    pub dim: usize,
    pub clusters: usize,
    pub zipf_exponent: f64,
    /// Maximum history length `T`.
    pub history_len: usize,
    pub train_size: usize,
    pub eval_size: usize,
    pub seed: u64,
    /// Weight of the semantic match in the label logit.
    pub alpha: f64,
    /// Weight of the item-specific bias in the label logit.
    pub beta: f64,
    /// Standard deviation of item embeddings around their cluster center.
    pub cluster_spread: f64,
    /// Share of exposures drawn from the user's interests rather than global popularity.
    pub interest_share: f64,
    /// Trailing window (timestamp units) for the item statistics; `None` = whole train log.
    pub stats_window: Option<u64>,
    pub like_rate: f64,
    pub share_rate: f64,
    pub comment_rate: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            num_items: 1000,
            num_users: 500,
            dim: 16,
            clusters: 16,
            zipf_exponent: 1.0,
            history_len: 10,
            train_size: 40_000,
            eval_size: 20_000,
            seed: 42,
            alpha: 2.0,
            beta: 2.0,
            cluster_spread: 0.35,
            interest_share: 0.5,
            stats_window: None,
            like_rate: 0.3,
            share_rate: 0.1,
            comment_rate: 0.15,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |field, reason: &str| Err(DataError::InvalidConfig { field, reason: reason.to_string() });
        if self.num_items == 0 {
            return bad("num_items", "must be at least 1");
        }
        if self.num_users == 0 {
            return bad("num_users", "must be at least 1");
        }
        if self.dim == 0 {
            return bad("dim", "must be at least 1");
        }
        if self.clusters == 0 || self.clusters > self.num_items {
            return bad("clusters", "must be in 1..=num_items");
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent >= 0.0) {
            return bad("zipf_exponent", "must be finite and non-negative");
        }
        if self.train_size == 0 {
            return bad("train_size", "must be at least 1");
        }
        if !self.alpha.is_finite() {
            return bad("alpha", "must be finite");
        }
        if !self.beta.is_finite() {
            return bad("beta", "must be finite");
        }
        if !(self.cluster_spread.is_finite() && self.cluster_spread >= 0.0) {
            return bad("cluster_spread", "must be finite and non-negative");
        }
        for (field, v) in [
            ("interest_share", self.interest_share),
            ("like_rate", self.like_rate),
            ("share_rate", self.share_rate),
            ("comment_rate", self.comment_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(field, "must be a probability in [0, 1]");
            }
        }
        Ok(())
    }
}

/// Everything the generator produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub catalog: Vec<Item>,
    pub train: Vec<Example>,
    pub eval: Vec<Example>,
    pub stats: ItemStats,
    /// Sampling weight of each catalog item (same order as `catalog`).
    pub popularity: Vec<f64>,
}

struct User {
    interest: Vec<f64>,
    interest_dist: WeightedIndex<f64>,
    history: Vec<ItemKey>,
}

impl User {
    fn relative_match(&self, cluster: usize) -> f64 {
        let max = self.interest.iter().copied().fold(0.0, f64::max);
        2.0 * self.interest[cluster] / max - 1.0
    }
}

struct Sampler {
    global: WeightedIndex<f64>,
    per_cluster: Vec<(Vec<usize>, WeightedIndex<f64>)>,
}

impl Sampler {
    fn in_cluster(&self, cluster: usize, rng: &mut ChaCha8Rng) -> usize {
        let (members, dist) = &self.per_cluster[cluster];
        members[dist.sample(rng)]
    }
}

pub fn generate(config: &GeneratorConfig) -> Result<SyntheticData, DataError> {
    config.validate()?;
    let n = config.num_items;
    let c = config.clusters;

    let mut rng_items = rng::stream(config.seed, "data", 0);
    let centers: Vec<Vec<f64>> = (0..c)
        .map(|_| (0..config.dim).map(|_| StandardNormal.sample(&mut rng_items)).collect())
        .collect();
    let clusters: Vec<usize> =
        (0..n).map(|i| if i < c { i } else { rng_items.random_range(0..c) }).collect();
    let catalog: Vec<Item> = (0..n)
        .map(|i| {
            let center = &centers[clusters[i]];
            let content_embedding = center
                .iter()
                .map(|x| {
                    let z: f64 = StandardNormal.sample(&mut rng_items);
                    x + config.cluster_spread * z
                })
                .collect();
            Item {
                item_key: ItemKey(i as u64),
                content_embedding,
                sids: None,
                latent_cluster: clusters[i],
                idiosyncratic_bias: rng_items.random_range(-1.0..1.0),
            }
        })
        .collect();

    let mut rng_pop = rng::stream(config.seed, "data", 1);
    let mut ranks: Vec<usize> = (0..n).collect();
    ranks.shuffle(&mut rng_pop);
    let popularity: Vec<f64> = ranks.iter().map(|&r| ((r + 1) as f64).powf(-config.zipf_exponent)).collect();
    let weighted = |w: Vec<f64>| WeightedIndex::new(w).expect("popularity weights are positive");
    let sampler = Sampler {
        global: weighted(popularity.clone()),
        per_cluster: (0..c)
            .map(|k| {
                let members: Vec<usize> = (0..n).filter(|&i| clusters[i] == k).collect();
                let w = members.iter().map(|&i| popularity[i]).collect();
                (members, weighted(w))
            })
            .collect(),
    };

    let mut rng_users = rng::stream(config.seed, "data", 2);
    let users: Vec<User> = (0..config.num_users)
        .map(|_| {
            let mut interest = vec![if c == 1 { 1.0 } else { 0.2 / c as f64 }; c];
            if c > 1 {
                let first = rng_users.random_range(0..c);
                let mut second = rng_users.random_range(0..c - 1);
                if second >= first {
                    second += 1;
                }
                interest[first] += 0.45;
                interest[second] += 0.35;
            }
            let interest_dist = WeightedIndex::new(&interest).expect("interest weights are positive");
            let history = (0..config.history_len)
                .map(|_| {
                    let k = interest_dist.sample(&mut rng_users);
                    catalog[sampler.in_cluster(k, &mut rng_users)].item_key
                })
                .collect();
            User { interest, interest_dist, history }
        })
        .collect();

    let draw_log = |stream: u64, size: usize, start: u64| -> Vec<Example> {
        let mut rng = rng::stream(config.seed, "data", stream);
        (0..size)
            .map(|t| {
                let u = rng.random_range(0..users.len());
                let user = &users[u];
                let item = if rng.random_bool(config.interest_share) {
                    let k = user.interest_dist.sample(&mut rng);
                    sampler.in_cluster(k, &mut rng)
                } else {
                    sampler.global.sample(&mut rng)
                };
                let it = &catalog[item];
                let logit = config.alpha * user.relative_match(it.latent_cluster) + config.beta * it.idiosyncratic_bias;
                let label = rng.random_bool(sigmoid(logit));
                let engagement = if label {
                    Engagement {
                        like: rng.random_bool(config.like_rate),
                        share: rng.random_bool(config.share_rate),
                        comment: rng.random_bool(config.comment_rate),
                    }
                } else {
                    Engagement::default()
                };
                Example {
                    user_key: UserKey(u as u64),
                    target: it.item_key,
                    history: user.history.clone(),
                    label: u8::from(label),
                    timestamp: start + t as u64,
                    engagement,
                }
            })
            .collect()
    };
    let train = draw_log(3, config.train_size, 0);
    let eval = draw_log(4, config.eval_size, config.train_size as u64);
    let stats = accumulate_stats(&train, config.stats_window);

    Ok(SyntheticData { catalog, train, eval, stats, popularity })
}
