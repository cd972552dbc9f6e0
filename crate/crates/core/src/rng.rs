//! Seed fan-out.
//!
//! Every random decision in the crate draws from a [`ChaCha8Rng`] whose seed is derived
//! from a single root seed and a stream label. Derivation is FNV-1a over the label bytes
//! folded with the root seed and an optional index, then passed through the SplitMix64
//! finalizer. Streams used by the crate:
//!
//! | label           | index      | consumer                          |
//! |-----------------|------------|-----------------------------------|
//! | `data`          | sub-stream | synthetic catalog / log generator |
//! | `quantizer`     | level      | k-means++ seeding per level       |
//! | `model-init`    | 0          | parameter initialization          |
//! | `shuffle`       | epoch      | per-epoch example order           |
//! | `grad-check`    | 0          | example selection for grad-check  |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of stream `label`/`index` from `root`.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    let h = fnv1a(label.as_bytes());
    splitmix64(splitmix64(root ^ h).wrapping_add(index))
}

/// Rng for stream `label`/`index` under `root`.
pub fn stream(root: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label, index))
}
