//! Generates the synthetic catalog, fits three residual codebooks and shows how the
//! quantization error shrinks with depth.
//!
//! cargo run --release --example quantize_catalog

use sid_coord::data::{generate, GeneratorConfig};
use sid_coord::experiment::{quantize_catalog, QuantizeConfig};

fn main() -> sid_coord::Result<()> {
    let mut data = generate(&GeneratorConfig::default())?;
    let cfg = QuantizeConfig::default();
    let stack = quantize_catalog(&mut data.catalog, &cfg)?;

    println!("{} items, K = {}, d = {}", data.catalog.len(), stack.codebook_size(), stack.dim());
    for (level, mse) in stack.fit_stats().iter().enumerate() {
        println!("level {} residual MSE {mse:.4}", level + 1);
    }

    for item in data.catalog.iter().take(5) {
        let ids = stack.encode(&item.content_embedding)?;
        let approx = stack.reconstruct(&ids)?;
        let err: f64 = item.content_embedding.iter().zip(&approx).map(|(a, b)| (a - b) * (a - b)).sum();
        let sids = item.sids.as_ref().expect("three levels assign SIDs");
        println!("item {:>4}  codes {ids:?}  sids {:?}  sq err {err:.4}", item.item_key.0, sids.values());
    }
    Ok(())
}
