//! Compares analytic gradients with central finite differences on a few training
//! examples, then shows that a deliberately distorted gradient is caught.
//!
//! cargo run --release --example grad_check

use rand::seq::index::sample;

use sid_coord::data::{generate, GeneratorConfig};
use sid_coord::experiment::{init_model, quantize_catalog, QuantizeConfig};
use sid_coord::model::{grad_check, jitter_dense, AblationFlags, FeatureIndex, GradCheckConfig, ModelConfig, ParamGroup};
use sid_coord::rng;

fn main() -> sid_coord::Result<()> {
    let gen = GeneratorConfig { num_items: 300, num_users: 60, train_size: 2000, eval_size: 100, ..Default::default() };
    let mut data = generate(&gen)?;
    quantize_catalog(&mut data.catalog, &QuantizeConfig { codebook_size: 16, ..Default::default() })?;

    let model = ModelConfig { num_users: gen.num_users, ..Default::default() };
    let mut params = init_model(&data.catalog, &data.stats, &model, AblationFlags::default(), 7)?;
    jitter_dense(&mut params, 0.1, &mut rng::stream(7, "example", 0));
    let index = FeatureIndex::build(&data.catalog, &data.stats, &params);
    let picks = sample(&mut rng::stream(7, "example", 1), data.train.len(), 3);
    let examples: Vec<_> = picks.iter().map(|i| index.resolve(&data.train[i], &params)).collect();

    let report = grad_check(&params, &examples, &GradCheckConfig::default());
    print!("{}", report.table());
    println!("passes at 1e-4: {}\n", report.passes(1e-4));

    let corrupted = GradCheckConfig { corrupt: Some(ParamGroup::Fusion), ..Default::default() };
    let report = grad_check(&params, &examples, &corrupted);
    print!("{}", report.table());
    println!("passes at 1e-4 with a distorted fusion gradient: {}", report.passes(1e-4));
    Ok(())
}
