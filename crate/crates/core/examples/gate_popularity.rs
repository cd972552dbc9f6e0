//! Trains the full model and tabulates the learned HID weight `g` by exposure decile.
//!
//! cargo run --release --example gate_popularity

use sid_coord::data::{generate, GeneratorConfig};
use sid_coord::eval::gate_report;
use sid_coord::experiment::{quantize_catalog, train_model, QuantizeConfig, Variant};
use sid_coord::model::{ModelConfig, TrainConfig};

fn main() -> sid_coord::Result<()> {
    let mut data = generate(&GeneratorConfig::default())?;
    quantize_catalog(&mut data.catalog, &QuantizeConfig::default())?;
    let trained = train_model(
        &data.catalog,
        &data.stats,
        &data.train,
        &ModelConfig::default(),
        Variant::Full.flags(),
        &TrainConfig::default(),
    )?;
    let report = gate_report(&trained.params, &data.catalog, &data.stats)?;
    print!("{}", report.table());
    Ok(())
}
