//! Trains the full model on the default synthetic log and reports overall and
//! long-tail AUC/UAUC on the held-out log.
//!
//! cargo run --release --example train_and_eval

use sid_coord::data::{generate, GeneratorConfig};
use sid_coord::eval::{evaluate, DEFAULT_TAIL_PERCENTILE};
use sid_coord::experiment::{quantize_catalog, train_model, QuantizeConfig, Variant};
use sid_coord::model::{ModelConfig, TrainConfig};

fn main() -> sid_coord::Result<()> {
    let mut data = generate(&GeneratorConfig::default())?;
    quantize_catalog(&mut data.catalog, &QuantizeConfig::default())?;

    let train_cfg = TrainConfig::default();
    let trained =
        train_model(&data.catalog, &data.stats, &data.train, &ModelConfig::default(), Variant::Full.flags(), &train_cfg)?;
    for (epoch, loss) in trained.state.loss_curve.iter().enumerate() {
        println!("epoch {} train loss {loss:.4}", epoch + 1);
    }

    let report =
        evaluate(&trained.params, &trained.index, &data.catalog, &data.stats, &data.eval, DEFAULT_TAIL_PERCENTILE)?;
    print!("{}", report.table());
    Ok(())
}
