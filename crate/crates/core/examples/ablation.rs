//! Trains FULL, the three single-component ablations and the HID-only baseline on the
//! same data and prints the comparison table with relative AUC deltas.
//!
//! cargo run --release --example ablation

use rayon::prelude::*;

use sid_coord::data::{generate, GeneratorConfig};
use sid_coord::eval::{ablation_table, DEFAULT_TAIL_PERCENTILE};
use sid_coord::experiment::{quantize_catalog, run_variant, Dataset, QuantizeConfig, Variant};
use sid_coord::model::{ModelConfig, TrainConfig};

fn main() -> sid_coord::Result<()> {
    let mut data = generate(&GeneratorConfig::default())?;
    quantize_catalog(&mut data.catalog, &QuantizeConfig::default())?;
    let ds = Dataset { catalog: &data.catalog, stats: &data.stats, train: &data.train, eval: &data.eval };

    let mut variants = Variant::ABLATIONS.to_vec();
    variants.push(Variant::Base);
    let (model, train) = (ModelConfig::default(), TrainConfig::default());
    let rows = variants
        .par_iter()
        .map(|&v| {
            let run = run_variant(ds, v, &model, &train, DEFAULT_TAIL_PERCENTILE)?;
            Ok((v.label().to_string(), run.report))
        })
        .collect::<sid_coord::Result<Vec<_>>>()?;
    print!("{}", ablation_table(&rows));
    Ok(())
}
