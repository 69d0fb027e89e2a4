//! One-vs-all hinge perceptron on toy two-block inputs, then masked region
//! selection with the same model type.
//!
//!     cargo run --example perceptron

use glimpse::linear::{fit, hinge_loss};
use glimpse::{AggregatedFeatures, TrainConfig};

fn main() -> glimpse::Result<()> {
    // three classes, each lighting a different coordinate of a 2-block input
    let mut examples = Vec::new();
    for i in 0..60 {
        let c = i % 3;
        let mut v = vec![0.05; 4];
        v[c] = 1.0;
        examples.push((AggregatedFeatures::from_values(v, 2)?, c));
    }
    let config = TrainConfig::default();
    let model = fit(&examples, 3, &config)?;
    println!("hinge loss after {} epochs: {:.4}", config.epochs, hinge_loss(&model, &examples)?);
    for (x, c) in examples.iter().take(3) {
        let pred = model.predict_class(x)?;
        println!("class {c} -> {pred} scores {:?}", model.score(x)?);
    }

    // as a region policy: outputs are regions and acquired ones are masked
    let acquired = [model.predict_class(&examples[0].0)?];
    let next = model.predict_region(&examples[0].0, &acquired)?;
    println!("best region {} is taken; next best {next}", acquired[0]);
    Ok(())
}
