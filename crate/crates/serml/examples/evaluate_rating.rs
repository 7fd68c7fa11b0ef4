//! Rating prediction: train with the affine rating head enabled and compare
//! test RMSE against the global-mean baseline.
//!
//! ```bash
//! cargo run --release -p serml --example evaluate_rating
//! ```

use serml::config::ModelConfig;
use serml::corpus::synthetic::{generate, SyntheticSpec};
use serml::corpus::{split_interactions, PrepareOptions, PreparedData, Split};
use serml::evalkit::rmse;
use serml::trainer::train;

fn main() -> anyhow::Result<()> {
    let synth = generate(&SyntheticSpec::default());
    let mut interactions = synth.interactions;
    split_interactions(&mut interactions, (0.8, 0.1, 0.1), 42)?;
    let data = PreparedData::from_interactions(
        &interactions,
        &PrepareOptions {
            min_token_freq: 1,
            ..Default::default()
        },
    )?;

    let cfg = ModelConfig {
        epochs: 40,
        lr: 0.01,
        rating_mode: true,
        ..ModelConfig::desk()
    };
    let outcome = train(&cfg, &data)?;
    let model = outcome.checkpoint.to_model()?;
    let model_rmse = rmse(&model, &data, Split::Test)?;

    let train_mean = data.train.iter().map(|it| it.rating as f64).sum::<f64>()
        / data.train.len() as f64;
    let baseline = (data
        .test
        .iter()
        .map(|it| (train_mean - it.rating as f64).powi(2))
        .sum::<f64>()
        / data.test.len() as f64)
        .sqrt();

    println!("{}", serde_json::json!({ "rmse": model_rmse }));
    println!("global-mean baseline rmse: {baseline:.4}");
    println!(
        "model {} the baseline",
        if model_rmse < baseline { "beats" } else { "does not beat" }
    );
    Ok(())
}
