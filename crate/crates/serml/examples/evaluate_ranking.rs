//! Train briefly, then score the test split under the sampled-negative
//! ranking protocol: each held-out item is ranked against up to 500 items
//! the user never interacted with.
//!
//! ```bash
//! cargo run --release -p serml --example evaluate_ranking
//! ```

use serml::config::ModelConfig;
use serml::corpus::synthetic::{generate, SyntheticSpec};
use serml::corpus::{split_interactions, PrepareOptions, PreparedData, Split};
use serml::evalkit::rank_eval;
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
        ..ModelConfig::desk()
    };
    let outcome = train(&cfg, &data)?;
    let model = outcome.checkpoint.to_model()?;

    let result = rank_eval(&model, &data, Split::Test, 500, 7)?;
    if result.pool_shortfalls > 0 {
        println!(
            "note: {} of {} candidate pools were smaller than 500 (catalog has {} items)",
            result.pool_shortfalls,
            result.ranks.len(),
            model.n_items()
        );
    }
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}
