//! Induction-strategy ablation: train the same model with element-wise,
//! two-layer MLP, four-layer MLP, and memory-based induction, and compare
//! validation ranking metrics.
//!
//! ```bash
//! cargo run --release -p serml --example ablation
//! ```

use serml::config::{InductionKind, ModelConfig};
use serml::corpus::synthetic::{generate, SyntheticSpec};
use serml::corpus::{split_interactions, PrepareOptions, PreparedData};
use serml::evalkit::{ablation_csv, run_ablation};

fn main() -> anyhow::Result<()> {
    let synth = generate(&SyntheticSpec::default());
    let mut interactions = synth.interactions;
    split_interactions(&mut interactions, (0.9, 0.1, 0.0), 42)?;
    let data = PreparedData::from_interactions(
        &interactions,
        &PrepareOptions {
            min_token_freq: 1,
            ..Default::default()
        },
    )?;

    let cfg = ModelConfig {
        epochs: 12,
        lr: 0.01,
        patience: 12,
        ..ModelConfig::desk()
    };
    let rows = run_ablation(&cfg, &data, &InductionKind::ALL, 500, 7)?;
    print!("{}", ablation_csv(&rows));
    Ok(())
}
