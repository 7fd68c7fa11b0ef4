//! Sweep the semantic-regression weight over {0.001, 0.01, 0.1, 1, 10} and
//! report validation ranking metrics per value.
//!
//! ```bash
//! cargo run --release -p serml --example gamma_sweep
//! ```

use serml::config::ModelConfig;
use serml::corpus::synthetic::{generate, SyntheticSpec};
use serml::corpus::{split_interactions, PrepareOptions, PreparedData};
use serml::evalkit::{run_gamma_sweep, sweep_csv};

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
    let rows = run_gamma_sweep(&cfg, &data, &[0.001, 0.01, 0.1, 1.0, 10.0], 500, 7)?;
    print!("{}", sweep_csv(&rows));
    Ok(())
}
