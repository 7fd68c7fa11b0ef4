//! Train on the two-category synthetic corpus and watch the model memorize
//! the training interactions: training H@5 should approach 1.
//!
//! ```bash
//! cargo run --release -p serml --example train_tiny
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
        epochs: 200,
        patience: 200,
        ..ModelConfig::desk()
    };
    let started = std::time::Instant::now();
    let outcome = train(&cfg, &data)?;
    println!("trained {} epochs in {:.1?}", outcome.log.len(), started.elapsed());
    for entry in outcome.log.iter().step_by(25) {
        println!(
            "epoch {:3}  L {:8.4}  L_C {:7.4}  L_R {:7.4}  L_rel {:7.4}  valid NDCG@10 {}",
            entry.epoch,
            entry.l,
            entry.l_c,
            entry.l_r,
            entry.l_rel,
            entry.valid_ndcg10.map(|v| format!("{v:.4}")).unwrap_or_default()
        );
    }

    let model = outcome.checkpoint.to_model()?;
    let train_metrics = rank_eval(&model, &data, Split::Train, 500, 7)?;
    let test_metrics = rank_eval(&model, &data, Split::Test, 500, 7)?;
    println!("train H@5 {:.4}  NDCG@5 {:.4}", train_metrics.h5, train_metrics.ndcg5);
    println!("test  H@5 {:.4}  NDCG@5 {:.4}", test_metrics.h5, test_metrics.ndcg5);
    Ok(())
}
