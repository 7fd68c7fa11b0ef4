//! Case analysis on a trained model: pairwise induced-relation distances,
//! item embedding distances, and the score order for one user over a group
//! of items that share identical interaction rows.
//!
//! ```bash
//! cargo run --release -p serml --example case_analysis
//! ```

use serml::config::{InductionKind, ModelConfig};
use serml::corpus::synthetic::{generate, SyntheticSpec};
use serml::corpus::{PrepareOptions, PreparedData};
use serml::evalkit::case_analysis;
use serml::trainer::train;

fn main() -> anyhow::Result<()> {
    let synth = generate(&SyntheticSpec::default());
    let data = PreparedData::from_interactions(
        &synth.interactions,
        &PrepareOptions {
            min_token_freq: 1,
            ..Default::default()
        },
    )?;

    let cfg = ModelConfig {
        epochs: 40,
        lr: 0.01,
        induction: InductionKind::ElementWise,
        ..ModelConfig::desk()
    };
    let outcome = train(&cfg, &data)?;
    let model = outcome.checkpoint.to_model()?;

    // The four items of the first group have identical user rows; the first
    // two carry one review vocabulary, the last two the other.
    let group = &synth.groups[0];
    let user = synth
        .interactions
        .iter()
        .find(|it| it.item_id == group[0])
        .map(|it| it.user_id.clone())
        .expect("group has users");
    let report = case_analysis(&model, &user, group.as_slice())?;
    println!("{report}");
    println!("(items 1-2 share one review vocabulary, items 3-4 the other)");
    Ok(())
}
