//! Generate a synthetic review corpus, then run the full preparation
//! pipeline: ingest, k-core filter, 80/10/10 split, vocabulary build,
//! tokenization, and on-disk layout.
//!
//! ```bash
//! cargo run --release -p serml --example prepare_data
//! ```

use serml::corpus::synthetic::{generate, write_jsonl, SyntheticSpec};
use serml::corpus::{prepare, PrepareOptions};

fn main() -> anyhow::Result<()> {
    let dir = std::env::temp_dir().join("serml-example-prepare");
    std::fs::create_dir_all(&dir)?;
    let raw = dir.join("reviews.jsonl");

    let synth = generate(&SyntheticSpec::default());
    write_jsonl(&synth.interactions, &raw)?;
    println!("wrote {} raw interactions to {}", synth.interactions.len(), raw.display());

    let out = dir.join("prepared");
    let opts = PrepareOptions {
        kcore: 2,
        min_token_freq: 1,
        seed: 42,
        ..Default::default()
    };
    let (prepared, skipped) = prepare(&raw, &out, &opts)?;
    let stats = prepared.stats();

    println!("skipped lines:   {skipped}");
    println!("users:           {}", stats.n_users);
    println!("items:           {}", stats.n_items);
    println!("interactions:    {}", stats.n_interactions);
    println!("density:         {:.4}", stats.density);
    println!(
        "splits:          train {} / valid {} / test {}",
        prepared.manifest.counts.train,
        prepared.manifest.counts.valid,
        prepared.manifest.counts.test
    );
    println!("vocab size:      {}", prepared.manifest.vocab_size);
    println!("output dir:      {}", out.display());
    Ok(())
}
