//! Thin command-line wrapper over the library: data preparation, training,
//! evaluation, case analysis, and the model-analysis grids.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use serml::config::{InductionKind, ModelConfig};
use serml::corpus::synthetic::{generate, write_jsonl, SyntheticSpec};
use serml::corpus::{PrepareOptions, PreparedData, Split};
use serml::evalkit;
use serml::trainer::{self, Checkpoint};

#[derive(Parser)]
#[command(name = "serml", about = "Review-supervised relational metric learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a JSON-lines review file, k-core filter, split, and tokenize.
    Prepare {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        kcore: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        min_freq: usize,
        #[arg(long, default_value_t = 30)]
        max_sentences: usize,
        #[arg(long, default_value_t = 50)]
        max_words: usize,
        #[arg(long, default_value_t = 5)]
        rmax: u8,
    },
    /// Train on a prepared data directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = ["ranking", "rating"])]
        task: String,
        #[arg(long, default_value_t = 500)]
        n_neg: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Pairwise relation/item distances and scores for one user.
    CaseAnalysis {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        user: String,
        /// Comma-separated item ids.
        #[arg(long, value_delimiter = ',')]
        items: Vec<String>,
    },
    /// Train every induction strategy and emit one CSV row per strategy.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated strategies.
        #[arg(long, value_delimiter = ',',
              default_value = "element_wise,mlp2,mlp4,memory")]
        strategies: Vec<String>,
        #[arg(long, default_value_t = 500)]
        n_neg: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Optional CSV output path (stdout otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train across a gamma grid and emit one CSV row per value.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated gamma values.
        #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1,1,10")]
        gamma: Vec<f64>,
        #[arg(long, default_value_t = 500)]
        n_neg: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the two-category synthetic corpus as JSON-lines.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        users: usize,
        #[arg(long, default_value_t = 5)]
        groups: usize,
        #[arg(long, default_value_t = 10)]
        users_per_group: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Compare analytic gradients against central finite differences.
    GradCheck {
        #[arg(long, default_value_t = 4)]
        dims: usize,
        #[arg(long, default_value_t = 3)]
        memory_slots: usize,
        #[arg(long, default_value = "memory")]
        induction: String,
        #[arg(long, default_value_t = 25)]
        coords: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Run the two-category semantic separation experiment.
    Separation {
        #[arg(long, default_value_t = 40)]
        epochs: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Prepare {
            input,
            kcore,
            seed,
            out,
            min_freq,
            max_sentences,
            max_words,
            rmax,
        } => {
            let opts = PrepareOptions {
                min_token_freq: min_freq,
                max_sentences,
                max_words,
                rmax,
                seed,
                kcore,
            };
            let (prepared, skipped) = serml::corpus::prepare(&input, &out, &opts)
                .context("prepare failed")?;
            if skipped > 0 {
                eprintln!("warning: skipped {skipped} malformed input lines");
            }
            let stats = prepared.stats();
            if stats.n_interactions == 0 {
                eprintln!("warning: k-core filtering left no interactions");
            }
            println!(
                "prepared {} interactions ({} users, {} items, density {:.4})",
                stats.n_interactions, stats.n_users, stats.n_items, stats.density
            );
            println!(
                "splits: train {} / valid {} / test {}; vocab {} tokens; wrote {}",
                prepared.manifest.counts.train,
                prepared.manifest.counts.valid,
                prepared.manifest.counts.test,
                prepared.manifest.vocab_size,
                out.display()
            );
        }
        Command::Train { config, data, out } => {
            let cfg = load_config(&config)?;
            let prepared = PreparedData::load(&data).context("loading prepared data")?;
            fs::create_dir_all(&out)?;
            let log_path = out.join("train_log.jsonl");
            let mut log_file = std::io::BufWriter::new(
                fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&log_path)?,
            );
            let outcome = trainer::train_with(&cfg, &prepared, |entry| {
                use std::io::Write;
                if let Ok(line) = serde_json::to_string(entry) {
                    let _ = writeln!(log_file, "{line}");
                    let _ = log_file.flush();
                }
            })
            .context("training failed")?;
            let ckpt_path = out.join("model.ckpt");
            outcome.checkpoint.save(&ckpt_path)?;
            if outcome.diverged {
                eprintln!("warning: training diverged; checkpoint holds the last good epoch");
            }
            println!(
                "trained {} epochs; best epoch {} (selection metric {}); checkpoint {}",
                outcome.log.len(),
                outcome.best_epoch,
                outcome
                    .best_valid_metric
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "n/a".into()),
                ckpt_path.display()
            );
        }
        Command::Evaluate {
            checkpoint,
            data,
            task,
            n_neg,
            seed,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let model = ckpt.to_model()?;
            let prepared = PreparedData::load(&data)?;
            match task.as_str() {
                "ranking" => {
                    let res = evalkit::rank_eval(&model, &prepared, Split::Test, n_neg, seed)?;
                    if res.pool_shortfalls > 0 {
                        eprintln!(
                            "warning: {} interactions had candidate pools below {n_neg}",
                            res.pool_shortfalls
                        );
                    }
                    println!("{}", serde_json::to_string_pretty(&res)?);
                }
                "rating" => {
                    let value = evalkit::rmse(&model, &prepared, Split::Test)?;
                    println!("{}", serde_json::json!({ "rmse": value }));
                }
                other => bail!("unknown task {other}"),
            }
        }
        Command::CaseAnalysis {
            checkpoint,
            user,
            items,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let model = ckpt.to_model()?;
            let report = evalkit::case_analysis(&model, &user, &items)?;
            println!("{report}");
        }
        Command::Ablate {
            config,
            data,
            strategies,
            n_neg,
            seed,
            out,
        } => {
            let cfg = load_config(&config)?;
            let prepared = PreparedData::load(&data)?;
            let kinds: Vec<InductionKind> = strategies
                .iter()
                .map(|s| s.parse())
                .collect::<serml::Result<_>>()?;
            let rows = evalkit::run_ablation(&cfg, &prepared, &kinds, n_neg, seed)?;
            emit_csv(evalkit::ablation_csv(&rows), out)?;
        }
        Command::Sweep {
            config,
            data,
            gamma,
            n_neg,
            seed,
            out,
        } => {
            let cfg = load_config(&config)?;
            let prepared = PreparedData::load(&data)?;
            let rows = evalkit::run_gamma_sweep(&cfg, &prepared, &gamma, n_neg, seed)?;
            emit_csv(evalkit::sweep_csv(&rows), out)?;
        }
        Command::Synth {
            out,
            users,
            groups,
            users_per_group,
            seed,
        } => {
            let spec = SyntheticSpec {
                n_users: users,
                n_groups: groups,
                users_per_group,
                seed,
                ..Default::default()
            };
            let data = generate(&spec);
            write_jsonl(&data.interactions, &out)?;
            println!(
                "wrote {} interactions over {} items to {}",
                data.interactions.len(),
                data.items.len(),
                out.display()
            );
        }
        Command::GradCheck {
            dims,
            memory_slots,
            induction,
            coords,
            seed,
        } => {
            let cfg = ModelConfig {
                d: dims,
                hidden: dims,
                attn: dims,
                word_dim: dims,
                memory_slots,
                induction: induction.parse::<InductionKind>()?,
                ..ModelConfig::desk()
            };
            match trainer::grad_check(&cfg, coords, 1e-5, 1e-4, seed) {
                Ok(report) => {
                    print!("{}", report.render());
                    println!("gradient check passed");
                }
                Err(e) => bail!("gradient check failed: {e}"),
            }
        }
        Command::Separation { epochs, seed } => {
            let cfg = ModelConfig {
                epochs,
                seed,
                lr: 0.01,
                induction: InductionKind::ElementWise,
                ..ModelConfig::desk()
            };
            let spec = SyntheticSpec {
                seed,
                ..Default::default()
            };
            let outcome = evalkit::semantic_separation_experiment(&cfg, &spec)?;
            println!(
                "inter/intra ratio with semantics: {:.4} (inter {:.4}, intra {:.4})",
                outcome.ratio_semantic, outcome.inter_semantic, outcome.intra_semantic
            );
            println!(
                "inter/intra ratio baseline:       {:.4} (inter {:.4}, intra {:.4})",
                outcome.ratio_baseline, outcome.inter_baseline, outcome.intra_baseline
            );
        }
    }
    Ok(())
}

fn load_config(path: &PathBuf) -> anyhow::Result<ModelConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    Ok(ModelConfig::from_kv_str(&text)?)
}

fn emit_csv(csv: String, out: Option<PathBuf>) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            fs::write(&path, &csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}
