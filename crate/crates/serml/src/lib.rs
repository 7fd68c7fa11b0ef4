//! Review-supervised relational metric learning for top-N recommendation.
//!
//! A user-item pair is scored through a latent relation vector induced from
//! the pair's embeddings. During training, a hierarchical attention encoder
//! turns each review into a semantic vector that supervises the induced
//! relation through a regression term, so relations carry review semantics
//! rather than bare co-occurrence. Prediction needs no review text.
//!
//! The crate is organized around the pipeline:
//!
//! - [`corpus`] — ingestion, k-core filtering, splits, vocabulary,
//!   tokenization, negative sampling, synthetic corpora
//! - [`textenc`] — hierarchical LSTM encoder with user/item-conditioned
//!   attention and the sentiment classification loss
//! - [`relinduce`] — relation induction strategies and the semantic
//!   regression loss
//! - [`metric`] — triple scoring, margin ranking loss, norm clipping
//! - [`trainer`] — the joint objective, Adam training loop, gradient
//!   checking, checkpoints, prediction
//! - [`evalkit`] — NDCG@N / H@N under sampled negatives, RMSE, case
//!   analysis, ablations and sweeps
//!
//! Runnable entry points live in `examples/`; the `serml` binary wraps the
//! same library calls behind subcommands. Training is deterministic for a
//! fixed seed on a single worker, and all arithmetic is `f64`.
//!
//! ```
//! use serml::config::ModelConfig;
//! use serml::corpus::synthetic::{generate, SyntheticSpec};
//! use serml::corpus::{split_interactions, PrepareOptions, PreparedData, Split};
//!
//! let synth = generate(&SyntheticSpec::small());
//! let mut interactions = synth.interactions;
//! split_interactions(&mut interactions, (0.8, 0.1, 0.1), 7)?;
//! let data = PreparedData::from_interactions(
//!     &interactions,
//!     &PrepareOptions { min_token_freq: 1, ..Default::default() },
//! )?;
//!
//! let cfg = ModelConfig { d: 8, hidden: 8, attn: 8, word_dim: 8, epochs: 2, ..ModelConfig::desk() };
//! let outcome = serml::trainer::train(&cfg, &data)?;
//! let model = outcome.checkpoint.to_model()?;
//!
//! let metrics = serml::evalkit::rank_eval(&model, &data, Split::Test, 500, 3)?;
//! assert!(metrics.ndcg10 >= 0.0 && metrics.ndcg10 <= 1.0);
//! # Ok::<(), serml::SermlError>(())
//! ```

pub mod config;
pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod metric;
pub mod params;
pub mod relinduce;
pub mod tape;
pub mod textenc;
pub mod trainer;

pub use config::{InductionKind, ModelConfig, Reduction};
pub use error::{Result, SermlError};
