//! Model configuration and the flat key-value config file format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SermlError};

/// How a user-item pair is turned into a relation vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InductionKind {
    ElementWise,
    Mlp2,
    Mlp4,
    Memory,
}

impl InductionKind {
    pub const ALL: [InductionKind; 4] = [
        InductionKind::ElementWise,
        InductionKind::Mlp2,
        InductionKind::Mlp4,
        InductionKind::Memory,
    ];
}

impl fmt::Display for InductionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InductionKind::ElementWise => "element_wise",
            InductionKind::Mlp2 => "mlp2",
            InductionKind::Mlp4 => "mlp4",
            InductionKind::Memory => "memory",
        };
        f.write_str(s)
    }
}

impl FromStr for InductionKind {
    type Err = SermlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "element_wise" => Ok(InductionKind::ElementWise),
            "mlp2" => Ok(InductionKind::Mlp2),
            "mlp4" => Ok(InductionKind::Mlp4),
            "memory" => Ok(InductionKind::Memory),
            other => Err(SermlError::Config(format!(
                "unknown induction strategy `{other}` (expected element_wise|mlp2|mlp4|memory)"
            ))),
        }
    }
}

/// Batch reduction for the classification loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    Mean,
    Sum,
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reduction::Mean => "mean",
            Reduction::Sum => "sum",
        })
    }
}

impl FromStr for Reduction {
    type Err = SermlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Reduction::Mean),
            "sum" => Ok(Reduction::Sum),
            other => Err(SermlError::Config(format!(
                "unknown reduction `{other}` (expected mean|sum)"
            ))),
        }
    }
}

/// All model and training hyperparameters.
///
/// `gamma` weights the semantic regression term, `rho` the projector
/// Frobenius penalty, `margin` the ranking hinge. Setting `gamma` to zero
/// severs the semantic path entirely: review text is neither encoded nor
/// regressed against during training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// User/item embedding dimension.
    pub d: usize,
    /// Encoder hidden dimension.
    pub hidden: usize,
    /// Attention projection dimension.
    pub attn: usize,
    /// Word embedding dimension.
    pub word_dim: usize,
    /// Memory slot count for the memory induction strategy.
    pub memory_slots: usize,
    pub gamma: f64,
    pub rho: f64,
    pub margin: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub induction: InductionKind,
    pub seed: u64,
    pub neg_per_pos: usize,
    pub reduction: Reduction,
    /// Early-stopping patience in epochs, measured on validation NDCG@10.
    pub patience: usize,
    /// Freeze the document-vector side of the regression target.
    pub stop_grad_semantic: bool,
    /// Enable the affine rating head and its squared-error term.
    pub rating_mode: bool,
    pub rating_weight: f64,
    /// Rating scale upper bound; ratings live in `1..=rmax`.
    pub rmax: u8,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 100,
            hidden: 100,
            attn: 100,
            word_dim: 100,
            memory_slots: 20,
            gamma: 1.0,
            rho: 0.01,
            margin: 0.5,
            lr: 0.05,
            batch_size: 512,
            epochs: 30,
            induction: InductionKind::Memory,
            seed: 42,
            neg_per_pos: 1,
            reduction: Reduction::Mean,
            patience: 10,
            stop_grad_semantic: false,
            rating_mode: false,
            rating_weight: 1.0,
            rmax: 5,
        }
    }
}

impl ModelConfig {
    /// Small profile for laptop-scale experiments and tests.
    pub fn desk() -> Self {
        ModelConfig {
            d: 16,
            hidden: 16,
            attn: 16,
            word_dim: 16,
            batch_size: 64,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.d == 0 || self.hidden == 0 || self.attn == 0 || self.word_dim == 0 {
            errs.push("dimensions must be >= 1".to_string());
        }
        if self.memory_slots == 0 {
            errs.push("memory_slots must be >= 1".to_string());
        }
        if self.batch_size == 0 {
            errs.push("batch_size must be >= 1".to_string());
        }
        if self.gamma < 0.0 || self.rho < 0.0 || self.margin < 0.0 {
            errs.push("gamma, rho, margin must be >= 0".to_string());
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            errs.push("lr must be > 0".to_string());
        }
        if self.neg_per_pos == 0 {
            errs.push("neg_per_pos must be >= 1".to_string());
        }
        if self.rmax == 0 {
            errs.push("rmax must be >= 1".to_string());
        }
        if self.rating_weight < 0.0 {
            errs.push("rating_weight must be >= 0".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SermlError::Config(errs.join("; ")))
        }
    }

    /// Parse the flat `key = value` config format. Lines may be empty or
    /// start with `#`. Unknown keys are rejected.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SermlError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                SermlError::Config(format!("line {}: bad {what} value `{value}`", lineno + 1))
            };
            match key {
                "d" => cfg.d = value.parse().map_err(|_| bad("usize"))?,
                "hidden" => cfg.hidden = value.parse().map_err(|_| bad("usize"))?,
                "attn" => cfg.attn = value.parse().map_err(|_| bad("usize"))?,
                "word_dim" => cfg.word_dim = value.parse().map_err(|_| bad("usize"))?,
                "memory_slots" => cfg.memory_slots = value.parse().map_err(|_| bad("usize"))?,
                "gamma" => cfg.gamma = value.parse().map_err(|_| bad("float"))?,
                "rho" => cfg.rho = value.parse().map_err(|_| bad("float"))?,
                "margin" => cfg.margin = value.parse().map_err(|_| bad("float"))?,
                "lr" => cfg.lr = value.parse().map_err(|_| bad("float"))?,
                "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("usize"))?,
                "epochs" => cfg.epochs = value.parse().map_err(|_| bad("usize"))?,
                "induction" => cfg.induction = value.parse()?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("u64"))?,
                "neg_per_pos" => cfg.neg_per_pos = value.parse().map_err(|_| bad("usize"))?,
                "reduction" => cfg.reduction = value.parse()?,
                "patience" => cfg.patience = value.parse().map_err(|_| bad("usize"))?,
                "stop_grad_semantic" => {
                    cfg.stop_grad_semantic = value.parse().map_err(|_| bad("bool"))?
                }
                "rating_mode" => cfg.rating_mode = value.parse().map_err(|_| bad("bool"))?,
                "rating_weight" => cfg.rating_weight = value.parse().map_err(|_| bad("float"))?,
                "rmax" => cfg.rmax = value.parse().map_err(|_| bad("u8"))?,
                other => {
                    return Err(SermlError::Config(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "d = {}\nhidden = {}\nattn = {}\nword_dim = {}\nmemory_slots = {}\n\
             gamma = {}\nrho = {}\nmargin = {}\nlr = {}\nbatch_size = {}\nepochs = {}\n\
             induction = {}\nseed = {}\nneg_per_pos = {}\nreduction = {}\npatience = {}\n\
             stop_grad_semantic = {}\nrating_mode = {}\nrating_weight = {}\nrmax = {}\n",
            self.d,
            self.hidden,
            self.attn,
            self.word_dim,
            self.memory_slots,
            self.gamma,
            self.rho,
            self.margin,
            self.lr,
            self.batch_size,
            self.epochs,
            self.induction,
            self.seed,
            self.neg_per_pos,
            self.reduction,
            self.patience,
            self.stop_grad_semantic,
            self.rating_mode,
            self.rating_weight,
            self.rmax,
        )
    }
}
