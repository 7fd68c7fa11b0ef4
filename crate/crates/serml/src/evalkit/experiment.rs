//! Model-analysis experiments: the semantic-separation study on the
//! two-category synthetic corpus, the induction-strategy ablation, and the
//! gamma sweep.

use crate::config::{InductionKind, ModelConfig};
use crate::corpus::synthetic::{generate, SyntheticData, SyntheticSpec};
use crate::corpus::{PrepareOptions, PreparedData, Split};
use crate::error::{Result, SermlError};
use crate::evalkit::{rank_eval, RankingResult};
use crate::trainer::{train, Model};

/// Inter/intra category distance structure among items that share identical
/// interaction rows, for a semantically supervised run and a baseline run.
#[derive(Clone, Copy, Debug)]
pub struct SeparationOutcome {
    /// gamma as configured (semantic supervision on).
    pub ratio_semantic: f64,
    /// gamma = 0 (semantic path severed).
    pub ratio_baseline: f64,
    pub inter_semantic: f64,
    pub intra_semantic: f64,
    pub inter_baseline: f64,
    pub intra_baseline: f64,
}

/// Train the model twice with the same seed, once with the configured gamma
/// and once with gamma = 0, and measure the mean inter-category vs mean
/// intra-category squared embedding distance over same-interaction item
/// pairs.
pub fn semantic_separation_experiment(
    base: &ModelConfig,
    spec: &SyntheticSpec,
) -> Result<SeparationOutcome> {
    if base.gamma <= 0.0 {
        return Err(SermlError::Config(
            "separation experiment needs gamma > 0 for the semantic run".into(),
        ));
    }
    let synth = generate(spec);
    let prepared = prepare_synth_all_train(&synth, base.rmax, spec.seed)?;

    let run = |gamma: f64| -> Result<Model> {
        let mut cfg = base.clone();
        cfg.gamma = gamma;
        let outcome = train(&cfg, &prepared)?;
        outcome.checkpoint.to_model()
    };

    let semantic_model = run(base.gamma)?;
    let baseline_model = run(0.0)?;

    let (inter_s, intra_s) = category_distances(&semantic_model, &synth)?;
    let (inter_b, intra_b) = category_distances(&baseline_model, &synth)?;
    Ok(SeparationOutcome {
        ratio_semantic: inter_s / intra_s,
        ratio_baseline: inter_b / intra_b,
        inter_semantic: inter_s,
        intra_semantic: intra_s,
        inter_baseline: inter_b,
        intra_baseline: intra_b,
    })
}

/// All interactions as train data: the experiment measures the structure of
/// the final trained state, so no validation-based checkpoint selection.
fn prepare_synth_all_train(synth: &SyntheticData, rmax: u8, seed: u64) -> Result<PreparedData> {
    let data = synth.interactions.clone();
    PreparedData::from_interactions(
        &data,
        &PrepareOptions {
            min_token_freq: 1,
            rmax,
            seed,
            ..Default::default()
        },
    )
}

/// Mean squared embedding distance between cross-category and same-category
/// pairs, restricted to pairs inside one interaction-identical group.
pub fn category_distances(model: &Model, synth: &SyntheticData) -> Result<(f64, f64)> {
    let mut inter = (0.0, 0usize);
    let mut intra = (0.0, 0usize);
    for group in &synth.groups {
        for i in 0..group.len() {
            for j in (i + 1)..group.len() {
                let a = model.resolve_item(&group[i])?;
                let b = model.resolve_item(&group[j])?;
                let d = sq_dist(model.item_vec(a), model.item_vec(b));
                let same = synth.semantic_category[&group[i]] == synth.semantic_category[&group[j]];
                if same {
                    intra.0 += d;
                    intra.1 += 1;
                } else {
                    inter.0 += d;
                    inter.1 += 1;
                }
            }
        }
    }
    if inter.1 == 0 || intra.1 == 0 {
        return Err(SermlError::Data(
            "synthetic groups lack both pair kinds".into(),
        ));
    }
    Ok((inter.0 / inter.1 as f64, intra.0 / intra.1 as f64))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub strategy: InductionKind,
    pub valid: RankingResult,
}

/// Train one model per induction strategy (identical everything else) and
/// evaluate each on the validation split.
pub fn run_ablation(
    base: &ModelConfig,
    data: &PreparedData,
    strategies: &[InductionKind],
    n_neg: usize,
    eval_seed: u64,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for kind in strategies {
        let mut cfg = base.clone();
        cfg.induction = *kind;
        let outcome = train(&cfg, data)?;
        let model = outcome.checkpoint.to_model()?;
        let valid = rank_eval(&model, data, Split::Valid, n_neg, eval_seed)?;
        rows.push(AblationRow {
            strategy: *kind,
            valid,
        });
    }
    Ok(rows)
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("strategy,ndcg@5,ndcg@10,h@5,h@10\n");
    for row in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            row.strategy, row.valid.ndcg5, row.valid.ndcg10, row.valid.h5, row.valid.h10
        ));
    }
    out
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub gamma: f64,
    pub valid: RankingResult,
}

/// Train one model per gamma value and evaluate on the validation split.
pub fn run_gamma_sweep(
    base: &ModelConfig,
    data: &PreparedData,
    gammas: &[f64],
    n_neg: usize,
    eval_seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for gamma in gammas {
        if *gamma < 0.0 {
            return Err(SermlError::Config("gamma must be >= 0".into()));
        }
        let mut cfg = base.clone();
        cfg.gamma = *gamma;
        let outcome = train(&cfg, data)?;
        let model = outcome.checkpoint.to_model()?;
        let valid = rank_eval(&model, data, Split::Valid, n_neg, eval_seed)?;
        rows.push(SweepRow {
            gamma: *gamma,
            valid,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("gamma,ndcg@5,ndcg@10,h@5,h@10\n");
    for row in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            row.gamma, row.valid.ndcg5, row.valid.ndcg10, row.valid.h5, row.valid.h10
        ));
    }
    out
}
