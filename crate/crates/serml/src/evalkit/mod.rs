//! Ranking and rating evaluation: the 500-sampled-negative protocol with
//! NDCG@N and H@N, RMSE for the rating task, and case-analysis diagnostics.

mod experiment;

pub use experiment::{
    ablation_csv, category_distances, run_ablation, run_gamma_sweep,
    semantic_separation_experiment, sweep_csv, AblationRow, SeparationOutcome, SweepRow,
};

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{sample_negatives, PreparedData, Split};
use crate::error::{Result, SermlError};
use crate::trainer::Model;

/// 1 if the held-out item ranks within the top `n`.
pub fn hit_at(rank: usize, n: usize) -> f64 {
    if rank <= n {
        1.0
    } else {
        0.0
    }
}

/// Discounted gain of a single relevant item: 1/log2(rank + 1) inside the
/// cutoff, 0 outside.
pub fn ndcg_at(rank: usize, n: usize) -> f64 {
    if rank <= n {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RankingResult {
    /// 1-based rank of each held-out item among its candidate list.
    #[serde(skip)]
    pub ranks: Vec<usize>,
    #[serde(rename = "ndcg@5")]
    pub ndcg5: f64,
    #[serde(rename = "ndcg@10")]
    pub ndcg10: f64,
    #[serde(rename = "h@5")]
    pub h5: f64,
    #[serde(rename = "h@10")]
    pub h10: f64,
    /// Interactions whose candidate pool was smaller than requested.
    #[serde(skip)]
    pub pool_shortfalls: usize,
}

/// Rank each held-out interaction's item against `n_neg` sampled items the
/// user has never interacted with (in any split), then average H@N and
/// NDCG@N for N in {5, 10}.
///
/// Sampling uses one rng stream per interaction derived from `seed`, so the
/// result is independent of evaluation order and identical across runs.
pub fn rank_eval(
    model: &Model,
    data: &PreparedData,
    split: Split,
    n_neg: usize,
    seed: u64,
) -> Result<RankingResult> {
    let interactions = data.split(split);
    if interactions.is_empty() {
        return Err(SermlError::Data(format!("empty {split:?} split")));
    }
    let n_items = model.n_items();
    let id_order = item_id_order(model);

    let mut ranks = Vec::with_capacity(interactions.len());
    let mut shortfalls = 0usize;
    let (mut s_n5, mut s_n10, mut s_h5, mut s_h10) = (0.0, 0.0, 0.0, 0.0);

    for (idx, it) in interactions.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(idx as u64);
        let negs = sample_negatives(n_items, data.all_positives(it.user), n_neg, &mut rng);
        if negs.len() < n_neg {
            shortfalls += 1;
        }
        let held_score = model.score_pair(it.user, it.item);
        let mut rank = 1usize;
        for neg in &negs {
            let s = model.score_pair(it.user, *neg);
            if s > held_score || (s == held_score && id_order[*neg as usize] < id_order[it.item as usize])
            {
                rank += 1;
            }
        }
        debug_assert!(ndcg_at(rank, 5) <= hit_at(rank, 5));
        debug_assert!(ndcg_at(rank, 10) <= hit_at(rank, 10));
        s_n5 += ndcg_at(rank, 5);
        s_n10 += ndcg_at(rank, 10);
        s_h5 += hit_at(rank, 5);
        s_h10 += hit_at(rank, 10);
        ranks.push(rank);
    }

    let n = interactions.len() as f64;
    Ok(RankingResult {
        ranks,
        ndcg5: s_n5 / n,
        ndcg10: s_n10 / n,
        h5: s_h5 / n,
        h10: s_h10 / n,
        pool_shortfalls: shortfalls,
    })
}

/// Position of each item index in the id-sorted order, used for stable tie
/// breaking by item id ascending.
fn item_id_order(model: &Model) -> Vec<usize> {
    let mut by_id: Vec<usize> = (0..model.n_items()).collect();
    by_id.sort_by(|a, b| model.manifest.items[*a].cmp(&model.manifest.items[*b]));
    let mut order = vec![0usize; by_id.len()];
    for (pos, item) in by_id.into_iter().enumerate() {
        order[item] = pos;
    }
    order
}

/// Root mean squared error of the rating head over a split.
pub fn rmse(model: &Model, data: &PreparedData, split: Split) -> Result<f64> {
    let head = model
        .rating_head
        .ok_or_else(|| SermlError::Model("rating head is not enabled".into()))?;
    let interactions = data.split(split);
    if interactions.is_empty() {
        return Err(SermlError::Data(format!("empty {split:?} split")));
    }
    let mut sum_sq = 0.0;
    for it in interactions {
        let pred = model.predict_rating_ids(it.user, it.item, head);
        let err = pred - it.rating as f64;
        sum_sq += err * err;
    }
    Ok((sum_sq / interactions.len() as f64).sqrt())
}

/// Pairwise distances between induced relations and between item embeddings
/// for a fixed user, plus per-item scores in descending order.
#[derive(Clone, Debug)]
pub struct CaseReport {
    pub user: String,
    pub items: Vec<String>,
    /// `rel_dist[i][j]` = squared distance between the relations induced for
    /// items i and j (with the same user).
    pub rel_dist: Vec<Vec<f64>>,
    /// `item_dist[i][j]` = squared distance between item embeddings.
    pub item_dist: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
    /// Indices into `items`, best first.
    pub order: Vec<usize>,
}

pub fn case_analysis(model: &Model, user_id: &str, item_ids: &[String]) -> Result<CaseReport> {
    if item_ids.len() < 2 {
        return Err(SermlError::Data(
            "case analysis needs at least two items".into(),
        ));
    }
    let user = model.resolve_user(user_id)?;
    let idxs: Vec<u32> = item_ids
        .iter()
        .map(|i| model.resolve_item(i))
        .collect::<Result<_>>()?;

    let relations: Vec<Vec<f64>> = idxs.iter().map(|i| model.relation(user, *i)).collect();
    let n = idxs.len();
    let mut rel_dist = vec![vec![0.0; n]; n];
    let mut item_dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            rel_dist[i][j] = sq_dist(&relations[i], &relations[j]);
            item_dist[i][j] = sq_dist(model.item_vec(idxs[i]), model.item_vec(idxs[j]));
        }
    }
    let scores: Vec<f64> = idxs.iter().map(|i| model.score_pair(user, *i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| {
        scores[*b]
            .total_cmp(&scores[*a])
            .then_with(|| item_ids[*a].cmp(&item_ids[*b]))
    });
    Ok(CaseReport {
        user: user_id.to_string(),
        items: item_ids.to_vec(),
        rel_dist,
        item_dist,
        scores,
        order,
    })
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

impl fmt::Display for CaseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "case analysis for user {}", self.user)?;
        writeln!(f, "\nrelation distances (squared):")?;
        write_matrix(f, &self.items, &self.rel_dist)?;
        writeln!(f, "\nitem embedding distances (squared):")?;
        write_matrix(f, &self.items, &self.item_dist)?;
        writeln!(f, "\nscores (descending):")?;
        for idx in &self.order {
            writeln!(f, "  {:12} {:+.6}", self.items[*idx], self.scores[*idx])?;
        }
        Ok(())
    }
}

fn write_matrix(f: &mut fmt::Formatter<'_>, labels: &[String], m: &[Vec<f64>]) -> fmt::Result {
    write!(f, "{:12}", "")?;
    for l in labels {
        write!(f, "{l:>12}")?;
    }
    writeln!(f)?;
    for (i, row) in m.iter().enumerate() {
        write!(f, "{:12}", labels[i])?;
        for v in row {
            write!(f, "{v:>12.6}")?;
        }
        writeln!(f)?;
    }
    Ok(())
}
