//! Dataset ingestion, k-core filtering, splitting, and statistics.

mod prepared;
mod sampling;
pub mod synthetic;
mod vocab;

pub use prepared::{
    prepare, DataManifest, EncodedInteraction, PrepareOptions, PreparedData, SplitCounts,
};
pub use sampling::sample_negatives;
pub use vocab::{build_vocabulary, segment, tokenize, TokenizedDoc, Vocabulary, PAD_ID, UNK_ID};

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SermlError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// One (user, item, rating, review) record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user_id: String,
    pub item_id: String,
    pub rating: u8,
    pub review: String,
    pub split: Split,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    user_id: String,
    item_id: String,
    rating: serde_json::Value,
    review_text: String,
}

#[derive(Debug, Default)]
pub struct IngestReport {
    pub interactions: Vec<Interaction>,
    pub skipped: usize,
    pub warnings: Vec<String>,
}

/// Parse a JSON-lines file with fields `{user_id, item_id, rating, review_text}`.
///
/// Malformed or field-missing lines are skipped and counted; an unreadable
/// file is fatal. Ratings are accepted as integers or integral floats.
pub fn ingest(path: &Path) -> Result<IngestReport> {
    let file = File::open(path).map_err(|e| SermlError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut report = IngestReport::default();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| SermlError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawRecord>(&line) {
            Ok(raw) => {
                let rating = match rating_from_value(&raw.rating) {
                    Some(r) => r,
                    None => {
                        report.skipped += 1;
                        report
                            .warnings
                            .push(format!("line {}: bad rating value", lineno + 1));
                        continue;
                    }
                };
                report.interactions.push(Interaction {
                    user_id: raw.user_id,
                    item_id: raw.item_id,
                    rating,
                    review: raw.review_text,
                    split: Split::Train,
                });
            }
            Err(e) => {
                report.skipped += 1;
                report.warnings.push(format!("line {}: {e}", lineno + 1));
            }
        }
    }
    Ok(report)
}

fn rating_from_value(v: &serde_json::Value) -> Option<u8> {
    match v {
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_u64() {
                u8::try_from(i).ok()
            } else {
                let f = n.as_f64()?;
                if f.fract() == 0.0 && f >= 0.0 && f <= u8::MAX as f64 {
                    Some(f as u8)
                } else {
                    None
                }
            }
        }
        _ => None,
    }
}

/// Iteratively drop users with fewer than `k_user` interactions and items
/// with fewer than `k_item`, until a fixed point.
pub fn kcore_filter(mut data: Vec<Interaction>, k_user: usize, k_item: usize) -> Vec<Interaction> {
    assert!(k_user >= 1 && k_item >= 1, "k-core thresholds must be >= 1");
    loop {
        let keep: Vec<bool> = {
            let mut user_counts: HashMap<&str, usize> = HashMap::new();
            let mut item_counts: HashMap<&str, usize> = HashMap::new();
            for it in &data {
                *user_counts.entry(it.user_id.as_str()).or_default() += 1;
                *item_counts.entry(it.item_id.as_str()).or_default() += 1;
            }
            data.iter()
                .map(|it| {
                    user_counts[it.user_id.as_str()] >= k_user
                        && item_counts[it.item_id.as_str()] >= k_item
                })
                .collect()
        };
        if keep.iter().all(|k| *k) {
            return data;
        }
        let mut idx = 0;
        data.retain(|_| {
            let k = keep[idx];
            idx += 1;
            k
        });
    }
}

/// Assign splits in place. Assignment is per unique (user, item) pair so no
/// pair can straddle splits; any user left without a train interaction has
/// all of their interactions reassigned to train.
pub fn split_interactions(
    data: &mut [Interaction],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<()> {
    let (r_train, r_valid, r_test) = ratios;
    if (r_train + r_valid + r_test - 1.0).abs() > 1e-9 {
        return Err(SermlError::Data(format!(
            "split ratios must sum to 1, got {:?}",
            ratios
        )));
    }
    if r_train < 0.0 || r_valid < 0.0 || r_test < 0.0 {
        return Err(SermlError::Data("split ratios must be non-negative".into()));
    }

    // Unique pairs in first-occurrence order, then a seeded shuffle.
    let mut pair_order: Vec<(String, String)> = Vec::new();
    let mut seen: HashMap<(String, String), ()> = HashMap::new();
    for it in data.iter() {
        let key = (it.user_id.clone(), it.item_id.clone());
        if seen.insert(key.clone(), ()).is_none() {
            pair_order.push(key);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pair_order.shuffle(&mut rng);

    let n = pair_order.len();
    let n_train = (r_train * n as f64).round() as usize;
    let n_valid = ((r_valid * n as f64).round() as usize).min(n - n_train.min(n));
    let mut assignment: HashMap<(String, String), Split> = HashMap::new();
    for (i, pair) in pair_order.into_iter().enumerate() {
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_valid {
            Split::Valid
        } else {
            Split::Test
        };
        assignment.insert(pair, split);
    }

    for it in data.iter_mut() {
        it.split = assignment[&(it.user_id.clone(), it.item_id.clone())];
    }

    // Reassign interactions of users that never appear in train.
    let mut has_train: HashMap<&str, bool> = HashMap::new();
    for it in data.iter() {
        let e = has_train.entry(it.user_id.as_str()).or_insert(false);
        if it.split == Split::Train {
            *e = true;
        }
    }
    let orphan_users: Vec<String> = has_train
        .iter()
        .filter(|(_, v)| !**v)
        .map(|(k, _)| k.to_string())
        .collect();
    if !orphan_users.is_empty() {
        let orphan_set: std::collections::HashSet<&str> =
            orphan_users.iter().map(|s| s.as_str()).collect();
        for it in data.iter_mut() {
            if orphan_set.contains(it.user_id.as_str()) {
                it.split = Split::Train;
            }
        }
    }
    Ok(())
}

/// Counts and density over a filtered interaction set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_users: usize,
    pub n_items: usize,
    pub n_interactions: usize,
    pub density: f64,
    pub user_counts: Vec<usize>,
    pub item_counts: Vec<usize>,
}

impl DatasetStats {
    pub fn from_interactions(data: &[Interaction]) -> Self {
        let mut users: HashMap<&str, usize> = HashMap::new();
        let mut items: HashMap<&str, usize> = HashMap::new();
        for it in data {
            let next = users.len();
            users.entry(it.user_id.as_str()).or_insert(next);
            let next = items.len();
            items.entry(it.item_id.as_str()).or_insert(next);
        }
        let mut user_counts = vec![0usize; users.len()];
        let mut item_counts = vec![0usize; items.len()];
        for it in data {
            user_counts[users[it.user_id.as_str()]] += 1;
            item_counts[items[it.item_id.as_str()]] += 1;
        }
        let n_users = users.len();
        let n_items = items.len();
        let n_interactions = data.len();
        let density = if n_users * n_items == 0 {
            0.0
        } else {
            n_interactions as f64 / (n_users as f64 * n_items as f64)
        };
        DatasetStats {
            n_users,
            n_items,
            n_interactions,
            density,
            user_counts,
            item_counts,
        }
    }
}
