//! Prepared datasets: indexed interactions with tokenized reviews, ready for
//! training, plus their on-disk layout (`train.bin`/`valid.bin`/`test.bin`
//! and a JSON manifest).

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    build_vocabulary, ingest, kcore_filter, split_interactions, tokenize, DatasetStats,
    Interaction, Split, TokenizedDoc, Vocabulary,
};
use crate::error::{Result, SermlError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

/// Everything needed to interpret the binary split files: id maps, the
/// vocabulary with its caps, counts, and the preparation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataManifest {
    pub vocab_size: usize,
    pub max_sentences: usize,
    pub max_words: usize,
    pub counts: SplitCounts,
    pub seed: u64,
    pub kcore: usize,
    pub min_token_freq: usize,
    pub rmax: u8,
    /// Train-split interactions whose review tokenized to zero sentences.
    pub empty_review_train: usize,
    pub users: Vec<String>,
    pub items: Vec<String>,
    pub vocab: Vocabulary,
}

impl DataManifest {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }
}

/// One interaction with ids resolved and the review tokenized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedInteraction {
    pub user: u32,
    pub item: u32,
    pub rating: u8,
    pub doc: TokenizedDoc,
}

/// Prepared splits plus per-user positive sets.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub manifest: DataManifest,
    pub train: Vec<EncodedInteraction>,
    pub valid: Vec<EncodedInteraction>,
    pub test: Vec<EncodedInteraction>,
    user_index: HashMap<String, u32>,
    item_index: HashMap<String, u32>,
    train_positives: Vec<BTreeSet<u32>>,
    all_positives: Vec<BTreeSet<u32>>,
}

/// Knobs for [`PreparedData::from_interactions`].
#[derive(Clone, Debug)]
pub struct PrepareOptions {
    pub min_token_freq: usize,
    pub max_sentences: usize,
    pub max_words: usize,
    pub rmax: u8,
    pub seed: u64,
    pub kcore: usize,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            min_token_freq: 2,
            max_sentences: 30,
            max_words: 50,
            rmax: 5,
            seed: 42,
            kcore: 1,
        }
    }
}

impl PreparedData {
    /// Index users/items in first-occurrence order, build the vocabulary
    /// from train reviews, and tokenize every split. Interactions must
    /// already carry their split assignment.
    pub fn from_interactions(data: &[Interaction], opts: &PrepareOptions) -> Result<Self> {
        for it in data {
            if it.rating < 1 || it.rating > opts.rmax {
                return Err(SermlError::Data(format!(
                    "rating {} outside [1, {}] for user {}",
                    it.rating, opts.rmax, it.user_id
                )));
            }
        }

        let mut users: Vec<String> = Vec::new();
        let mut items: Vec<String> = Vec::new();
        let mut user_index: HashMap<String, u32> = HashMap::new();
        let mut item_index: HashMap<String, u32> = HashMap::new();
        for it in data {
            user_index.entry(it.user_id.clone()).or_insert_with(|| {
                users.push(it.user_id.clone());
                (users.len() - 1) as u32
            });
            item_index.entry(it.item_id.clone()).or_insert_with(|| {
                items.push(it.item_id.clone());
                (items.len() - 1) as u32
            });
        }

        let vocab = build_vocabulary(
            data.iter()
                .filter(|it| it.split == Split::Train)
                .map(|it| it.review.as_str()),
            opts.min_token_freq,
            opts.max_sentences,
            opts.max_words,
        );

        let mut train = Vec::new();
        let mut valid = Vec::new();
        let mut test = Vec::new();
        let mut empty_review_train = 0usize;
        for it in data {
            let doc = tokenize(&it.review, &vocab);
            let enc = EncodedInteraction {
                user: user_index[&it.user_id],
                item: item_index[&it.item_id],
                rating: it.rating,
                doc,
            };
            match it.split {
                Split::Train => {
                    if enc.doc.is_empty() {
                        empty_review_train += 1;
                    }
                    train.push(enc);
                }
                Split::Valid => valid.push(enc),
                Split::Test => test.push(enc),
            }
        }

        let manifest = DataManifest {
            vocab_size: vocab.len(),
            max_sentences: opts.max_sentences,
            max_words: opts.max_words,
            counts: SplitCounts {
                train: train.len(),
                valid: valid.len(),
                test: test.len(),
            },
            seed: opts.seed,
            kcore: opts.kcore,
            min_token_freq: opts.min_token_freq,
            rmax: opts.rmax,
            empty_review_train,
            users,
            items,
            vocab,
        };

        let mut out = PreparedData {
            manifest,
            train,
            valid,
            test,
            user_index,
            item_index,
            train_positives: Vec::new(),
            all_positives: Vec::new(),
        };
        out.rebuild_positive_sets();
        Ok(out)
    }

    fn rebuild_positive_sets(&mut self) {
        let n_users = self.manifest.n_users();
        let mut train_pos = vec![BTreeSet::new(); n_users];
        let mut all_pos = vec![BTreeSet::new(); n_users];
        for it in &self.train {
            train_pos[it.user as usize].insert(it.item);
            all_pos[it.user as usize].insert(it.item);
        }
        for it in self.valid.iter().chain(&self.test) {
            all_pos[it.user as usize].insert(it.item);
        }
        self.train_positives = train_pos;
        self.all_positives = all_pos;
    }

    pub fn user_index(&self, user_id: &str) -> Result<u32> {
        self.user_index
            .get(user_id)
            .copied()
            .ok_or_else(|| SermlError::UnknownUser(user_id.to_string()))
    }

    pub fn item_index(&self, item_id: &str) -> Result<u32> {
        self.item_index
            .get(item_id)
            .copied()
            .ok_or_else(|| SermlError::UnknownItem(item_id.to_string()))
    }

    /// Items the user interacted with in the train split.
    pub fn train_positives(&self, user: u32) -> &BTreeSet<u32> {
        &self.train_positives[user as usize]
    }

    /// Items the user interacted with in any split.
    pub fn all_positives(&self, user: u32) -> &BTreeSet<u32> {
        &self.all_positives[user as usize]
    }

    pub fn split(&self, split: Split) -> &[EncodedInteraction] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| SermlError::io(dir, e))?;
        let manifest_path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| SermlError::Serde(e.to_string()))?;
        fs::write(&manifest_path, json).map_err(|e| SermlError::io(&manifest_path, e))?;
        for (name, split) in [
            ("train.bin", &self.train),
            ("valid.bin", &self.valid),
            ("test.bin", &self.test),
        ] {
            let path = dir.join(name);
            let bytes =
                bincode::serialize(split).map_err(|e| SermlError::Serde(e.to_string()))?;
            fs::write(&path, bytes).map_err(|e| SermlError::io(&path, e))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("manifest.json");
        let json =
            fs::read_to_string(&manifest_path).map_err(|e| SermlError::io(&manifest_path, e))?;
        let manifest: DataManifest =
            serde_json::from_str(&json).map_err(|e| SermlError::Serde(e.to_string()))?;
        let mut splits: Vec<Vec<EncodedInteraction>> = Vec::new();
        for name in ["train.bin", "valid.bin", "test.bin"] {
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(|e| SermlError::io(&path, e))?;
            splits.push(
                bincode::deserialize(&bytes).map_err(|e| SermlError::Serde(e.to_string()))?,
            );
        }
        let test = splits.pop().unwrap();
        let valid = splits.pop().unwrap();
        let train = splits.pop().unwrap();
        let user_index = manifest
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i as u32))
            .collect();
        let item_index = manifest
            .items
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i as u32))
            .collect();
        let mut out = PreparedData {
            manifest,
            train,
            valid,
            test,
            user_index,
            item_index,
            train_positives: Vec::new(),
            all_positives: Vec::new(),
        };
        out.rebuild_positive_sets();
        Ok(out)
    }

    pub fn stats(&self) -> DatasetStats {
        let mut user_counts = vec![0usize; self.manifest.n_users()];
        let mut item_counts = vec![0usize; self.manifest.n_items()];
        let mut n = 0usize;
        for it in self.train.iter().chain(&self.valid).chain(&self.test) {
            user_counts[it.user as usize] += 1;
            item_counts[it.item as usize] += 1;
            n += 1;
        }
        let n_users = self.manifest.n_users();
        let n_items = self.manifest.n_items();
        DatasetStats {
            n_users,
            n_items,
            n_interactions: n,
            density: if n_users * n_items == 0 {
                0.0
            } else {
                n as f64 / (n_users as f64 * n_items as f64)
            },
            user_counts,
            item_counts,
        }
    }
}

/// End-to-end pipeline behind `serml prepare`: ingest the JSON-lines file,
/// k-core filter, split 80/10/10, tokenize, and write the output directory.
pub fn prepare(input: &Path, out: &Path, opts: &PrepareOptions) -> Result<(PreparedData, usize)> {
    let report = ingest(input)?;
    let filtered = kcore_filter(report.interactions, opts.kcore, opts.kcore);
    let mut data = filtered;
    split_interactions(&mut data, (0.8, 0.1, 0.1), opts.seed)?;
    let prepared = PreparedData::from_interactions(&data, opts)?;
    prepared.save(out)?;
    Ok((prepared, report.skipped))
}
