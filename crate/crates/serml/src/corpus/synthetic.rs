//! Synthetic two-category corpora for experiments and tests.
//!
//! Items come in groups that share *identical* user sets, so co-occurrence
//! alone cannot tell group members apart. Within each group, half the items
//! carry reviews drawn from one topical vocabulary and half from another;
//! that split is the semantic ground truth experiments measure against.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Interaction, Split};
use crate::error::{Result, SermlError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Category {
    A,
    B,
}

const WORDS_A: [&str; 10] = [
    "lens", "focus", "shutter", "aperture", "tripod", "zoom", "exposure", "bokeh", "sensor",
    "flash",
];
const WORDS_B: [&str; 10] = [
    "blade", "whisk", "skillet", "simmer", "dough", "oven", "spatula", "marinade", "grill",
    "knife",
];
const FILLER: [&str; 10] = [
    "the", "this", "really", "works", "well", "good", "very", "nice", "solid", "daily",
];

#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub n_users: usize,
    /// Groups of four items (two per category) sharing one user set.
    pub n_groups: usize,
    pub users_per_group: usize,
    pub seed: u64,
    /// Swap the review vocabulary of the second item of each category pair,
    /// so the semantic partition no longer aligns with item slot order.
    pub relabel: bool,
    pub rating_a: u8,
    pub rating_b: u8,
    pub sentences_per_review: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_users: 50,
            n_groups: 5,
            users_per_group: 10,
            seed: 42,
            relabel: false,
            rating_a: 5,
            rating_b: 2,
            sentences_per_review: 2,
        }
    }
}

impl SyntheticSpec {
    /// Tiny variant for fast unit tests.
    pub fn small() -> Self {
        SyntheticSpec {
            n_users: 12,
            n_groups: 2,
            users_per_group: 6,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub interactions: Vec<Interaction>,
    pub items: Vec<String>,
    /// Which review vocabulary each item's reviews are drawn from.
    pub semantic_category: HashMap<String, Category>,
    /// Item ids sharing identical interaction rows, one array per group.
    pub groups: Vec<[String; 4]>,
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_items = spec.n_groups * 4;
    let items: Vec<String> = (0..n_items).map(|i| format!("item{i:03}")).collect();

    // Slot semantics: without relabeling slots 0,1 -> A and 2,3 -> B; with
    // relabeling the second item of each pair swaps vocabulary.
    let slot_category = |slot: usize| -> Category {
        let base = if slot < 2 { Category::A } else { Category::B };
        if spec.relabel && (slot == 1 || slot == 3) {
            match base {
                Category::A => Category::B,
                Category::B => Category::A,
            }
        } else {
            base
        }
    };

    let mut semantic_category = HashMap::new();
    let mut groups = Vec::new();
    for g in 0..spec.n_groups {
        let mut arr: [String; 4] = Default::default();
        for slot in 0..4 {
            let id = items[g * 4 + slot].clone();
            semantic_category.insert(id.clone(), slot_category(slot));
            arr[slot] = id;
        }
        groups.push(arr);
    }

    // Group membership: a user in a group interacts with all four items.
    let mut members: Vec<Vec<usize>> = Vec::new();
    let all_users: Vec<usize> = (0..spec.n_users).collect();
    for _ in 0..spec.n_groups {
        let mut chosen = all_users.clone();
        chosen.shuffle(&mut rng);
        chosen.truncate(spec.users_per_group.min(spec.n_users));
        chosen.sort_unstable();
        members.push(chosen);
    }
    // Users left out of every group join one at random; this preserves the
    // identical-rows property because membership is per group.
    let mut touched = vec![false; spec.n_users];
    for m in &members {
        for u in m {
            touched[*u] = true;
        }
    }
    for (u, t) in touched.iter().enumerate() {
        if !t {
            let g = rng.gen_range(0..spec.n_groups);
            members[g].push(u);
            members[g].sort_unstable();
        }
    }

    let mut interactions = Vec::new();
    for (g, group_members) in members.iter().enumerate() {
        for &u in group_members {
            for slot in 0..4 {
                let item_id = items[g * 4 + slot].clone();
                let cat = semantic_category[&item_id];
                let review = gen_review(cat, spec.sentences_per_review, &mut rng);
                interactions.push(Interaction {
                    user_id: format!("user{u:03}"),
                    item_id,
                    rating: match cat {
                        Category::A => spec.rating_a,
                        Category::B => spec.rating_b,
                    },
                    review,
                    split: Split::Train,
                });
            }
        }
    }

    SyntheticData {
        interactions,
        items,
        semantic_category,
        groups,
    }
}

fn gen_review<R: Rng>(cat: Category, sentences: usize, rng: &mut R) -> String {
    let pool: &[&str] = match cat {
        Category::A => &WORDS_A,
        Category::B => &WORDS_B,
    };
    let mut out = String::new();
    for _ in 0..sentences {
        let n_words = rng.gen_range(4..=7);
        let words: Vec<&str> = (0..n_words)
            .map(|_| {
                if rng.gen_bool(0.6) {
                    pool[rng.gen_range(0..pool.len())]
                } else {
                    FILLER[rng.gen_range(0..FILLER.len())]
                }
            })
            .collect();
        out.push_str(&words.join(" "));
        out.push_str(". ");
    }
    out.trim_end().to_string()
}

/// Unstructured random interactions over a large catalog, used by
/// null-model checks that need big candidate pools.
pub fn generate_uniform(
    n_users: usize,
    n_items: usize,
    per_user: usize,
    seed: u64,
) -> Vec<Interaction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_users * per_user);
    for u in 0..n_users {
        let mut chosen: Vec<usize> = (0..n_items).collect();
        chosen.shuffle(&mut rng);
        chosen.truncate(per_user);
        for (k, i) in chosen.into_iter().enumerate() {
            out.push(Interaction {
                user_id: format!("user{u:04}"),
                item_id: format!("item{i:04}"),
                rating: (k % 5 + 1) as u8,
                review: format!("{} {}.", FILLER[k % FILLER.len()], FILLER[(k + 3) % FILLER.len()]),
                split: Split::Train,
            });
        }
    }
    out
}

/// Write interactions in the JSON-lines ingest format.
pub fn write_jsonl(interactions: &[Interaction], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| SermlError::io(path, e))?;
    for it in interactions {
        let line = serde_json::json!({
            "user_id": it.user_id,
            "item_id": it.item_id,
            "rating": it.rating,
            "review_text": it.review,
        });
        writeln!(f, "{line}").map_err(|e| SermlError::io(path, e))?;
    }
    Ok(())
}
