//! Property tests over the data-handling and scoring invariants.

use std::collections::{BTreeSet, HashMap, HashSet};

use proptest::prelude::*;

use serml::corpus::{
    kcore_filter, sample_negatives, split_interactions, tokenize, Interaction, Split, Vocabulary,
};
use serml::evalkit::{hit_at, ndcg_at};
use serml::metric::clip_rows;
use serml::params::Mat;

fn interactions_strategy(max: usize) -> impl Strategy<Value = Vec<Interaction>> {
    prop::collection::vec((0..12u8, 0..12u8, 1..=5u8), 1..max).prop_map(|tuples| {
        tuples
            .into_iter()
            .map(|(u, i, r)| Interaction {
                user_id: format!("u{u}"),
                item_id: format!("i{i}"),
                rating: r,
                review: String::new(),
                split: Split::Train,
            })
            .collect()
    })
}

proptest! {
    /// Re-applying the k-core filter to its own output changes nothing, and
    /// every survivor meets both thresholds.
    #[test]
    fn kcore_filter_reaches_a_fixed_point(
        data in interactions_strategy(60),
        k_user in 1usize..4,
        k_item in 1usize..4,
    ) {
        let once = kcore_filter(data, k_user, k_item);
        let twice = kcore_filter(once.clone(), k_user, k_item);
        prop_assert_eq!(&once, &twice);
        let mut uc: HashMap<&str, usize> = HashMap::new();
        let mut ic: HashMap<&str, usize> = HashMap::new();
        for it in &once {
            *uc.entry(it.user_id.as_str()).or_default() += 1;
            *ic.entry(it.item_id.as_str()).or_default() += 1;
        }
        for it in &once {
            prop_assert!(uc[it.user_id.as_str()] >= k_user);
            prop_assert!(ic[it.item_id.as_str()] >= k_item);
        }
    }

    /// No held-out (user, item) pair appears in train, and every held-out
    /// user has at least one train interaction.
    #[test]
    fn split_isolates_heldout_pairs(data in interactions_strategy(80), seed in 0u64..500) {
        let mut data = data;
        split_interactions(&mut data, (0.8, 0.1, 0.1), seed).unwrap();
        let train_pairs: HashSet<(&str, &str)> = data
            .iter()
            .filter(|it| it.split == Split::Train)
            .map(|it| (it.user_id.as_str(), it.item_id.as_str()))
            .collect();
        let train_users: HashSet<&str> = train_pairs.iter().map(|(u, _)| *u).collect();
        for it in data.iter().filter(|it| it.split != Split::Train) {
            prop_assert!(!train_pairs.contains(&(it.user_id.as_str(), it.item_id.as_str())));
            prop_assert!(train_users.contains(it.user_id.as_str()));
        }
    }

    /// Negative samples are distinct, within range, disjoint from the
    /// exclusion set, and capped by the pool size.
    #[test]
    fn negative_samples_respect_exclusions(
        n_items in 1usize..40,
        excluded_raw in prop::collection::btree_set(0u32..40, 0..20),
        n in 0usize..30,
        seed in 0u64..1000,
    ) {
        use rand::SeedableRng;
        let excluded: BTreeSet<u32> =
            excluded_raw.into_iter().filter(|i| (*i as usize) < n_items).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let got = sample_negatives(n_items, &excluded, n, &mut rng);
        let set: BTreeSet<u32> = got.iter().copied().collect();
        prop_assert_eq!(set.len(), got.len());
        prop_assert!(set.is_disjoint(&excluded));
        prop_assert!(got.iter().all(|i| (*i as usize) < n_items));
        let pool = n_items - excluded.len();
        prop_assert_eq!(got.len(), n.min(pool));
    }

    /// Tokenization is deterministic and honors both caps.
    #[test]
    fn tokenize_is_deterministic_and_capped(text in ".{0,200}") {
        let vocab = Vocabulary::from_tokens(["alpha", "beta", "gamma"], 4, 6);
        let a = tokenize(&text, &vocab);
        let b = tokenize(&text, &vocab);
        prop_assert_eq!(&a, &b);
        prop_assert!(a.num_sentences <= 4);
        prop_assert!(a.sentence_lengths.iter().all(|l| *l <= 6));
        a.validate(4, 6).unwrap();
    }

    /// Row clipping is idempotent and caps every row norm at 1.
    #[test]
    fn clip_rows_idempotent_and_bounded(
        rows in 1usize..8,
        cols in 1usize..8,
        scale in 0.1f64..5.0,
        seed in 0u64..100,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = Mat::from_fn(rows, cols, || rng.gen_range(-scale..scale));
        clip_rows(&mut m);
        for r in 0..rows {
            let norm = m.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(norm <= 1.0 + 1e-7);
        }
        let snapshot = m.data.clone();
        clip_rows(&mut m);
        prop_assert_eq!(m.data, snapshot);
    }

    /// The single-item discounted gain never exceeds the hit indicator and
    /// both fall with rank.
    #[test]
    fn ndcg_bounded_by_hit(rank in 1usize..100, n in 1usize..20) {
        prop_assert!(ndcg_at(rank, n) <= hit_at(rank, n));
        prop_assert!(ndcg_at(rank, n) >= ndcg_at(rank + 1, n));
    }
}
