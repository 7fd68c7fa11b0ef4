//! Joint model assembly, the combined objective, the training loop, and
//! prediction.
//!
//! The objective is `L = L_C + L_R + gamma * L_rel + rho * ||W||_F^2` (plus
//! an optional squared-error rating term). With `gamma = 0` the trainer
//! severs the semantic path: reviews are not encoded at all, so training is
//! invariant to review-text corruption.

mod checkpoint;
mod gradcheck;

pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, grad_check_with, probe_manifest, GradCheckReport, TensorCheck};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::ModelConfig;
use crate::corpus::{sample_negatives, DataManifest, PreparedData, Split, TokenizedDoc};
use crate::error::{Result, SermlError};
use crate::metric::{clip_norms, margin_loss_node, score, score_node};
use crate::params::{gaussian_init, uniform_init, Adam, Gradients, Mat, ParamId, ParamStore};
use crate::relinduce::{induce, induce_plain, InductionParams, SemanticProjector};
use crate::tape::{LeafCache, NodeId, Tape};
use crate::textenc::{classify_loss, encode_doc, DocEncoding, EncoderParams};

#[derive(Clone, Copy, Debug)]
pub struct RatingHead {
    pub scale: ParamId,
    pub offset: ParamId,
}

/// The full parameter set plus the data manifest needed to resolve ids.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub manifest: DataManifest,
    pub store: ParamStore,
    pub user_embed: ParamId,
    pub item_embed: ParamId,
    pub encoder: EncoderParams,
    pub induction: InductionParams,
    pub projector: SemanticProjector,
    pub rating_head: Option<RatingHead>,
}

impl Model {
    pub fn new(config: ModelConfig, manifest: DataManifest, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut model = Self::skeleton(config, manifest)?;
        model.init_params(rng);
        Ok(model)
    }

    /// Rebuild a model around existing tensors (checkpoint restore).
    pub fn from_parts(
        config: ModelConfig,
        manifest: DataManifest,
        params: ParamStore,
    ) -> Result<Self> {
        let mut model = Self::skeleton(config, manifest)?;
        if !model.store.same_layout(&params) {
            return Err(SermlError::Model(
                "checkpoint tensors do not match the model layout".into(),
            ));
        }
        model.store = params;
        Ok(model)
    }

    fn skeleton(config: ModelConfig, manifest: DataManifest) -> Result<Self> {
        config.validate()?;
        if manifest.vocab.len() != manifest.vocab_size {
            return Err(SermlError::Data("manifest vocab_size inconsistent".into()));
        }
        let mut store = ParamStore::new();
        let mut zero = || 0.0;
        let user_embed = store.add("user_embed", Mat::zeros(manifest.n_users(), config.d));
        let item_embed = store.add("item_embed", Mat::zeros(manifest.n_items(), config.d));
        let encoder = EncoderParams::register(&mut store, &config, manifest.vocab.len(), &mut zero);
        let induction = InductionParams::register(
            &mut store,
            config.induction,
            config.d,
            config.memory_slots,
            &mut zero,
        );
        let projector = SemanticProjector::register(&mut store, config.d, config.hidden, &mut zero);
        let rating_head = if config.rating_mode {
            Some(RatingHead {
                scale: store.add("rating.scale", Mat::zeros(1, 1)),
                offset: store.add("rating.offset", Mat::zeros(1, 1)),
            })
        } else {
            None
        };
        Ok(Model {
            config,
            manifest,
            store,
            user_embed,
            item_embed,
            encoder,
            induction,
            projector,
            rating_head,
        })
    }

    /// Latent vectors are Gaussian (mean 0.03, variance 0.01); weight
    /// tensors are uniform within the fan-in bound. The rating head starts
    /// as the constant mid-scale predictor.
    fn init_params(&mut self, rng: &mut ChaCha8Rng) {
        let latent = [self.user_embed, self.item_embed];
        let head_ids: Vec<ParamId> = self
            .rating_head
            .iter()
            .flat_map(|h| [h.scale, h.offset])
            .collect();
        {
            let mut gauss = gaussian_init(rng, 0.03, 0.1);
            for id in latent {
                for p in &mut self.store.get_mut(id).data {
                    *p = gauss();
                }
            }
        }
        {
            // Weight tensors scale with fan-in. A flat tiny range leaves the
            // encoder stuck predicting the class prior at small dimensions:
            // every content signal is a product of near-zero factors.
            for id in self.store.ids().collect::<Vec<_>>() {
                if latent.contains(&id) || head_ids.contains(&id) {
                    continue;
                }
                let scale = 1.0 / (self.store.get(id).cols as f64).sqrt();
                let mut uni = uniform_init(rng, -scale, scale);
                for p in &mut self.store.get_mut(id).data {
                    *p = uni();
                }
            }
        }
        if let Some(head) = self.rating_head {
            self.store.get_mut(head.scale).data[0] = 0.0;
            self.store.get_mut(head.offset).data[0] = (1.0 + self.config.rmax as f64) / 2.0;
        }
    }

    pub fn n_users(&self) -> usize {
        self.manifest.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.manifest.n_items()
    }

    pub fn user_vec(&self, user: u32) -> &[f64] {
        self.store.get(self.user_embed).row(user as usize)
    }

    pub fn item_vec(&self, item: u32) -> &[f64] {
        self.store.get(self.item_embed).row(item as usize)
    }

    /// Relation induced from the embeddings alone; no review text involved.
    pub fn relation(&self, user: u32, item: u32) -> Vec<f64> {
        induce_plain(
            &self.store,
            &self.induction,
            self.user_vec(user),
            self.item_vec(item),
        )
    }

    /// Product score of the induced triple.
    pub fn score_pair(&self, user: u32, item: u32) -> f64 {
        let r = self.relation(user, item);
        score(self.user_vec(user), &r, self.item_vec(item))
    }

    /// Rank candidates for a user by score, descending. Ties break by item
    /// id ascending. `n >= candidates.len()` returns the full sorted list.
    pub fn predict_topn(
        &self,
        user_id: &str,
        candidates: &[String],
        n: usize,
    ) -> Result<Vec<(String, f64)>> {
        let user = self.resolve_user(user_id)?;
        let mut scored: Vec<(String, f64)> = candidates
            .iter()
            .map(|c| {
                let item = self.resolve_item(c)?;
                Ok((c.clone(), self.score_pair(user, item)))
            })
            .collect::<Result<_>>()?;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(n);
        Ok(scored)
    }

    /// Affine rating estimate clamped to the rating scale.
    pub fn predict_rating(&self, user_id: &str, item_id: &str) -> Result<f64> {
        let head = self
            .rating_head
            .ok_or_else(|| SermlError::Model("rating head is not enabled".into()))?;
        let user = self.resolve_user(user_id)?;
        let item = self.resolve_item(item_id)?;
        Ok(self.predict_rating_ids(user, item, head))
    }

    pub fn predict_rating_ids(&self, user: u32, item: u32, head: RatingHead) -> f64 {
        let a = self.store.get(head.scale).data[0];
        let b = self.store.get(head.offset).data[0];
        let s = self.score_pair(user, item);
        (a * s + b).clamp(1.0, self.config.rmax as f64)
    }

    pub fn resolve_user(&self, user_id: &str) -> Result<u32> {
        self.manifest
            .users
            .iter()
            .position(|u| u == user_id)
            .map(|i| i as u32)
            .ok_or_else(|| SermlError::UnknownUser(user_id.to_string()))
    }

    pub fn resolve_item(&self, item_id: &str) -> Result<u32> {
        self.manifest
            .items
            .iter()
            .position(|i| i == item_id)
            .map(|i| i as u32)
            .ok_or_else(|| SermlError::UnknownItem(item_id.to_string()))
    }
}

/// One positive interaction with its sampled negatives; `doc: None` keeps
/// the text path out of the graph.
pub struct BatchItem<'a> {
    pub user: u32,
    pub item: u32,
    pub rating: u8,
    pub doc: Option<&'a TokenizedDoc>,
    pub negatives: &'a [u32],
}

/// The objective value split into its reported parts. `l_rel`, `frob` and
/// `l_rating` are raw (unweighted); `recompose` applies the configured
/// weights.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LossComponents {
    pub total: f64,
    pub l_c: f64,
    pub l_r: f64,
    pub l_rel: f64,
    pub frob: f64,
    pub l_rating: f64,
    pub gamma: f64,
    pub rho: f64,
    pub rating_weight: f64,
}

impl LossComponents {
    pub fn recompose(&self) -> f64 {
        self.l_c
            + self.l_r
            + self.gamma * self.l_rel
            + self.rho * self.frob
            + self.rating_weight * self.l_rating
    }
}

/// Build the full objective on the tape. Returns the loss node and the
/// component values.
pub fn joint_loss_graph(
    tape: &mut Tape,
    model: &Model,
    batch: &[BatchItem],
) -> Result<(NodeId, LossComponents)> {
    let cfg = &model.config;
    let store = &model.store;
    let mut cache = LeafCache::new();

    let mut encodings: Vec<DocEncoding> = Vec::new();
    let mut doc_ratings: Vec<u8> = Vec::new();
    let mut hinge_terms = Vec::new();
    let mut rel_terms = Vec::new();
    let mut rating_terms = Vec::new();

    for ex in batch {
        let u = cache.row_leaf(tape, store, model.user_embed, ex.user as usize);
        let v = cache.row_leaf(tape, store, model.item_embed, ex.item as usize);
        let r = induce(tape, &mut cache, store, &model.induction, u, v);
        let pos_score = score_node(tape, u, r, v);

        for neg in ex.negatives {
            let vn = cache.row_leaf(tape, store, model.item_embed, *neg as usize);
            let rn = induce(tape, &mut cache, store, &model.induction, u, vn);
            let neg_score = score_node(tape, u, rn, vn);
            hinge_terms.push(margin_loss_node(tape, pos_score, neg_score, cfg.margin));
        }

        if let Some(doc) = ex.doc {
            if !doc.is_empty() {
                let enc = encode_doc(tape, &mut cache, store, &model.encoder, doc, u, v)?;
                let rel = crate::relinduce::relation_regression_loss(
                    tape,
                    &mut cache,
                    store,
                    &model.projector,
                    r,
                    enc.doc_vec,
                    cfg.stop_grad_semantic,
                )?;
                rel_terms.push(rel);
                encodings.push(enc);
                doc_ratings.push(ex.rating);
            }
        }

        if let Some(head) = model.rating_head {
            let a = cache.leaf(tape, store, head.scale);
            let b = cache.leaf(tape, store, head.offset);
            let scaled = tape.mul(a, pos_score);
            let pred = tape.add(scaled, b);
            let err = tape.offset(pred, -(ex.rating as f64));
            rating_terms.push(tape.sum_sq(err));
        }
    }

    let l_c = if encodings.is_empty() {
        tape.zeros(1)
    } else {
        classify_loss(tape, &encodings, &doc_ratings, cfg.rmax, cfg.reduction)?
    };
    let l_r = tape.mean(&hinge_terms);
    let l_rel = tape.mean(&rel_terms);
    let proj_leaf = cache.leaf(tape, store, model.projector.w);
    let frob = tape.sum_sq(proj_leaf);

    let weighted_rel = tape.scale(l_rel, cfg.gamma);
    let weighted_frob = tape.scale(frob, cfg.rho);
    let mut terms = vec![l_c, l_r, weighted_rel, weighted_frob];

    let l_rating = tape.mean(&rating_terms);
    if model.rating_head.is_some() {
        let weighted = tape.scale(l_rating, cfg.rating_weight);
        terms.push(weighted);
    }

    let total_node = tape.add_n(&terms);
    let comps = LossComponents {
        total: tape.scalar(total_node),
        l_c: tape.scalar(l_c),
        l_r: tape.scalar(l_r),
        l_rel: tape.scalar(l_rel),
        frob: tape.scalar(frob),
        l_rating: tape.scalar(l_rating),
        gamma: cfg.gamma,
        rho: cfg.rho,
        rating_weight: if model.rating_head.is_some() {
            cfg.rating_weight
        } else {
            0.0
        },
    };
    let finite = comps.total.is_finite()
        && comps.l_c.is_finite()
        && comps.l_r.is_finite()
        && comps.l_rel.is_finite()
        && comps.frob.is_finite()
        && comps.l_rating.is_finite();
    if !finite {
        return Err(SermlError::NonFinite(format!("{comps:?}")));
    }
    Ok((total_node, comps))
}

/// Forward-only objective evaluation.
pub fn joint_loss(model: &Model, batch: &[BatchItem]) -> Result<LossComponents> {
    let mut tape = Tape::new();
    joint_loss_graph(&mut tape, model, batch).map(|(_, c)| c)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "L_C")]
    pub l_c: f64,
    #[serde(rename = "L_R")]
    pub l_r: f64,
    #[serde(rename = "L_rel")]
    pub l_rel: f64,
    pub valid_ndcg10: Option<f64>,
    /// Present in rating mode only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid_rmse: Option<f64>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    pub diverged: bool,
    pub best_epoch: usize,
    /// Selection metric at the best epoch: validation NDCG@10, or negated
    /// validation RMSE in rating mode.
    pub best_valid_metric: Option<f64>,
}

/// Number of sampled negatives used for the per-epoch validation ranking.
const VALID_EVAL_NEGATIVES: usize = 500;

/// Mini-batch training with per-step norm clipping, per-epoch validation
/// NDCG@10, early stopping, and best-checkpoint tracking. Deterministic for
/// a fixed seed on a single worker.
pub fn train(config: &ModelConfig, data: &PreparedData) -> Result<TrainOutcome> {
    train_with(config, data, |_| {})
}

/// [`train`] with a per-epoch observer, called right after each epoch's log
/// entry is finalized (live logging, progress bars).
pub fn train_with(
    config: &ModelConfig,
    data: &PreparedData,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(SermlError::Data("empty train split".into()));
    }
    if data.manifest.rmax != config.rmax {
        return Err(SermlError::Config(format!(
            "config rmax {} disagrees with prepared data rmax {}",
            config.rmax, data.manifest.rmax
        )));
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::new(config.clone(), data.manifest.clone(), &mut init_rng)?;
    let mut train_rng = ChaCha8Rng::seed_from_u64(config.seed);
    train_rng.set_stream(1);
    // Validation sampling must not consume the training stream.
    let valid_eval_seed = config.seed.wrapping_add(0x9E37_79B9);

    let mut adam = Adam::new(&model.store);
    let mut grads = Gradients::zeros_like(&model.store);
    let n_items = model.n_items();
    let use_text = config.gamma > 0.0;

    let mut log = Vec::new();
    let mut best: Option<(f64, ParamStore, usize)> = None;
    // Divergence mid-epoch falls back to the previous epoch-end snapshot,
    // or the initialization if nothing has completed.
    let mut last_good: Option<(ParamStore, usize)> = Some((model.store.clone(), 0));
    let mut diverged = false;

    'epochs: for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..data.train.len()).collect();
        order.shuffle(&mut train_rng);

        let mut sums = [0.0f64; 4];
        let mut n_batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let negatives: Vec<Vec<u32>> = chunk
                .iter()
                .map(|&i| {
                    let it = &data.train[i];
                    sample_negatives(
                        n_items,
                        data.train_positives(it.user),
                        config.neg_per_pos,
                        &mut train_rng,
                    )
                })
                .collect();
            let batch: Vec<BatchItem> = chunk
                .iter()
                .zip(&negatives)
                .map(|(&i, negs)| {
                    let it = &data.train[i];
                    BatchItem {
                        user: it.user,
                        item: it.item,
                        rating: it.rating,
                        doc: if use_text { Some(&it.doc) } else { None },
                        negatives: negs,
                    }
                })
                .collect();

            let mut tape = Tape::new();
            let (loss_node, comps) = match joint_loss_graph(&mut tape, &model, &batch) {
                Ok(ok) => ok,
                Err(SermlError::NonFinite(d)) => {
                    eprintln!("warning: aborting training on non-finite loss: {d}");
                    diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            if comps.total > 1e6 {
                eprintln!("warning: aborting training on divergent loss {}", comps.total);
                diverged = true;
                break 'epochs;
            }

            grads.reset();
            tape.backward(loss_node, &mut grads);
            adam.step(&mut model.store, &grads, config.lr);
            clip_norms(&mut model.store, model.user_embed);
            clip_norms(&mut model.store, model.item_embed);

            sums[0] += comps.total;
            sums[1] += comps.l_c;
            sums[2] += comps.l_r;
            sums[3] += comps.l_rel;
            n_batches += 1;
        }

        let denom = n_batches.max(1) as f64;
        let valid_ndcg10 = if data.valid.is_empty() {
            None
        } else {
            let res = crate::evalkit::rank_eval(
                &model,
                data,
                Split::Valid,
                VALID_EVAL_NEGATIVES,
                valid_eval_seed,
            )?;
            Some(res.ndcg10)
        };
        let valid_rmse = if model.rating_head.is_some() && !data.valid.is_empty() {
            Some(crate::evalkit::rmse(&model, data, Split::Valid)?)
        } else {
            None
        };
        let entry = EpochLog {
            epoch,
            l: sums[0] / denom,
            l_c: sums[1] / denom,
            l_r: sums[2] / denom,
            l_rel: sums[3] / denom,
            valid_ndcg10,
            valid_rmse,
        };
        on_epoch(&entry);
        log.push(entry);
        last_good = Some((model.store.clone(), epoch));

        // Checkpoint selection and early stopping track validation NDCG@10,
        // or validation RMSE when the rating head is the training target.
        let selection = match valid_rmse {
            Some(r) => Some(-r),
            None => valid_ndcg10,
        };
        match selection {
            Some(v) => {
                let improved = best.as_ref().is_none_or(|(b, _, _)| v > *b);
                if improved {
                    best = Some((v, model.store.clone(), epoch));
                } else if let Some((_, _, best_epoch)) = &best {
                    if epoch - best_epoch >= config.patience {
                        break 'epochs;
                    }
                }
            }
            None => {
                // No validation split: the latest epoch is the checkpoint.
            }
        }
    }

    let (best_params, best_epoch, best_valid) = match (best, last_good) {
        (Some((v, params, epoch)), _) => (params, epoch, Some(v)),
        (None, Some((params, epoch))) => (params, epoch, None),
        (None, None) => (model.store.clone(), 0, None),
    };
    model.store = best_params;

    let checkpoint = Checkpoint {
        config: config.clone(),
        manifest: data.manifest.clone(),
        params: model.store.clone(),
        epoch: best_epoch,
        rng: train_rng,
    };
    Ok(TrainOutcome {
        checkpoint,
        log,
        diverged,
        best_epoch,
        best_valid_metric: best_valid,
    })
}
