//! Review encoding: word-level LSTM with user/item-conditioned attention
//! pooled per sentence, a sentence-level LSTM with a second attention pass
//! over the document, and a sentiment classification head over the rating
//! classes.
//!
//! Pad positions never enter the recurrence or the attention softmax, so
//! appending padding leaves every output bit-identical.


use crate::config::{ModelConfig, Reduction};
use crate::corpus::TokenizedDoc;
use crate::error::{Result, SermlError};
use crate::params::{Mat, ParamId, ParamStore};
use crate::tape::{LeafCache, NodeId, Tape};

/// Single-layer unidirectional LSTM cell parameters. The stacked weight is
/// `4H x (H + input)` over `[h_prev; x]`, gate order `[input, forget, cell,
/// output]`.
#[derive(Clone, Copy, Debug)]
pub struct LstmParams {
    pub w: ParamId,
    pub b: ParamId,
    pub hidden: usize,
    pub input: usize,
}

impl LstmParams {
    fn register(
        store: &mut ParamStore,
        name: &str,
        hidden: usize,
        input: usize,
        init: &mut impl FnMut() -> f64,
    ) -> Self {
        let w = store.add(&format!("{name}.w"), Mat::from_fn(4 * hidden, hidden + input, &mut *init));
        let b = store.add(&format!("{name}.b"), Mat::from_fn(4 * hidden, 1, &mut *init));
        LstmParams {
            w,
            b,
            hidden,
            input,
        }
    }
}

/// Additive attention parameters: score = w1 · tanh(w2·h + w3·[u;v] + b).
#[derive(Clone, Copy, Debug)]
pub struct AttnParams {
    pub w1: ParamId,
    pub w2: ParamId,
    pub w3: ParamId,
    pub b: ParamId,
}

impl AttnParams {
    fn register(
        store: &mut ParamStore,
        name: &str,
        attn: usize,
        hidden: usize,
        cond: usize,
        init: &mut impl FnMut() -> f64,
    ) -> Self {
        AttnParams {
            w1: store.add(&format!("{name}.w1"), Mat::from_fn(1, attn, &mut *init)),
            w2: store.add(&format!("{name}.w2"), Mat::from_fn(attn, hidden, &mut *init)),
            w3: store.add(&format!("{name}.w3"), Mat::from_fn(attn, cond, &mut *init)),
            b: store.add(&format!("{name}.b"), Mat::from_fn(attn, 1, &mut *init)),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EncoderParams {
    pub word_embed: ParamId,
    pub word_lstm: LstmParams,
    pub sent_lstm: LstmParams,
    pub word_attn: AttnParams,
    pub sent_attn: AttnParams,
    pub classifier_w: ParamId,
    pub classifier_b: ParamId,
    pub hidden: usize,
}

impl EncoderParams {
    pub fn register(
        store: &mut ParamStore,
        cfg: &ModelConfig,
        vocab_size: usize,
        init: &mut impl FnMut() -> f64,
    ) -> Self {
        let word_embed = store.add(
            "textenc.word_embed",
            Mat::from_fn(vocab_size, cfg.word_dim, &mut *init),
        );
        let word_lstm =
            LstmParams::register(store, "textenc.word_lstm", cfg.hidden, cfg.word_dim, &mut *init);
        let sent_lstm =
            LstmParams::register(store, "textenc.sent_lstm", cfg.hidden, cfg.hidden, &mut *init);
        let word_attn =
            AttnParams::register(store, "textenc.word_attn", cfg.attn, cfg.hidden, 2 * cfg.d, &mut *init);
        let sent_attn =
            AttnParams::register(store, "textenc.sent_attn", cfg.attn, cfg.hidden, 2 * cfg.d, &mut *init);
        let classifier_w = store.add(
            "textenc.classifier.w",
            Mat::from_fn(cfg.rmax as usize, cfg.hidden, &mut *init),
        );
        let classifier_b = store.add(
            "textenc.classifier.b",
            Mat::from_fn(cfg.rmax as usize, 1, &mut *init),
        );
        EncoderParams {
            word_embed,
            word_lstm,
            sent_lstm,
            word_attn,
            sent_attn,
            classifier_w,
            classifier_b,
            hidden: cfg.hidden,
        }
    }
}

/// Run an LSTM over `inputs`, returning every hidden state.
pub fn lstm_sequence(
    tape: &mut Tape,
    cache: &mut LeafCache,
    store: &ParamStore,
    p: &LstmParams,
    inputs: &[NodeId],
) -> Vec<NodeId> {
    let w = cache.leaf(tape, store, p.w);
    let b = cache.leaf(tape, store, p.b);
    let hdim = p.hidden;
    let mut h = tape.zeros(hdim);
    let mut c = tape.zeros(hdim);
    let mut out = Vec::with_capacity(inputs.len());
    for x in inputs {
        let hx = tape.concat(&[h, *x]);
        let lin = tape.matvec(w, hx);
        let z = tape.add(lin, b);
        let gi = tape.slice(z, 0, hdim);
        let gi = tape.sigmoid(gi);
        let gf = tape.slice(z, hdim, hdim);
        let gf = tape.sigmoid(gf);
        let gg = tape.slice(z, 2 * hdim, hdim);
        let gg = tape.tanh(gg);
        let go = tape.slice(z, 3 * hdim, hdim);
        let go = tape.sigmoid(go);
        let fc = tape.mul(gf, c);
        let ig = tape.mul(gi, gg);
        c = tape.add(fc, ig);
        let tc = tape.tanh(c);
        h = tape.mul(go, tc);
        out.push(h);
    }
    out
}

/// `w3·[u;v] + b`, shared by every position the attention scores.
fn attn_condition(
    tape: &mut Tape,
    cache: &mut LeafCache,
    store: &ParamStore,
    p: &AttnParams,
    u_vec: NodeId,
    v_vec: NodeId,
) -> NodeId {
    let w3 = cache.leaf(tape, store, p.w3);
    let b = cache.leaf(tape, store, p.b);
    let uv = tape.concat(&[u_vec, v_vec]);
    let proj = tape.matvec(w3, uv);
    tape.add(proj, b)
}

/// Additive attention over `hiddens`: softmax of per-position scores, then
/// the convex combination of hidden states.
fn attend(
    tape: &mut Tape,
    cache: &mut LeafCache,
    store: &ParamStore,
    p: &AttnParams,
    hiddens: &[NodeId],
    cond: NodeId,
) -> (NodeId, NodeId) {
    let w1 = cache.leaf(tape, store, p.w1);
    let w2 = cache.leaf(tape, store, p.w2);
    let scores: Vec<NodeId> = hiddens
        .iter()
        .map(|h| {
            let wh = tape.matvec(w2, *h);
            let pre = tape.add(wh, cond);
            let act = tape.tanh(pre);
            tape.matvec(w1, act)
        })
        .collect();
    let score_vec = tape.concat(&scores);
    let weights = tape.softmax(score_vec);
    let context = tape.weighted_sum(weights, hiddens);
    (weights, context)
}

/// Word-level encoding of one sentence row.
pub struct WordEncoding {
    pub sentence_vec: NodeId,
    /// `None` flags an all-pad sentence; the vector is then zero.
    pub weights: Option<NodeId>,
}

#[allow(clippy::too_many_arguments)]
pub fn encode_words(
    tape: &mut Tape,
    cache: &mut LeafCache,
    store: &ParamStore,
    enc: &EncoderParams,
    tokens: &[u32],
    len: usize,
    u_vec: NodeId,
    v_vec: NodeId,
) -> WordEncoding {
    let cond = attn_condition(tape, cache, store, &enc.word_attn, u_vec, v_vec);
    encode_words_with_cond(tape, cache, store, enc, tokens, len, cond)
}

fn encode_words_with_cond(
    tape: &mut Tape,
    cache: &mut LeafCache,
    store: &ParamStore,
    enc: &EncoderParams,
    tokens: &[u32],
    len: usize,
    cond: NodeId,
) -> WordEncoding {
    let effective = &tokens[..len];
    if effective.is_empty() {
        return WordEncoding {
            sentence_vec: tape.zeros(enc.hidden),
            weights: None,
        };
    }
    let embeds: Vec<NodeId> = effective
        .iter()
        .map(|t| cache.row_leaf(tape, store, enc.word_embed, *t as usize))
        .collect();
    let hiddens = lstm_sequence(tape, cache, store, &enc.word_lstm, &embeds);
    let (weights, ctx) = attend(tape, cache, store, &enc.word_attn, &hiddens, cond);
    WordEncoding {
        sentence_vec: ctx,
        weights: Some(weights),
    }
}

/// Full document encoding.
pub struct DocEncoding {
    pub doc_vec: NodeId,
    pub word_attn: Vec<NodeId>,
    pub sent_attn: NodeId,
    pub class_logits: NodeId,
}

pub fn encode_doc(
    tape: &mut Tape,
    cache: &mut LeafCache,
    store: &ParamStore,
    enc: &EncoderParams,
    doc: &TokenizedDoc,
    u_vec: NodeId,
    v_vec: NodeId,
) -> Result<DocEncoding> {
    if doc.is_empty() {
        return Err(SermlError::Data("cannot encode an empty document".into()));
    }
    let word_cond = attn_condition(tape, cache, store, &enc.word_attn, u_vec, v_vec);
    let sent_cond = attn_condition(tape, cache, store, &enc.sent_attn, u_vec, v_vec);

    let mut sentence_vecs = Vec::new();
    let mut word_attn = Vec::new();
    for (row, len) in doc.sentences.iter().zip(&doc.sentence_lengths) {
        if *len == 0 {
            continue; // pad sentence
        }
        let we = encode_words_with_cond(tape, cache, store, enc, row, *len, word_cond);
        if let Some(w) = we.weights {
            sentence_vecs.push(we.sentence_vec);
            word_attn.push(w);
        }
    }
    if sentence_vecs.is_empty() {
        return Err(SermlError::Data(
            "document has no non-empty sentences".into(),
        ));
    }

    let sent_hiddens = lstm_sequence(tape, cache, store, &enc.sent_lstm, &sentence_vecs);
    let (sent_attn, doc_vec) = attend(tape, cache, store, &enc.sent_attn, &sent_hiddens, sent_cond);
    let cw = cache.leaf(tape, store, enc.classifier_w);
    let cb = cache.leaf(tape, store, enc.classifier_b);
    let lin = tape.matvec(cw, doc_vec);
    let class_logits = tape.add(lin, cb);
    Ok(DocEncoding {
        doc_vec,
        word_attn,
        sent_attn,
        class_logits,
    })
}

/// Cross-entropy over the rating classes (class index = rating - 1),
/// reduced over the batch.
pub fn classify_loss(
    tape: &mut Tape,
    encodings: &[DocEncoding],
    ratings: &[u8],
    rmax: u8,
    reduction: Reduction,
) -> Result<NodeId> {
    assert_eq!(encodings.len(), ratings.len());
    let mut losses = Vec::with_capacity(encodings.len());
    for (enc, rating) in encodings.iter().zip(ratings) {
        if *rating < 1 || *rating > rmax {
            return Err(SermlError::Data(format!(
                "rating {rating} outside [1, {rmax}]"
            )));
        }
        losses.push(tape.nll_from_logits(enc.class_logits, (*rating - 1) as usize));
    }
    Ok(match reduction {
        Reduction::Mean => tape.mean(&losses),
        Reduction::Sum => tape.add_n(&losses),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_config() -> ModelConfig {
        ModelConfig {
            d: 2,
            hidden: 2,
            attn: 2,
            word_dim: 2,
            ..ModelConfig::desk()
        }
    }

    fn build(cfg: &ModelConfig, seed: u64, scale: f64) -> (ParamStore, EncoderParams) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = move || rng.gen_range(-scale..scale);
        let enc = EncoderParams::register(&mut store, cfg, 8, &mut init);
        (store, enc)
    }

    fn embed_const(tape: &mut Tape, v: &[f64]) -> NodeId {
        tape.constant(v)
    }

    // ---- independent scalar-by-scalar oracles -----------------------------

    fn plain_sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// LSTM step with explicit loops; same gate order as the tape version
    /// but sharing no code with it.
    fn plain_lstm_step(
        w: &Mat,
        b: &Mat,
        h_prev: &[f64],
        c_prev: &[f64],
        x: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let hdim = h_prev.len();
        let mut hx = h_prev.to_vec();
        hx.extend_from_slice(x);
        let mut z = vec![0.0; 4 * hdim];
        for (i, zi) in z.iter_mut().enumerate() {
            let mut s = b.data[i];
            for (j, xj) in hx.iter().enumerate() {
                s += w.data[i * hx.len() + j] * xj;
            }
            *zi = s;
        }
        let mut h = vec![0.0; hdim];
        let mut c = vec![0.0; hdim];
        for k in 0..hdim {
            let gi = plain_sigmoid(z[k]);
            let gf = plain_sigmoid(z[hdim + k]);
            let gg = z[2 * hdim + k].tanh();
            let go = plain_sigmoid(z[3 * hdim + k]);
            c[k] = gf * c_prev[k] + gi * gg;
            h[k] = go * c[k].tanh();
        }
        (h, c)
    }

    fn plain_attention(
        w1: &Mat,
        w2: &Mat,
        w3: &Mat,
        b: &Mat,
        hiddens: &[Vec<f64>],
        uv: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let adim = b.data.len();
        let mut cond = vec![0.0; adim];
        for i in 0..adim {
            let mut s = b.data[i];
            for (j, x) in uv.iter().enumerate() {
                s += w3.data[i * uv.len() + j] * x;
            }
            cond[i] = s;
        }
        let scores: Vec<f64> = hiddens
            .iter()
            .map(|h| {
                let mut e = 0.0;
                for i in 0..adim {
                    let mut a = cond[i];
                    for (j, hj) in h.iter().enumerate() {
                        a += w2.data[i * h.len() + j] * hj;
                    }
                    e += w1.data[i] * a.tanh();
                }
                e
            })
            .collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        let weights: Vec<f64> = exps.iter().map(|e| e / z).collect();
        let hdim = hiddens[0].len();
        let mut ctx = vec![0.0; hdim];
        for (wk, h) in weights.iter().zip(hiddens) {
            for (c, hv) in ctx.iter_mut().zip(h) {
                *c += wk * hv;
            }
        }
        (weights, ctx)
    }

    // -----------------------------------------------------------------------

    #[test]
    fn single_word_sentence_gets_weight_one() {
        let cfg = test_config();
        let (store, enc) = build(&cfg, 1, 0.3);
        let mut tape = Tape::new();
        let mut cache = LeafCache::new();
        let u = embed_const(&mut tape, &[0.1, -0.2]);
        let v = embed_const(&mut tape, &[0.3, 0.05]);
        let we = encode_words(&mut tape, &mut cache, &store, &enc, &[3], 1, u, v);
        let w = tape.value(we.weights.unwrap()).to_vec();
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn zero_lstm_gives_symmetric_weights() {
        let cfg = test_config();
        let mut store = ParamStore::new();
        let mut zero = || 0.0;
        let enc = EncoderParams::register(&mut store, &cfg, 8, &mut zero);
        // With all-zero LSTM parameters every hidden state is the zero
        // vector, so the two positions must share the attention mass.
        let mut tape = Tape::new();
        let mut cache = LeafCache::new();
        let u = embed_const(&mut tape, &[0.1, -0.2]);
        let v = embed_const(&mut tape, &[0.3, 0.05]);
        let we = encode_words(&mut tape, &mut cache, &store, &enc, &[3, 5], 2, u, v);
        let w = tape.value(we.weights.unwrap()).to_vec();
        assert!((w[0] - 0.5).abs() < 1e-12);
        assert!((w[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn all_pad_sentence_yields_flagged_zero_vector() {
        let cfg = test_config();
        let (store, enc) = build(&cfg, 2, 0.3);
        let mut tape = Tape::new();
        let mut cache = LeafCache::new();
        let u = embed_const(&mut tape, &[0.1, -0.2]);
        let v = embed_const(&mut tape, &[0.3, 0.05]);
        let we = encode_words(&mut tape, &mut cache, &store, &enc, &[0, 0, 0], 0, u, v);
        assert!(we.weights.is_none());
        assert_eq!(tape.value(we.sentence_vec), &[0.0, 0.0]);
    }

    #[test]
    fn encode_words_matches_scalar_trace() {
        let cfg = test_config();
        let (store, enc) = build(&cfg, 7, 0.4);
        let tokens = [2u32, 5, 7];
        let u = [0.15, -0.3];
        let v = [-0.05, 0.25];

        let mut tape = Tape::new();
        let mut cache = LeafCache::new();
        let un = tape.constant(&u);
        let vn = tape.constant(&v);
        let we = encode_words(&mut tape, &mut cache, &store, &enc, &tokens, 3, un, vn);
        let got_s = tape.value(we.sentence_vec).to_vec();
        let got_w = tape.value(we.weights.unwrap()).to_vec();

        // Independent trace.
        let embed = store.get(enc.word_embed);
        let wmat = store.get(enc.word_lstm.w);
        let bmat = store.get(enc.word_lstm.b);
        let mut h = vec![0.0; 2];
        let mut c = vec![0.0; 2];
        let mut hiddens = Vec::new();
        for t in tokens {
            let x = embed.row(t as usize).to_vec();
            let (nh, nc) = plain_lstm_step(wmat, bmat, &h, &c, &x);
            h = nh;
            c = nc;
            hiddens.push(h.clone());
        }
        let mut uv = u.to_vec();
        uv.extend_from_slice(&v);
        let (want_w, want_s) = plain_attention(
            store.get(enc.word_attn.w1),
            store.get(enc.word_attn.w2),
            store.get(enc.word_attn.w3),
            store.get(enc.word_attn.b),
            &hiddens,
            &uv,
        );
        for (a, b) in got_w.iter().zip(&want_w) {
            assert!((a - b).abs() < 1e-10, "weights {got_w:?} vs {want_w:?}");
        }
        for (a, b) in got_s.iter().zip(&want_s) {
            assert!((a - b).abs() < 1e-10, "context {got_s:?} vs {want_s:?}");
        }
    }

    fn doc(rows: Vec<Vec<u32>>) -> TokenizedDoc {
        let lengths: Vec<usize> = rows.iter().map(|r| r.len()).collect();
        let n = lengths.iter().filter(|l| **l > 0).count();
        TokenizedDoc {
            sentences: rows,
            sentence_lengths: lengths,
            num_sentences: n,
        }
    }

    #[test]
    fn encode_doc_matches_scalar_trace() {
        let cfg = test_config();
        let (store, enc) = build(&cfg, 13, 0.4);
        let d = doc(vec![vec![2, 4], vec![6, 3]]);
        let u = [0.2, -0.1];
        let v = [0.05, 0.3];

        let mut tape = Tape::new();
        let mut cache = LeafCache::new();
        let un = tape.constant(&u);
        let vn = tape.constant(&v);
        let de = encode_doc(&mut tape, &mut cache, &store, &enc, &d, un, vn).unwrap();
        let got_d = tape.value(de.doc_vec).to_vec();
        let got_logits = tape.value(de.class_logits).to_vec();

        // Trace: word level per sentence, then sentence level.
        let embed = store.get(enc.word_embed);
        let mut uv = u.to_vec();
        uv.extend_from_slice(&v);
        let mut svecs = Vec::new();
        for row in &d.sentences {
            let mut h = vec![0.0; 2];
            let mut c = vec![0.0; 2];
            let mut hiddens = Vec::new();
            for t in row {
                let x = embed.row(*t as usize).to_vec();
                let (nh, nc) =
                    plain_lstm_step(store.get(enc.word_lstm.w), store.get(enc.word_lstm.b), &h, &c, &x);
                h = nh;
                c = nc;
                hiddens.push(h.clone());
            }
            let (_, s) = plain_attention(
                store.get(enc.word_attn.w1),
                store.get(enc.word_attn.w2),
                store.get(enc.word_attn.w3),
                store.get(enc.word_attn.b),
                &hiddens,
                &uv,
            );
            svecs.push(s);
        }
        let mut h = vec![0.0; 2];
        let mut c = vec![0.0; 2];
        let mut shiddens = Vec::new();
        for s in &svecs {
            let (nh, nc) =
                plain_lstm_step(store.get(enc.sent_lstm.w), store.get(enc.sent_lstm.b), &h, &c, s);
            h = nh;
            c = nc;
            shiddens.push(h.clone());
        }
        let (_, want_d) = plain_attention(
            store.get(enc.sent_attn.w1),
            store.get(enc.sent_attn.w2),
            store.get(enc.sent_attn.w3),
            store.get(enc.sent_attn.b),
            &shiddens,
            &uv,
        );
        for (a, b) in got_d.iter().zip(&want_d) {
            assert!((a - b).abs() < 1e-10);
        }
        let cw = store.get(enc.classifier_w);
        let cb = store.get(enc.classifier_b);
        for (i, logit) in got_logits.iter().enumerate() {
            let mut s = cb.data[i];
            for (j, dv) in want_d.iter().enumerate() {
                s += cw.data[i * 2 + j] * dv;
            }
            assert!((logit - s).abs() < 1e-10);
        }
    }

    #[test]
    fn one_sentence_doc_weight_is_one() {
        let cfg = test_config();
        let (store, enc) = build(&cfg, 3, 0.3);
        let d = doc(vec![vec![2, 4, 5]]);
        let mut tape = Tape::new();
        let mut cache = LeafCache::new();
        let u = embed_const(&mut tape, &[0.1, 0.1]);
        let v = embed_const(&mut tape, &[0.2, -0.2]);
        let de = encode_doc(&mut tape, &mut cache, &store, &enc, &d, u, v).unwrap();
        assert_eq!(tape.value(de.sent_attn), &[1.0]);
    }

    #[test]
    fn identical_sentence_permutation_is_invariant() {
        let cfg = test_config();
        let (store, enc) = build(&cfg, 5, 0.3);
        let d1 = doc(vec![vec![2, 4], vec![2, 4]]);
        let mut tape = Tape::new();
        let mut cache = LeafCache::new();
        let u = embed_const(&mut tape, &[0.1, 0.1]);
        let v = embed_const(&mut tape, &[0.2, -0.2]);
        let e1 = encode_doc(&mut tape, &mut cache, &store, &enc, &d1, u, v).unwrap();
        let e2 = encode_doc(&mut tape, &mut cache, &store, &enc, &d1, u, v).unwrap();
        assert_eq!(tape.value(e1.doc_vec), tape.value(e2.doc_vec));
    }

    #[test]
    fn empty_doc_is_an_error() {
        let cfg = test_config();
        let (store, enc) = build(&cfg, 5, 0.3);
        let mut tape = Tape::new();
        let mut cache = LeafCache::new();
        let u = embed_const(&mut tape, &[0.1, 0.1]);
        let v = embed_const(&mut tape, &[0.2, -0.2]);
        let d = TokenizedDoc::empty();
        assert!(encode_doc(&mut tape, &mut cache, &store, &enc, &d, u, v).is_err());
    }

    #[test]
    fn padding_leaves_doc_vector_unchanged() {
        let cfg = test_config();
        let (store, enc) = build(&cfg, 9, 0.4);
        let d1 = doc(vec![vec![2, 4], vec![6, 3, 5]]);
        let d2 = TokenizedDoc {
            sentences: vec![vec![2, 4, 0, 0], vec![6, 3, 5, 0], vec![0, 0]],
            sentence_lengths: vec![2, 3, 0],
            num_sentences: 2,
        };
        let mut tape = Tape::new();
        let mut cache = LeafCache::new();
        let u = embed_const(&mut tape, &[0.3, -0.4]);
        let v = embed_const(&mut tape, &[0.1, 0.2]);
        let e1 = encode_doc(&mut tape, &mut cache, &store, &enc, &d1, u, v).unwrap();
        let e2 = encode_doc(&mut tape, &mut cache, &store, &enc, &d2, u, v).unwrap();
        let a = tape.value(e1.doc_vec);
        let b = tape.value(e2.doc_vec);
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn attention_is_user_conditioned() {
        let cfg = test_config();
        let (store, enc) = build(&cfg, 21, 0.5);
        let d = doc(vec![vec![2, 4, 6]]);
        let mut tape = Tape::new();
        let mut cache = LeafCache::new();
        let v = embed_const(&mut tape, &[0.2, -0.2]);
        let u1 = embed_const(&mut tape, &[0.9, 0.1]);
        let u2 = embed_const(&mut tape, &[-0.8, 0.6]);
        let e1 = encode_doc(&mut tape, &mut cache, &store, &enc, &d, u1, v).unwrap();
        let e2 = encode_doc(&mut tape, &mut cache, &store, &enc, &d, u2, v).unwrap();
        let w1 = tape.value(e1.word_attn[0]);
        let w2 = tape.value(e2.word_attn[0]);
        let diff: f64 = w1.iter().zip(w2).map(|(a, b)| (a - b).abs()).sum();
        assert!(diff > 1e-6, "attention did not react to the user vector");
    }

    #[test]
    fn classify_loss_uniform_logits_is_ln_c() {
        let mut tape = Tape::new();
        let logits = tape.constant(&[0.0; 5]);
        let enc = DocEncoding {
            doc_vec: logits,
            word_attn: vec![],
            sent_attn: logits,
            class_logits: logits,
        };
        let loss = classify_loss(&mut tape, &[enc], &[3], 5, Reduction::Mean).unwrap();
        assert!((tape.scalar(loss) - 5.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn classify_loss_saturated_logit_approaches_zero() {
        let mut tape = Tape::new();
        let mut raw = [0.0; 5];
        raw[2] = 50.0;
        let logits = tape.constant(&raw);
        let enc = DocEncoding {
            doc_vec: logits,
            word_attn: vec![],
            sent_attn: logits,
            class_logits: logits,
        };
        let loss = classify_loss(&mut tape, &[enc], &[3], 5, Reduction::Mean).unwrap();
        assert!(tape.scalar(loss) < 1e-12);
    }

    #[test]
    fn classify_loss_rejects_out_of_range_rating() {
        let mut tape = Tape::new();
        let logits = tape.constant(&[0.0; 5]);
        let enc = DocEncoding {
            doc_vec: logits,
            word_attn: vec![],
            sent_attn: logits,
            class_logits: logits,
        };
        assert!(classify_loss(&mut tape, &[enc], &[6], 5, Reduction::Mean).is_err());
    }

    #[test]
    fn classify_loss_matches_brute_force_sum() {
        let cfg = test_config();
        let (store, enc) = build(&cfg, 31, 0.4);
        let docs = [
            doc(vec![vec![2, 3], vec![4]]),
            doc(vec![vec![5, 6, 7]]),
            doc(vec![vec![3], vec![2, 7]]),
        ];
        let ratings = [1u8, 4, 5];
        let mut tape = Tape::new();
        let mut cache = LeafCache::new();
        let u = tape.constant(&[0.1, -0.1]);
        let v = tape.constant(&[0.2, 0.3]);
        let encs: Vec<DocEncoding> = docs
            .iter()
            .map(|d| encode_doc(&mut tape, &mut cache, &store, &enc, d, u, v).unwrap())
            .collect();
        let loss = classify_loss(&mut tape, &encs, &ratings, 5, Reduction::Mean).unwrap();
        // Brute force: -log softmax(logits)[class], averaged.
        let mut want = 0.0;
        for (e, r) in encs.iter().zip(&ratings) {
            let logits = tape.value(e.class_logits);
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
            let p = (logits[(*r - 1) as usize] - m).exp() / z;
            want += -p.ln();
        }
        want /= 3.0;
        assert!((tape.scalar(loss) - want).abs() < 1e-8);
    }

    #[test]
    fn vocab_ids_fit_embedding_rows() {
        let v = Vocabulary::from_tokens(["a", "b", "c"], 30, 50);
        assert_eq!(v.len(), 5);
    }
}
