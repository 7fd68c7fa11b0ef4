//! Relation induction: turn a (user, item) embedding pair into a relation
//! vector by one of four interchangeable strategies, and regress that vector
//! toward the projected review encoding.

use crate::config::InductionKind;
use crate::error::{Result, SermlError};
use crate::params::{Mat, ParamId, ParamStore};
use crate::tape::{softmax, LeafCache, NodeId, Tape};

/// Memory-based induction: keys score the joint embedding, the softmax over
/// key scores reads the slot matrix, and an output transform maps the read
/// vector back to dimension `d`.
#[derive(Clone, Copy, Debug)]
pub struct MemoryParams {
    pub keys: ParamId,
    pub slots: ParamId,
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub m: usize,
}

#[derive(Clone, Debug)]
pub enum InductionParams {
    ElementWise,
    /// Linear layers with tanh activations, applied to `[u; v]`.
    Mlp(Vec<(ParamId, ParamId)>),
    Memory(MemoryParams),
}

impl InductionParams {
    pub fn register(
        store: &mut ParamStore,
        kind: InductionKind,
        d: usize,
        memory_slots: usize,
        init: &mut impl FnMut() -> f64,
    ) -> Self {
        match kind {
            InductionKind::ElementWise => InductionParams::ElementWise,
            InductionKind::Mlp2 => {
                // 2d -> d -> d
                let widths = [(d, 2 * d), (d, d)];
                InductionParams::Mlp(register_mlp(store, &widths, &mut *init))
            }
            InductionKind::Mlp4 => {
                // 2d -> 2d -> d -> d -> d
                let widths = [(2 * d, 2 * d), (d, 2 * d), (d, d), (d, d)];
                InductionParams::Mlp(register_mlp(store, &widths, &mut *init))
            }
            InductionKind::Memory => InductionParams::Memory(MemoryParams {
                keys: store.add("induction.keys", Mat::from_fn(memory_slots, 3 * d, &mut *init)),
                slots: store.add("induction.slots", Mat::from_fn(memory_slots, d, &mut *init)),
                out_w: store.add("induction.out_w", Mat::from_fn(d, d, &mut *init)),
                out_b: store.add("induction.out_b", Mat::from_fn(d, 1, &mut *init)),
                m: memory_slots,
            }),
        }
    }

    pub fn kind(&self) -> InductionKind {
        match self {
            InductionParams::ElementWise => InductionKind::ElementWise,
            InductionParams::Mlp(layers) if layers.len() == 2 => InductionKind::Mlp2,
            InductionParams::Mlp(_) => InductionKind::Mlp4,
            InductionParams::Memory(_) => InductionKind::Memory,
        }
    }
}

fn register_mlp(
    store: &mut ParamStore,
    widths: &[(usize, usize)],
    init: &mut impl FnMut() -> f64,
) -> Vec<(ParamId, ParamId)> {
    widths
        .iter()
        .enumerate()
        .map(|(i, (rows, cols))| {
            let w = store.add(&format!("induction.l{i}.w"), Mat::from_fn(*rows, *cols, &mut *init));
            let b = store.add(&format!("induction.l{i}.b"), Mat::from_fn(*rows, 1, &mut *init));
            (w, b)
        })
        .collect()
}

/// Induce the relation vector on the tape.
pub fn induce(
    tape: &mut Tape,
    cache: &mut LeafCache,
    store: &ParamStore,
    ind: &InductionParams,
    u_vec: NodeId,
    v_vec: NodeId,
) -> NodeId {
    match ind {
        InductionParams::ElementWise => tape.mul(u_vec, v_vec),
        InductionParams::Mlp(layers) => {
            let mut x = tape.concat(&[u_vec, v_vec]);
            for (w, b) in layers {
                let wl = cache.leaf(tape, store, *w);
                let bl = cache.leaf(tape, store, *b);
                let lin = tape.matvec(wl, x);
                let pre = tape.add(lin, bl);
                x = tape.tanh(pre);
            }
            x
        }
        InductionParams::Memory(mem) => memory_attend(tape, cache, store, mem, u_vec, v_vec).0,
    }
}

/// Memory read: scores sᵀkᵢ over the joint embedding s = [u; v; u⊙v],
/// softmax to an attention vector, weighted slot read, tanh output map.
/// Returns both the relation vector and the attention for introspection.
pub fn memory_attend(
    tape: &mut Tape,
    cache: &mut LeafCache,
    store: &ParamStore,
    mem: &MemoryParams,
    u_vec: NodeId,
    v_vec: NodeId,
) -> (NodeId, NodeId) {
    let uv = tape.mul(u_vec, v_vec);
    let joint = tape.concat(&[u_vec, v_vec, uv]);
    let keys = cache.leaf(tape, store, mem.keys);
    let scores = tape.matvec(keys, joint);
    let attn = tape.softmax(scores);
    let slots = cache.leaf(tape, store, mem.slots);
    let read = tape.mat_t_vec(slots, attn);
    let w = cache.leaf(tape, store, mem.out_w);
    let b = cache.leaf(tape, store, mem.out_b);
    let lin = tape.matvec(w, read);
    let pre = tape.add(lin, b);
    let r = tape.tanh(pre);
    (r, attn)
}

/// Plain (no-grad) induction used at prediction time; must agree with
/// [`induce`] exactly.
pub fn induce_plain(store: &ParamStore, ind: &InductionParams, u: &[f64], v: &[f64]) -> Vec<f64> {
    match ind {
        InductionParams::ElementWise => u.iter().zip(v).map(|(a, b)| a * b).collect(),
        InductionParams::Mlp(layers) => {
            let mut x: Vec<f64> = u.iter().chain(v).copied().collect();
            for (w, b) in layers {
                let wm = store.get(*w);
                let bm = store.get(*b);
                x = wm
                    .matvec(&x)
                    .into_iter()
                    .zip(&bm.data)
                    .map(|(s, b)| (s + b).tanh())
                    .collect();
            }
            x
        }
        InductionParams::Memory(mem) => memory_attend_plain(store, mem, u, v).0,
    }
}

pub fn memory_attend_plain(
    store: &ParamStore,
    mem: &MemoryParams,
    u: &[f64],
    v: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut joint: Vec<f64> = u.iter().chain(v).copied().collect();
    joint.extend(u.iter().zip(v).map(|(a, b)| a * b));
    let keys = store.get(mem.keys);
    let scores = keys.matvec(&joint);
    let attn = softmax(&scores);
    let slots = store.get(mem.slots);
    let mut read = vec![0.0; slots.cols];
    for (i, a) in attn.iter().enumerate() {
        for (r, s) in read.iter_mut().zip(slots.row(i)) {
            *r += a * s;
        }
    }
    let w = store.get(mem.out_w);
    let b = store.get(mem.out_b);
    let r: Vec<f64> = w
        .matvec(&read)
        .into_iter()
        .zip(&b.data)
        .map(|(s, b)| (s + b).tanh())
        .collect();
    (r, attn)
}

/// Projection of the document vector into relation space.
#[derive(Clone, Copy, Debug)]
pub struct SemanticProjector {
    /// `d x H`: maps an H-dim document vector to a d-dim relation target.
    pub w: ParamId,
}

impl SemanticProjector {
    pub fn register(
        store: &mut ParamStore,
        d: usize,
        hidden: usize,
        init: &mut impl FnMut() -> f64,
    ) -> Self {
        SemanticProjector {
            w: store.add("projector.w", Mat::from_fn(d, hidden, &mut *init)),
        }
    }
}

/// Squared distance between the projected review vector and the induced
/// relation. With `stop_grad_semantic` the document side is detached and the
/// relation path alone receives gradient.
pub fn relation_regression_loss(
    tape: &mut Tape,
    cache: &mut LeafCache,
    store: &ParamStore,
    proj: &SemanticProjector,
    r_vec: NodeId,
    doc_vec: NodeId,
    stop_grad_semantic: bool,
) -> Result<NodeId> {
    let w = cache.leaf(tape, store, proj.w);
    let wm = store.get(proj.w);
    if tape.value(doc_vec).len() != wm.cols {
        return Err(SermlError::Model(format!(
            "document vector length {} does not match projector input {}",
            tape.value(doc_vec).len(),
            wm.cols
        )));
    }
    if tape.value(r_vec).len() != wm.rows {
        return Err(SermlError::Model(format!(
            "relation vector length {} does not match projector output {}",
            tape.value(r_vec).len(),
            wm.rows
        )));
    }
    let doc_side = if stop_grad_semantic {
        let detached = tape.value(doc_vec).to_vec();
        tape.constant(&detached)
    } else {
        doc_vec
    };
    let target = tape.matvec(w, doc_side);
    let diff = tape.sub(target, r_vec);
    Ok(tape.sum_sq(diff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Gradients;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn store_with(kind: InductionKind, d: usize, m: usize, seed: u64) -> (ParamStore, InductionParams) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = move || rng.gen_range(-0.5..0.5);
        let ind = InductionParams::register(&mut store, kind, d, m, &mut init);
        (store, ind)
    }

    #[test]
    fn element_wise_identity_and_zero() {
        let (store, ind) = store_with(InductionKind::ElementWise, 3, 1, 1);
        let u = [0.4, -0.2, 0.9];
        let ones = [1.0, 1.0, 1.0];
        assert_eq!(induce_plain(&store, &ind, &u, &ones), u.to_vec());
        let zeros = [0.0; 3];
        assert_eq!(induce_plain(&store, &ind, &zeros, &u), vec![0.0; 3]);
    }

    #[test]
    fn single_slot_memory_ignores_inputs() {
        let (store, ind) = store_with(InductionKind::Memory, 3, 1, 2);
        let r1 = induce_plain(&store, &ind, &[0.1, 0.2, 0.3], &[0.5, -0.5, 0.25]);
        let r2 = induce_plain(&store, &ind, &[-0.9, 0.0, 0.4], &[0.0, 0.8, -0.3]);
        for (a, b) in r1.iter().zip(&r2) {
            assert!((a - b).abs() < 1e-15);
        }
        // And the relation equals tanh(w·m1 + b) directly.
        let InductionParams::Memory(mem) = &ind else { unreachable!() };
        let slots = store.get(mem.slots);
        let w = store.get(mem.out_w);
        let b = store.get(mem.out_b);
        let want: Vec<f64> = w
            .matvec(slots.row(0))
            .into_iter()
            .zip(&b.data)
            .map(|(s, b)| (s + b).tanh())
            .collect();
        for (a, b) in r1.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_keys_give_uniform_attention() {
        let d = 3;
        let m = 4;
        let mut store = ParamStore::new();
        let key_row: Vec<f64> = (0..3 * d).map(|i| 0.1 * i as f64).collect();
        let mut keys = Vec::new();
        for _ in 0..m {
            keys.extend_from_slice(&key_row);
        }
        let mem = MemoryParams {
            keys: store.add("k", Mat { rows: m, cols: 3 * d, data: keys }),
            slots: store.add("s", Mat::from_fn(m, d, || 0.3)),
            out_w: store.add("w", Mat::from_fn(d, d, || 0.1)),
            out_b: store.add("b", Mat::zeros(d, 1)),
            m,
        };
        let (_, attn) = memory_attend_plain(&store, &mem, &[0.2, -0.1, 0.4], &[0.3, 0.3, -0.2]);
        for a in attn {
            assert!((a - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn dominant_key_saturates_attention() {
        let d = 2;
        let m = 3;
        let mut store = ParamStore::new();
        // Key 1 scores +20 above the others for s = all ones.
        let mut keys = vec![0.0; m * 3 * d];
        for j in 0..3 * d {
            keys[3 * d + j] = 20.0 / (3 * d) as f64;
        }
        let mem = MemoryParams {
            keys: store.add("k", Mat { rows: m, cols: 3 * d, data: keys }),
            slots: store.add("s", Mat::from_fn(m, d, || 0.2)),
            out_w: store.add("w", Mat::from_fn(d, d, || 0.1)),
            out_b: store.add("b", Mat::zeros(d, 1)),
            m,
        };
        let (_, attn) = memory_attend_plain(&store, &mem, &[1.0, 1.0], &[1.0, 1.0]);
        assert!(attn[1] > 0.999, "attention {attn:?}");
    }

    #[test]
    fn memory_matches_direct_formula_oracle() {
        let d = 3;
        let m = 4;
        let (store, ind) = store_with(InductionKind::Memory, d, m, 5);
        let InductionParams::Memory(mem) = &ind else { unreachable!() };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (r, attn) = memory_attend_plain(&store, mem, &u, &v);

            // Independent recomputation with explicit loops.
            let mut s = Vec::new();
            s.extend_from_slice(&u);
            s.extend_from_slice(&v);
            for k in 0..d {
                s.push(u[k] * v[k]);
            }
            let keys = store.get(mem.keys);
            let mut scores = vec![0.0; m];
            for i in 0..m {
                for j in 0..3 * d {
                    scores[i] += s[j] * keys.data[i * 3 * d + j];
                }
            }
            let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|x| (x - mx).exp()).collect();
            let z: f64 = exps.iter().sum();
            let want_attn: Vec<f64> = exps.iter().map(|e| e / z).collect();
            let slots = store.get(mem.slots);
            let mut o = vec![0.0; d];
            for i in 0..m {
                for k in 0..d {
                    o[k] += want_attn[i] * slots.data[i * d + k];
                }
            }
            let ow = store.get(mem.out_w);
            let ob = store.get(mem.out_b);
            let mut want_r = vec![0.0; d];
            for i in 0..d {
                let mut acc = ob.data[i];
                for j in 0..d {
                    acc += ow.data[i * d + j] * o[j];
                }
                want_r[i] = acc.tanh();
            }
            for (a, b) in attn.iter().zip(&want_attn) {
                assert!((a - b).abs() < 1e-10);
            }
            for (a, b) in r.iter().zip(&want_r) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn memory_attention_sums_to_one_and_r_in_tanh_range() {
        let (store, ind) = store_with(InductionKind::Memory, 4, 6, 9);
        let InductionParams::Memory(mem) = &ind else { unreachable!() };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let u: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (r, attn) = memory_attend_plain(&store, mem, &u, &v);
            let sum: f64 = attn.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(r.iter().all(|x| x.abs() < 1.0));
        }
    }

    #[test]
    fn tape_and_plain_induction_agree() {
        for kind in InductionKind::ALL {
            let (store, ind) = store_with(kind, 4, 3, 13);
            let u = [0.2, -0.4, 0.1, 0.5];
            let v = [-0.3, 0.25, 0.6, -0.1];
            let plain = induce_plain(&store, &ind, &u, &v);
            let mut tape = Tape::new();
            let mut cache = LeafCache::new();
            let un = tape.constant(&u);
            let vn = tape.constant(&v);
            let r = induce(&mut tape, &mut cache, &store, &ind, un, vn);
            assert_eq!(tape.value(r), plain.as_slice(), "strategy {kind}");
        }
    }

    #[test]
    fn mlp_output_dimension_is_d() {
        for kind in [InductionKind::Mlp2, InductionKind::Mlp4] {
            let (store, ind) = store_with(kind, 5, 3, 21);
            let u = [0.1; 5];
            let v = [0.2; 5];
            assert_eq!(induce_plain(&store, &ind, &u, &v).len(), 5);
        }
    }

    #[test]
    fn regression_loss_zero_on_perfect_fit() {
        let mut store = ParamStore::new();
        let proj = SemanticProjector {
            w: store.add("p", Mat { rows: 2, cols: 3, data: vec![1., 0., 0., 0., 1., 0.] }),
        };
        let mut tape = Tape::new();
        let mut cache = LeafCache::new();
        let doc = tape.constant(&[0.4, -0.7, 0.9]);
        let r = tape.constant(&[0.4, -0.7]);
        let loss =
            relation_regression_loss(&mut tape, &mut cache, &store, &proj, r, doc, false).unwrap();
        assert_eq!(tape.scalar(loss), 0.0);
    }

    #[test]
    fn regression_loss_unit_offset() {
        let mut store = ParamStore::new();
        let proj = SemanticProjector {
            w: store.add("p", Mat { rows: 2, cols: 2, data: vec![1., 0., 0., 1.] }),
        };
        let mut tape = Tape::new();
        let mut cache = LeafCache::new();
        let doc = tape.constant(&[1.0, 0.0]);
        let r = tape.constant(&[0.0, 0.0]);
        let loss =
            relation_regression_loss(&mut tape, &mut cache, &store, &proj, r, doc, false).unwrap();
        assert!((tape.scalar(loss) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn regression_loss_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let d = 3;
            let h = 4;
            let mut store = ParamStore::new();
            let proj = SemanticProjector {
                w: store.add("p", Mat::from_fn(d, h, || rng.gen_range(-1.0..1.0))),
            };
            let doc: Vec<f64> = (0..h).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut tape = Tape::new();
            let mut cache = LeafCache::new();
            let dn = tape.constant(&doc);
            let rn = tape.constant(&r);
            let loss =
                relation_regression_loss(&mut tape, &mut cache, &store, &proj, rn, dn, false)
                    .unwrap();
            let w = store.get(proj.w);
            let mut want = 0.0;
            for i in 0..d {
                let mut proj_i = 0.0;
                for j in 0..h {
                    proj_i += w.data[i * h + j] * doc[j];
                }
                want += (proj_i - r[i]).powi(2);
            }
            assert!(
                (tape.scalar(loss) - want).abs() < 1e-10,
                "trial {trial}: {} vs {want}",
                tape.scalar(loss)
            );
        }
    }

    #[test]
    fn regression_loss_rejects_dimension_mismatch() {
        let mut store = ParamStore::new();
        let proj = SemanticProjector {
            w: store.add("p", Mat::zeros(2, 3)),
        };
        let mut tape = Tape::new();
        let mut cache = LeafCache::new();
        let doc = tape.constant(&[0.1, 0.2]); // wrong: projector wants 3
        let r = tape.constant(&[0.0, 0.0]);
        assert!(
            relation_regression_loss(&mut tape, &mut cache, &store, &proj, r, doc, false).is_err()
        );
    }

    #[test]
    fn stop_grad_semantic_detaches_doc_side() {
        let mut store = ParamStore::new();
        let doc_param = store.add("doc", Mat { rows: 1, cols: 2, data: vec![0.3, -0.6] });
        let proj = SemanticProjector {
            w: store.add("p", Mat { rows: 2, cols: 2, data: vec![0.5, 0.1, -0.2, 0.7] }),
        };
        for (stop, expect_zero) in [(true, true), (false, false)] {
            let mut tape = Tape::new();
            let mut cache = LeafCache::new();
            let doc = tape.param(&store, doc_param);
            let r = tape.constant(&[0.2, 0.2]);
            let loss =
                relation_regression_loss(&mut tape, &mut cache, &store, &proj, r, doc, stop)
                    .unwrap();
            let mut grads = Gradients::zeros_like(&store);
            tape.backward(loss, &mut grads);
            let gnorm: f64 = grads.buf(doc_param).iter().map(|g| g.abs()).sum();
            assert_eq!(gnorm == 0.0, expect_zero, "stop={stop}");
        }
    }

    /// One SGD step on the regression loss alone must reduce it for a small
    /// enough step size.
    #[test]
    fn regression_descent_property() {
        let d = 4;
        let h = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut store = ParamStore::new();
        let mut gen = move || rng.gen_range(-0.5..0.5);
        let ind = InductionParams::register(&mut store, InductionKind::Memory, d, 3, &mut gen);
        let proj = SemanticProjector::register(&mut store, d, h, &mut gen);
        let u_id = store.add("u", Mat::from_fn(1, d, &mut gen));
        let v_id = store.add("v", Mat::from_fn(1, d, &mut gen));
        let doc_id = store.add("doc", Mat::from_fn(1, h, &mut gen));

        let eval = |store: &ParamStore| -> (f64, Gradients) {
            let mut tape = Tape::new();
            let mut cache = LeafCache::new();
            let u = tape.param(store, u_id);
            let v = tape.param(store, v_id);
            let doc = tape.param(store, doc_id);
            let r = induce(&mut tape, &mut cache, store, &ind, u, v);
            let loss =
                relation_regression_loss(&mut tape, &mut cache, store, &proj, r, doc, false)
                    .unwrap();
            let mut grads = Gradients::zeros_like(store);
            tape.backward(loss, &mut grads);
            (tape.scalar(loss), grads)
        };

        let (before, grads) = eval(&store);
        assert!(before > 0.0);
        crate::params::sgd_step(&mut store, &grads, 1e-3);
        let (after, _) = eval(&store);
        assert!(after < before, "descent failed: {before} -> {after}");
    }
}
