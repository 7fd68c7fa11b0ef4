//! Triple scoring and the pairwise margin objective, plus the per-row norm
//! cap applied to embedding tables after every optimizer step.

use crate::params::{Mat, ParamId, ParamStore};
use crate::tape::{NodeId, Tape};

/// Product score Σᵢ uᵢ·rᵢ·vᵢ. Higher means stronger preference.
pub fn score(u: &[f64], r: &[f64], v: &[f64]) -> f64 {
    assert!(u.len() == r.len() && r.len() == v.len(), "score dims");
    u.iter().zip(r).zip(v).map(|((a, b), c)| a * b * c).sum()
}

/// Tape version of [`score`].
pub fn score_node(tape: &mut Tape, u: NodeId, r: NodeId, v: NodeId) -> NodeId {
    tape.triple_dot(u, r, v)
}

/// Push-only hinge: max(neg - pos + margin, 0).
pub fn margin_loss(pos: f64, neg: f64, margin: f64) -> f64 {
    (neg - pos + margin).max(0.0)
}

/// Tape version of [`margin_loss`].
pub fn margin_loss_node(tape: &mut Tape, pos: NodeId, neg: NodeId, margin: f64) -> NodeId {
    let diff = tape.sub(neg, pos);
    let shifted = tape.offset(diff, margin);
    tape.relu(shifted)
}

/// Rescaled rows land within a couple of ulps of norm 1; clipping only
/// strictly above this bound makes a second pass a bitwise no-op.
const CLIP_SLACK: f64 = 1e-12;

/// Rescale any row with ℓ2 norm above 1 back onto the unit sphere. Rows at
/// or inside the ball are untouched, so the operation is idempotent.
pub fn clip_rows(mat: &mut Mat) {
    for r in 0..mat.rows {
        let row = mat.row_mut(r);
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1.0 + CLIP_SLACK {
            for x in row {
                *x /= norm;
            }
        }
    }
}

/// Apply the norm cap to a parameter table in place.
pub fn clip_norms(store: &mut ParamStore, table: ParamId) {
    clip_rows(store.get_mut(table));
}

/// Squared translation distance ‖u + r − v‖²; lower means stronger
/// preference. Diagnostic alternative used by case analysis comparisons,
/// never by training.
pub fn distance_score(u: &[f64], r: &[f64], v: &[f64]) -> f64 {
    assert!(u.len() == r.len() && r.len() == v.len(), "distance dims");
    u.iter()
        .zip(r)
        .zip(v)
        .map(|((a, b), c)| {
            let d = a + b - c;
            d * d
        })
        .sum()
}
