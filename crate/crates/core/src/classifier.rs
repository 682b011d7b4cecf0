//! The adversarial branch: erase highly activated heatmap regions from the
//! shared foreground features, pool what remains into a video-level class
//! prediction, and score it against the video labels. The branch reuses the
//! foreground head of the growing network, so it adds no parameters; its
//! updates flow into the shared backbone.

use std::collections::BTreeMap;

use crate::corpus::ClassId;
use crate::error::{AssgError, Result};
use crate::numerics::{Matrix, NodeId, Tape};
use crate::seeding::label_target;
use crate::ssg::{Heatmap, SsgForward};

/// Foreground features after erasion plus the bookkeeping of what was
/// erased: `erased_sets[c] = U_c = {t : H[c, t] > theta_a}` for foreground
/// classes only, and `erased_mask[t]` marks membership in any `U_c`.
pub struct ErasedFeatures {
    /// Tape node of the masked foreground map (zeroed columns at erased t).
    pub node: NodeId,
    pub erased_mask: Vec<bool>,
    pub erased_sets: BTreeMap<ClassId, Vec<usize>>,
}

/// Which locations each foreground class erases. Background activations are
/// never erased regardless of strength.
pub fn erase_sets(
    heatmap: &Heatmap,
    theta_a: f64,
) -> Result<(BTreeMap<ClassId, Vec<usize>>, Vec<bool>)> {
    if !(theta_a > 0.0 && theta_a < 1.0) {
        return Err(AssgError::Config(format!(
            "theta_a must lie in (0, 1), got {theta_a}"
        )));
    }
    let n = heatmap.n_segments();
    let mut sets = BTreeMap::new();
    let mut mask = vec![false; n];
    for c in 1..=heatmap.num_foreground_classes() {
        let ts: Vec<usize> = (0..n).filter(|&t| heatmap.get(c, t) > theta_a).collect();
        for &t in &ts {
            mask[t] = true;
        }
        sets.insert(c, ts);
    }
    Ok((sets, mask))
}

fn column_mask(rows: usize, erased: &[bool]) -> Matrix {
    let mut mask = Matrix::filled(rows, erased.len(), 1.0);
    for (t, &hit) in erased.iter().enumerate() {
        if hit {
            for r in 0..rows {
                mask.set(r, t, 0.0);
            }
        }
    }
    mask
}

/// Zero the columns of `F+` that any foreground class activates above
/// `theta_a`. The mask is hard: gradients flow through surviving columns
/// but never into the mask decision itself.
pub fn erase(forward: &mut SsgForward, theta_a: f64) -> Result<ErasedFeatures> {
    let heatmap = forward.heatmap()?;
    let (erased_sets, erased_mask) = erase_sets(&heatmap, theta_a)?;
    let rows = forward.tape.value(forward.f_pos).rows();
    let mask = column_mask(rows, &erased_mask);
    let node = forward.tape.mul_mask(forward.f_pos, mask)?;
    Ok(ErasedFeatures {
        node,
        erased_mask,
        erased_sets,
    })
}

/// Re-apply a previously computed erase mask to a fresh forward pass.
pub fn erase_with_mask(forward: &mut SsgForward, erased_mask: &[bool]) -> Result<NodeId> {
    let rows = forward.tape.value(forward.f_pos).rows();
    let mask = column_mask(rows, erased_mask);
    forward.tape.mul_mask(forward.f_pos, mask)
}

/// Temporal attention weights plus their tape node.
pub struct Attention {
    pub node: NodeId,
    pub weights: Vec<f64>,
}

/// Self-adaptive attention over any feature node: softmax along time of the
/// per-segment channel sums. No learned weights are involved.
pub fn sap_attention(tape: &mut Tape, features: NodeId) -> Result<Attention> {
    let sums = tape.channel_sums(features);
    let node = tape.softmax_columns(sums);
    let weights = tape.value(node).data().to_vec();
    Ok(Attention { node, weights })
}

/// Video-level prediction: per-segment logits from the shared foreground
/// head, pooled over time.
pub struct SapOutput {
    /// Attention actually used by the pooler (uniform for GMP/GAP).
    pub attention: Vec<f64>,
    pub video_logits: Vec<f64>,
    pub video_probs: Vec<f64>,
    /// C x 1 log-probability node for the loss.
    pub log_probs: NodeId,
}

fn finish_sap(tape: &mut Tape, video_logits: NodeId, attention: Vec<f64>) -> Result<SapOutput> {
    let probs_node = tape.softmax_columns(video_logits);
    let log_probs = tape.log_softmax_columns(video_logits);
    Ok(SapOutput {
        attention,
        video_logits: tape.value(video_logits).data().to_vec(),
        video_probs: tape.value(probs_node).data().to_vec(),
        log_probs,
    })
}

/// Self-adaptive pooling: `video_logits[c] = sum_t A_t * H̀[c, t]` where
/// `H̀` is the foreground head applied to the erased features.
pub fn sap_aggregate(
    tape: &mut Tape,
    features: NodeId,
    fg_w: NodeId,
    fg_b: NodeId,
    attention: &Attention,
) -> Result<SapOutput> {
    let segment_logits = tape.affine(fg_w, fg_b, features)?;
    let video_logits = tape.matmul(segment_logits, attention.node)?;
    finish_sap(tape, video_logits, attention.weights.clone())
}

/// Global max pooling ablation: `video_logits[c] = max_t H̀[c, t]`.
pub fn aggregate_gmp(
    tape: &mut Tape,
    features: NodeId,
    fg_w: NodeId,
    fg_b: NodeId,
) -> Result<SapOutput> {
    let segment_logits = tape.affine(fg_w, fg_b, features)?;
    let n = tape.value(segment_logits).cols();
    let video_logits = tape.row_max(segment_logits);
    finish_sap(tape, video_logits, vec![1.0 / n as f64; n])
}

/// Global average pooling ablation: `video_logits[c] = mean_t H̀[c, t]`.
pub fn aggregate_gap(
    tape: &mut Tape,
    features: NodeId,
    fg_w: NodeId,
    fg_b: NodeId,
) -> Result<SapOutput> {
    let segment_logits = tape.affine(fg_w, fg_b, features)?;
    let n = tape.value(segment_logits).cols();
    let video_logits = tape.row_mean(segment_logits);
    finish_sap(tape, video_logits, vec![1.0 / n as f64; n])
}

/// Cross-entropy against the normalized multi-hot target (1/M per labeled
/// class). Appends the loss node and returns it.
pub fn classification_loss(
    tape: &mut Tape,
    sap: &SapOutput,
    video_labels: &[ClassId],
    num_classes: usize,
) -> Result<NodeId> {
    let target = label_target(video_labels, num_classes)?;
    tape.weighted_sum(sap.log_probs, target.scale(-1.0))
}
