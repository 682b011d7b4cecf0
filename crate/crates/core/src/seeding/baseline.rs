use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Split, Stream, VideoRecord};
use crate::error::{AssgError, Result};
use crate::numerics::{
    adam_update, glorot_uniform, AdamHyperParams, AdamState, Matrix, NodeId, Tape,
};

/// The seed source: a per-segment linear classifier (K -> C) plus a learned
/// scalar attention head (K -> 1), trained with video-level cross-entropy
/// where the video score is the attention-weighted average of per-segment
/// class logits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CasBaselineParams {
    pub class_w: Matrix,
    pub class_b: Matrix,
    pub attn_w: Matrix,
    pub attn_b: Matrix,
    pub adam: AdamState,
    pub hyper: AdamHyperParams,
}

impl CasBaselineParams {
    pub fn init(k_dims: usize, num_classes: usize, learning_rate: f64, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let class_w = glorot_uniform(&mut rng, num_classes, k_dims);
        let attn_w = glorot_uniform(&mut rng, 1, k_dims);
        let params = [
            class_w.clone(),
            Matrix::zeros(num_classes, 1),
            attn_w.clone(),
            Matrix::zeros(1, 1),
        ];
        CasBaselineParams {
            class_w,
            class_b: Matrix::zeros(num_classes, 1),
            attn_w,
            attn_b: Matrix::zeros(1, 1),
            adam: AdamState::new(&params),
            hyper: AdamHyperParams::with_learning_rate(learning_rate),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.class_w.rows()
    }

    pub fn k_dims(&self) -> usize {
        self.class_w.cols()
    }
}

/// Per-class activation scores over a video, min-max normalized per class
/// row to [0, 1]; rows with constant raw scores map to all zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct CasSequence {
    values: Matrix,
}

impl CasSequence {
    /// Wrap already-normalized scores (test fixtures).
    #[cfg(test)]
    pub(crate) fn from_values(values: Matrix) -> Self {
        debug_assert!(values.data().iter().all(|v| (0.0..=1.0).contains(v)));
        CasSequence { values }
    }

    pub fn num_classes(&self) -> usize {
        self.values.rows()
    }

    pub fn n_segments(&self) -> usize {
        self.values.cols()
    }

    /// Normalized activation of class `c` (1-based) at segment `t`.
    pub fn get(&self, class: usize, t: usize) -> f64 {
        self.values.get(class - 1, t)
    }

    /// Row of class `c` (1-based).
    pub fn class_row(&self, class: usize) -> &[f64] {
        self.values.row(class - 1)
    }

    pub fn max_over_classes(&self, t: usize) -> f64 {
        (0..self.values.rows())
            .map(|r| self.values.get(r, t))
            .fold(0.0, f64::max)
    }
}

/// Normalized multi-hot target: 1/M for each of the video's M labels.
pub(crate) fn label_target(labels: &[usize], num_classes: usize) -> Result<Matrix> {
    if labels.is_empty() {
        return Err(AssgError::Training("empty label set".to_string()));
    }
    let mut t = Matrix::zeros(num_classes, 1);
    let w = 1.0 / labels.len() as f64;
    for &c in labels {
        t.set(c - 1, 0, w);
    }
    Ok(t)
}

struct BaselineGraph {
    tape: Tape,
    class_w: NodeId,
    class_b: NodeId,
    attn_w: NodeId,
    attn_b: NodeId,
    video_log_probs: NodeId,
}

fn baseline_forward(params: &CasBaselineParams, features: &Matrix) -> Result<BaselineGraph> {
    let mut tape = Tape::new();
    let class_w = tape.param(params.class_w.clone());
    let class_b = tape.param(params.class_b.clone());
    let attn_w = tape.param(params.attn_w.clone());
    let attn_b = tape.param(params.attn_b.clone());
    let x = tape.input(features.clone());

    let logits = tape.affine(class_w, class_b, x)?; // C x N
    let attn_scores = tape.affine(attn_w, attn_b, x)?; // 1 x N
    let attn_col = tape.transpose(attn_scores); // N x 1
    let attention = tape.softmax_columns(attn_col); // N x 1
    let video_logits = tape.matmul(logits, attention)?; // C x 1
    let video_log_probs = tape.log_softmax_columns(video_logits);
    Ok(BaselineGraph {
        tape,
        class_w,
        class_b,
        attn_w,
        attn_b,
        video_log_probs,
    })
}

/// Train the CAS baseline on the training split of one stream. Returns the
/// trained parameters and the mean loss per epoch. Fully deterministic for a
/// fixed seed.
pub fn train_cas_baseline(
    corpus: &Corpus,
    stream: Stream,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<(CasBaselineParams, Vec<f64>)> {
    let train: Vec<&VideoRecord> = corpus.split(Split::Train).collect();
    if train.is_empty() {
        return Err(AssgError::Training("empty training split".to_string()));
    }
    let k = train[0].rgb.k_dims();
    let mut params = CasBaselineParams::init(k, corpus.num_classes, learning_rate, seed);
    let mut history = Vec::with_capacity(epochs);

    // Feature columns are reused across epochs.
    let columns: Vec<Matrix> = train.iter().map(|v| v.stream(stream).as_columns()).collect();
    let targets: Vec<Matrix> = train
        .iter()
        .map(|v| label_target(&v.labels, corpus.num_classes))
        .collect::<Result<_>>()?;

    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut shuffle_rng = epoch_rng(seed, epoch as u64);
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        for &vi in &order {
            let graph = baseline_forward(&params, &columns[vi])?;
            let mut tape = graph.tape;
            let loss = tape.weighted_sum(graph.video_log_probs, targets[vi].scale(-1.0))?;
            let loss_value = tape.scalar(loss)?;
            if !loss_value.is_finite() {
                return Err(AssgError::NonFinite {
                    context: format!("baseline loss on video {}", train[vi].id),
                    value: loss_value,
                });
            }
            loss_sum += loss_value;

            let mut grads = tape.backward(loss)?;
            let grad_list = [
                grads.take_wrt(&tape, graph.class_w),
                grads.take_wrt(&tape, graph.class_b),
                grads.take_wrt(&tape, graph.attn_w),
                grads.take_wrt(&tape, graph.attn_b),
            ];
            let mut param_list = [
                std::mem::replace(&mut params.class_w, Matrix::zeros(0, 0)),
                std::mem::replace(&mut params.class_b, Matrix::zeros(0, 0)),
                std::mem::replace(&mut params.attn_w, Matrix::zeros(0, 0)),
                std::mem::replace(&mut params.attn_b, Matrix::zeros(0, 0)),
            ];
            let hyper = params.hyper;
            adam_update(&mut param_list, &grad_list, &mut params.adam, &hyper)?;
            let [cw, cb, aw, ab] = param_list;
            params.class_w = cw;
            params.class_b = cb;
            params.attn_w = aw;
            params.attn_b = ab;
        }
        history.push(loss_sum / train.len() as f64);
    }
    Ok((params, history))
}

/// Per-epoch shuffle stream, derived so training can resume mid-run without
/// replaying earlier epochs.
pub(crate) fn epoch_rng(seed: u64, epoch: u64) -> ChaCha20Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&epoch.to_le_bytes());
    bytes[16] = 0x5e;
    ChaCha20Rng::from_seed(bytes)
}

/// Per-segment CAS for one video: raw class logits, then per-class min-max
/// normalization over the video.
pub fn compute_cas(
    params: &CasBaselineParams,
    video: &VideoRecord,
    stream: Stream,
) -> Result<CasSequence> {
    let x = video.stream(stream).as_columns();
    if x.rows() != params.k_dims() {
        return Err(AssgError::ShapeMismatch {
            op: "compute_cas",
            expected: format!("{} feature dims", params.k_dims()),
            got: format!("{}", x.rows()),
        });
    }
    let mut logits = params.class_w.matmul(&x)?;
    for r in 0..logits.rows() {
        let b = params.class_b.get(r, 0);
        for v in logits.row_mut(r) {
            *v += b;
        }
    }
    // Min-max per class row; constant rows collapse to zero.
    for r in 0..logits.rows() {
        let row = logits.row_mut(r);
        let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max > min {
            for v in row.iter_mut() {
                *v = (*v - min) / (max - min);
            }
        } else {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok(CasSequence { values: logits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, GenConfig};

    fn separable_corpus() -> Corpus {
        generate_corpus(&GenConfig {
            seed: 5,
            num_classes: 3,
            n_segments: 30,
            k_dims: 12,
            train_videos: 9,
            test_videos: 3,
            noise_sigma: 0.0,
            instances_per_video: (1, 2),
            instance_len_frac: (0.15, 0.3),
            ..GenConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn loss_decreases_on_separable_corpus() {
        let corpus = separable_corpus();
        let (_, history) = train_cas_baseline(&corpus, Stream::Rgb, 10, 1e-2, 3).unwrap();
        assert_eq!(history.len(), 10);
        for w in history.windows(2) {
            assert!(w[1] < w[0], "loss did not decrease: {history:?}");
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let corpus = separable_corpus();
        let (params, history) = train_cas_baseline(&corpus, Stream::Rgb, 0, 1e-2, 3).unwrap();
        let init = CasBaselineParams::init(12, 3, 1e-2, 3);
        assert_eq!(params.class_w, init.class_w);
        assert_eq!(params.attn_w, init.attn_w);
        assert_eq!(params.adam.t, 0);
        assert!(history.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = separable_corpus();
        let (a, _) = train_cas_baseline(&corpus, Stream::Flow, 4, 1e-2, 9).unwrap();
        let (b, _) = train_cas_baseline(&corpus, Stream::Flow, 4, 1e-2, 9).unwrap();
        assert_eq!(a.class_w, b.class_w);
        assert_eq!(a.class_b, b.class_b);
        assert_eq!(a.attn_w, b.attn_w);
        assert_eq!(a.attn_b, b.attn_b);
        assert_eq!(a.adam, b.adam);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let corpus = Corpus {
            num_classes: 2,
            videos: vec![],
        };
        assert!(train_cas_baseline(&corpus, Stream::Rgb, 1, 1e-2, 0).is_err());
    }

    #[test]
    fn cas_bounds_and_instance_alignment() {
        let corpus = separable_corpus();
        let (params, _) = train_cas_baseline(&corpus, Stream::Rgb, 30, 1e-2, 3).unwrap();
        for video in &corpus.videos {
            let cas = compute_cas(&params, video, Stream::Rgb).unwrap();
            for c in 1..=corpus.num_classes {
                for t in 0..cas.n_segments() {
                    let v = cas.get(c, t);
                    assert!((0.0..=1.0).contains(&v));
                }
            }
        }
        // On the zero-noise corpus the labeled class activates inside its
        // instance well above the background level.
        let video = &corpus.videos[0];
        let cas = compute_cas(&params, video, Stream::Rgb).unwrap();
        let gt = video.ground_truth[0];
        let inside = cas.get(gt.class, (gt.start + gt.end) / 2);
        let bg_t = (0..video.n_segments())
            .find(|&t| !video.ground_truth.iter().any(|g| g.start <= t && t <= g.end))
            .unwrap();
        let outside = cas.get(gt.class, bg_t);
        assert!(
            inside > outside + 0.5,
            "inside {inside} vs outside {outside}"
        );
    }

    #[test]
    fn constant_features_normalize_to_zero_rows() {
        let params = CasBaselineParams::init(4, 2, 1e-2, 0);
        let video = VideoRecord {
            id: "const".to_string(),
            rgb: crate::corpus::FeatureSequence::new(Matrix::filled(6, 4, 0.3)).unwrap(),
            flow: crate::corpus::FeatureSequence::new(Matrix::filled(6, 4, 0.3)).unwrap(),
            labels: vec![1],
            ground_truth: vec![],
            split: Split::Train,
        };
        let cas = compute_cas(&params, &video, Stream::Rgb).unwrap();
        for c in 1..=2 {
            for t in 0..6 {
                assert_eq!(cas.get(c, t), 0.0);
            }
        }
    }
}
