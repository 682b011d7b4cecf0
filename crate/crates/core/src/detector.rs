//! From trained heatmaps to detections: fuse the two stream heatmaps with
//! the modality ratio, extract multi-threshold contiguous runs as proposals,
//! score each by its interval mean, and prune per class with temporal NMS.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::ClassId;
use crate::error::{AssgError, Result};
use crate::evaluator::temporal_iou;
use crate::numerics::Matrix;
use crate::ssg::Heatmap;

/// A candidate detection: an inclusive segment interval with a class and a
/// score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub class: ClassId,
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

/// One detection row of the detections JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detection {
    pub video_id: String,
    pub class: ClassId,
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

/// Detection parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectConfig {
    /// Modality ratio: weight of the RGB stream.
    pub lambda: f64,
    /// Thresholds whose contiguous runs become proposals.
    pub detection_thresholds: Vec<f64>,
    pub nms_iou: f64,
    /// Minimum proposal length in segments.
    pub min_length: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            lambda: 0.3,
            detection_thresholds: (1..=9).map(|i| i as f64 / 10.0).collect(),
            nms_iou: 0.5,
            min_length: 1,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(AssgError::Config(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.detection_thresholds.is_empty() {
            return Err(AssgError::Config(
                "detection_thresholds must not be empty".to_string(),
            ));
        }
        for &t in &self.detection_thresholds {
            if !(t > 0.0 && t < 1.0) {
                return Err(AssgError::Config(format!(
                    "detection threshold {t} outside (0, 1)"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.nms_iou) {
            return Err(AssgError::Config(format!(
                "nms_iou must lie in [0, 1], got {}",
                self.nms_iou
            )));
        }
        if self.min_length == 0 {
            return Err(AssgError::Config("min_length must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// A (C+1) x N per-segment class score map with row 0 reserved for the
/// background. Detection reads foreground rows only, so the map need not be
/// column-stochastic (the CAS ablation feeds raw normalized activations).
#[derive(Clone, Debug, PartialEq)]
pub struct FusedMap {
    values: Matrix,
}

impl FusedMap {
    pub fn from_values(values: Matrix) -> Result<Self> {
        if values.rows() < 2 {
            return Err(AssgError::Config(format!(
                "fused map needs a background row plus at least one class, got {} rows",
                values.rows()
            )));
        }
        Ok(FusedMap { values })
    }

    pub fn from_heatmap(h: &Heatmap) -> Self {
        FusedMap {
            values: h.values().clone(),
        }
    }

    pub fn num_foreground_classes(&self) -> usize {
        self.values.rows() - 1
    }

    pub fn n_segments(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn get(&self, class: ClassId, t: usize) -> f64 {
        self.values.get(class, t)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }
}

/// Convex combination of the two stream heatmaps:
/// `fused[c, t] = lambda * rgb[c, t] + (1 - lambda) * flow[c, t]`.
/// The endpoints reproduce the single-stream map bit-exactly.
pub fn fuse_heatmaps(rgb: &Heatmap, flow: &Heatmap, lambda: f64) -> Result<FusedMap> {
    if rgb.values().shape() != flow.values().shape() {
        return Err(AssgError::ShapeMismatch {
            op: "fuse_heatmaps",
            expected: format!("{}x{}", rgb.num_rows(), rgb.n_segments()),
            got: format!("{}x{}", flow.num_rows(), flow.n_segments()),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(AssgError::Config(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    if lambda == 1.0 {
        return Ok(FusedMap::from_heatmap(rgb));
    }
    if lambda == 0.0 {
        return Ok(FusedMap::from_heatmap(flow));
    }
    let mut values = rgb.values().scale(lambda);
    values.add_in_place(&flow.values().scale(1.0 - lambda))?;
    FusedMap::from_values(values)
}

/// Maximal runs of `fused[c, .] >= theta` for every foreground class and
/// every detection threshold, keeping runs of at least `min_length`
/// segments. Identical (class, start, end) triples arising from different
/// thresholds collapse to one. Scores are left at 0; see
/// [`score_proposal`].
pub fn generate_proposals(fused: &FusedMap, cfg: &DetectConfig) -> Vec<Proposal> {
    let n = fused.n_segments();
    let mut spans: BTreeSet<(ClassId, usize, usize)> = BTreeSet::new();
    for class in 1..=fused.num_foreground_classes() {
        for &theta in &cfg.detection_thresholds {
            let mut t = 0;
            while t < n {
                if fused.get(class, t) >= theta {
                    let start = t;
                    while t + 1 < n && fused.get(class, t + 1) >= theta {
                        t += 1;
                    }
                    if t - start + 1 >= cfg.min_length {
                        spans.insert((class, start, t));
                    }
                }
                t += 1;
            }
        }
    }
    spans
        .into_iter()
        .map(|(class, start, end)| Proposal {
            class,
            start,
            end,
            score: 0.0,
        })
        .collect()
}

/// Interval mean of the fused class score:
/// `sum_t fused[class, t] / (end - start + 1)`.
pub fn score_proposal(fused: &FusedMap, proposal: &Proposal) -> f64 {
    let len = proposal.end - proposal.start + 1;
    let sum: f64 = (proposal.start..=proposal.end)
        .map(|t| fused.get(proposal.class, t))
        .sum();
    sum / len as f64
}

/// Score-descending order with deterministic tie-breaks: earlier start
/// first, then smaller end.
fn nms_order(a: &Proposal, b: &Proposal) -> std::cmp::Ordering {
    b.score
        .partial_cmp(&a.score)
        .expect("scores are finite")
        .then(a.start.cmp(&b.start))
        .then(a.end.cmp(&b.end))
}

/// Greedy per-class temporal NMS: walk proposals by descending score and
/// keep one iff its IoU with every kept proposal of the same class stays
/// below the threshold. Output is ordered by class, then descending score.
pub fn nms(proposals: &[Proposal], iou_threshold: f64) -> Vec<Proposal> {
    let mut classes: Vec<ClassId> = proposals.iter().map(|p| p.class).collect();
    classes.sort_unstable();
    classes.dedup();

    let mut kept = Vec::new();
    for class in classes {
        let mut candidates: Vec<&Proposal> =
            proposals.iter().filter(|p| p.class == class).collect();
        candidates.sort_by(|a, b| nms_order(a, b));
        let mut class_kept: Vec<&Proposal> = Vec::new();
        for p in candidates {
            let overlaps = class_kept
                .iter()
                .any(|k| temporal_iou((p.start, p.end), (k.start, k.end)) >= iou_threshold);
            if !overlaps {
                class_kept.push(p);
            }
        }
        kept.extend(class_kept.into_iter().copied());
    }
    kept
}

/// Full per-video detection: proposals, scoring, NMS.
pub fn detect_map(fused: &FusedMap, cfg: &DetectConfig) -> Vec<Proposal> {
    let mut proposals = generate_proposals(fused, cfg);
    for p in proposals.iter_mut() {
        p.score = score_proposal(fused, p);
    }
    nms(&proposals, cfg.nms_iou)
}
