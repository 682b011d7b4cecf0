//! Data model for two-stream segment features, deterministic synthetic
//! corpus generation, feature file I/O, and the shot-change signal used for
//! background seeding.

mod generate;
mod io;
mod saliency;

pub use generate::{generate_corpus, GenConfig};
pub use io::{load_corpus, read_features, save_corpus, write_features, FEATURE_MAGIC};
pub use saliency::shot_change_signal;

use serde::{Deserialize, Serialize};

use crate::error::{AssgError, Result};
use crate::numerics::Matrix;

/// Class identifier. 0 is the background; actions are 1..=C.
pub type ClassId = usize;

/// One of the two feature modalities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Rgb,
    Flow,
}

impl Stream {
    pub const ALL: [Stream; 2] = [Stream::Rgb, Stream::Flow];

    pub fn as_str(self) -> &'static str {
        match self {
            Stream::Rgb => "rgb",
            Stream::Flow => "flow",
        }
    }
}

impl std::fmt::Display for Stream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Stream {
    type Err = AssgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgb" => Ok(Stream::Rgb),
            "flow" => Ok(Stream::Flow),
            other => Err(AssgError::Config(format!(
                "unknown stream '{other}' (expected rgb or flow)"
            ))),
        }
    }
}

/// Per-segment features of one stream of one video: an N x K matrix whose
/// row `t` is the feature vector of segment `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    values: Matrix,
}

impl FeatureSequence {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(AssgError::Config(format!(
                "feature sequence must be at least 1x1, got {}x{}",
                values.rows(),
                values.cols()
            )));
        }
        if !values.is_finite() {
            return Err(AssgError::NonFinite {
                context: "FeatureSequence".to_string(),
                value: f64::NAN,
            });
        }
        Ok(FeatureSequence { values })
    }

    pub fn n_segments(&self) -> usize {
        self.values.rows()
    }

    pub fn k_dims(&self) -> usize {
        self.values.cols()
    }

    pub fn segment(&self, t: usize) -> &[f64] {
        self.values.row(t)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    /// Features as a K x N matrix (one column per segment), the layout the
    /// network consumes.
    pub fn as_columns(&self) -> Matrix {
        self.values.transpose()
    }
}

/// A labeled temporal interval, inclusive on both ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthInstance {
    pub class: ClassId,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One untrimmed video: two feature streams, the video-level label set, and
/// (for evaluation only) the ground-truth instances.
#[derive(Clone, Debug)]
pub struct VideoRecord {
    pub id: String,
    pub rgb: FeatureSequence,
    pub flow: FeatureSequence,
    /// Video-level annotation: the set of action classes present.
    pub labels: Vec<ClassId>,
    /// Never visible to training; consumed by the evaluator.
    pub ground_truth: Vec<GroundTruthInstance>,
    pub split: Split,
}

impl VideoRecord {
    pub fn stream(&self, stream: Stream) -> &FeatureSequence {
        match stream {
            Stream::Rgb => &self.rgb,
            Stream::Flow => &self.flow,
        }
    }

    pub fn n_segments(&self) -> usize {
        self.rgb.n_segments()
    }

    /// Check the record invariants: streams share N and K, labels are
    /// non-empty, ground truth lies inside the video and references only
    /// labeled classes.
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        let n = self.rgb.n_segments();
        if self.flow.n_segments() != n || self.flow.k_dims() != self.rgb.k_dims() {
            return Err(AssgError::Config(format!(
                "video {}: stream shapes disagree ({}x{} rgb vs {}x{} flow)",
                self.id,
                n,
                self.rgb.k_dims(),
                self.flow.n_segments(),
                self.flow.k_dims()
            )));
        }
        if self.labels.is_empty() {
            return Err(AssgError::Config(format!("video {}: empty label set", self.id)));
        }
        for &label in &self.labels {
            if label == 0 || label > num_classes {
                return Err(AssgError::Config(format!(
                    "video {}: label {} outside 1..={}",
                    self.id, label, num_classes
                )));
            }
        }
        for gt in &self.ground_truth {
            if gt.start > gt.end || gt.end >= n {
                return Err(AssgError::Config(format!(
                    "video {}: ground truth [{}, {}] outside [0, {})",
                    self.id, gt.start, gt.end, n
                )));
            }
            if !self.labels.contains(&gt.class) {
                return Err(AssgError::Config(format!(
                    "video {}: ground-truth class {} not in video labels",
                    self.id, gt.class
                )));
            }
        }
        Ok(())
    }
}

/// The whole dataset: videos over a shared feature dimensionality plus the
/// number of action classes.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub num_classes: usize,
    pub videos: Vec<VideoRecord>,
}

impl Corpus {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &VideoRecord> {
        self.videos.iter().filter(move |v| v.split == split)
    }

    pub fn video(&self, id: &str) -> Option<&VideoRecord> {
        self.videos.iter().find(|v| v.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self
            .videos
            .first()
            .map(|v| v.rgb.k_dims())
            .ok_or_else(|| AssgError::Config("corpus has no videos".to_string()))?;
        for video in &self.videos {
            video.validate(self.num_classes)?;
            if video.rgb.k_dims() != k {
                return Err(AssgError::Config(format!(
                    "video {}: K = {} differs from corpus K = {}",
                    video.id,
                    video.rgb.k_dims(),
                    k
                )));
            }
        }
        Ok(())
    }
}
