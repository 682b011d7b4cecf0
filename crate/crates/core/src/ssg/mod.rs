//! The seeded sequence growing network: a two-layer temporal backbone with
//! kernel-1 convolutions, an opposite-ReLU split of the shared feature map,
//! a background + foreground heatmap head, the neighbourhood growing rule,
//! and the seeding loss over currently labeled locations.

mod grow;
mod loss;
mod network;

pub use grow::{grow_step, GrowThresholds};
pub use loss::seeding_loss;
pub use network::{ssg_forward, SsgForward, SsgParams, DEFAULT_HIDDEN_DIM};

use crate::corpus::ClassId;
use crate::error::{AssgError, Result};
use crate::numerics::Matrix;

/// Per-segment class probability distribution: a (C+1) x N matrix whose row
/// 0 is the background and whose columns each sum to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    values: Matrix,
}

impl Heatmap {
    /// Wrap a column-stochastic matrix, checking normalization to 1e-9.
    pub fn from_probabilities(values: Matrix) -> Result<Self> {
        for t in 0..values.cols() {
            let mut sum = 0.0;
            for r in 0..values.rows() {
                let v = values.get(r, t);
                if !(0.0..=1.0).contains(&v) {
                    return Err(AssgError::Config(format!(
                        "heatmap entry at ({r}, {t}) = {v} outside [0, 1]"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(AssgError::Config(format!(
                    "heatmap column {t} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Heatmap { values })
    }

    /// Number of rows, i.e. C + 1.
    pub fn num_rows(&self) -> usize {
        self.values.rows()
    }

    pub fn num_foreground_classes(&self) -> usize {
        self.values.rows() - 1
    }

    pub fn n_segments(&self) -> usize {
        self.values.cols()
    }

    /// Probability of `class` (0 = background) at segment `t`.
    #[inline]
    pub fn get(&self, class: ClassId, t: usize) -> f64 {
        self.values.get(class, t)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    /// Column argmax with ties broken toward the smaller class id.
    pub fn argmax_class(&self, t: usize) -> ClassId {
        let mut best = 0;
        for r in 1..self.values.rows() {
            if self.values.get(r, t) > self.values.get(best, t) {
                best = r;
            }
        }
        best
    }

    /// CSV dump: `t,bg,class_1..class_C`, one row per segment.
    pub fn to_csv(&self) -> String {
        let classes = self.num_foreground_classes();
        let mut out = String::from("t,bg");
        for c in 1..=classes {
            out.push_str(&format!(",class_{c}"));
        }
        out.push('\n');
        for t in 0..self.n_segments() {
            out.push_str(&format!("{t}"));
            for r in 0..self.values.rows() {
                out.push_str(&format!(",{}", self.values.get(r, t)));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unnormalized_columns() {
        let bad = Matrix::from_rows(&[vec![0.7], vec![0.7]]).unwrap();
        assert!(Heatmap::from_probabilities(bad).is_err());
        let good = Matrix::from_rows(&[vec![0.25], vec![0.75]]).unwrap();
        assert!(Heatmap::from_probabilities(good).is_ok());
    }

    #[test]
    fn argmax_breaks_ties_to_smaller_class() {
        let h = Heatmap::from_probabilities(
            Matrix::from_rows(&[vec![0.4, 0.2], vec![0.4, 0.6], vec![0.2, 0.2]]).unwrap(),
        )
        .unwrap();
        assert_eq!(h.argmax_class(0), 0);
        assert_eq!(h.argmax_class(1), 1);
    }

    #[test]
    fn csv_layout_matches_heatmap_dump_format() {
        let h = Heatmap::from_probabilities(
            Matrix::from_rows(&[vec![0.5, 0.25], vec![0.5, 0.75]]).unwrap(),
        )
        .unwrap();
        let csv = h.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,bg,class_1"));
        assert_eq!(lines.next(), Some("0,0.5,0.5"));
        assert_eq!(lines.next(), Some("1,0.25,0.75"));
    }
}
