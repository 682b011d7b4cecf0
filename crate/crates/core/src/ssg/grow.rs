use serde::{Deserialize, Serialize};

use crate::corpus::ClassId;
use crate::error::{AssgError, Result};
use crate::seeding::SeedLabelMap;
use crate::ssg::Heatmap;

/// Growing thresholds, one per class including the background. A location
/// joins class `c` only when its probability clears `theta[c]` and wins the
/// column argmax.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowThresholds {
    per_class: Vec<f64>,
}

impl GrowThresholds {
    /// One shared foreground threshold plus a background threshold, the
    /// common configuration.
    pub fn uniform(num_classes: usize, background: f64, foreground: f64) -> Result<Self> {
        Self::per_class(
            std::iter::once(background)
                .chain(std::iter::repeat(foreground).take(num_classes))
                .collect(),
        )
    }

    pub fn per_class(per_class: Vec<f64>) -> Result<Self> {
        for (c, &theta) in per_class.iter().enumerate() {
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(AssgError::Config(format!(
                    "growing threshold for class {c} must lie in (0, 1], got {theta}"
                )));
            }
        }
        Ok(GrowThresholds { per_class })
    }

    #[inline]
    pub fn for_class(&self, class: ClassId) -> f64 {
        self.per_class[class]
    }

    pub fn num_rows(&self) -> usize {
        self.per_class.len()
    }
}

/// One synchronous growing sweep.
///
/// A location `t` that is unlabeled at sweep start is assigned class `c`
/// iff `t` neighbours the sweep-start seed set `S_c` (immediately left or
/// right), `H[c, t] >= theta[c]`, and `c` is the column argmax of `H[:, t]`
/// (ties to the smaller class id). Existing labels never change. Returns
/// the number of newly labeled locations.
pub fn grow_step(
    heatmap: &Heatmap,
    labels: &mut SeedLabelMap,
    thresholds: &GrowThresholds,
) -> Result<usize> {
    let n = labels.len();
    if heatmap.n_segments() != n || heatmap.num_rows() != thresholds.num_rows() {
        return Err(AssgError::ShapeMismatch {
            op: "grow_step",
            expected: format!("heatmap {}x{}", thresholds.num_rows(), n),
            got: format!("{}x{}", heatmap.num_rows(), heatmap.n_segments()),
        });
    }
    // Snapshot so the sweep reads only sweep-start labels.
    let start: Vec<Option<ClassId>> = (0..n).map(|t| labels.state(t)).collect();

    let mut grown = 0;
    for t in 0..n {
        if start[t].is_some() {
            continue;
        }
        let class = heatmap.argmax_class(t);
        if heatmap.get(class, t) < thresholds.for_class(class) {
            continue;
        }
        let neighbours_class = (t > 0 && start[t - 1] == Some(class))
            || (t + 1 < n && start[t + 1] == Some(class));
        if neighbours_class {
            labels.label(t, class)?;
            grown += 1;
        }
    }
    Ok(grown)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// Build a heatmap from a foreground row for C = 1, with the remaining
    /// mass on the background.
    fn two_row_heatmap(fg: &[f64]) -> Heatmap {
        let bg: Vec<f64> = fg.iter().map(|v| 1.0 - v).collect();
        Heatmap::from_probabilities(Matrix::from_rows(&[bg, fg.to_vec()]).unwrap()).unwrap()
    }

    #[test]
    fn empty_seed_sets_do_not_grow() {
        let h = two_row_heatmap(&[0.99, 0.99, 0.99]);
        let mut labels = SeedLabelMap::unlabeled(3);
        let thresholds = GrowThresholds::uniform(1, 0.5, 0.5).unwrap();
        assert_eq!(grow_step(&h, &mut labels, &thresholds).unwrap(), 0);
        assert_eq!(labels.labeled_count(), 0);
    }

    #[test]
    fn dominant_threshold_blocks_growth() {
        let h = two_row_heatmap(&[0.9, 0.9, 0.9]);
        let mut labels = SeedLabelMap::unlabeled(3);
        labels.label(1, 1).unwrap();
        let thresholds = GrowThresholds::uniform(1, 0.99, 0.95).unwrap();
        assert_eq!(grow_step(&h, &mut labels, &thresholds).unwrap(), 0);
    }

    #[test]
    fn spec_example_grows_both_neighbours() {
        // S_1 = {2}, H[1, .] = [.1, .996, .99, .995, .1], theta = 0.99:
        // t = 1 and t = 3 join class 1; t = 0 and t = 4 stay untouched.
        let h = two_row_heatmap(&[0.1, 0.996, 0.99, 0.995, 0.1]);
        let mut labels = SeedLabelMap::unlabeled(5);
        labels.label(2, 1).unwrap();
        let thresholds = GrowThresholds::uniform(1, 0.99, 0.99).unwrap();
        let grown = grow_step(&h, &mut labels, &thresholds).unwrap();
        assert_eq!(grown, 2);
        assert_eq!(labels.state(0), None);
        assert_eq!(labels.state(1), Some(1));
        assert_eq!(labels.state(2), Some(1));
        assert_eq!(labels.state(3), Some(1));
        assert_eq!(labels.state(4), None);
        // t = 2 at exactly the threshold would also grow (>= comparison),
        // which the next sweep confirms by reaching t = 0? No: 0.1 < 0.99.
        let grown2 = grow_step(&h, &mut labels, &thresholds).unwrap();
        assert_eq!(grown2, 0);
    }

    #[test]
    fn existing_labels_never_change_and_growth_is_monotone() {
        let h = two_row_heatmap(&[0.995, 0.995, 0.1, 0.995, 0.995]);
        let mut labels = SeedLabelMap::unlabeled(5);
        labels.label(0, 1).unwrap();
        labels.label(4, 0).unwrap();
        let thresholds = GrowThresholds::uniform(1, 0.8, 0.99).unwrap();
        let mut seen = labels.labeled_count();
        for _ in 0..5 {
            grow_step(&h, &mut labels, &thresholds).unwrap();
            let now = labels.labeled_count();
            assert!(now >= seen);
            seen = now;
        }
        assert_eq!(labels.state(0), Some(1));
        assert_eq!(labels.state(4), Some(0));
        // t=3 is background-dominated? fg 0.995 wins argmax but neighbours
        // seed 4 of class 0 only, so class 1 cannot reach it across t=2.
        assert_eq!(labels.state(1), Some(1));
        assert_eq!(labels.state(2), None);
        assert_eq!(labels.state(3), None);
    }

    /// Literal growing-criterion oracle, evaluated independently at every
    /// (class, location) pair against the sweep-start labels.
    fn brute_force_grow(
        h: &Heatmap,
        start: &SeedLabelMap,
        thresholds: &GrowThresholds,
    ) -> Vec<(usize, ClassId)> {
        let n = start.len();
        let mut out = Vec::new();
        for t in 0..n {
            if start.is_labeled(t) {
                continue;
            }
            for c in 0..h.num_rows() {
                let in_neighbourhood = start
                    .class_set(c)
                    .iter()
                    .any(|&s| (s > 0 && s - 1 == t) || s + 1 == t);
                let clears = h.get(c, t) >= thresholds.for_class(c);
                let is_argmax = h.argmax_class(t) == c;
                if in_neighbourhood && clears && is_argmax {
                    out.push((t, c));
                }
            }
        }
        out
    }

    fn random_instance(
        rng: &mut ChaCha20Rng,
    ) -> (Heatmap, SeedLabelMap, GrowThresholds) {
        let n = rng.gen_range(2..=32);
        let classes = rng.gen_range(1..=4usize);
        let rows = classes + 1;
        let mut m = Matrix::zeros(rows, n);
        for t in 0..n {
            let mut col: Vec<f64> = (0..rows).map(|_| rng.gen_range(0.01..1.0)).collect();
            let sum: f64 = col.iter().sum();
            col.iter_mut().for_each(|v| *v /= sum);
            // Fix the tiny normalization residue on the last row.
            let partial: f64 = col[..rows - 1].iter().sum();
            col[rows - 1] = 1.0 - partial;
            for (r, &v) in col.iter().enumerate() {
                m.set(r, t, v);
            }
        }
        let h = Heatmap::from_probabilities(m).unwrap();
        let mut labels = SeedLabelMap::unlabeled(n);
        for t in 0..n {
            if rng.gen_bool(0.3) {
                labels.label(t, rng.gen_range(0..rows)).unwrap();
            }
        }
        let thresholds = GrowThresholds::per_class(
            (0..rows).map(|_| rng.gen_range(0.05..1.0)).collect(),
        )
        .unwrap();
        (h, labels, thresholds)
    }

    #[test]
    fn matches_brute_force_oracle_on_random_instances() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        for _ in 0..60 {
            let (h, labels, thresholds) = random_instance(&mut rng);
            let start = labels.clone();
            let mut grown = labels;
            let count = grow_step(&h, &mut grown, &thresholds).unwrap();

            let expected = brute_force_grow(&h, &start, &thresholds);
            // Each location may be claimed by at most one class.
            let mut ts: Vec<usize> = expected.iter().map(|&(t, _)| t).collect();
            ts.dedup();
            assert_eq!(ts.len(), expected.len());

            assert_eq!(count, expected.len());
            for t in 0..start.len() {
                let exp = expected
                    .iter()
                    .find(|&&(et, _)| et == t)
                    .map(|&(_, c)| c)
                    .or(start.state(t));
                assert_eq!(grown.state(t), exp, "mismatch at t = {t}");
            }
        }
    }

    #[test]
    fn reaches_fixpoint_within_n_sweeps() {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        for _ in 0..20 {
            let (h, mut labels, thresholds) = random_instance(&mut rng);
            let n = labels.len();
            let mut last = labels.labeled_count();
            let mut fixed = false;
            for _ in 0..n {
                grow_step(&h, &mut labels, &thresholds).unwrap();
                let now = labels.labeled_count();
                if now == last {
                    fixed = true;
                    break;
                }
                last = now;
            }
            assert!(fixed || labels.labeled_count() == n);
        }
    }
}
