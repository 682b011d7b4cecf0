use serde::{Deserialize, Serialize};

use crate::corpus::ClassId;
use crate::error::{AssgError, Result};

/// Per-segment label state for one video: every location is either
/// unlabeled or carries exactly one class (0 = background). The class seed
/// sets `S_c` are the preimages of each state, so they are disjoint by
/// construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLabelMap {
    /// `None` = unlabeled.
    states: Vec<Option<ClassId>>,
}

impl SeedLabelMap {
    pub fn unlabeled(n: usize) -> Self {
        SeedLabelMap {
            states: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, t: usize) -> Option<ClassId> {
        self.states[t]
    }

    pub fn is_labeled(&self, t: usize) -> bool {
        self.states[t].is_some()
    }

    /// Label a currently-unlabeled location. Labels are write-once: growth
    /// never relabels.
    pub fn label(&mut self, t: usize, class: ClassId) -> Result<()> {
        if t >= self.states.len() {
            return Err(AssgError::Config(format!(
                "seed index {t} outside [0, {})",
                self.states.len()
            )));
        }
        if let Some(existing) = self.states[t] {
            return Err(AssgError::Config(format!(
                "location {t} already labeled {existing}, refusing to relabel as {class}"
            )));
        }
        self.states[t] = Some(class);
        Ok(())
    }

    /// The seed set `S_c`, ascending.
    pub fn class_set(&self, class: ClassId) -> Vec<usize> {
        self.states
            .iter()
            .enumerate()
            .filter_map(|(t, s)| (*s == Some(class)).then_some(t))
            .collect()
    }

    pub fn labeled_count(&self) -> usize {
        self.states.iter().filter(|s| s.is_some()).count()
    }

    pub fn labeled_fraction(&self) -> f64 {
        if self.states.is_empty() {
            0.0
        } else {
            self.labeled_count() as f64 / self.states.len() as f64
        }
    }

    /// Classes that currently have at least one labeled location, ascending.
    pub fn present_classes(&self) -> Vec<ClassId> {
        let mut classes: Vec<ClassId> = self.states.iter().flatten().copied().collect();
        classes.sort_unstable();
        classes.dedup();
        classes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_write_once() {
        let mut map = SeedLabelMap::unlabeled(5);
        map.label(2, 1).unwrap();
        assert!(map.label(2, 0).is_err());
        assert_eq!(map.state(2), Some(1));
    }

    #[test]
    fn class_sets_are_disjoint_views() {
        let mut map = SeedLabelMap::unlabeled(6);
        map.label(0, 0).unwrap();
        map.label(3, 2).unwrap();
        map.label(4, 2).unwrap();
        assert_eq!(map.class_set(0), vec![0]);
        assert_eq!(map.class_set(2), vec![3, 4]);
        assert_eq!(map.class_set(1), Vec::<usize>::new());
        assert_eq!(map.labeled_count(), 3);
        assert_eq!(map.present_classes(), vec![0, 2]);
    }

    #[test]
    fn out_of_range_rejected() {
        let mut map = SeedLabelMap::unlabeled(3);
        assert!(map.label(3, 1).is_err());
    }
}
