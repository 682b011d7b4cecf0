use crate::corpus::FeatureSequence;

/// Shot-change signal: the Euclidean distance between consecutive segment
/// features, min-max normalized to [0, 1]. Scene cuts in the synthetic
/// corpus are exactly feature discontinuities, so this stands in for a
/// saliency detector when hunting for background seeds.
///
/// `s[0] = 0`; an all-equal input maps to all zeros.
pub fn shot_change_signal(fs: &FeatureSequence) -> Vec<f64> {
    let n = fs.n_segments();
    let mut signal = vec![0.0; n];
    for t in 1..n {
        let prev = fs.segment(t - 1);
        let cur = fs.segment(t);
        signal[t] = prev
            .iter()
            .zip(cur)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
    }
    let max = signal.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = signal.iter().cloned().fold(f64::INFINITY, f64::min);
    if max > min {
        for v in signal.iter_mut() {
            *v = (*v - min) / (max - min);
        }
    } else {
        signal.iter_mut().for_each(|v| *v = 0.0);
    }
    signal
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    #[test]
    fn constant_features_give_all_zeros() {
        let fs = FeatureSequence::new(Matrix::filled(6, 3, 1.5)).unwrap();
        assert_eq!(shot_change_signal(&fs), vec![0.0; 6]);
    }

    #[test]
    fn single_jump_peaks_exactly_once() {
        let mut m = Matrix::zeros(8, 2);
        for t in 4..8 {
            m.set(t, 0, 3.0);
        }
        let fs = FeatureSequence::new(m).unwrap();
        let s = shot_change_signal(&fs);
        for (t, &v) in s.iter().enumerate() {
            if t == 4 {
                assert_eq!(v, 1.0);
            } else {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn linear_ramp_normalizes_to_unit_steps() {
        // x_t = (t, 0): all raw consecutive distances equal 1, so after
        // normalization the signal is 0 at t = 0 and 1 everywhere else.
        let mut m = Matrix::zeros(5, 2);
        for t in 0..5 {
            m.set(t, 0, t as f64);
        }
        let fs = FeatureSequence::new(m).unwrap();
        let s = shot_change_signal(&fs);
        assert_eq!(s[0], 0.0);
        for &v in &s[1..] {
            assert_eq!(v, 1.0);
        }
    }
}
