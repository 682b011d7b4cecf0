use crate::error::{AssgError, Result};
use crate::numerics::{Matrix, NodeId};
use crate::seeding::SeedLabelMap;
use crate::ssg::SsgForward;

/// Mean negative log-probability over currently labeled locations, both
/// background and foreground together; unlabeled locations contribute
/// nothing. Appends the loss node to the forward tape and returns it.
pub fn seeding_loss(forward: &mut SsgForward, labels: &SeedLabelMap) -> Result<NodeId> {
    let rows = forward.tape.value(forward.logits).rows();
    let n = forward.n_segments();
    if labels.len() != n {
        return Err(AssgError::ShapeMismatch {
            op: "seeding_loss",
            expected: format!("{n} labels"),
            got: format!("{}", labels.len()),
        });
    }
    let total = labels.labeled_count();
    if total == 0 {
        return Err(AssgError::Training(
            "seeding loss needs at least one labeled location".to_string(),
        ));
    }
    // -1/|T| at each labeled (class, t); the weighted sum of log H is then
    // exactly the mean negative log-likelihood.
    let mut weights = Matrix::zeros(rows, n);
    for t in 0..n {
        if let Some(c) = labels.state(t) {
            if c >= rows {
                return Err(AssgError::Config(format!(
                    "label {c} at t = {t} outside heatmap rows 0..{rows}"
                )));
            }
            weights.set(c, t, -1.0 / total as f64);
        }
    }
    let log_h = forward.tape.log_softmax_columns(forward.logits);
    forward.tape.weighted_sum(log_h, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_check, Tape};
    use crate::ssg::{ssg_forward, SsgParams};

    fn labels_of(states: &[Option<usize>]) -> SeedLabelMap {
        let mut map = SeedLabelMap::unlabeled(states.len());
        for (t, s) in states.iter().enumerate() {
            if let Some(c) = s {
                map.label(t, *c).unwrap();
            }
        }
        map
    }

    /// Evaluate the loss formula on a raw logits matrix through a scratch
    /// tape (the same ops the network path uses).
    fn loss_on_logits(logits: Matrix, labels: &SeedLabelMap) -> f64 {
        let total = labels.labeled_count() as f64;
        let mut weights = Matrix::zeros(logits.rows(), logits.cols());
        for t in 0..labels.len() {
            if let Some(c) = labels.state(t) {
                weights.set(c, t, -1.0 / total);
            }
        }
        let mut tape = Tape::new();
        let x = tape.param(logits);
        let log_h = tape.log_softmax_columns(x);
        let loss = tape.weighted_sum(log_h, weights).unwrap();
        tape.scalar(loss).unwrap()
    }

    #[test]
    fn perfect_prediction_drives_loss_to_zero() {
        // Logit margin >= 20 on the labeled class at every labeled location.
        let mut logits = Matrix::zeros(3, 4);
        logits.set(1, 0, 20.0);
        logits.set(1, 1, 20.0);
        logits.set(0, 2, 20.0);
        logits.set(2, 3, 20.0);
        let labels = labels_of(&[Some(1), Some(1), Some(0), Some(2)]);
        let loss = loss_on_logits(logits, &labels);
        assert!(loss < 1e-6, "loss = {loss}");
    }

    #[test]
    fn uniform_heatmap_single_label_gives_ln_c_plus_1() {
        // C = 4 foreground classes -> 5 rows; uniform H = 1/5 everywhere.
        let logits = Matrix::zeros(5, 3);
        let labels = labels_of(&[None, Some(2), None]);
        let loss = loss_on_logits(logits, &labels);
        assert!((loss - 5.0f64.ln()).abs() < 1e-12, "loss = {loss}");
    }

    #[test]
    fn duplicating_labeled_sets_leaves_loss_unchanged() {
        let logits = Matrix::from_rows(&[
            vec![0.3, -0.7, 1.1],
            vec![-0.2, 0.9, 0.4],
        ])
        .unwrap();
        let labels = labels_of(&[Some(0), Some(1), None]);
        let single = loss_on_logits(logits.clone(), &labels);

        // The same video twice: logits and labels tiled along time.
        let mut doubled = Matrix::zeros(2, 6);
        for r in 0..2 {
            for t in 0..3 {
                doubled.set(r, t, logits.get(r, t));
                doubled.set(r, t + 3, logits.get(r, t));
            }
        }
        let labels2 = labels_of(&[Some(0), Some(1), None, Some(0), Some(1), None]);
        let double = loss_on_logits(doubled, &labels2);
        assert!((single - double).abs() < 1e-12);
    }

    #[test]
    fn zero_labeled_locations_is_an_error() {
        let params = SsgParams::init(3, 2, 4, 7);
        let features = Matrix::from_vec(3, 5, (0..15).map(|i| (i as f64).cos()).collect()).unwrap();
        let mut fwd = ssg_forward(&params, &features).unwrap();
        let labels = SeedLabelMap::unlabeled(5);
        assert!(seeding_loss(&mut fwd, &labels).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (params, features) = crate::test_util::kink_free_instance(11, 3, 2, 4, 6);
        let labels = labels_of(&[Some(1), None, Some(0), Some(2), None, Some(1)]);

        let mut fwd = ssg_forward(&params, &features).unwrap();
        let loss = seeding_loss(&mut fwd, &labels).unwrap();
        let grads = fwd.tape.backward(loss).unwrap();
        let analytic: Vec<Matrix> = fwd
            .params
            .as_array()
            .iter()
            .map(|&id| grads.wrt(&fwd.tape, id))
            .collect();

        let err = finite_diff_check(
            |p| {
                let params = SsgParams::from_vec(p.to_vec())?;
                let mut fwd = ssg_forward(&params, &features)?;
                let loss = seeding_loss(&mut fwd, &labels)?;
                fwd.tape.scalar(loss)
            },
            &params.to_vec(),
            &analytic,
            1e-3,
        )
        .unwrap();
        assert!(err < 1e-4, "gradient error {err}");
    }
}
