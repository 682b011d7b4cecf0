use serde::{Deserialize, Serialize};

use crate::error::{AssgError, Result};
use crate::numerics::Matrix;

/// Adam hyperparameters. The learning rate comes from the training config;
/// the moment decays and epsilon are the standard defaults.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AdamHyperParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamHyperParams {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamHyperParams {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators for a fixed list of parameter matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    /// Number of completed updates; incremented exactly once per
    /// [`adam_update`] call.
    pub t: u64,
}

impl AdamState {
    /// Zero moments shaped like `params`.
    pub fn new(params: &[Matrix]) -> Self {
        let zeros = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        AdamState {
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
            t: 0,
        }
    }
}

/// One Adam step with bias correction over a parameter list.
pub fn adam_update(
    params: &mut [Matrix],
    grads: &[Matrix],
    state: &mut AdamState,
    hp: &AdamHyperParams,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(AssgError::ShapeMismatch {
            op: "adam_update",
            expected: format!("{} parameter tensors", params.len()),
            got: format!("{} grads / {} moments", grads.len(), state.m.len()),
        });
    }
    for ((p, g), (m, v)) in params
        .iter()
        .zip(grads.iter())
        .zip(state.m.iter().zip(state.v.iter()))
    {
        if !p.same_shape(g) || !p.same_shape(m) || !p.same_shape(v) {
            return Err(AssgError::ShapeMismatch {
                op: "adam_update",
                expected: format!("{}x{}", p.rows(), p.cols()),
                got: format!("{}x{} grad", g.rows(), g.cols()),
            });
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let bias1 = 1.0 - hp.beta1.powi(t);
    let bias2 = 1.0 - hp.beta2.powi(t);

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads.iter())
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let pd = p.data_mut();
        let gd = g.data();
        let md = m.data_mut();
        let vd = v.data_mut();
        for i in 0..pd.len() {
            md[i] = hp.beta1 * md[i] + (1.0 - hp.beta1) * gd[i];
            vd[i] = hp.beta2 * vd[i] + (1.0 - hp.beta2) * gd[i] * gd[i];
            let m_hat = md[i] / bias1;
            let v_hat = vd[i] / bias2;
            pd[i] -= hp.learning_rate * m_hat / (v_hat.sqrt() + hp.epsilon);
        }
    }
    Ok(())
}
