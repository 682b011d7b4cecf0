use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AssgError, Result};
use crate::numerics::{glorot_uniform, Matrix, NodeId, Tape};
use crate::ssg::Heatmap;

/// Backbone width of each temporal convolution.
pub const DEFAULT_HIDDEN_DIM: usize = 512;

/// All learnable weights of one stream's network. The foreground head reads
/// the positive ReLU part of the shared map `F`; the single background unit
/// reads the negative part. The adversarial classifier reuses `fg_w`/`fg_b`,
/// adding no parameters of its own.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsgParams {
    pub layer1_w: Matrix,
    pub layer1_b: Matrix,
    pub layer2_w: Matrix,
    pub layer2_b: Matrix,
    pub fg_w: Matrix,
    pub fg_b: Matrix,
    pub bg_w: Matrix,
    pub bg_b: Matrix,
}

impl SsgParams {
    pub fn init(k_dims: usize, num_classes: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        SsgParams {
            layer1_w: glorot_uniform(&mut rng, hidden, k_dims),
            layer1_b: Matrix::zeros(hidden, 1),
            layer2_w: glorot_uniform(&mut rng, hidden, hidden),
            layer2_b: Matrix::zeros(hidden, 1),
            fg_w: glorot_uniform(&mut rng, num_classes, hidden),
            fg_b: Matrix::zeros(num_classes, 1),
            bg_w: glorot_uniform(&mut rng, 1, hidden),
            bg_b: Matrix::zeros(1, 1),
        }
    }

    pub fn k_dims(&self) -> usize {
        self.layer1_w.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.layer1_w.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.fg_w.rows()
    }

    /// Fixed parameter order shared by the optimizer and checkpoints.
    pub fn to_vec(&self) -> Vec<Matrix> {
        vec![
            self.layer1_w.clone(),
            self.layer1_b.clone(),
            self.layer2_w.clone(),
            self.layer2_b.clone(),
            self.fg_w.clone(),
            self.fg_b.clone(),
            self.bg_w.clone(),
            self.bg_b.clone(),
        ]
    }

    pub fn from_vec(mut list: Vec<Matrix>) -> Result<Self> {
        if list.len() != 8 {
            return Err(AssgError::Config(format!(
                "expected 8 parameter matrices, got {}",
                list.len()
            )));
        }
        let bg_b = list.pop().unwrap();
        let bg_w = list.pop().unwrap();
        let fg_b = list.pop().unwrap();
        let fg_w = list.pop().unwrap();
        let layer2_b = list.pop().unwrap();
        let layer2_w = list.pop().unwrap();
        let layer1_b = list.pop().unwrap();
        let layer1_w = list.pop().unwrap();
        Ok(SsgParams {
            layer1_w,
            layer1_b,
            layer2_w,
            layer2_b,
            fg_w,
            fg_b,
            bg_w,
            bg_b,
        })
    }

    /// Total scalar parameter count.
    pub fn census(&self) -> usize {
        self.to_vec().iter().map(|m| m.len()).sum()
    }
}

/// Parameter node handles on a forward tape, in [`SsgParams::to_vec`] order.
#[derive(Clone, Copy, Debug)]
pub struct ParamNodes {
    pub layer1_w: NodeId,
    pub layer1_b: NodeId,
    pub layer2_w: NodeId,
    pub layer2_b: NodeId,
    pub fg_w: NodeId,
    pub fg_b: NodeId,
    pub bg_w: NodeId,
    pub bg_b: NodeId,
}

impl ParamNodes {
    pub fn as_array(&self) -> [NodeId; 8] {
        [
            self.layer1_w,
            self.layer1_b,
            self.layer2_w,
            self.layer2_b,
            self.fg_w,
            self.fg_b,
            self.bg_w,
            self.bg_b,
        ]
    }
}

/// One forward pass: the live tape plus handles to the shared feature map
/// and heads. The cached values realize the forward contract: `F` is the
/// pre-activation map, `F+ = relu(F)`, `F- = relu(-F)`, the foreground
/// logits read `F+`, the background logit reads `F-`, and the heatmap is the
/// column softmax over all C+1 logits.
pub struct SsgForward {
    pub tape: Tape,
    pub params: ParamNodes,
    pub input: NodeId,
    pub f: NodeId,
    pub f_pos: NodeId,
    pub f_neg: NodeId,
    pub logits: NodeId,
    pub h: NodeId,
}

impl SsgForward {
    pub fn heatmap(&self) -> Result<Heatmap> {
        Heatmap::from_probabilities(self.tape.value(self.h).clone())
    }

    pub fn n_segments(&self) -> usize {
        self.tape.value(self.input).cols()
    }
}

/// Run the backbone on a K x N feature matrix (one column per segment).
pub fn ssg_forward(params: &SsgParams, features: &Matrix) -> Result<SsgForward> {
    if features.rows() != params.k_dims() {
        return Err(AssgError::ShapeMismatch {
            op: "ssg_forward",
            expected: format!("{}xN features", params.k_dims()),
            got: format!("{}x{}", features.rows(), features.cols()),
        });
    }
    let mut tape = Tape::new();
    let nodes = ParamNodes {
        layer1_w: tape.param(params.layer1_w.clone()),
        layer1_b: tape.param(params.layer1_b.clone()),
        layer2_w: tape.param(params.layer2_w.clone()),
        layer2_b: tape.param(params.layer2_b.clone()),
        fg_w: tape.param(params.fg_w.clone()),
        fg_b: tape.param(params.fg_b.clone()),
        bg_w: tape.param(params.bg_w.clone()),
        bg_b: tape.param(params.bg_b.clone()),
    };
    let input = tape.input(features.clone());

    let pre1 = tape.affine(nodes.layer1_w, nodes.layer1_b, input)?;
    let act1 = tape.relu(pre1);
    let f = tape.affine(nodes.layer2_w, nodes.layer2_b, act1)?;
    let f_pos = tape.relu(f);
    let neg_f = tape.neg(f);
    let f_neg = tape.relu(neg_f);

    let fg_logits = tape.affine(nodes.fg_w, nodes.fg_b, f_pos)?;
    let bg_logit = tape.affine(nodes.bg_w, nodes.bg_b, f_neg)?;
    let logits = tape.concat_rows(bg_logit, fg_logits)?;
    let h = tape.softmax_columns(logits);

    Ok(SsgForward {
        tape,
        params: nodes,
        input,
        f,
        f_pos,
        f_neg,
        logits,
        h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_check;

    fn tiny_params(seed: u64) -> SsgParams {
        SsgParams::init(3, 2, 4, seed)
    }

    fn random_features(n: usize) -> Matrix {
        Matrix::from_vec(3, n, (0..3 * n).map(|i| ((i as f64) * 0.91).sin() * 1.5).collect())
            .unwrap()
    }

    #[test]
    fn heatmap_columns_are_normalized() {
        let fwd = ssg_forward(&tiny_params(1), &random_features(7)).unwrap();
        let h = fwd.tape.value(fwd.h);
        for t in 0..7 {
            let sum: f64 = (0..3).map(|r| h.get(r, t)).sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
        fwd.heatmap().unwrap();
    }

    #[test]
    fn zero_weights_give_uniform_heatmap() {
        let params = SsgParams {
            layer1_w: Matrix::zeros(4, 3),
            layer1_b: Matrix::zeros(4, 1),
            layer2_w: Matrix::zeros(4, 4),
            layer2_b: Matrix::zeros(4, 1),
            fg_w: Matrix::zeros(2, 4),
            fg_b: Matrix::zeros(2, 1),
            bg_w: Matrix::zeros(1, 4),
            bg_b: Matrix::zeros(1, 1),
        };
        let fwd = ssg_forward(&params, &random_features(5)).unwrap();
        let h = fwd.tape.value(fwd.h);
        for t in 0..5 {
            for r in 0..3 {
                assert!((h.get(r, t) - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn opposite_relus_never_both_active() {
        let fwd = ssg_forward(&tiny_params(2), &random_features(9)).unwrap();
        let pos = fwd.tape.value(fwd.f_pos);
        let neg = fwd.tape.value(fwd.f_neg);
        for (p, n) in pos.data().iter().zip(neg.data().iter()) {
            assert_eq!(p * n, 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let params = tiny_params(0);
        assert!(ssg_forward(&params, &Matrix::zeros(5, 4)).is_err());
    }

    #[test]
    fn sum_of_heatmap_gradient_matches_finite_differences() {
        let (params, features) = crate::test_util::kink_free_instance(3, 3, 2, 4, 4);
        let fwd = ssg_forward(&params, &features).unwrap();
        let mut tape = fwd.tape;
        let loss = tape.sum_all(fwd.h);
        let grads = tape.backward(loss).unwrap();
        let analytic: Vec<Matrix> = fwd
            .params
            .as_array()
            .iter()
            .map(|&id| grads.wrt(&tape, id))
            .collect();

        let err = finite_diff_check(
            |p| {
                let params = SsgParams::from_vec(p.to_vec())?;
                let fwd = ssg_forward(&params, &features)?;
                let mut tape = fwd.tape;
                let loss = tape.sum_all(fwd.h);
                tape.scalar(loss)
            },
            &params.to_vec(),
            &analytic,
            1e-3,
        )
        .unwrap();
        assert!(err < 1e-4, "gradient error {err}");
    }
}
