use crate::error::{AssgError, Result};
use crate::numerics::Matrix;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf { requires_grad: bool },
    /// parents: [w, b, x] — per-column affine map `W x[:,t] + b`.
    Affine,
    /// parents: [a, b] — plain matrix product.
    Matmul,
    Relu,
    Neg,
    Transpose,
    SoftmaxColumns,
    LogSoftmaxColumns,
    /// R x N -> N x 1, summing over channels per column.
    ChannelSums,
    /// parents: [top, bottom] stacked along rows.
    ConcatRows,
    /// Elementwise product with a constant mask; gradients pass through
    /// the mask but never into it.
    MulMask(Matrix),
    /// Weighted sum with constant weights -> scalar.
    WeightedSum(Matrix),
    SumAll,
    /// C x N -> C x 1 row maxima (first maximum wins in backward).
    RowMax,
    RowMean,
}

struct Node {
    op: Op,
    parents: Vec<NodeId>,
    value: Matrix,
}

/// Reverse-mode autodiff over an append-only operation record.
///
/// Nodes are appended in execution order, so the record order is already
/// topological: every node's parents precede it. `backward` walks the record
/// once in reverse. The tape is single-writer; build, differentiate, drop.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Column-stable softmax used by the tape and by heatmap construction.
/// Each output column sums to 1; max subtraction prevents overflow.
pub(crate) fn softmax_columns_value(x: &Matrix) -> Matrix {
    let (rows, cols) = x.shape();
    let mut out = Matrix::zeros(rows, cols);
    for c in 0..cols {
        let mut max = f64::NEG_INFINITY;
        for r in 0..rows {
            max = max.max(x.get(r, c));
        }
        let mut denom = 0.0;
        for r in 0..rows {
            let e = (x.get(r, c) - max).exp();
            out.set(r, c, e);
            denom += e;
        }
        for r in 0..rows {
            out.set(r, c, out.get(r, c) / denom);
        }
    }
    out
}

pub(crate) fn log_softmax_columns_value(x: &Matrix) -> Matrix {
    let (rows, cols) = x.shape();
    let mut out = Matrix::zeros(rows, cols);
    for c in 0..cols {
        let mut max = f64::NEG_INFINITY;
        for r in 0..rows {
            max = max.max(x.get(r, c));
        }
        let mut sum = 0.0;
        for r in 0..rows {
            sum += (x.get(r, c) - max).exp();
        }
        let lse = max + sum.ln();
        for r in 0..rows {
            out.set(r, c, x.get(r, c) - lse);
        }
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, parents: Vec<NodeId>, value: Matrix) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, parents, value });
        id
    }

    /// Trainable leaf: `backward` reports a gradient for it.
    pub fn param(&mut self, value: Matrix) -> NodeId {
        self.push(
            Op::Leaf {
                requires_grad: true,
            },
            vec![],
            value,
        )
    }

    /// Constant leaf: gradients are not accumulated into it.
    pub fn input(&mut self, value: Matrix) -> NodeId {
        self.push(
            Op::Leaf {
                requires_grad: false,
            },
            vec![],
            value,
        )
    }

    #[inline]
    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> Result<f64> {
        let v = self.value(id);
        if v.shape() != (1, 1) {
            return Err(AssgError::NonScalarLoss {
                rows: v.rows(),
                cols: v.cols(),
            });
        }
        Ok(v.get(0, 0))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of trainable leaves on the tape.
    pub fn param_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.op, Op::Leaf { requires_grad: true }))
            .count()
    }

    /// `W x + b` applied per column; the kernel-1 temporal convolution.
    pub fn affine(&mut self, w: NodeId, b: NodeId, x: NodeId) -> Result<NodeId> {
        let (wm, bm, xm) = (self.value(w), self.value(b), self.value(x));
        if wm.cols() != xm.rows() || bm.rows() != wm.rows() || bm.cols() != 1 {
            return Err(AssgError::ShapeMismatch {
                op: "affine",
                expected: format!("W {}x{}, b {}x1, X {}x*", wm.rows(), wm.cols(), wm.rows(), wm.cols()),
                got: format!(
                    "W {}x{}, b {}x{}, X {}x{}",
                    wm.rows(),
                    wm.cols(),
                    bm.rows(),
                    bm.cols(),
                    xm.rows(),
                    xm.cols()
                ),
            });
        }
        let mut out = wm.matmul(xm)?;
        for r in 0..out.rows() {
            let bias = bm.get(r, 0);
            for v in out.row_mut(r) {
                *v += bias;
            }
        }
        Ok(self.push(Op::Affine, vec![w, b, x], out))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::Matmul, vec![a, b], out))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push(Op::Relu, vec![x], out)
    }

    pub fn neg(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).scale(-1.0);
        self.push(Op::Neg, vec![x], out)
    }

    pub fn transpose(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).transpose();
        self.push(Op::Transpose, vec![x], out)
    }

    pub fn softmax_columns(&mut self, x: NodeId) -> NodeId {
        let out = softmax_columns_value(self.value(x));
        self.push(Op::SoftmaxColumns, vec![x], out)
    }

    pub fn log_softmax_columns(&mut self, x: NodeId) -> NodeId {
        let out = log_softmax_columns_value(self.value(x));
        self.push(Op::LogSoftmaxColumns, vec![x], out)
    }

    /// Per-column channel sums: R x N -> N x 1.
    pub fn channel_sums(&mut self, x: NodeId) -> NodeId {
        let xm = self.value(x);
        let (rows, cols) = xm.shape();
        let mut out = Matrix::zeros(cols, 1);
        for r in 0..rows {
            for (c, &v) in xm.row(r).iter().enumerate() {
                out.data_mut()[c] += v;
            }
        }
        self.push(Op::ChannelSums, vec![x], out)
    }

    pub fn concat_rows(&mut self, top: NodeId, bottom: NodeId) -> Result<NodeId> {
        let (t, b) = (self.value(top), self.value(bottom));
        if t.cols() != b.cols() {
            return Err(AssgError::ShapeMismatch {
                op: "concat_rows",
                expected: format!("*x{}", t.cols()),
                got: format!("{}x{}", b.rows(), b.cols()),
            });
        }
        let mut data = Vec::with_capacity((t.rows() + b.rows()) * t.cols());
        data.extend_from_slice(t.data());
        data.extend_from_slice(b.data());
        let out = Matrix::from_vec(t.rows() + b.rows(), t.cols(), data)?;
        Ok(self.push(Op::ConcatRows, vec![top, bottom], out))
    }

    /// Elementwise product with a constant mask (hard erasion: the mask is
    /// data, not a differentiable input).
    pub fn mul_mask(&mut self, x: NodeId, mask: Matrix) -> Result<NodeId> {
        let out = self.value(x).hadamard(&mask)?;
        Ok(self.push(Op::MulMask(mask), vec![x], out))
    }

    /// `sum(weights ⊙ x)` with constant weights -> 1x1.
    pub fn weighted_sum(&mut self, x: NodeId, weights: Matrix) -> Result<NodeId> {
        let prod = self.value(x).hadamard(&weights)?;
        let out = Matrix::from_vec(1, 1, vec![prod.sum()])?;
        Ok(self.push(Op::WeightedSum(weights), vec![x], out))
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let out = Matrix::filled(1, 1, self.value(x).sum());
        self.push(Op::SumAll, vec![x], out)
    }

    /// Row maxima: C x N -> C x 1.
    pub fn row_max(&mut self, x: NodeId) -> NodeId {
        let xm = self.value(x);
        let mut out = Matrix::zeros(xm.rows(), 1);
        for r in 0..xm.rows() {
            let m = xm.row(r).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            out.set(r, 0, m);
        }
        self.push(Op::RowMax, vec![x], out)
    }

    /// Row means: C x N -> C x 1.
    pub fn row_mean(&mut self, x: NodeId) -> NodeId {
        let xm = self.value(x);
        let n = xm.cols() as f64;
        let mut out = Matrix::zeros(xm.rows(), 1);
        for r in 0..xm.rows() {
            out.set(r, 0, xm.row(r).iter().sum::<f64>() / n);
        }
        self.push(Op::RowMean, vec![x], out)
    }

    /// Reverse sweep from a scalar loss node. Returns one gradient slot per
    /// node; parameters the loss never reaches report zero gradients.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let loss_value = self.value(loss);
        if loss_value.shape() != (1, 1) {
            return Err(AssgError::NonScalarLoss {
                rows: loss_value.rows(),
                cols: loss_value.cols(),
            });
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf { requires_grad } => {
                    if *requires_grad {
                        grads[idx] = Some(dy);
                    }
                    continue;
                }
                Op::Affine => {
                    let [w, b, x] = [node.parents[0], node.parents[1], node.parents[2]];
                    if self.wants_grad(w) {
                        let dw = dy.matmul_bt(self.value(x))?;
                        self.accumulate(&mut grads, w, dw)?;
                    }
                    if self.wants_grad(b) {
                        let mut db = Matrix::zeros(dy.rows(), 1);
                        for r in 0..dy.rows() {
                            db.set(r, 0, dy.row(r).iter().sum());
                        }
                        self.accumulate(&mut grads, b, db)?;
                    }
                    if self.wants_grad(x) {
                        let dx = self.value(w).matmul_at(&dy)?;
                        self.accumulate(&mut grads, x, dx)?;
                    }
                }
                Op::Matmul => {
                    let [a, b] = [node.parents[0], node.parents[1]];
                    if self.wants_grad(a) {
                        let da = dy.matmul_bt(self.value(b))?;
                        self.accumulate(&mut grads, a, da)?;
                    }
                    if self.wants_grad(b) {
                        let db = self.value(a).matmul_at(&dy)?;
                        self.accumulate(&mut grads, b, db)?;
                    }
                }
                Op::Relu => {
                    let x = node.parents[0];
                    if self.wants_grad(x) {
                        // Subgradient at exactly 0 is 0.
                        let xv = self.value(x);
                        let mut dx = dy;
                        for (g, &v) in dx.data_mut().iter_mut().zip(xv.data().iter()) {
                            if v <= 0.0 {
                                *g = 0.0;
                            }
                        }
                        self.accumulate(&mut grads, x, dx)?;
                    }
                }
                Op::Neg => {
                    let x = node.parents[0];
                    if self.wants_grad(x) {
                        self.accumulate(&mut grads, x, dy.scale(-1.0))?;
                    }
                }
                Op::Transpose => {
                    let x = node.parents[0];
                    if self.wants_grad(x) {
                        self.accumulate(&mut grads, x, dy.transpose())?;
                    }
                }
                Op::SoftmaxColumns => {
                    let x = node.parents[0];
                    if self.wants_grad(x) {
                        let y = &node.value;
                        let mut dx = Matrix::zeros(y.rows(), y.cols());
                        for c in 0..y.cols() {
                            let mut dot = 0.0;
                            for r in 0..y.rows() {
                                dot += y.get(r, c) * dy.get(r, c);
                            }
                            for r in 0..y.rows() {
                                dx.set(r, c, y.get(r, c) * (dy.get(r, c) - dot));
                            }
                        }
                        self.accumulate(&mut grads, x, dx)?;
                    }
                }
                Op::LogSoftmaxColumns => {
                    let x = node.parents[0];
                    if self.wants_grad(x) {
                        let y = &node.value;
                        let mut dx = Matrix::zeros(y.rows(), y.cols());
                        for c in 0..y.cols() {
                            let mut sum = 0.0;
                            for r in 0..y.rows() {
                                sum += dy.get(r, c);
                            }
                            for r in 0..y.rows() {
                                dx.set(r, c, dy.get(r, c) - y.get(r, c).exp() * sum);
                            }
                        }
                        self.accumulate(&mut grads, x, dx)?;
                    }
                }
                Op::ChannelSums => {
                    let x = node.parents[0];
                    if self.wants_grad(x) {
                        let xv = self.value(x);
                        let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                        for r in 0..xv.rows() {
                            for c in 0..xv.cols() {
                                dx.set(r, c, dy.get(c, 0));
                            }
                        }
                        self.accumulate(&mut grads, x, dx)?;
                    }
                }
                Op::ConcatRows => {
                    let [top, bottom] = [node.parents[0], node.parents[1]];
                    let top_rows = self.value(top).rows();
                    let cols = dy.cols();
                    if self.wants_grad(top) {
                        let data = dy.data()[..top_rows * cols].to_vec();
                        self.accumulate(&mut grads, top, Matrix::from_vec(top_rows, cols, data)?)?;
                    }
                    if self.wants_grad(bottom) {
                        let rows = dy.rows() - top_rows;
                        let data = dy.data()[top_rows * cols..].to_vec();
                        self.accumulate(&mut grads, bottom, Matrix::from_vec(rows, cols, data)?)?;
                    }
                }
                Op::MulMask(mask) => {
                    let x = node.parents[0];
                    if self.wants_grad(x) {
                        self.accumulate(&mut grads, x, dy.hadamard(mask)?)?;
                    }
                }
                Op::WeightedSum(weights) => {
                    let x = node.parents[0];
                    if self.wants_grad(x) {
                        self.accumulate(&mut grads, x, weights.scale(dy.get(0, 0)))?;
                    }
                }
                Op::SumAll => {
                    let x = node.parents[0];
                    if self.wants_grad(x) {
                        let xv = self.value(x);
                        let dx = Matrix::filled(xv.rows(), xv.cols(), dy.get(0, 0));
                        self.accumulate(&mut grads, x, dx)?;
                    }
                }
                Op::RowMax => {
                    let x = node.parents[0];
                    if self.wants_grad(x) {
                        let xv = self.value(x);
                        let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                        for r in 0..xv.rows() {
                            let row = xv.row(r);
                            let mut arg = 0;
                            for (c, &v) in row.iter().enumerate() {
                                if v > row[arg] {
                                    arg = c;
                                }
                            }
                            dx.set(r, arg, dy.get(r, 0));
                        }
                        self.accumulate(&mut grads, x, dx)?;
                    }
                }
                Op::RowMean => {
                    let x = node.parents[0];
                    if self.wants_grad(x) {
                        let xv = self.value(x);
                        let inv = 1.0 / xv.cols() as f64;
                        let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                        for r in 0..xv.rows() {
                            let g = dy.get(r, 0) * inv;
                            for c in 0..xv.cols() {
                                dx.set(r, c, g);
                            }
                        }
                        self.accumulate(&mut grads, x, dx)?;
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }

    /// Whether a backward sweep should bother accumulating into `id`.
    /// Constant leaves never need gradients; everything else might.
    fn wants_grad(&self, id: NodeId) -> bool {
        match self.nodes[id.0].op {
            Op::Leaf { requires_grad } => requires_grad,
            _ => true,
        }
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], id: NodeId, g: Matrix) -> Result<()> {
        match &mut grads[id.0] {
            Some(existing) => existing.add_in_place(&g),
            slot => {
                *slot = Some(g);
                Ok(())
            }
        }
    }
}

/// Gradient slots produced by [`Tape::backward`], indexed by node.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient with respect to `id`; zero if the loss never reached it.
    pub fn wrt(&self, tape: &Tape, id: NodeId) -> Matrix {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = tape.value(id).shape();
                Matrix::zeros(r, c)
            }
        }
    }

    /// Like [`Gradients::wrt`] but moves the gradient out.
    pub fn take_wrt(&mut self, tape: &Tape, id: NodeId) -> Matrix {
        match self.grads[id.0].take() {
            Some(g) => g,
            None => {
                let (r, c) = tape.value(id).shape();
                Matrix::zeros(r, c)
            }
        }
    }
}
