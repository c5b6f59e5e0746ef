//! Define-by-run reverse-mode tape. Each operation appends a node holding its
//! output value and the ids of its inputs; `backward` walks the node list in
//! reverse and accumulates adjoints. Graphs are rebuilt every step.

use super::tensor::{
    add_row, layer_norm_rows, matmul, matmul_nt, matmul_tn, mish, mish_deriv, mul_row, softplus,
    Tensor, LAYER_NORM_EPS,
};

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    MulRow(NodeId, NodeId),
    Relu(NodeId),
    Mish(NodeId),
    Tanh(NodeId),
    Exp(NodeId),
    Softplus(NodeId),
    Square(NodeId),
    Neg(NodeId),
    Scale(NodeId, f64),
    // The offset has zero derivative; kept for Debug output only.
    AddConst(NodeId, #[allow(dead_code)] f64),
    Clamp(NodeId, f64, f64),
    Min(NodeId, NodeId),
    LayerNormRows(NodeId),
    RowSum(NodeId),
    SumAll(NodeId),
    MeanAll(NodeId),
    LogSumExpRows(NodeId),
    ConcatCols(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    /// Max over consecutive row segments of the given length: [S*n, D] -> [S, D].
    MaxPoolSeg(NodeId, usize),
    Reshape(NodeId),
    /// Symmetric chamfer against a fixed target set; nearest assignments are
    /// held fixed for the gradient.
    Chamfer(NodeId, Vec<[f64; 2]>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints indexed by node id; only grad-requiring nodes are populated.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id).and_then(|g| g.as_ref())
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.nodes.len() - 1
    }

    fn requires(&self, id: NodeId) -> bool {
        self.nodes[id].requires_grad
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> NodeId {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.leaf(value, false)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rq = self.requires(a) || self.requires(b);
        self.push(v, Op::Add(a, b), rq)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rq = self.requires(a) || self.requires(b);
        self.push(v, Op::Sub(a, b), rq)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rq = self.requires(a) || self.requires(b);
        self.push(v, Op::Mul(a, b), rq)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = matmul(self.value(a), self.value(b));
        let rq = self.requires(a) || self.requires(b);
        self.push(v, Op::MatMul(a, b), rq)
    }

    pub fn add_row(&mut self, x: NodeId, row: NodeId) -> NodeId {
        let v = add_row(self.value(x), self.value(row));
        let rq = self.requires(x) || self.requires(row);
        self.push(v, Op::AddRow(x, row), rq)
    }

    pub fn mul_row(&mut self, x: NodeId, row: NodeId) -> NodeId {
        let v = mul_row(self.value(x), self.value(row));
        let rq = self.requires(x) || self.requires(row);
        self.push(v, Op::MulRow(x, row), rq)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|v| v.max(0.0));
        let rq = self.requires(x);
        self.push(v, Op::Relu(x), rq)
    }

    pub fn mish(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(mish);
        let rq = self.requires(x);
        self.push(v, Op::Mish(x), rq)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(f64::tanh);
        let rq = self.requires(x);
        self.push(v, Op::Tanh(x), rq)
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(f64::exp);
        let rq = self.requires(x);
        self.push(v, Op::Exp(x), rq)
    }

    pub fn softplus(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(softplus);
        let rq = self.requires(x);
        self.push(v, Op::Softplus(x), rq)
    }

    pub fn square(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|v| v * v);
        let rq = self.requires(x);
        self.push(v, Op::Square(x), rq)
    }

    pub fn neg(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|v| -v);
        let rq = self.requires(x);
        self.push(v, Op::Neg(x), rq)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let v = self.value(x).map(|v| v * c);
        let rq = self.requires(x);
        self.push(v, Op::Scale(x, c), rq)
    }

    pub fn add_const(&mut self, x: NodeId, c: f64) -> NodeId {
        let v = self.value(x).map(|v| v + c);
        let rq = self.requires(x);
        self.push(v, Op::AddConst(x, c), rq)
    }

    /// Elementwise clamp; gradient is passed through strictly inside the
    /// interval and zeroed at or beyond the bounds.
    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = self.value(x).map(|v| v.clamp(lo, hi));
        let rq = self.requires(x);
        self.push(v, Op::Clamp(x, lo, hi), rq)
    }

    pub fn min(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).zip_map(self.value(b), f64::min);
        let rq = self.requires(a) || self.requires(b);
        self.push(v, Op::Min(a, b), rq)
    }

    pub fn layer_norm_rows(&mut self, x: NodeId) -> NodeId {
        let v = layer_norm_rows(self.value(x));
        let rq = self.requires(x);
        self.push(v, Op::LayerNormRows(x), rq)
    }

    /// [B,D] -> [B]: sum over columns.
    pub fn row_sum(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let (b, d) = (t.rows(), t.cols());
        let mut out = vec![0.0; b];
        for (i, chunk) in t.data().chunks(d).enumerate() {
            out[i] = chunk.iter().sum();
        }
        let rq = self.requires(x);
        self.push(Tensor::vector(out), Op::RowSum(x), rq)
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.value(x).data().iter().sum();
        let rq = self.requires(x);
        self.push(Tensor::scalar(s), Op::SumAll(x), rq)
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let s: f64 = t.data().iter().sum::<f64>() / t.len() as f64;
        let rq = self.requires(x);
        self.push(Tensor::scalar(s), Op::MeanAll(x), rq)
    }

    /// [B,D] -> [B]: log sum exp over columns, max-shifted for stability.
    pub fn logsumexp_rows(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let (b, d) = (t.rows(), t.cols());
        let mut out = vec![0.0; b];
        for (i, chunk) in t.data().chunks(d).enumerate() {
            let m = chunk.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = chunk.iter().map(|&v| (v - m).exp()).sum();
            out[i] = m + s.ln();
        }
        let rq = self.requires(x);
        self.push(Tensor::vector(out), Op::LogSumExpRows(x), rq)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let b = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = vec![0.0; b * total];
        let mut off = 0;
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.rows(), b, "concat_cols row mismatch");
            let d = t.cols();
            for r in 0..b {
                out[r * total + off..r * total + off + d]
                    .copy_from_slice(&t.data()[r * d..(r + 1) * d]);
            }
            off += d;
        }
        let rq = parts.iter().any(|&p| self.requires(p));
        self.push(
            Tensor::matrix(b, total, out),
            Op::ConcatCols(parts.to_vec()),
            rq,
        )
    }

    pub fn slice_cols(&mut self, x: NodeId, lo: usize, hi: usize) -> NodeId {
        let t = self.value(x);
        let (b, d) = (t.rows(), t.cols());
        assert!(lo < hi && hi <= d, "slice_cols {lo}..{hi} of width {d}");
        let w = hi - lo;
        let mut out = vec![0.0; b * w];
        for r in 0..b {
            out[r * w..(r + 1) * w].copy_from_slice(&t.data()[r * d + lo..r * d + hi]);
        }
        let rq = self.requires(x);
        self.push(Tensor::matrix(b, w, out), Op::SliceCols(x, lo, hi), rq)
    }

    /// [S*n, D] -> [S, D], maximum over each consecutive block of n rows.
    pub fn max_pool_seg(&mut self, x: NodeId, seg: usize) -> NodeId {
        let t = self.value(x);
        let (rows, d) = (t.rows(), t.cols());
        assert!(seg > 0 && rows % seg == 0, "pool segment {seg} vs {rows} rows");
        let s = rows / seg;
        let mut out = vec![f64::NEG_INFINITY; s * d];
        for r in 0..rows {
            let block = r / seg;
            for c in 0..d {
                let v = t.data()[r * d + c];
                let o = &mut out[block * d + c];
                if v > *o {
                    *o = v;
                }
            }
        }
        let rq = self.requires(x);
        self.push(Tensor::matrix(s, d, out), Op::MaxPoolSeg(x, seg), rq)
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> NodeId {
        let t = self.value(x);
        let n: usize = shape.iter().product();
        assert_eq!(n, t.len(), "reshape {:?} of {} values", shape, t.len());
        let v = Tensor::from_vec(shape, t.data().to_vec());
        let rq = self.requires(x);
        self.push(v, Op::Reshape(x), rq)
    }

    /// Symmetric chamfer distance between predicted points [M,2] and a fixed
    /// target set: mean squared nearest distance in both directions, summed.
    /// Two single-point sets 1 m apart score 2.0.
    pub fn chamfer(&mut self, pred: NodeId, target: &[[f64; 2]]) -> NodeId {
        let t = self.value(pred);
        assert_eq!(t.cols(), 2, "chamfer expects [M,2] predictions");
        assert!(!target.is_empty());
        let v = chamfer_value(t, target);
        let rq = self.requires(pred);
        self.push(Tensor::scalar(v), Op::Chamfer(pred, target.to_vec()), rq)
    }

    /// Reverse pass from a scalar root. Returns adjoints for every node that
    /// requires grad (leaves included).
    pub fn backward(&self, root: NodeId) -> Gradients {
        assert_eq!(self.value(root).len(), 1, "backward root must be scalar");
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root] = Some(Tensor::scalar(1.0));

        for id in (0..=root).rev() {
            if !self.nodes[id].requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.backprop_node(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
        if !self.nodes[id].requires_grad {
            return;
        }
        match &mut grads[id] {
            Some(g) => {
                let gd = g.data_mut();
                for (a, b) in gd.iter_mut().zip(delta.data()) {
                    *a += b;
                }
            }
            slot => *slot = Some(delta),
        }
    }

    fn backprop_node(&self, id: NodeId, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                self.accumulate(grads, *a, g.zip_map(self.value(*b), |gv, bv| gv * bv));
                self.accumulate(grads, *b, g.zip_map(self.value(*a), |gv, av| gv * av));
            }
            Op::MatMul(a, b) => {
                // dA = g * B^T, dB = A^T * g
                self.accumulate(grads, *a, matmul_nt_shaped(g, self.value(*b), self.value(*a)));
                self.accumulate(grads, *b, matmul_tn_shaped(self.value(*a), g, self.value(*b)));
            }
            Op::AddRow(x, row) => {
                self.accumulate(grads, *x, g.clone());
                self.accumulate(grads, *row, col_sums(g, self.value(*row).len()));
            }
            Op::MulRow(x, row) => {
                self.accumulate(grads, *x, mul_row(g, self.value(*row)));
                let xv = self.value(*x);
                let prod = g.zip_map(xv, |gv, xvv| gv * xvv);
                self.accumulate(grads, *row, col_sums(&prod, self.value(*row).len()));
            }
            Op::Relu(x) => {
                let d = g.zip_map(self.value(*x), |gv, xv| if xv > 0.0 { gv } else { 0.0 });
                self.accumulate(grads, *x, d);
            }
            Op::Mish(x) => {
                let d = g.zip_map(self.value(*x), |gv, xv| gv * mish_deriv(xv));
                self.accumulate(grads, *x, d);
            }
            Op::Tanh(x) => {
                let y = self.value(id);
                let d = g.zip_map(y, |gv, yv| gv * (1.0 - yv * yv));
                self.accumulate(grads, *x, d);
            }
            Op::Exp(x) => {
                let y = self.value(id);
                let d = g.zip_map(y, |gv, yv| gv * yv);
                self.accumulate(grads, *x, d);
            }
            Op::Softplus(x) => {
                let d = g.zip_map(self.value(*x), |gv, xv| gv / (1.0 + (-xv).exp()));
                self.accumulate(grads, *x, d);
            }
            Op::Square(x) => {
                let d = g.zip_map(self.value(*x), |gv, xv| gv * 2.0 * xv);
                self.accumulate(grads, *x, d);
            }
            Op::Neg(x) => self.accumulate(grads, *x, g.map(|v| -v)),
            Op::Scale(x, c) => {
                let c = *c;
                self.accumulate(grads, *x, g.map(|v| v * c));
            }
            Op::AddConst(x, _) => self.accumulate(grads, *x, g.clone()),
            Op::Clamp(x, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                let d = g.zip_map(self.value(*x), |gv, xv| {
                    if xv > lo && xv < hi {
                        gv
                    } else {
                        0.0
                    }
                });
                self.accumulate(grads, *x, d);
            }
            Op::Min(a, b) => {
                // Ties route to the first operand, matching f64::min's pick.
                let av = self.value(*a);
                let bv = self.value(*b);
                let mut da = Tensor::zeros(av.shape().to_vec());
                let mut db = Tensor::zeros(bv.shape().to_vec());
                for i in 0..g.len() {
                    if av.data()[i] <= bv.data()[i] {
                        da.data_mut()[i] = g.data()[i];
                    } else {
                        db.data_mut()[i] = g.data()[i];
                    }
                }
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *b, db);
            }
            Op::LayerNormRows(x) => {
                // dx = (dy - mean(dy) - xhat * mean(dy . xhat)) / sigma
                let xv = self.value(*x);
                let d = xv.cols();
                let mut out = Tensor::zeros(xv.shape().to_vec());
                for r in 0..xv.rows() {
                    let xr = &xv.data()[r * d..(r + 1) * d];
                    let gr = &g.data()[r * d..(r + 1) * d];
                    let mean = xr.iter().sum::<f64>() / d as f64;
                    let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                    let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                    let xhat: Vec<f64> = xr.iter().map(|&v| (v - mean) * inv).collect();
                    let gmean = gr.iter().sum::<f64>() / d as f64;
                    let gx = gr
                        .iter()
                        .zip(&xhat)
                        .map(|(&gv, &xh)| gv * xh)
                        .sum::<f64>()
                        / d as f64;
                    let orow = &mut out.data_mut()[r * d..(r + 1) * d];
                    for c in 0..d {
                        orow[c] = (gr[c] - gmean - xhat[c] * gx) * inv;
                    }
                }
                self.accumulate(grads, *x, out);
            }
            Op::RowSum(x) => {
                let xv = self.value(*x);
                let d = xv.cols();
                let mut out = Tensor::zeros(xv.shape().to_vec());
                for r in 0..xv.rows() {
                    let gv = g.data()[r];
                    for c in 0..d {
                        out.data_mut()[r * d + c] = gv;
                    }
                }
                self.accumulate(grads, *x, out);
            }
            Op::SumAll(x) => {
                let gv = g.item();
                let xv = self.value(*x);
                self.accumulate(grads, *x, xv.map(|_| gv));
            }
            Op::MeanAll(x) => {
                let xv = self.value(*x);
                let gv = g.item() / xv.len() as f64;
                self.accumulate(grads, *x, xv.map(|_| gv));
            }
            Op::LogSumExpRows(x) => {
                // d/dx_j = softmax_j within the row.
                let xv = self.value(*x);
                let d = xv.cols();
                let y = self.value(id);
                let mut out = Tensor::zeros(xv.shape().to_vec());
                for r in 0..xv.rows() {
                    let gv = g.data()[r];
                    let lse = y.data()[r];
                    for c in 0..d {
                        out.data_mut()[r * d + c] = gv * (xv.data()[r * d + c] - lse).exp();
                    }
                }
                self.accumulate(grads, *x, out);
            }
            Op::ConcatCols(parts) => {
                let b = g.rows();
                let total = g.cols();
                let mut off = 0;
                for &p in parts {
                    let d = self.value(p).cols();
                    let mut part = vec![0.0; b * d];
                    for r in 0..b {
                        part[r * d..(r + 1) * d]
                            .copy_from_slice(&g.data()[r * total + off..r * total + off + d]);
                    }
                    let shape = self.value(p).shape().to_vec();
                    self.accumulate(grads, p, Tensor::from_vec(shape, part));
                    off += d;
                }
            }
            Op::SliceCols(x, lo, _hi) => {
                let xv = self.value(*x);
                let (b, d) = (xv.rows(), xv.cols());
                let w = g.cols();
                let mut out = Tensor::zeros(xv.shape().to_vec());
                for r in 0..b {
                    out.data_mut()[r * d + lo..r * d + lo + w]
                        .copy_from_slice(&g.data()[r * w..(r + 1) * w]);
                }
                self.accumulate(grads, *x, out);
            }
            Op::MaxPoolSeg(x, seg) => {
                // Route to the first row attaining the max in each segment.
                let xv = self.value(*x);
                let (rows, d) = (xv.rows(), xv.cols());
                let mut out = Tensor::zeros(xv.shape().to_vec());
                let s = rows / seg;
                for block in 0..s {
                    for c in 0..d {
                        let mut best_r = block * seg;
                        let mut best = f64::NEG_INFINITY;
                        for r in block * seg..(block + 1) * seg {
                            let v = xv.data()[r * d + c];
                            if v > best {
                                best = v;
                                best_r = r;
                            }
                        }
                        out.data_mut()[best_r * d + c] += g.data()[block * d + c];
                    }
                }
                self.accumulate(grads, *x, out);
            }
            Op::Reshape(x) => {
                let shape = self.value(*x).shape().to_vec();
                self.accumulate(grads, *x, Tensor::from_vec(shape, g.data().to_vec()));
            }
            Op::Chamfer(pred, target) => {
                let pv = self.value(*pred);
                let gv = g.item();
                self.accumulate(grads, *pred, chamfer_grad(pv, target, gv));
            }
        }
    }
}

/// dA = g * B^T. matmul_nt(g[m,n], B[k,n]) contracts over n, yielding [m,k].
fn matmul_nt_shaped(g: &Tensor, b: &Tensor, a: &Tensor) -> Tensor {
    let d = matmul_nt(g, b);
    Tensor::from_vec(a.shape().to_vec(), d.data().to_vec())
}

/// dB = A^T * g. matmul_tn(A[m,k], g[m,n]) contracts over m, yielding [k,n].
fn matmul_tn_shaped(a: &Tensor, g: &Tensor, b: &Tensor) -> Tensor {
    let d = matmul_tn(a, g);
    Tensor::from_vec(b.shape().to_vec(), d.data().to_vec())
}

fn col_sums(g: &Tensor, width: usize) -> Tensor {
    let d = g.cols();
    assert_eq!(d, width);
    let mut out = vec![0.0; d];
    for chunk in g.data().chunks(d) {
        for (o, &v) in out.iter_mut().zip(chunk) {
            *o += v;
        }
    }
    Tensor::vector(out)
}

pub(crate) fn chamfer_value(pred: &Tensor, target: &[[f64; 2]]) -> f64 {
    let m = pred.rows();
    let n = target.len();
    let mut fwd = 0.0;
    for i in 0..m {
        let (px, py) = (pred.at(i, 0), pred.at(i, 1));
        let mut best = f64::INFINITY;
        for q in target {
            let d = (px - q[0]) * (px - q[0]) + (py - q[1]) * (py - q[1]);
            if d < best {
                best = d;
            }
        }
        fwd += best;
    }
    let mut bwd = 0.0;
    for q in target {
        let mut best = f64::INFINITY;
        for i in 0..m {
            let dx = pred.at(i, 0) - q[0];
            let dy = pred.at(i, 1) - q[1];
            let d = dx * dx + dy * dy;
            if d < best {
                best = d;
            }
        }
        bwd += best;
    }
    fwd / m as f64 + bwd / n as f64
}

fn chamfer_grad(pred: &Tensor, target: &[[f64; 2]], g: f64) -> Tensor {
    let m = pred.rows();
    let n = target.len();
    let mut out = Tensor::zeros(pred.shape().to_vec());
    // Forward term: each predicted point pulls toward its nearest target.
    for i in 0..m {
        let (px, py) = (pred.at(i, 0), pred.at(i, 1));
        let mut best = f64::INFINITY;
        let mut bq = [0.0, 0.0];
        for q in target {
            let d = (px - q[0]) * (px - q[0]) + (py - q[1]) * (py - q[1]);
            if d < best {
                best = d;
                bq = *q;
            }
        }
        out.data_mut()[i * 2] += g * 2.0 * (px - bq[0]) / m as f64;
        out.data_mut()[i * 2 + 1] += g * 2.0 * (py - bq[1]) / m as f64;
    }
    // Backward term: each target pulls its nearest predicted point.
    for q in target {
        let mut best = f64::INFINITY;
        let mut bi = 0;
        for i in 0..m {
            let dx = pred.at(i, 0) - q[0];
            let dy = pred.at(i, 1) - q[1];
            let d = dx * dx + dy * dy;
            if d < best {
                best = d;
                bi = i;
            }
        }
        out.data_mut()[bi * 2] += g * 2.0 * (pred.at(bi, 0) - q[0]) / n as f64;
        out.data_mut()[bi * 2 + 1] += g * 2.0 * (pred.at(bi, 1) - q[1]) / n as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_mul_grads() {
        // f = sum((a + b) * a), a=[1,2], b=[3,4]
        // df/da = (a+b) + a = [5,6]+[1,2] = [6,8]? no: d/da[(a+b)*a] = 2a+b = [5,8]
        let mut t = Tape::new();
        let a = t.leaf(Tensor::vector(vec![1.0, 2.0]), true);
        let b = t.leaf(Tensor::vector(vec![3.0, 4.0]), true);
        let s = t.add(a, b);
        let p = t.mul(s, a);
        let l = t.sum_all(p);
        let g = t.backward(l);
        assert_eq!(g.get(a).unwrap().data(), &[5.0, 8.0]);
        assert_eq!(g.get(b).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn matmul_grads() {
        // f = sum(A*B), A=[[1,2]], B=[[3],[4]] -> f=11
        // dA = ones*B^T = [3,4]; dB = A^T*ones = [[1],[2]]
        let mut t = Tape::new();
        let a = t.leaf(Tensor::matrix(1, 2, vec![1.0, 2.0]), true);
        let b = t.leaf(Tensor::matrix(2, 1, vec![3.0, 4.0]), true);
        let c = t.matmul(a, b);
        let l = t.sum_all(c);
        assert!((t.value(l).item() - 11.0).abs() < 1e-12);
        let g = t.backward(l);
        assert_eq!(g.get(a).unwrap().data(), &[3.0, 4.0]);
        assert_eq!(g.get(b).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn min_routes_to_smaller() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::vector(vec![1.0, 5.0]), true);
        let b = t.leaf(Tensor::vector(vec![2.0, 3.0]), true);
        let m = t.min(a, b);
        let l = t.sum_all(m);
        let g = t.backward(l);
        assert_eq!(g.get(a).unwrap().data(), &[1.0, 0.0]);
        assert_eq!(g.get(b).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn chamfer_two_points() {
        // Single points 1 m apart: 1^2 + 1^2 = 2, d/dpred_x = 2*1/1 + 2*1/1 = 4.
        let mut t = Tape::new();
        let p = t.leaf(Tensor::matrix(1, 2, vec![1.0, 0.0]), true);
        let c = t.chamfer(p, &[[0.0, 0.0]]);
        assert!((t.value(c).item() - 2.0).abs() < 1e-12);
        let g = t.backward(c);
        assert_eq!(g.get(p).unwrap().data(), &[4.0, 0.0]);
    }

    #[test]
    fn logsumexp_is_stable_and_correct() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::matrix(1, 2, vec![1000.0, 1000.0]), true);
        let l = t.logsumexp_rows(x);
        let v = t.value(l).data()[0];
        assert!((v - (1000.0 + 2.0_f64.ln())).abs() < 1e-9);
        let s = t.sum_all(l);
        let g = t.backward(s);
        // Gradient is the softmax: [0.5, 0.5].
        assert!((g.get(x).unwrap().data()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn max_pool_seg_forward_backward() {
        let mut t = Tape::new();
        // Two segments of two rows each, D=1: max(1,7)=7, max(3,2)=3.
        let x = t.leaf(Tensor::matrix(4, 1, vec![1.0, 7.0, 3.0, 2.0]), true);
        let p = t.max_pool_seg(x, 2);
        assert_eq!(t.value(p).data(), &[7.0, 3.0]);
        let l = t.sum_all(p);
        let g = t.backward(l);
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 1.0, 1.0, 0.0]);
    }
}
