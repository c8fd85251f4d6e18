//! Dynamic computation tape: forward ops record themselves, `backward`
//! replays them in reverse creation order and accumulates gradients.
//!
//! One graph is built per training step and discarded; parameters enter as
//! leaf nodes and their gradients are read back out by node id.

use super::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

enum Op {
    Leaf,
    MatmulNt { x: NodeId, w: NodeId },
    AddRow { x: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { x: NodeId, k: f64 },
    AddConst { x: NodeId },
    Sigmoid { x: NodeId },
    Tanh { x: NodeId },
    Relu { x: NodeId },
    Exp { x: NodeId },
    Clamp { x: NodeId, lo: f64, hi: f64 },
    ConcatCols { parts: Vec<NodeId> },
    SliceCols { x: NodeId, start: usize },
    SumAll { x: NodeId },
    Dropout { x: NodeId, mask: Vec<f64> },
    LogSoftmaxGroups { x: NodeId, group: usize },
    SelectSum { x: NodeId, picks: Vec<usize>, group_count: usize },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients produced by one backward pass, indexed by node id.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. a node; zeros if the node is disconnected.
    pub fn get(&self, id: NodeId, graph: &Graph) -> Tensor {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => {
                let v = graph.value(id);
                Tensor::zeros(v.rows(), v.cols())
            }
        }
    }

    pub fn get_ref(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Inserts a constant or parameter leaf.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&mut self, v: f64) -> NodeId {
        self.leaf(Tensor::scalar(v))
    }

    /// `x * w^T`: x is [m, k], w is [n, k] (row-per-output-unit layout).
    pub fn matmul_nt(&mut self, x: NodeId, w: NodeId) -> NodeId {
        let v = Tensor::matmul_nt(self.value(x), self.value(w));
        self.push(v, Op::MatmulNt { x, w })
    }

    /// Adds a [1, n] bias row to every row of x.
    pub fn add_row(&mut self, x: NodeId, b: NodeId) -> NodeId {
        let xb = self.value(x);
        let bias = self.value(b);
        assert_eq!(bias.rows(), 1, "bias must be a row vector");
        assert_eq!(bias.cols(), xb.cols(), "bias width");
        let mut v = xb.clone();
        let n = v.cols();
        for r in 0..v.rows() {
            for c in 0..n {
                let cur = v.at(r, c);
                v.set(r, c, cur + bias.at(0, c));
            }
        }
        self.push(v, Op::AddRow { x, b })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert!(va.same_shape(vb), "add shape");
        let mut v = va.clone();
        v.add_assign(vb);
        self.push(v, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert!(va.same_shape(vb), "sub shape");
        let mut v = va.clone();
        for (x, y) in v.data_mut().iter_mut().zip(vb.data().iter()) {
            *x -= *y;
        }
        self.push(v, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert!(va.same_shape(vb), "mul shape");
        let mut v = va.clone();
        for (x, y) in v.data_mut().iter_mut().zip(vb.data().iter()) {
            *x *= *y;
        }
        self.push(v, Op::Mul { a, b })
    }

    pub fn scale(&mut self, x: NodeId, k: f64) -> NodeId {
        let v = self.value(x).map(|t| t * k);
        self.push(v, Op::Scale { x, k })
    }

    pub fn add_const(&mut self, x: NodeId, k: f64) -> NodeId {
        let v = self.value(x).map(|t| t + k);
        self.push(v, Op::AddConst { x })
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|t| 1.0 / (1.0 + (-t).exp()));
        self.push(v, Op::Sigmoid { x })
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(f64::tanh);
        self.push(v, Op::Tanh { x })
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|t| t.max(0.0));
        self.push(v, Op::Relu { x })
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(f64::exp);
        self.push(v, Op::Exp { x })
    }

    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = self.value(x).map(|t| t.clamp(lo, hi));
        self.push(v, Op::Clamp { x, lo, hi })
    }

    /// Concatenates tensors with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut v = Tensor::zeros(rows, total);
        let mut offset = 0;
        for p in parts {
            let t = self.value(*p);
            assert_eq!(t.rows(), rows, "concat_cols row count");
            for r in 0..rows {
                let src = t.row_slice(r);
                let dst = &mut v.data_mut()[r * total + offset..r * total + offset + src.len()];
                dst.copy_from_slice(src);
            }
            offset += t.cols();
        }
        self.push(
            v,
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
        )
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let t = self.value(x);
        assert!(start + len <= t.cols(), "slice_cols range");
        let mut v = Tensor::zeros(t.rows(), len);
        for r in 0..t.rows() {
            let src = &t.row_slice(r)[start..start + len];
            v.data_mut()[r * len..(r + 1) * len].copy_from_slice(src);
        }
        self.push(v, Op::SliceCols { x, start })
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll { x })
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let n = self.value(x).len() as f64;
        let s = self.sum_all(x);
        self.scale(s, 1.0 / n)
    }

    /// Training-mode dropout: zeroes each element with probability `rate` and
    /// scales survivors by `1/(1-rate)`. Identity when `rate == 0` or not
    /// training.
    pub fn dropout(
        &mut self,
        x: NodeId,
        rate: f64,
        training: bool,
        rng: &mut ChaCha12Rng,
    ) -> NodeId {
        assert!((0.0..1.0).contains(&rate), "dropout rate in [0,1)");
        if !training || rate == 0.0 {
            return x;
        }
        let keep = 1.0 - rate;
        let t = self.value(x);
        let mask: Vec<f64> = (0..t.len())
            .map(|_| {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    1.0 / keep
                }
            })
            .collect();
        let mut v = t.clone();
        for (val, m) in v.data_mut().iter_mut().zip(mask.iter()) {
            *val *= *m;
        }
        self.push(v, Op::Dropout { x, mask })
    }

    /// Log-softmax over consecutive column groups of width `group`.
    pub fn log_softmax_groups(&mut self, x: NodeId, group: usize) -> NodeId {
        let t = self.value(x);
        assert_eq!(t.cols() % group, 0, "columns divisible by group width");
        let mut v = t.clone();
        for r in 0..t.rows() {
            for g0 in (0..t.cols()).step_by(group) {
                let row = &mut v.data_mut()[r * t.cols() + g0..r * t.cols() + g0 + group];
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
                for z in row.iter_mut() {
                    *z -= lse;
                }
            }
        }
        self.push(v, Op::LogSoftmaxGroups { x, group })
    }

    /// For each row `b`, sums the entries at `picks[b*group_count ..
    /// (b+1)*group_count]`; yields a [rows, 1] tensor. Used to pull the
    /// log-probability of a chosen action out of per-wheel logits.
    pub fn select_sum(&mut self, x: NodeId, picks: &[usize], group_count: usize) -> NodeId {
        let t = self.value(x);
        assert_eq!(picks.len(), t.rows() * group_count, "picks length");
        let mut v = Tensor::zeros(t.rows(), 1);
        for r in 0..t.rows() {
            let mut acc = 0.0;
            for k in 0..group_count {
                acc += t.at(r, picks[r * group_count + k]);
            }
            v.set(r, 0, acc);
        }
        self.push(
            v,
            Op::SelectSum {
                x,
                picks: picks.to_vec(),
                group_count,
            },
        )
    }

    /// Reverse-mode sweep from a scalar loss node. Returns per-node gradients;
    /// disconnected nodes simply have none (read as zeros).
    pub fn backward(&self, loss: NodeId) -> Gradients {
        assert_eq!(self.value(loss).len(), 1, "loss must be scalar");
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let add = |id: NodeId, contribution: Tensor, grads: &mut [Option<Tensor>]| {
            match &mut grads[id.0] {
                Some(existing) => existing.add_assign(&contribution),
                slot => *slot = Some(contribution),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatmulNt { x, w } => {
                let mut dx = Tensor::zeros(self.value(*x).rows(), self.value(*x).cols());
                Tensor::add_matmul_nn(&mut dx, g, self.value(*w));
                add(*x, dx, grads);
                let mut dw = Tensor::zeros(self.value(*w).rows(), self.value(*w).cols());
                Tensor::add_matmul_tn(&mut dw, g, self.value(*x));
                add(*w, dw, grads);
            }
            Op::AddRow { x, b } => {
                add(*x, g.clone(), grads);
                let mut db = Tensor::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for c in 0..g.cols() {
                        let cur = db.at(0, c);
                        db.set(0, c, cur + g.at(r, c));
                    }
                }
                add(*b, db, grads);
            }
            Op::Add { a, b } => {
                add(*a, g.clone(), grads);
                add(*b, g.clone(), grads);
            }
            Op::Sub { a, b } => {
                add(*a, g.clone(), grads);
                add(*b, g.map(|v| -v), grads);
            }
            Op::Mul { a, b } => {
                let mut da = g.clone();
                for (x, y) in da.data_mut().iter_mut().zip(self.value(*b).data()) {
                    *x *= *y;
                }
                add(*a, da, grads);
                let mut db = g.clone();
                for (x, y) in db.data_mut().iter_mut().zip(self.value(*a).data()) {
                    *x *= *y;
                }
                add(*b, db, grads);
            }
            Op::Scale { x, k } => add(*x, g.map(|v| v * k), grads),
            Op::AddConst { x } => add(*x, g.clone(), grads),
            Op::Sigmoid { x } => {
                let y = &node.value;
                let mut dx = g.clone();
                for (d, s) in dx.data_mut().iter_mut().zip(y.data()) {
                    *d *= s * (1.0 - s);
                }
                add(*x, dx, grads);
            }
            Op::Tanh { x } => {
                let y = &node.value;
                let mut dx = g.clone();
                for (d, s) in dx.data_mut().iter_mut().zip(y.data()) {
                    *d *= 1.0 - s * s;
                }
                add(*x, dx, grads);
            }
            Op::Relu { x } => {
                let input = self.value(*x);
                let mut dx = g.clone();
                for (d, s) in dx.data_mut().iter_mut().zip(input.data()) {
                    if *s <= 0.0 {
                        *d = 0.0;
                    }
                }
                add(*x, dx, grads);
            }
            Op::Exp { x } => {
                let y = &node.value;
                let mut dx = g.clone();
                for (d, s) in dx.data_mut().iter_mut().zip(y.data()) {
                    *d *= s;
                }
                add(*x, dx, grads);
            }
            Op::Clamp { x, lo, hi } => {
                let input = self.value(*x);
                let mut dx = g.clone();
                for (d, s) in dx.data_mut().iter_mut().zip(input.data()) {
                    if *s <= *lo || *s >= *hi {
                        *d = 0.0;
                    }
                }
                add(*x, dx, grads);
            }
            Op::ConcatCols { parts } => {
                let mut offset = 0;
                for p in parts {
                    let t = self.value(*p);
                    let mut dp = Tensor::zeros(t.rows(), t.cols());
                    for r in 0..t.rows() {
                        let src = &g.row_slice(r)[offset..offset + t.cols()];
                        dp.data_mut()[r * t.cols()..(r + 1) * t.cols()].copy_from_slice(src);
                    }
                    add(*p, dp, grads);
                    offset += t.cols();
                }
            }
            Op::SliceCols { x, start } => {
                let t = self.value(*x);
                let mut dx = Tensor::zeros(t.rows(), t.cols());
                for r in 0..t.rows() {
                    for c in 0..g.cols() {
                        dx.set(r, start + c, g.at(r, c));
                    }
                }
                add(*x, dx, grads);
            }
            Op::SumAll { x } => {
                let t = self.value(*x);
                let gv = g.item();
                add(*x, Tensor::from_vec(t.rows(), t.cols(), vec![gv; t.len()]), grads);
            }
            Op::Dropout { x, mask } => {
                let mut dx = g.clone();
                for (d, m) in dx.data_mut().iter_mut().zip(mask.iter()) {
                    *d *= *m;
                }
                add(*x, dx, grads);
            }
            Op::LogSoftmaxGroups { x, group } => {
                // dx = g - softmax * sum_group(g)
                let y = &node.value;
                let mut dx = g.clone();
                for r in 0..y.rows() {
                    for g0 in (0..y.cols()).step_by(*group) {
                        let mut gsum = 0.0;
                        for c in g0..g0 + group {
                            gsum += g.at(r, c);
                        }
                        for c in g0..g0 + group {
                            let soft = y.at(r, c).exp();
                            let cur = dx.at(r, c);
                            dx.set(r, c, cur - soft * gsum);
                        }
                    }
                }
                add(*x, dx, grads);
            }
            Op::SelectSum {
                x,
                picks,
                group_count,
            } => {
                let t = self.value(*x);
                let mut dx = Tensor::zeros(t.rows(), t.cols());
                for r in 0..t.rows() {
                    let gr = g.at(r, 0);
                    for k in 0..*group_count {
                        let c = picks[r * group_count + k];
                        let cur = dx.at(r, c);
                        dx.set(r, c, cur + gr);
                    }
                }
                add(*x, dx, grads);
            }
        }
    }
}
