//! Parameter storage and the layer types used by the dynamics model and the
//! actor-critic networks.

use super::graph::{Graph, Gradients, NodeId};
use super::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Handle to one named parameter tensor in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(pub usize);

/// Ordered collection of named parameter tensors. Order is creation order and
/// is part of the checkpoint format.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<(String, Tensor)>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, tensor: Tensor) -> ParamId {
        self.entries.push((name.to_string(), tensor));
        ParamId(self.entries.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].1
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].1
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].0
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    /// Total scalar count across all parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// All parameter values flattened in store order (finite-difference and
    /// smoothing helpers).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.scalar_count());
        for (_, t) in &self.entries {
            out.extend_from_slice(t.data());
        }
        out
    }

    pub fn unflatten(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.scalar_count(), "flat parameter length");
        let mut offset = 0;
        for (_, t) in self.entries.iter_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
    }
}

/// Per-graph binding of parameters to leaf nodes: each parameter is injected
/// once per graph, and gradients are read back through the same mapping.
pub struct Binder {
    nodes: Vec<Option<NodeId>>,
}

impl Binder {
    pub fn new(store: &ParamStore) -> Self {
        Self {
            nodes: vec![None; store.len()],
        }
    }

    /// Leaf node carrying the parameter's current value.
    pub fn node(&mut self, g: &mut Graph, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(n) = self.nodes[id.0] {
            return n;
        }
        let n = g.leaf(store.get(id).clone());
        self.nodes[id.0] = Some(n);
        n
    }

    /// Accumulates this graph's parameter gradients into `buffer` (a tensor
    /// per parameter, aligned with the store).
    pub fn accumulate_grads(
        &self,
        g: &Graph,
        grads: &Gradients,
        buffer: &mut GradBuffer,
    ) {
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some(n) = node {
                if let Some(gt) = grads.get_ref(*n) {
                    buffer.tensors[i].add_assign(gt);
                }
            }
            let _ = g;
        }
    }
}

/// Gradient accumulator aligned with a [`ParamStore`].
pub struct GradBuffer {
    pub tensors: Vec<Tensor>,
}

impl GradBuffer {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            tensors: store
                .iter()
                .map(|(_, t)| Tensor::zeros(t.rows(), t.cols()))
                .collect(),
        }
    }

    pub fn reset(&mut self) {
        for t in self.tensors.iter_mut() {
            for v in t.data_mut() {
                *v = 0.0;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors.iter_mut() {
            t.scale_assign(k);
        }
    }

    pub fn add_from(&mut self, other: &GradBuffer) {
        for (a, b) in self.tensors.iter_mut().zip(other.tensors.iter()) {
            a.add_assign(b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.is_finite())
    }
}

/// Xavier-uniform initialization for a [out, in] weight matrix.
pub fn xavier_uniform(rng: &mut ChaCha12Rng, out_dim: usize, in_dim: usize) -> Tensor {
    let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
    let data = (0..out_dim * in_dim)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    Tensor::from_vec(out_dim, in_dim, data)
}

/// Fully connected layer `y = x W^T + b`.
#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha12Rng,
        name: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Self {
        let w = store.add(&format!("{name}.w"), xavier_uniform(rng, out_dim, in_dim));
        let b = store.add(&format!("{name}.b"), Tensor::zeros(1, out_dim));
        Self {
            w,
            b,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        binder: &mut Binder,
        store: &ParamStore,
        x: NodeId,
    ) -> NodeId {
        assert_eq!(
            g.value(x).cols(),
            self.in_dim,
            "linear layer input width mismatch"
        );
        let w = binder.node(g, store, self.w);
        let b = binder.node(g, store, self.b);
        let y = g.matmul_nt(x, w);
        g.add_row(y, b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimMismatch {
    pub expected: usize,
    pub got: usize,
    pub what: &'static str,
}

impl std::fmt::Display for DimMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} dimension mismatch: expected {}, got {}",
            self.what, self.expected, self.got
        )
    }
}

impl std::error::Error for DimMismatch {}

/// Gated-recurrent cell. Gates read the concatenated [x; h]; the candidate
/// applies the reset gate to the hidden projection:
///
/// ```text
/// r  = sigmoid(W_r [x; h] + b_r)
/// z  = sigmoid(W_z [x; h] + b_z)
/// n  = tanh(W_n x + r * (U_n h) + b_n)
/// h' = (1 - z) * n + z * h
/// ```
#[derive(Clone, Copy, Debug)]
pub struct GruCell {
    pub w_r: ParamId,
    pub b_r: ParamId,
    pub w_z: ParamId,
    pub b_z: ParamId,
    pub w_n: ParamId,
    pub u_n: ParamId,
    pub b_n: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl GruCell {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha12Rng,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
    ) -> Self {
        let cat = input_dim + hidden_dim;
        Self {
            w_r: store.add(&format!("{name}.w_r"), xavier_uniform(rng, hidden_dim, cat)),
            b_r: store.add(&format!("{name}.b_r"), Tensor::zeros(1, hidden_dim)),
            w_z: store.add(&format!("{name}.w_z"), xavier_uniform(rng, hidden_dim, cat)),
            b_z: store.add(&format!("{name}.b_z"), Tensor::zeros(1, hidden_dim)),
            w_n: store.add(
                &format!("{name}.w_n"),
                xavier_uniform(rng, hidden_dim, input_dim),
            ),
            u_n: store.add(
                &format!("{name}.u_n"),
                xavier_uniform(rng, hidden_dim, hidden_dim),
            ),
            b_n: store.add(&format!("{name}.b_n"), Tensor::zeros(1, hidden_dim)),
            input_dim,
            hidden_dim,
        }
    }

    /// One recurrent step; `x` is [B, input_dim], `h_prev` is [B, hidden_dim].
    pub fn step(
        &self,
        g: &mut Graph,
        binder: &mut Binder,
        store: &ParamStore,
        x: NodeId,
        h_prev: NodeId,
    ) -> Result<NodeId, DimMismatch> {
        if g.value(x).cols() != self.input_dim {
            return Err(DimMismatch {
                expected: self.input_dim,
                got: g.value(x).cols(),
                what: "gru input",
            });
        }
        if g.value(h_prev).cols() != self.hidden_dim {
            return Err(DimMismatch {
                expected: self.hidden_dim,
                got: g.value(h_prev).cols(),
                what: "gru hidden",
            });
        }
        let w_r = binder.node(g, store, self.w_r);
        let b_r = binder.node(g, store, self.b_r);
        let w_z = binder.node(g, store, self.w_z);
        let b_z = binder.node(g, store, self.b_z);
        let w_n = binder.node(g, store, self.w_n);
        let u_n = binder.node(g, store, self.u_n);
        let b_n = binder.node(g, store, self.b_n);

        let xh = g.concat_cols(&[x, h_prev]);
        let r_lin = g.matmul_nt(xh, w_r);
        let r_aff = g.add_row(r_lin, b_r);
        let r = g.sigmoid(r_aff);
        let z_lin = g.matmul_nt(xh, w_z);
        let z_aff = g.add_row(z_lin, b_z);
        let z = g.sigmoid(z_aff);

        let xn = g.matmul_nt(x, w_n);
        let hn = g.matmul_nt(h_prev, u_n);
        let rhn = g.mul(r, hn);
        let n_sum = g.add(xn, rhn);
        let n_aff = g.add_row(n_sum, b_n);
        let n = g.tanh(n_aff);

        // h' = (1 - z) * n + z * h = n - z*n + z*h
        let zn = g.mul(z, n);
        let zh = g.mul(z, h_prev);
        let n_minus_zn = g.sub(n, zn);
        Ok(g.add(n_minus_zn, zh))
    }

    /// Runs the cell over a sequence of [B, input_dim] step inputs starting
    /// from a zero hidden state; returns the final hidden node.
    pub fn run(
        &self,
        g: &mut Graph,
        binder: &mut Binder,
        store: &ParamStore,
        steps: &[NodeId],
    ) -> Result<NodeId, DimMismatch> {
        assert!(!steps.is_empty(), "gru needs at least one step");
        let batch = g.value(steps[0]).rows();
        let mut h = g.leaf(Tensor::zeros(batch, self.hidden_dim));
        for x in steps {
            h = self.step(g, binder, store, *x, h)?;
        }
        Ok(h)
    }
}

/// Log standard deviation clamp bounds of every Gaussian head.
pub const LOG_SIGMA_MIN: f64 = -5.0;
pub const LOG_SIGMA_MAX: f64 = 2.0;

/// Gaussian output head: a mean row and a clamped log-sigma row per sample.
#[derive(Clone, Copy, Debug)]
pub struct GaussianHead {
    pub mean: Linear,
    pub log_sigma: Linear,
    pub dim: usize,
}

impl GaussianHead {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha12Rng,
        name: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Self {
        Self {
            mean: Linear::new(store, rng, &format!("{name}.mean"), in_dim, out_dim),
            log_sigma: Linear::new(store, rng, &format!("{name}.log_sigma"), in_dim, out_dim),
            dim: out_dim,
        }
    }

    /// Returns (mean node, clamped log-sigma node).
    pub fn forward(
        &self,
        g: &mut Graph,
        binder: &mut Binder,
        store: &ParamStore,
        x: NodeId,
    ) -> (NodeId, NodeId) {
        let mean = self.mean.forward(g, binder, store, x);
        let ls = self.log_sigma.forward(g, binder, store, x);
        let ls = g.clamp(ls, LOG_SIGMA_MIN, LOG_SIGMA_MAX);
        (mean, ls)
    }
}

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

/// Elementwise Gaussian negative log-likelihood:
/// `ln sigma + (target - mean)^2 / (2 sigma^2) + 0.5 ln 2 pi` per entry.
pub fn gaussian_nll_elems(
    g: &mut Graph,
    mean: NodeId,
    log_sigma: NodeId,
    target: NodeId,
) -> NodeId {
    let diff = g.sub(target, mean);
    let sq = g.mul(diff, diff);
    let neg2ls = g.scale(log_sigma, -2.0);
    let inv_var = g.exp(neg2ls);
    let quad = g.mul(sq, inv_var);
    let half_quad = g.scale(quad, 0.5);
    let with_ls = g.add(log_sigma, half_quad);
    g.add_const(with_ls, HALF_LN_TWO_PI)
}

/// Summed Gaussian NLL over all dimensions (and batch rows, if any).
pub fn gaussian_nll_sum(g: &mut Graph, mean: NodeId, log_sigma: NodeId, target: NodeId) -> NodeId {
    let elems = gaussian_nll_elems(g, mean, log_sigma, target);
    g.sum_all(elems)
}
