//! The four-module recurrent dynamics model and its forward chain.

use super::spec::{
    CausalGraph, ChannelStats, ModuleKind, NetConfig, D_CHANNELS, D_DIM,
};
use crate::mdp::{JointAction, Observation, StackedState, CH_P, CH_V, CH_W, NUM_CHANNELS};
use crate::nn::{
    gaussian_nll_elems, Binder, GaussianHead, Graph, GruCell, Linear, NodeId, ParamStore, Tensor,
};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug)]
pub enum ModelError {
    /// Non-finite prediction during a forward pass or roll-out.
    NonFinite { step: usize },
    /// Training objective became non-finite.
    Diverged { epoch: usize },
    EmptyDataset,
    Checkpoint(crate::nn::CheckpointError),
    Meta(String),
    Io(std::io::Error),
}

impl std::fmt::Display for ModelError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelError::NonFinite { step } => {
                write!(f, "model produced a non-finite prediction at step {step}")
            }
            ModelError::Diverged { epoch } => {
                write!(f, "training diverged (non-finite loss) at epoch {epoch}")
            }
            ModelError::EmptyDataset => write!(f, "dataset holds no transitions"),
            ModelError::Checkpoint(e) => write!(f, "{e}"),
            ModelError::Meta(m) => write!(f, "model metadata error: {m}"),
            ModelError::Io(e) => write!(f, "model io error: {e}"),
        }
    }
}

impl std::error::Error for ModelError {}

impl From<crate::nn::CheckpointError> for ModelError {
    fn from(e: crate::nn::CheckpointError) -> Self {
        ModelError::Checkpoint(e)
    }
}

impl From<std::io::Error> for ModelError {
    fn from(e: std::io::Error) -> Self {
        ModelError::Io(e)
    }
}

pub(crate) struct SubModule {
    pub gru: GruCell,
    pub fc1: Linear,
    pub fc2: Linear,
    pub head: GaussianHead,
}

/// Gaussian prediction over the next dynamic variables, in real units.
#[derive(Clone, Copy, Debug)]
pub struct GaussianPrediction {
    pub mean: [f64; D_DIM],
    pub std: [f64; D_DIM],
}

/// One chained forward pass: the realized next d (mean or sampled, also used
/// as upstream input for downstream modules) plus the full distribution.
#[derive(Clone, Copy, Debug)]
pub struct ChainOutput {
    pub realized: [f64; D_DIM],
    pub prediction: GaussianPrediction,
}

/// The learned vehicle dynamics model: pressure, wheel-speed, body-motion,
/// and vehicle-speed heads, each a GRU over its causal channel windows with
/// upstream predictions joining after the recurrent stage.
pub struct DynamicsModel {
    pub store: ParamStore,
    pub graph_spec: CausalGraph,
    pub net: NetConfig,
    pub stats: ChannelStats,
    pub h: usize,
    pub(crate) modules: Vec<SubModule>,
}

impl DynamicsModel {
    pub fn new(net: NetConfig, graph_spec: CausalGraph, h: usize, seed: u64) -> Self {
        graph_spec.validate().expect("causal graph");
        let mut store = ParamStore::new();
        let mut rng = ChaCha12Rng::seed_from_u64(crate::derive_seed(seed, "model-init"));
        let mut modules = Vec::new();
        for kind in ModuleKind::ALL {
            let name = kind.name();
            let in_dim = graph_spec.inputs(kind).window_channels.len();
            let gru = GruCell::new(&mut store, &mut rng, &format!("{name}.gru"), in_dim, net.gru_width);
            let fc1 = Linear::new(
                &mut store,
                &mut rng,
                &format!("{name}.fc1"),
                net.gru_width + kind.extra_dim(),
                net.fc1_width,
            );
            let fc2 = Linear::new(
                &mut store,
                &mut rng,
                &format!("{name}.fc2"),
                net.fc1_width,
                net.fc2_width,
            );
            let head = GaussianHead::new(
                &mut store,
                &mut rng,
                &format!("{name}.head"),
                net.fc2_width,
                kind.out_dim(),
            );
            modules.push(SubModule {
                gru,
                fc1,
                fc2,
                head,
            });
        }
        Self {
            store,
            graph_spec,
            net,
            stats: ChannelStats::identity(),
            h,
            modules,
        }
    }

    pub(crate) fn module(&self, kind: ModuleKind) -> &SubModule {
        &self.modules[ModuleKind::ALL.iter().position(|k| *k == kind).unwrap()]
    }

    /// Graph-building forward of one sub-module. `steps` are the h per-frame
    /// input tensors [B, n_channels]; `extra` is the side input [B, extra].
    /// Returns (mean, log_sigma) nodes of the module's z-space block (the
    /// mean is a residual delta for residual modules).
    pub(crate) fn module_forward(
        &self,
        g: &mut Graph,
        binder: &mut Binder,
        kind: ModuleKind,
        steps: &[NodeId],
        extra: NodeId,
        training: bool,
        rng: &mut ChaCha12Rng,
    ) -> (NodeId, NodeId) {
        let m = self.module(kind);
        let hidden = m
            .gru
            .run(g, binder, &self.store, steps)
            .expect("module input width matches causal graph");
        let cat = g.concat_cols(&[hidden, extra]);
        let z1 = m.fc1.forward(g, binder, &self.store, cat);
        let z1 = g.relu(z1);
        let z1 = g.dropout(z1, self.net.dropout, training, rng);
        let z2 = m.fc2.forward(g, binder, &self.store, z1);
        let z2 = g.relu(z2);
        let z2 = g.dropout(z2, self.net.dropout, training, rng);
        m.head.forward(g, binder, &self.store, z2)
    }

    /// Normalized window of one channel, oldest first.
    fn z_window(&self, state: &StackedState, channel: usize) -> Vec<f64> {
        state
            .channel_window(channel)
            .iter()
            .map(|v| self.stats.normalize(channel, *v))
            .collect()
    }

    /// Chained forward pass on one stacked state. When `sample` is provided
    /// each block is drawn from its Gaussian and the draw feeds downstream
    /// modules; otherwise means are chained.
    pub fn forward_chain(
        &self,
        state: &StackedState,
        action: JointAction,
        mut sample: Option<&mut ChaCha12Rng>,
    ) -> Result<ChainOutput, ModelError> {
        assert_eq!(state.h(), self.h, "stacked state window length");
        let mut g = Graph::new();
        let mut binder = Binder::new(&self.store);
        // Dropout is off outside training; the RNG is never drawn from.
        let mut no_drop = ChaCha12Rng::seed_from_u64(0);

        let mut realized_z = [0.0; D_DIM];
        let mut mean_z = [0.0; D_DIM];
        let mut sigma_z = [0.0; D_DIM];
        for kind in ModuleKind::ALL {
            let inputs = self.graph_spec.inputs(kind);
            // Per-frame input tensors for the recurrent stage.
            let steps: Vec<NodeId> = (0..self.h)
                .map(|j| {
                    let frame: Vec<f64> = inputs
                        .window_channels
                        .iter()
                        .map(|c| self.stats.normalize(*c, state.at(*c, j)))
                        .collect();
                    g.leaf(Tensor::row(&frame))
                })
                .collect();
            let extra_values: Vec<f64> = match kind {
                ModuleKind::Pressure => action.one_hot().to_vec(),
                ModuleKind::WheelSpeed => realized_z[super::spec::PRESSURE_BLOCK].to_vec(),
                ModuleKind::BodyMotion => realized_z[super::spec::WHEEL_BLOCK].to_vec(),
                ModuleKind::VehicleSpeed => realized_z[11..14].to_vec(),
            };
            let extra = g.leaf(Tensor::row(&extra_values));
            let (mean_node, ls_node) =
                self.module_forward(&mut g, &mut binder, kind, &steps, extra, false, &mut no_drop);
            let mean_block = g.value(mean_node).data().to_vec();
            let ls_block = g.value(ls_node).data().to_vec();
            for (k, d_idx) in kind.block().enumerate() {
                let base = if inputs.residual {
                    self.z_window(state, D_CHANNELS[d_idx])[self.h - 1]
                } else {
                    0.0
                };
                let mu = base + mean_block[k];
                let sigma = ls_block[k].exp();
                mean_z[d_idx] = mu;
                sigma_z[d_idx] = sigma;
                realized_z[d_idx] = match sample.as_deref_mut() {
                    Some(rng) => {
                        let eps: f64 = StandardNormal.sample(rng);
                        mu + sigma * eps
                    }
                    None => mu,
                };
            }
        }

        let mut out = ChainOutput {
            realized: [0.0; D_DIM],
            prediction: GaussianPrediction {
                mean: [0.0; D_DIM],
                std: [0.0; D_DIM],
            },
        };
        for i in 0..D_DIM {
            let c = D_CHANNELS[i];
            out.realized[i] = self.stats.denormalize(c, realized_z[i]);
            out.prediction.mean[i] = self.stats.denormalize(c, mean_z[i]);
            out.prediction.std[i] = sigma_z[i] * self.stats.std[c];
        }
        if !out.realized.iter().all(|v| v.is_finite())
            || !out.prediction.mean.iter().all(|v| v.is_finite())
        {
            return Err(ModelError::NonFinite { step: 0 });
        }
        Ok(out)
    }

    /// Gaussian over the next dynamic variables (means chained downstream).
    pub fn predict(
        &self,
        state: &StackedState,
        action: JointAction,
    ) -> Result<GaussianPrediction, ModelError> {
        Ok(self.forward_chain(state, action, None)?.prediction)
    }

    /// Negative log-likelihood of one observed transition under the model
    /// (sum over the 15 dynamic dimensions), evaluated in z-space.
    pub fn transition_nll(
        &self,
        state: &StackedState,
        action: JointAction,
        next: &Observation,
    ) -> Result<f64, ModelError> {
        let out = self.forward_chain(state, action, None)?;
        let next_arr = next.to_array();
        let mut nll = 0.0;
        for i in 0..D_DIM {
            let c = D_CHANNELS[i];
            let mu = self.stats.normalize(c, out.prediction.mean[i]);
            let sigma = (out.prediction.std[i] / self.stats.std[c]).max(1e-12);
            let target = self.stats.normalize(c, next_arr[c]);
            let d = (target - mu) / sigma;
            nll += sigma.ln() + 0.5 * d * d + 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        if nll.is_finite() {
            Ok(nll)
        } else {
            Err(ModelError::NonFinite { step: 0 })
        }
    }
}

/// Assembles the next observation from a realized d vector plus spliced
/// operational inputs, flooring speeds and pressures at zero.
pub fn compose_next_observation(
    d: &[f64; D_DIM],
    f_brake: f64,
    f_acc: f64,
    delta: f64,
) -> Observation {
    let mut arr = [0.0; NUM_CHANNELS];
    for (i, c) in D_CHANNELS.iter().enumerate() {
        arr[*c] = d[i];
    }
    arr[CH_V] = arr[CH_V].max(0.0);
    for c in CH_W {
        arr[c] = arr[c].max(0.0);
    }
    for c in CH_P {
        arr[c] = arr[c].max(0.0);
    }
    let mut obs = Observation::from_array(&arr);
    obs.f_brake_n = f_brake;
    obs.f_acc_n = f_acc;
    obs.delta_rad = delta;
    obs
}

/// The Gaussian NLL graph fragment of one module against a target block.
/// Returns the elementwise NLL node [B, out_dim].
pub(crate) fn block_nll(
    g: &mut Graph,
    mean: NodeId,
    log_sigma: NodeId,
    target: NodeId,
) -> NodeId {
    gaussian_nll_elems(g, mean, log_sigma, target)
}
