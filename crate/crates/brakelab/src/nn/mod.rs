//! Minimal differentiable computation kernel: dense tensors, a dynamic tape
//! with reverse-mode gradients, fully connected and gated-recurrent layers,
//! Gaussian output heads, dropout, and an adaptive-moment optimizer.
//!
//! Gradients are validated against central finite differences (see
//! [`gradcheck`]); all arithmetic is f64.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod tensor;

pub use adam::Adam;
pub use checkpoint::{load_params, read_params, save_params, CheckpointError};
pub use graph::{Gradients, Graph, NodeId};
pub use layers::{
    gaussian_nll_elems, gaussian_nll_sum, xavier_uniform, Binder, DimMismatch, GaussianHead,
    GradBuffer, GruCell, Linear, ParamId, ParamStore, LOG_SIGMA_MAX, LOG_SIGMA_MIN,
};
pub use tensor::Tensor;

#[cfg(test)]
mod grad_tests {
    //! Finite-difference sweeps over every layer type and composites.

    use super::gradcheck::{central_diff_grad, max_rel_error, FD_EPS, FD_TOLERANCE};
    use super::*;
    use rand::Rng;
    use rand_chacha::ChaCha12Rng;
    use rand::SeedableRng;

    /// Runs FD over all parameters of `store` against the analytic gradient
    /// of `loss_fn`, which must rebuild the graph from the store each call.
    fn check_params(
        store: &mut ParamStore,
        mut loss_fn: impl FnMut(&ParamStore) -> (f64, Vec<f64>),
    ) -> f64 {
        let x0 = store.flatten();
        let (_, analytic) = loss_fn(store);
        let numeric = central_diff_grad(
            |x| {
                store.unflatten(x);
                let (loss, _) = loss_fn(store);
                loss
            },
            &x0,
            FD_EPS,
        );
        store.unflatten(&x0);
        max_rel_error(&analytic, &numeric)
    }

    fn grad_vec(store: &ParamStore, g: &Graph, binder: &Binder, grads: &Gradients) -> Vec<f64> {
        let mut buf = GradBuffer::zeros_like(store);
        binder.accumulate_grads(g, grads, &mut buf);
        let mut out = Vec::new();
        for t in buf.tensors {
            out.extend_from_slice(t.data());
        }
        out
    }

    #[test]
    fn linear_layer_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let mut store = ParamStore::new();
        let layer = Linear::new(&mut store, &mut rng, "fc", 5, 3);
        let x_data: Vec<f64> = (0..2 * 5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t_data: Vec<f64> = (0..2 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let err = check_params(&mut store, |store| {
            let mut g = Graph::new();
            let mut binder = Binder::new(store);
            let x = g.leaf(Tensor::from_vec(2, 5, x_data.clone()));
            let y = layer.forward(&mut g, &mut binder, store, x);
            let act = g.tanh(y);
            let target = g.leaf(Tensor::from_vec(2, 3, t_data.clone()));
            let diff = g.sub(act, target);
            let sq = g.mul(diff, diff);
            let loss = g.sum_all(sq);
            let grads = g.backward(loss);
            (g.value(loss).item(), grad_vec(store, &g, &binder, &grads))
        });
        assert!(err <= FD_TOLERANCE, "linear fd error {err}");
    }

    #[test]
    fn relu_path_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut store = ParamStore::new();
        let l1 = Linear::new(&mut store, &mut rng, "l1", 4, 6);
        let l2 = Linear::new(&mut store, &mut rng, "l2", 6, 1);
        let x_data: Vec<f64> = (0..3 * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let err = check_params(&mut store, |store| {
            let mut g = Graph::new();
            let mut binder = Binder::new(store);
            let x = g.leaf(Tensor::from_vec(3, 4, x_data.clone()));
            let h = l1.forward(&mut g, &mut binder, store, x);
            let h = g.relu(h);
            let y = l2.forward(&mut g, &mut binder, store, h);
            let loss = g.sum_all(y);
            let grads = g.backward(loss);
            (g.value(loss).item(), grad_vec(store, &g, &binder, &grads))
        });
        assert!(err <= FD_TOLERANCE, "relu fd error {err}");
    }

    #[test]
    fn gaussian_head_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let mut store = ParamStore::new();
        let head = GaussianHead::new(&mut store, &mut rng, "head", 4, 3);
        let x_data: Vec<f64> = (0..2 * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t_data: Vec<f64> = (0..2 * 3).map(|_| rng.random_range(-1.5..1.5)).collect();
        let err = check_params(&mut store, |store| {
            let mut g = Graph::new();
            let mut binder = Binder::new(store);
            let x = g.leaf(Tensor::from_vec(2, 4, x_data.clone()));
            let (mean, ls) = head.forward(&mut g, &mut binder, store, x);
            let target = g.leaf(Tensor::from_vec(2, 3, t_data.clone()));
            let loss = gaussian_nll_sum(&mut g, mean, ls, target);
            let grads = g.backward(loss);
            (g.value(loss).item(), grad_vec(store, &g, &binder, &grads))
        });
        assert!(err <= FD_TOLERANCE, "gaussian head fd error {err}");
    }

    #[test]
    fn gru_cell_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let mut store = ParamStore::new();
        let cell = GruCell::new(&mut store, &mut rng, "gru", 3, 5);
        let x_data: Vec<f64> = (0..2 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let err = check_params(&mut store, |store| {
            let mut g = Graph::new();
            let mut binder = Binder::new(store);
            let x = g.leaf(Tensor::from_vec(2, 3, x_data.clone()));
            let h0 = g.leaf(Tensor::zeros(2, 5));
            let h1 = cell.step(&mut g, &mut binder, store, x, h0).unwrap();
            let loss = g.sum_all(h1);
            let grads = g.backward(loss);
            (g.value(loss).item(), grad_vec(store, &g, &binder, &grads))
        });
        assert!(err <= FD_TOLERANCE, "gru fd error {err}");
    }

    #[test]
    fn gru_unrolled_five_steps_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let mut store = ParamStore::new();
        let cell = GruCell::new(&mut store, &mut rng, "gru", 2, 4);
        let head = Linear::new(&mut store, &mut rng, "out", 4, 1);
        let xs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..2 * 2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let err = check_params(&mut store, |store| {
            let mut g = Graph::new();
            let mut binder = Binder::new(store);
            let steps: Vec<NodeId> = xs
                .iter()
                .map(|x| g.leaf(Tensor::from_vec(2, 2, x.clone())))
                .collect();
            let h = cell.run(&mut g, &mut binder, store, &steps).unwrap();
            let y = head.forward(&mut g, &mut binder, store, h);
            let loss = g.sum_all(y);
            let grads = g.backward(loss);
            (g.value(loss).item(), grad_vec(store, &g, &binder, &grads))
        });
        assert!(err <= FD_TOLERANCE, "unrolled gru fd error {err}");
    }

    #[test]
    fn log_softmax_and_select_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let mut store = ParamStore::new();
        let layer = Linear::new(&mut store, &mut rng, "logits", 6, 16);
        let x_data: Vec<f64> = (0..3 * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let picks: Vec<usize> = (0..3)
            .flat_map(|_| {
                (0..4)
                    .map(|w| w * 4 + rng.random_range(0..4))
                    .collect::<Vec<_>>()
            })
            .collect();
        let err = check_params(&mut store, |store| {
            let mut g = Graph::new();
            let mut binder = Binder::new(store);
            let x = g.leaf(Tensor::from_vec(3, 6, x_data.clone()));
            let logits = layer.forward(&mut g, &mut binder, store, x);
            let logp = g.log_softmax_groups(logits, 4);
            let picked = g.select_sum(logp, &picks, 4);
            let loss = g.sum_all(picked);
            let grads = g.backward(loss);
            (g.value(loss).item(), grad_vec(store, &g, &binder, &grads))
        });
        assert!(err <= FD_TOLERANCE, "log-softmax fd error {err}");
    }

    #[test]
    fn dropout_off_path_is_deterministic_and_correct() {
        // Dropout in inference mode is the identity, so gradients flow
        // through unchanged, and repeated forward passes are bit-identical.
        let mut rng = ChaCha12Rng::seed_from_u64(16);
        let mut store = ParamStore::new();
        let layer = Linear::new(&mut store, &mut rng, "fc", 4, 4);
        let x_data: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let run = |store: &ParamStore| {
            let mut g = Graph::new();
            let mut binder = Binder::new(store);
            let mut drop_rng = ChaCha12Rng::seed_from_u64(99);
            let x = g.leaf(Tensor::row(&x_data));
            let y = layer.forward(&mut g, &mut binder, store, x);
            let y = g.dropout(y, 0.3, false, &mut drop_rng);
            let loss = g.sum_all(y);
            let grads = g.backward(loss);
            (g.value(loss).item(), grad_vec(store, &g, &binder, &grads))
        };
        let (l1, _) = run(&store);
        let (l2, _) = run(&store);
        assert_eq!(l1.to_bits(), l2.to_bits());
        let err = check_params(&mut store, |s| run(s));
        assert!(err <= FD_TOLERANCE, "dropout-off fd error {err}");
    }

    #[test]
    fn dropout_training_mask_gradients() {
        // With a frozen mask (same dropout RNG seed each rebuild), training
        // dropout is a fixed linear scaling and must pass FD as well.
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let mut store = ParamStore::new();
        let layer = Linear::new(&mut store, &mut rng, "fc", 4, 8);
        let x_data: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let err = check_params(&mut store, |store| {
            let mut g = Graph::new();
            let mut binder = Binder::new(store);
            let mut drop_rng = ChaCha12Rng::seed_from_u64(5);
            let x = g.leaf(Tensor::row(&x_data));
            let y = layer.forward(&mut g, &mut binder, store, x);
            let y = g.dropout(y, 0.25, true, &mut drop_rng);
            let loss = g.sum_all(y);
            let grads = g.backward(loss);
            (g.value(loss).item(), grad_vec(store, &g, &binder, &grads))
        });
        assert!(err <= FD_TOLERANCE, "dropout-train fd error {err}");
    }

    #[test]
    fn random_composite_network_gradients() {
        // A random small network mixing every op; checked on random input.
        let mut rng = ChaCha12Rng::seed_from_u64(18);
        let mut store = ParamStore::new();
        let gru = GruCell::new(&mut store, &mut rng, "gru", 3, 4);
        let fc = Linear::new(&mut store, &mut rng, "fc", 6, 4);
        let head = GaussianHead::new(&mut store, &mut rng, "head", 4, 2);
        let xs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..2 * 3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let extra: Vec<f64> = (0..2 * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t_data: Vec<f64> = (0..2 * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let err = check_params(&mut store, |store| {
            let mut g = Graph::new();
            let mut binder = Binder::new(store);
            let steps: Vec<NodeId> = xs
                .iter()
                .map(|x| g.leaf(Tensor::from_vec(2, 3, x.clone())))
                .collect();
            let h = gru.run(&mut g, &mut binder, store, &steps).unwrap();
            let e = g.leaf(Tensor::from_vec(2, 2, extra.clone()));
            let cat = g.concat_cols(&[h, e]);
            let z = fc.forward(&mut g, &mut binder, store, cat);
            let z = g.relu(z);
            let (mean, ls) = head.forward(&mut g, &mut binder, store, z);
            let target = g.leaf(Tensor::from_vec(2, 2, t_data.clone()));
            let loss = gaussian_nll_sum(&mut g, mean, ls, target);
            let grads = g.backward(loss);
            (g.value(loss).item(), grad_vec(store, &g, &binder, &grads))
        });
        assert!(err <= FD_TOLERANCE, "composite fd error {err}");
    }
}
