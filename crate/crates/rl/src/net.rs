//! Dense feed-forward network with tanh hidden layers, exact reverse-mode
//! gradients and a JSON checkpoint format.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// What sits on the raw output vector. The network always emits raw values;
/// the tag records how callers interpret them (Q-values/state value vs.
/// logits for a masked softmax) and survives checkpointing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Linear,
    SoftmaxLogits,
}

/// Fully connected stack: affine + tanh for every layer except the last,
/// which is affine only. Weights are stored `[in, out]`.
#[derive(Debug, Clone)]
pub struct DenseNet {
    sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    head: Head,
}

/// Cached activations of a batched forward pass; `acts[0]` is the input.
pub struct ForwardTrace {
    acts: Vec<Array2<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("trace holds at least the input")
    }
}

/// Per-layer parameter gradients, summed over the batch.
#[derive(Debug, Clone)]
pub struct Grads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Grads {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn add(&mut self, other: &Grads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        for b in &mut self.biases {
            *b *= factor;
        }
    }

    pub fn global_norm(&self) -> f64 {
        let mut total = 0.0;
        for w in &self.weights {
            total += w.iter().map(|g| g * g).sum::<f64>();
        }
        for b in &self.biases {
            total += b.iter().map(|g| g * g).sum::<f64>();
        }
        total.sqrt()
    }

    /// Rescales so the global norm does not exceed `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: f64) {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
    }
}

impl DenseNet {
    /// Scaled uniform fan-in initialization: U(-1/sqrt(in), 1/sqrt(in)).
    pub fn init(sizes: &[usize], head: Head, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "a network needs at least input and output sizes");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-bound..bound));
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        DenseNet { sizes: sizes.to_vec(), weights, biases, head }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Single-sample forward pass; returns the raw output.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.input_size(), "input size mismatch");
        let mut x = Array1::from_vec(input.to_vec());
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut y = x.dot(w) + b;
            if l != last {
                y.mapv_inplace(f64::tanh);
            }
            x = y;
        }
        x.to_vec()
    }

    /// Batched forward pass keeping post-activation values for backprop.
    pub fn forward_batch(&self, input: ArrayView2<f64>) -> ForwardTrace {
        assert_eq!(input.ncols(), self.input_size(), "input size mismatch");
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(input.to_owned());
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut y = acts[l].dot(w) + b;
            if l != last {
                y.mapv_inplace(f64::tanh);
            }
            acts.push(y);
        }
        ForwardTrace { acts }
    }

    /// Exact reverse-mode gradients for the batch, given the loss gradient
    /// with respect to the raw outputs. Gradients are summed over rows.
    pub fn backward_batch(&self, trace: &ForwardTrace, output_grad: ArrayView2<f64>) -> Grads {
        let layers = self.weights.len();
        let mut grads = Grads {
            weights: Vec::with_capacity(layers),
            biases: Vec::with_capacity(layers),
        };
        // delta starts on the raw output (last layer is affine only).
        let mut delta = output_grad.to_owned();
        for l in (0..layers).rev() {
            let input_act = &trace.acts[l];
            grads.weights.push(input_act.t().dot(&delta));
            grads.biases.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                // Through the affine into layer l-1's tanh output.
                let mut upstream = delta.dot(&self.weights[l].t());
                upstream.zip_mut_with(&trace.acts[l], |g, &a| *g *= 1.0 - a * a);
                delta = upstream;
            }
        }
        grads.weights.reverse();
        grads.biases.reverse();
        grads
    }

    /// Polyak mix: `self = (1 - tau) * self + tau * other`.
    pub fn soft_update_from(&mut self, other: &DenseNet, tau: f64) {
        for (w, ow) in self.weights.iter_mut().zip(&other.weights) {
            w.zip_mut_with(ow, |a, &b| *a = (1.0 - tau) * *a + tau * b);
        }
        for (b, ob) in self.biases.iter_mut().zip(&other.biases) {
            b.zip_mut_with(ob, |a, &v| *a = (1.0 - tau) * *a + tau * v);
        }
    }

    pub fn params_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    pub(crate) fn weights_mut(&mut self) -> (&mut Vec<Array2<f64>>, &mut Vec<Array1<f64>>) {
        (&mut self.weights, &mut self.biases)
    }

    pub(crate) fn weights_ref(&self) -> (&[Array2<f64>], &[Array1<f64>]) {
        (&self.weights, &self.biases)
    }

    /// Mutable access to a single parameter, addressed layer by layer with
    /// weights first; used by the finite-difference tests.
    pub fn param_mut(&mut self, flat_index: usize) -> &mut f64 {
        let mut idx = flat_index;
        for l in 0..self.weights.len() {
            if idx < self.weights[l].len() {
                return self.weights[l].as_slice_mut().unwrap().get_mut(idx).unwrap();
            }
            idx -= self.weights[l].len();
            if idx < self.biases[l].len() {
                return self.biases[l].as_slice_mut().unwrap().get_mut(idx).unwrap();
            }
            idx -= self.biases[l].len();
        }
        panic!("parameter index {flat_index} out of range");
    }

    /// The gradient entry corresponding to [`param_mut`]'s indexing.
    pub fn grad_at(grads: &Grads, flat_index: usize) -> f64 {
        let mut idx = flat_index;
        for l in 0..grads.weights.len() {
            if idx < grads.weights[l].len() {
                return grads.weights[l].as_slice().unwrap()[idx];
            }
            idx -= grads.weights[l].len();
            if idx < grads.biases[l].len() {
                return grads.biases[l].as_slice().unwrap()[idx];
            }
            idx -= grads.biases[l].len();
        }
        panic!("parameter index {flat_index} out of range");
    }
}

/// Numerically stable softmax over a full vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Serialized network plus optimizer moments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<String>,
    pub head: Head,
    /// Row-major `[in, out]` weight matrices.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub optimizer: Option<crate::adam::AdamCheckpoint>,
    pub seed: Option<u64>,
}

impl DenseNet {
    pub fn to_checkpoint(&self, optimizer: Option<crate::adam::AdamCheckpoint>, seed: Option<u64>) -> NetCheckpoint {
        let mut activations: Vec<String> =
            (0..self.weights.len() - 1).map(|_| "tanh".to_string()).collect();
        activations.push(match self.head {
            Head::Linear => "linear".to_string(),
            Head::SoftmaxLogits => "softmax".to_string(),
        });
        NetCheckpoint {
            layer_sizes: self.sizes.clone(),
            activations,
            head: self.head,
            weights: self.weights.iter().map(|w| w.iter().copied().collect()).collect(),
            biases: self.biases.iter().map(|b| b.to_vec()).collect(),
            optimizer,
            seed,
        }
    }

    pub fn from_checkpoint(ckpt: &NetCheckpoint) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, pair) in ckpt.layer_sizes.windows(2).enumerate() {
            let w = Array2::from_shape_vec((pair[0], pair[1]), ckpt.weights[l].clone())
                .expect("checkpoint weight shape mismatch");
            weights.push(w);
            biases.push(Array1::from_vec(ckpt.biases[l].clone()));
        }
        DenseNet { sizes: ckpt.layer_sizes.clone(), weights, biases, head: ckpt.head }
    }
}

/// Helper for tests: total loss gradient of 0.5 * sum((y - target)^2).
pub fn squared_error_grad(output: ArrayView1<f64>, target: ArrayView1<f64>) -> Array1<f64> {
    (&output - &target).to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        let denom = a.abs().max(b.abs()).max(1e-8);
        (a - b).abs() / denom <= tol
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = DenseNet::init(&[4, 8, 3], Head::Linear, &mut rng);
        let (ws, bs) = net.weights_mut();
        for w in ws.iter_mut() {
            w.fill(0.0);
        }
        for b in bs.iter_mut() {
            b.fill(0.0);
        }
        assert_eq!(net.forward(&[1.0, -2.0, 0.5, 3.0]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn softmax_of_zero_logits_is_uniform() {
        let p = softmax(&[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(p, vec![0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn identity_weights_compute_tanh() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = DenseNet::init(&[3, 3, 3], Head::Linear, &mut rng);
        let (ws, bs) = net.weights_mut();
        for w in ws.iter_mut() {
            w.fill(0.0);
            for d in 0..3 {
                w[(d, d)] = 1.0;
            }
        }
        for b in bs.iter_mut() {
            b.fill(0.0);
        }
        let x = [0.1, -0.2, 0.05];
        let y = net.forward(&x);
        for (yi, xi) in y.iter().zip(&x) {
            assert!((yi - xi.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = DenseNet::init(&[5, 7, 4], Head::Linear, &mut rng);
        let x = Array2::from_shape_fn((3, 5), |(i, j)| (i + j) as f64 * 0.1);
        let trace = net.forward_batch(x.view());
        let grads = net.backward_batch(&trace, Array2::zeros((3, 4)).view());
        assert_eq!(grads.global_norm(), 0.0);
    }

    #[test]
    fn single_linear_layer_gradient_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DenseNet::init(&[3, 2], Head::Linear, &mut rng);
        let x = array![[0.5, -1.0, 2.0]];
        let trace = net.forward_batch(x.view());
        let y = trace.output().row(0).to_owned();
        let target = array![0.3, -0.7];
        let err = squared_error_grad(y.view(), target.view());
        let grads = net.backward_batch(&trace, err.clone().insert_axis(Axis(0)).view());
        for r in 0..3 {
            for c in 0..2 {
                assert!(rel_close(grads.weights[0][(r, c)], x[(0, r)] * err[c], 1e-12));
            }
        }
        for c in 0..2 {
            assert!(rel_close(grads.biases[0][c], err[c], 1e-12));
        }
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for sizes in [vec![4, 6, 3], vec![5, 8, 8, 2], vec![3, 9, 9, 9, 7]] {
            let mut net = DenseNet::init(&sizes, Head::Linear, &mut rng);
            let batch = Array2::from_shape_fn((4, sizes[0]), |_| rng.gen_range(-1.0..1.0));
            let target =
                Array2::from_shape_fn((4, *sizes.last().unwrap()), |_| rng.gen_range(-1.0..1.0));

            let loss = |net: &DenseNet| -> f64 {
                let out = net.forward_batch(batch.view());
                let diff = out.output() - &target;
                0.5 * diff.iter().map(|d| d * d).sum::<f64>()
            };

            let trace = net.forward_batch(batch.view());
            let dout = trace.output() - &target;
            let grads = net.backward_batch(&trace, dout.view());

            let n = net.param_count();
            for idx in (0..n).step_by(7) {
                let step = 1e-5;
                let orig = *net.param_mut(idx);
                *net.param_mut(idx) = orig + step;
                let up = loss(&net);
                *net.param_mut(idx) = orig - step;
                let down = loss(&net);
                *net.param_mut(idx) = orig;
                let fd = (up - down) / (2.0 * step);
                let an = DenseNet::grad_at(&grads, idx);
                assert!(
                    rel_close(fd, an, 1e-4),
                    "sizes {sizes:?} param {idx}: finite diff {fd} vs analytic {an}"
                );
            }
        }
    }

    #[test]
    fn checkpoint_roundtrip_is_bitwise_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = DenseNet::init(&[6, 11, 4], Head::SoftmaxLogits, &mut rng);
        let text = serde_json::to_string(&net.to_checkpoint(None, Some(5))).unwrap();
        let back = DenseNet::from_checkpoint(&serde_json::from_str(&text).unwrap());
        let (w1, b1) = net.weights_ref();
        let (w2, b2) = back.weights_ref();
        for (a, b) in w1.iter().zip(w2) {
            assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        for (a, b) in b1.iter().zip(b2) {
            assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(net.sizes(), back.sizes());
        assert_eq!(back.head(), Head::SoftmaxLogits);
    }
}
