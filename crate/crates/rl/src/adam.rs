//! Adam optimizer with bias correction and optional global-norm clipping.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::net::{DenseNet, Grads};

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl Adam {
    pub fn new(net: &DenseNet, lr: f64) -> Self {
        let (ws, bs) = net.weights_ref();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m_w: ws.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            v_w: ws.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            m_b: bs.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            v_b: bs.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. When `clip_norm` is set the gradients' global
    /// norm is clipped first.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Grads, clip_norm: Option<f64>) {
        let mut grads = grads.clone();
        if let Some(max_norm) = clip_norm {
            grads.clip_global_norm(max_norm);
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        let (lr, b1, b2, eps) = (self.lr, self.beta1, self.beta2, self.eps);

        let (ws, bs) = net.weights_mut();
        for (l, w) in ws.iter_mut().enumerate() {
            let g = &grads.weights[l];
            self.m_w[l].zip_mut_with(g, |m, &gi| *m = b1 * *m + (1.0 - b1) * gi);
            self.v_w[l].zip_mut_with(g, |v, &gi| *v = b2 * *v + (1.0 - b2) * gi * gi);
            let m = &self.m_w[l];
            let v = &self.v_w[l];
            ndarray::Zip::from(w).and(m).and(v).for_each(|p, &m, &v| {
                *p -= lr * (m / bias1) / ((v / bias2).sqrt() + eps);
            });
        }
        for (l, b) in bs.iter_mut().enumerate() {
            let g = &grads.biases[l];
            self.m_b[l].zip_mut_with(g, |m, &gi| *m = b1 * *m + (1.0 - b1) * gi);
            self.v_b[l].zip_mut_with(g, |v, &gi| *v = b2 * *v + (1.0 - b2) * gi * gi);
            let m = &self.m_b[l];
            let v = &self.v_b[l];
            ndarray::Zip::from(b).and(m).and(v).for_each(|p, &m, &v| {
                *p -= lr * (m / bias1) / ((v / bias2).sqrt() + eps);
            });
        }
    }

    pub fn to_checkpoint(&self) -> AdamCheckpoint {
        AdamCheckpoint {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            step: self.step,
            m_w: self.m_w.iter().map(|a| a.iter().copied().collect()).collect(),
            v_w: self.v_w.iter().map(|a| a.iter().copied().collect()).collect(),
            m_b: self.m_b.iter().map(|a| a.to_vec()).collect(),
            v_b: self.v_b.iter().map(|a| a.to_vec()).collect(),
        }
    }

    pub fn from_checkpoint(ckpt: &AdamCheckpoint, net: &DenseNet) -> Self {
        let mut adam = Adam::new(net, ckpt.lr);
        adam.beta1 = ckpt.beta1;
        adam.beta2 = ckpt.beta2;
        adam.eps = ckpt.eps;
        adam.step = ckpt.step;
        for (l, m) in adam.m_w.iter_mut().enumerate() {
            *m = Array2::from_shape_vec(m.raw_dim(), ckpt.m_w[l].clone()).unwrap();
        }
        for (l, v) in adam.v_w.iter_mut().enumerate() {
            *v = Array2::from_shape_vec(v.raw_dim(), ckpt.v_w[l].clone()).unwrap();
        }
        for (l, m) in adam.m_b.iter_mut().enumerate() {
            *m = Array1::from_vec(ckpt.m_b[l].clone());
        }
        for (l, v) in adam.v_b.iter_mut().enumerate() {
            *v = Array1::from_vec(ckpt.v_b[l].clone());
        }
        adam
    }
}

/// Optimizer moments for the checkpoint document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamCheckpoint {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m_w: Vec<Vec<f64>>,
    pub v_w: Vec<Vec<f64>>,
    pub m_b: Vec<Vec<f64>>,
    pub v_b: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Head;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_net(weight: f64) -> DenseNet {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = DenseNet::init(&[1, 1], Head::Linear, &mut rng);
        let (ws, bs) = net.weights_mut();
        ws[0][(0, 0)] = weight;
        bs[0][0] = 0.0;
        net
    }

    fn grad_of(net: &DenseNet, g_w: f64) -> Grads {
        let mut grads = Grads::zeros_like(net);
        grads.weights[0][(0, 0)] = g_w;
        grads
    }

    #[test]
    fn first_step_magnitude_is_the_learning_rate() {
        // With fresh moments, m-hat = g and v-hat = g^2, so the update is
        // lr * g / (|g| + eps), i.e. lr in magnitude for any nonzero g.
        for g in [0.5, -3.0, 10.0] {
            let mut net = scalar_net(1.0);
            let mut adam = Adam::new(&net, 0.01);
            let grads = grad_of(&net, g);
            adam.step(&mut net, &grads, None);
            let (ws, _) = net.weights_ref();
            let delta = ws[0][(0, 0)] - 1.0;
            assert!((delta.abs() - 0.01).abs() < 1e-6, "delta {delta} for g {g}");
            assert_eq!(delta.signum(), -g.signum());
        }
    }

    #[test]
    fn zero_gradient_changes_nothing() {
        let mut net = scalar_net(2.5);
        let mut adam = Adam::new(&net, 0.1);
        let g = grad_of(&net, 0.0);
        adam.step(&mut net, &g, Some(1.0));
        let (ws, _) = net.weights_ref();
        assert_eq!(ws[0][(0, 0)], 2.5);
    }

    #[test]
    fn global_norm_clipping_rescales_to_the_cap() {
        let net = scalar_net(0.0);
        let mut grads = grad_of(&net, 10.0);
        grads.clip_global_norm(1.0);
        assert!((grads.global_norm() - 1.0).abs() < 1e-12);
        assert!((grads.weights[0][(0, 0)] - 1.0).abs() < 1e-12);

        // A norm under the cap is untouched.
        let mut small = grad_of(&net, 0.5);
        small.clip_global_norm(1.0);
        assert_eq!(small.weights[0][(0, 0)], 0.5);
    }

    #[test]
    fn checkpoint_roundtrip_preserves_moments() {
        let mut net = scalar_net(1.0);
        let mut adam = Adam::new(&net, 0.01);
        for _ in 0..5 {
            let g = grad_of(&net, 1.0);
            adam.step(&mut net, &g, None);
        }
        let text = serde_json::to_string(&adam.to_checkpoint()).unwrap();
        let back = Adam::from_checkpoint(&serde_json::from_str(&text).unwrap(), &net);
        assert_eq!(back.step_count(), 5);
        assert_eq!(back.m_w[0][(0, 0)].to_bits(), adam.m_w[0][(0, 0)].to_bits());
    }
}
