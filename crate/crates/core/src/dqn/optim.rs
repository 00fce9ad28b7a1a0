use serde::{Deserialize, Serialize};

use super::network::{Gradients, QNetwork};
use super::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay, applied to weight matrices only.
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Adam with decoupled weight decay.
///
/// Per parameter `p` with gradient `g` at step `t`:
/// ```text
/// p ← p − lr·λ·p                     (weights only)
/// m ← β₁m + (1−β₁)g,  v ← β₂v + (1−β₂)g²
/// p ← p − lr·m̂/(√v̂ + ε),  m̂ = m/(1−β₁ᵗ), v̂ = v/(1−β₂ᵗ)
/// ```
#[derive(Clone, Debug)]
pub struct AdamW<T> {
    pub config: AdamWConfig,
    pub(crate) first: Gradients<T>,
    pub(crate) second: Gradients<T>,
    pub(crate) steps: u64,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(net: &QNetwork<T>, config: AdamWConfig) -> Self {
        Self {
            config,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn first_moments(&self) -> &Gradients<T> {
        &self.first
    }

    pub fn second_moments(&self) -> &Gradients<T> {
        &self.second
    }

    pub fn step(&mut self, net: &mut QNetwork<T>, grads: &Gradients<T>) {
        assert_eq!(grads.layers.len(), net.layers().len(), "gradient shape mismatch");
        self.steps += 1;
        let c = &self.config;
        let t = self.steps as i32;
        let lr = T::from_f64_lossy(c.lr);
        let decay = T::from_f64_lossy(c.weight_decay);
        let b1 = T::from_f64_lossy(c.beta1);
        let b2 = T::from_f64_lossy(c.beta2);
        let eps = T::from_f64_lossy(c.eps);
        let bc1 = T::from_f64_lossy(1.0 - c.beta1.powi(t));
        let bc2 = T::from_f64_lossy(1.0 - c.beta2.powi(t));
        let one = T::one();

        let update = |p: &mut T, g: T, m: &mut T, v: &mut T| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        };

        for (li, layer) in net.layers_mut().iter_mut().enumerate() {
            let g = &grads.layers[li];
            let m = &mut self.first.layers[li];
            let v = &mut self.second.layers[li];
            for (((p, &gw), mw), vw) in layer
                .weights
                .iter_mut()
                .zip(&g.weights)
                .zip(m.weights.iter_mut())
                .zip(v.weights.iter_mut())
            {
                *p = *p - lr * decay * *p;
                update(p, gw, mw, vw);
            }
            for (((p, &gb), mb), vb) in layer
                .biases
                .iter_mut()
                .zip(&g.biases)
                .zip(m.biases.iter_mut())
                .zip(v.biases.iter_mut())
            {
                update(p, gb, mb, vb);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn zero_gradient_step_is_pure_weight_decay() {
        let mut rng = rng_from(21, &[]);
        let mut net = QNetwork::<f32>::new(&[4, 3, 2], &mut rng).unwrap();
        let before = net.clone();
        let cfg = AdamWConfig::default();
        let mut opt = AdamW::new(&net, cfg);
        let zero = Gradients::zeros_like(&net);
        opt.step(&mut net, &zero);
        let lr = cfg.lr as f32;
        let wd = cfg.weight_decay as f32;
        for (after, orig) in net.layers().iter().zip(before.layers()) {
            for (a, w) in after.weights.iter().zip(&orig.weights) {
                assert_eq!(*a, *w - lr * wd * *w);
            }
            assert_eq!(after.biases, orig.biases);
        }
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn first_step_moves_each_parameter_by_about_lr() {
        // With bias correction the first Adam step is lr·sign(g).
        let mut net = QNetwork::<f64>::zeros(&[2, 1]).unwrap();
        let cfg = AdamWConfig { weight_decay: 0.0, ..AdamWConfig::default() };
        let mut opt = AdamW::new(&net, cfg);
        let mut g = Gradients::zeros_like(&net);
        g.layers[0].weights = vec![0.5, -3.0];
        g.layers[0].biases = vec![2.0];
        opt.step(&mut net, &g);
        let l = &net.layers()[0];
        assert!((l.weights[0] + 1e-4).abs() < 1e-10);
        assert!((l.weights[1] - 1e-4).abs() < 1e-10);
        assert!((l.biases[0] + 1e-4).abs() < 1e-10);
    }

    #[test]
    fn moments_match_parameter_shapes() {
        let net = QNetwork::<f32>::zeros(&[5, 7, 3]).unwrap();
        let opt = AdamW::new(&net, AdamWConfig::default());
        for (m, l) in opt.first_moments().layers.iter().zip(net.layers()) {
            assert_eq!(m.weights.len(), l.weights.len());
            assert_eq!(m.biases.len(), l.biases.len());
        }
    }
}
