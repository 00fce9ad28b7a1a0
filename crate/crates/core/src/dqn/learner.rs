use rand::Rng;

use super::network::{BackwardScratch, ForwardCache, Gradients, QNetwork};
use super::optim::{AdamW, AdamWConfig};
use super::replay::Batch;
use super::scalar::Scalar;
use crate::env::ActionIndex;
use crate::error::DqnError;

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn greedy_action<T: Scalar>(net: &QNetwork<T>, state: &[T]) -> Result<ActionIndex, DqnError> {
    let q = net.forward(state)?;
    let num_rcs = net.output_dim() / 2;
    Ok(ActionIndex::new(argmax(&q), num_rcs).expect("argmax lies inside the action space"))
}

/// ε-greedy: uniform over all actions with probability `eps`, else greedy.
pub fn select_action<T: Scalar, R: Rng + ?Sized>(
    net: &QNetwork<T>,
    state: &[T],
    eps: f64,
    rng: &mut R,
) -> Result<ActionIndex, DqnError> {
    if eps > 0.0 && rng.gen::<f64>() < eps {
        let n = net.output_dim();
        return Ok(ActionIndex::new(rng.gen_range(0..n), n / 2).expect("sampled inside the action space"));
    }
    greedy_action(net, state)
}

/// `y = r` on terminal records, `r + γ·maxₐ Q′(s′, a)` otherwise.
pub fn td_targets<T: Scalar>(batch: &Batch<T>, target: &QNetwork<T>, gamma: T) -> Result<Vec<T>, DqnError> {
    let mut out = Vec::new();
    td_targets_into(batch, target, gamma, &mut ForwardCache::empty(), &mut out)?;
    Ok(out)
}

fn td_targets_into<T: Scalar>(
    batch: &Batch<T>,
    target: &QNetwork<T>,
    gamma: T,
    cache: &mut ForwardCache<T>,
    out: &mut Vec<T>,
) -> Result<(), DqnError> {
    if batch.size == 0 {
        return Err(DqnError::EmptyBatch);
    }
    target.forward_cached_into(&batch.next_states, batch.size, cache)?;
    let q_next = cache.output();
    let n = target.output_dim();
    out.clear();
    out.extend((0..batch.size).map(|i| {
        if batch.terminals[i] {
            batch.rewards[i]
        } else {
            let best = q_next[i * n..(i + 1) * n]
                .iter()
                .copied()
                .fold(T::neg_infinity(), T::max);
            batch.rewards[i] + gamma * best
        }
    }));
    Ok(())
}

/// Mean over the batch of `(y − Q(s, a; θ))²` on the taken action, with its gradient.
pub fn td_loss_and_gradients<T: Scalar>(
    net: &QNetwork<T>,
    batch: &Batch<T>,
    targets: &[T],
) -> Result<(T, Gradients<T>), DqnError> {
    let mut ws = Workspace::new(net);
    let loss = td_loss_into(net, batch, targets, &mut ws)?;
    Ok((loss, ws.grads))
}

fn td_loss_into<T: Scalar>(net: &QNetwork<T>, batch: &Batch<T>, targets: &[T], ws: &mut Workspace<T>) -> Result<T, DqnError> {
    if batch.size == 0 {
        return Err(DqnError::EmptyBatch);
    }
    net.forward_cached_into(&batch.states, batch.size, &mut ws.policy_cache)?;
    let q = ws.policy_cache.output();
    let n = net.output_dim();
    let inv = T::one() / T::from_usize(batch.size).expect("batch size");
    let two = T::one() + T::one();
    ws.grad_out.clear();
    ws.grad_out.resize(batch.size * n, T::zero());
    let mut loss = T::zero();
    for i in 0..batch.size {
        let idx = i * n + batch.actions[i];
        let err = q[idx] - targets[i];
        loss = loss + err * err;
        ws.grad_out[idx] = two * err * inv;
    }
    net.backward_into(&ws.policy_cache, &ws.grad_out, &mut ws.grads, &mut ws.backward);
    Ok(loss * inv)
}

/// Buffers reused from one gradient step to the next.
#[derive(Clone, Debug)]
pub struct Workspace<T> {
    policy_cache: ForwardCache<T>,
    target_cache: ForwardCache<T>,
    grads: Gradients<T>,
    grad_out: Vec<T>,
    targets: Vec<T>,
    backward: BackwardScratch<T>,
}

impl<T: Scalar> Workspace<T> {
    pub fn new(net: &QNetwork<T>) -> Self {
        Self {
            policy_cache: ForwardCache::empty(),
            target_cache: ForwardCache::empty(),
            grads: Gradients::zeros_like(net),
            grad_out: Vec::new(),
            targets: Vec::new(),
            backward: BackwardScratch::default(),
        }
    }
}

/// Delayed copy θ′ of the policy network.
#[derive(Clone, Debug)]
pub struct TargetNetwork<T> {
    pub net: QNetwork<T>,
    pub staleness: u64,
}

impl<T: Scalar> TargetNetwork<T> {
    pub fn from_policy(policy: &QNetwork<T>) -> Self {
        Self { net: policy.clone(), staleness: 0 }
    }
}

pub fn sync_target<T: Scalar>(policy: &QNetwork<T>, target: &mut TargetNetwork<T>) -> Result<(), DqnError> {
    target.net.copy_from(policy)?;
    target.staleness = 0;
    Ok(())
}

/// One optimisation step: TD targets from θ′, squared-error gradient, optional
/// max-norm clip, AdamW update. Returns the pre-update loss.
pub fn train_step<T: Scalar>(
    net: &mut QNetwork<T>,
    target: &QNetwork<T>,
    opt: &mut AdamW<T>,
    batch: &Batch<T>,
    gamma: T,
    max_grad_norm: Option<f64>,
) -> Result<T, DqnError> {
    let mut ws = Workspace::new(net);
    train_step_in(&mut ws, net, target, opt, batch, gamma, max_grad_norm)
}

/// As [`train_step`] with caller-owned buffers.
pub fn train_step_in<T: Scalar>(
    ws: &mut Workspace<T>,
    net: &mut QNetwork<T>,
    target: &QNetwork<T>,
    opt: &mut AdamW<T>,
    batch: &Batch<T>,
    gamma: T,
    max_grad_norm: Option<f64>,
) -> Result<T, DqnError> {
    let mut targets = std::mem::take(&mut ws.targets);
    td_targets_into(batch, target, gamma, &mut ws.target_cache, &mut targets)?;
    let loss = td_loss_into(net, batch, &targets, ws);
    ws.targets = targets;
    let loss = loss?;
    if !loss.is_finite() {
        return Err(DqnError::NonFiniteLoss {
            loss: loss.as_f64(),
            grad_steps: opt.steps(),
        });
    }
    if let Some(max_norm) = max_grad_norm {
        let norm = ws.grads.global_norm();
        if norm > max_norm {
            ws.grads.scale(T::from_f64_lossy(max_norm / norm));
        }
    }
    opt.step(net, &ws.grads);
    Ok(loss)
}

/// Policy network, target twin and optimiser with the sync cadence.
#[derive(Clone, Debug)]
pub struct Learner<T> {
    pub policy: QNetwork<T>,
    pub target: TargetNetwork<T>,
    pub optimizer: AdamW<T>,
    pub gamma: T,
    /// Target sync period in gradient steps.
    pub tau: u64,
    pub max_grad_norm: Option<f64>,
    grad_steps: u64,
    syncs: u64,
    workspace: Workspace<T>,
}

impl<T: Scalar> Learner<T> {
    pub fn new(policy: QNetwork<T>, opt: AdamWConfig, gamma: f64, tau: u64, max_grad_norm: Option<f64>) -> Self {
        let workspace = Workspace::new(&policy);
        Self {
            target: TargetNetwork::from_policy(&policy),
            optimizer: AdamW::new(&policy, opt),
            policy,
            gamma: T::from_f64_lossy(gamma),
            tau: tau.max(1),
            max_grad_norm,
            grad_steps: 0,
            syncs: 0,
            workspace,
        }
    }

    pub fn grad_steps(&self) -> u64 {
        self.grad_steps
    }

    pub fn syncs(&self) -> u64 {
        self.syncs
    }

    pub fn learn(&mut self, batch: &Batch<T>) -> Result<T, DqnError> {
        let loss = train_step_in(
            &mut self.workspace,
            &mut self.policy,
            &self.target.net,
            &mut self.optimizer,
            batch,
            self.gamma,
            self.max_grad_norm,
        )?;
        self.grad_steps += 1;
        self.target.staleness += 1;
        if self.grad_steps.is_multiple_of(self.tau) {
            sync_target(&self.policy, &mut self.target)?;
            self.syncs += 1;
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dqn::network::Layer;
    use crate::dqn::replay::Transition;
    use crate::rng::rng_from;

    fn linear_net(weights: Vec<f64>, biases: Vec<f64>, inputs: usize) -> QNetwork<f64> {
        let outputs = biases.len();
        QNetwork::from_layers(vec![Layer { inputs, outputs, weights, biases }]).unwrap()
    }

    fn transition(state: Vec<f64>, action: usize, reward: f64, next_state: Vec<f64>, terminal: bool) -> Transition<f64> {
        Transition { state, action, reward, next_state, terminal }
    }

    #[test]
    fn td_target_branches() {
        // Target net: q(s') = [10, s'_0] for constant next state with s'_0 = 1.
        let target = linear_net(vec![0.0, 1.0], vec![10.0, 0.0], 1);
        let batch = Batch::from_transitions(&[
            transition(vec![0.0], 0, 18.0, vec![1.0], true),
            transition(vec![0.0], 1, 1.0, vec![1.0], false),
        ]);
        let y = td_targets(&batch, &target, 0.99).unwrap();
        assert_eq!(y[0], 18.0);
        assert!((y[1] - 10.9).abs() < 1e-12);
        let y0 = td_targets(&batch, &target, 0.0).unwrap();
        assert_eq!(y0, vec![18.0, 1.0]);
    }

    #[test]
    fn empty_batch_is_rejected() {
        let net = linear_net(vec![0.0], vec![0.0], 1);
        let batch = Batch::<f64>::with_dim(1);
        assert!(matches!(td_targets(&batch, &net, 0.9), Err(DqnError::EmptyBatch)));
    }

    #[test]
    fn single_record_gradient_matches_hand_derivation() {
        // q = W·s + b, W = [0.5 −1; 2 0.25] stored transposed; ∂/∂W_a = 2(q_a − y)·s.
        let net = linear_net(vec![0.5, 2.0, -1.0, 0.25], vec![0.1, -0.2], 2);
        let s = vec![3.0, 4.0];
        let batch = Batch::from_transitions(&[transition(s.clone(), 1, 0.0, s.clone(), true)]);
        let targets = [1.5];
        let (loss, g) = td_loss_and_gradients(&net, &batch, &targets).unwrap();
        let q1 = 2.0 * 3.0 + 0.25 * 4.0 - 0.2;
        assert!((loss - (q1 - 1.5f64).powi(2)).abs() < 1e-12);
        let coeff = 2.0 * (q1 - 1.5);
        let gw = &g.layers[0].weights;
        assert_eq!((gw[0], gw[2]), (0.0, 0.0));
        assert!((gw[1] - coeff * 3.0).abs() < 1e-12);
        assert!((gw[3] - coeff * 4.0).abs() < 1e-12);
        assert!((g.layers[0].biases[1] - coeff).abs() < 1e-12);
    }

    #[test]
    fn zero_error_batch_only_decays_weights() {
        let mut net = linear_net(vec![0.5, -1.0], vec![0.3], 2);
        let frozen = linear_net(vec![0.0, 0.0], vec![0.0], 2);
        let s = vec![1.0, 2.0];
        let q = net.forward(&s).unwrap()[0];
        let batch = Batch::from_transitions(&[transition(s.clone(), 0, q, s, true)]);
        let mut opt = AdamW::new(&net, AdamWConfig::default());
        let before = net.clone();
        let loss = train_step(&mut net, &frozen, &mut opt, &batch, 0.99, None).unwrap();
        assert_eq!(loss, 0.0);
        let (lr, wd) = (1e-4, 0.01);
        for (a, w) in net.layers()[0].weights.iter().zip(&before.layers()[0].weights) {
            assert_eq!(*a, *w - lr * wd * *w);
        }
        assert_eq!(net.layers()[0].biases, before.layers()[0].biases);
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut net = linear_net(vec![f64::INFINITY], vec![0.0], 1);
        let frozen = net.clone();
        let batch = Batch::from_transitions(&[transition(vec![1.0], 0, 0.0, vec![1.0], true)]);
        let mut opt = AdamW::new(&net, AdamWConfig::default());
        let err = train_step(&mut net, &frozen, &mut opt, &batch, 0.9, None).unwrap_err();
        assert!(matches!(err, DqnError::NonFiniteLoss { .. }));
    }

    #[test]
    fn greedy_selection_and_tie_rule() {
        let mut q = vec![0.0; 8];
        q[1] = 3.0;
        q[2] = 2.0;
        assert_eq!(argmax(&q), 1);
        let mut tied = vec![0.0; 8];
        tied[2] = 5.0;
        tied[5] = 5.0;
        assert_eq!(argmax(&tied), 2);
        let zero = QNetwork::<f32>::zeros(&[3, 8]).unwrap();
        let a = select_action(&zero, &[1.0, 2.0, 3.0], 0.0, &mut rng_from(0, &[])).unwrap();
        assert_eq!(a.value(), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let net = QNetwork::<f32>::zeros(&[2, 24]).unwrap();
        let mut rng = rng_from(9, &[]);
        let draws = 10_000;
        let mut counts = [0usize; 24];
        for _ in 0..draws {
            counts[select_action(&net, &[0.0, 0.0], 1.0, &mut rng).unwrap().value()] += 1;
        }
        let expected = draws as f64 / 24.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 23 degrees of freedom, 99.9th percentile ≈ 49.7.
        assert!(chi2 < 49.7, "chi-square {chi2}");
    }

    #[test]
    fn sync_copies_exactly_and_rejects_shape_mismatch() {
        let mut rng = rng_from(4, &[]);
        let policy = QNetwork::<f32>::new(&[5, 9, 4], &mut rng).unwrap();
        let mut target = TargetNetwork::from_policy(&QNetwork::<f32>::new(&[5, 9, 4], &mut rng).unwrap());
        target.staleness = 17;
        sync_target(&policy, &mut target).unwrap();
        assert_eq!(target.net, policy);
        assert_eq!(target.staleness, 0);
        let s = [0.1, 0.2, -0.3, 0.4, 0.5];
        assert_eq!(policy.forward(&s).unwrap(), target.net.forward(&s).unwrap());

        let mut other = TargetNetwork::from_policy(&QNetwork::<f32>::zeros(&[5, 4]).unwrap());
        assert!(sync_target(&policy, &mut other).is_err());
    }

    #[test]
    fn learner_syncs_every_tau_steps() {
        let mut rng = rng_from(5, &[]);
        let net = QNetwork::<f32>::new(&[3, 8, 4], &mut rng).unwrap();
        let mut learner = Learner::new(net, AdamWConfig::default(), 0.99, 50, None);
        assert_eq!(learner.syncs(), 0);
        let batch = Batch::from_transitions(&[Transition {
            state: vec![0.1, 0.2, 0.3],
            action: 2,
            reward: 1.0,
            next_state: vec![0.3, 0.2, 0.1],
            terminal: false,
        }]);
        for step in 1..=149u64 {
            learner.learn(&batch).unwrap();
            assert_eq!(learner.syncs(), step / 50);
            if step % 50 == 0 {
                assert_eq!(learner.target.net, learner.policy);
            }
        }
        assert_eq!(learner.target.staleness, 49);
    }
}
