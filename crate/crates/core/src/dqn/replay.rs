use rand::Rng;

use super::scalar::Scalar;

/// One `(s, a, r, s', terminal)` record.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition<T> {
    pub state: Vec<T>,
    pub action: usize,
    pub reward: T,
    pub next_state: Vec<T>,
    pub terminal: bool,
}

/// Mini-batch in structure-of-arrays form; state blocks are row-major `size × dim`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Batch<T> {
    pub size: usize,
    pub dim: usize,
    pub states: Vec<T>,
    pub actions: Vec<usize>,
    pub rewards: Vec<T>,
    pub next_states: Vec<T>,
    pub terminals: Vec<bool>,
}

impl<T: Scalar> Batch<T> {
    pub fn with_dim(dim: usize) -> Self {
        Self {
            size: 0,
            dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            terminals: Vec::new(),
        }
    }

    pub fn clear(&mut self) {
        self.size = 0;
        self.states.clear();
        self.actions.clear();
        self.rewards.clear();
        self.next_states.clear();
        self.terminals.clear();
    }

    pub fn push(&mut self, state: &[T], action: usize, reward: T, next_state: &[T], terminal: bool) {
        assert_eq!(state.len(), self.dim);
        assert_eq!(next_state.len(), self.dim);
        self.states.extend_from_slice(state);
        self.next_states.extend_from_slice(next_state);
        self.actions.push(action);
        self.rewards.push(reward);
        self.terminals.push(terminal);
        self.size += 1;
    }

    pub fn from_transitions(transitions: &[Transition<T>]) -> Self {
        let dim = transitions.first().map_or(0, |t| t.state.len());
        let mut batch = Self::with_dim(dim);
        for t in transitions {
            batch.push(&t.state, t.action, t.reward, &t.next_state, t.terminal);
        }
        batch
    }
}

/// Bounded FIFO replay memory backed by flat ring arrays.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    dim: usize,
    states: Vec<T>,
    next_states: Vec<T>,
    actions: Vec<usize>,
    rewards: Vec<T>,
    terminals: Vec<bool>,
    /// Slot of the oldest record once the ring has wrapped.
    head: usize,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize, dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            dim,
            states: Vec::new(),
            next_states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            terminals: Vec::new(),
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity
    }

    pub fn push(&mut self, state: &[T], action: usize, reward: T, next_state: &[T], terminal: bool) {
        assert_eq!(state.len(), self.dim, "state dimension");
        assert_eq!(next_state.len(), self.dim, "next-state dimension");
        if self.len() < self.capacity {
            self.states.extend_from_slice(state);
            self.next_states.extend_from_slice(next_state);
            self.actions.push(action);
            self.rewards.push(reward);
            self.terminals.push(terminal);
        } else {
            let slot = self.head;
            let range = slot * self.dim..(slot + 1) * self.dim;
            self.states[range.clone()].copy_from_slice(state);
            self.next_states[range].copy_from_slice(next_state);
            self.actions[slot] = action;
            self.rewards[slot] = reward;
            self.terminals[slot] = terminal;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn push_transition(&mut self, t: &Transition<T>) {
        self.push(&t.state, t.action, t.reward, &t.next_state, t.terminal);
    }

    fn slot(&self, logical: usize) -> usize {
        (self.head + logical) % self.len()
    }

    /// Record `i` in insertion order, 0 being the oldest retained.
    pub fn get(&self, i: usize) -> Option<Transition<T>> {
        if i >= self.len() {
            return None;
        }
        let s = self.slot(i);
        let range = s * self.dim..(s + 1) * self.dim;
        Some(Transition {
            state: self.states[range.clone()].to_vec(),
            action: self.actions[s],
            reward: self.rewards[s],
            next_state: self.next_states[range].to_vec(),
            terminal: self.terminals[s],
        })
    }

    /// Uniform sampling with replacement into a reusable batch.
    pub fn sample_into<R: Rng + ?Sized>(&self, size: usize, rng: &mut R, batch: &mut Batch<T>) {
        assert!(!self.is_empty(), "sampling from an empty buffer");
        batch.clear();
        batch.dim = self.dim;
        for _ in 0..size {
            let s = rng.gen_range(0..self.len());
            let range = s * self.dim..(s + 1) * self.dim;
            batch.push(
                &self.states[range.clone()],
                self.actions[s],
                self.rewards[s],
                &self.next_states[range],
                self.terminals[s],
            );
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Batch<T> {
        let mut batch = Batch::with_dim(self.dim);
        self.sample_into(size, rng, &mut batch);
        batch
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use proptest::prelude::*;

    fn record(i: usize) -> Transition<f32> {
        Transition {
            state: vec![i as f32, 0.0],
            action: i % 4,
            reward: i as f32,
            next_state: vec![i as f32 + 1.0, 1.0],
            terminal: i.is_multiple_of(3),
        }
    }

    #[test]
    fn sample_has_requested_size() {
        let mut buf = ReplayBuffer::<f32>::new(10, 2);
        for i in 0..4 {
            buf.push_transition(&record(i));
        }
        let b = buf.sample(64, &mut rng_from(1, &[]));
        assert_eq!(b.size, 64);
        assert_eq!(b.states.len(), 128);
        // Every sampled row is a stored record.
        for r in 0..b.size {
            let i = b.rewards[r] as usize;
            assert_eq!(b.states[2 * r], i as f32);
            assert_eq!(b.actions[r], i % 4);
        }
    }

    #[test]
    fn sampling_is_roughly_uniform() {
        let mut buf = ReplayBuffer::<f32>::new(8, 2);
        for i in 0..8 {
            buf.push_transition(&record(i));
        }
        let b = buf.sample(8000, &mut rng_from(2, &[]));
        let mut counts = [0usize; 8];
        for r in &b.rewards {
            counts[*r as usize] += 1;
        }
        assert!(counts.iter().all(|&c| (850..1150).contains(&c)), "{counts:?}");
    }

    proptest! {
        #[test]
        fn fifo_eviction_preserves_order(capacity in 1usize..40, extra in 0usize..60) {
            let mut buf = ReplayBuffer::<f32>::new(capacity, 2);
            for i in 0..capacity + extra {
                buf.push_transition(&record(i));
                prop_assert!(buf.len() <= capacity);
            }
            prop_assert_eq!(buf.len(), capacity);
            for j in 0..capacity {
                prop_assert_eq!(buf.get(j).unwrap(), record(extra + j));
            }
        }
    }
}
