use serde::{Deserialize, Serialize};

/// `ε(t) = end + (start − end)·exp(−t / decay_steps)` over environment steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: f64,
}

impl EpsilonSchedule {
    pub fn new(start: f64, end: f64, decay_steps: f64) -> Self {
        Self { start, end, decay_steps }
    }

    /// Decay constant set to a fifth of the planned step budget.
    pub fn for_budget(start: f64, end: f64, total_steps: u64) -> Self {
        Self::new(start, end, (total_steps as f64 / 5.0).max(1.0))
    }

    pub fn value(&self, step: u64) -> f64 {
        self.end + (self.start - self.end) * (-(step as f64) / self.decay_steps).exp()
    }
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self::for_budget(0.9, 0.05, 5000 * 100)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn starts_at_start_and_approaches_end() {
        let s = EpsilonSchedule::for_budget(0.9, 0.05, 500_000);
        assert_eq!(s.value(0), 0.9);
        assert!((s.value(500_000) - 0.05).abs() < 0.006);
    }

    proptest! {
        #[test]
        fn bounded_and_non_increasing(t in 0u64..10_000_000, dt in 0u64..1_000_000, decay in 1.0f64..1e7) {
            let s = EpsilonSchedule::new(0.9, 0.05, decay);
            let (a, b) = (s.value(t), s.value(t + dt));
            prop_assert!(b <= a);
            prop_assert!((0.05..=0.9).contains(&a));
            prop_assert!(b >= 0.05);
        }
    }
}
