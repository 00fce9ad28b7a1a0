//! Central finite differences against the analytic TD-loss gradient.

use super::learner::td_loss_and_gradients;
use super::network::QNetwork;
use super::replay::Batch;
use crate::error::DqnError;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub params: usize,
    pub within_tolerance: usize,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn pass_fraction(&self) -> f64 {
        if self.params == 0 {
            1.0
        } else {
            self.within_tolerance as f64 / self.params as f64
        }
    }
}

/// `|a − n| / max(|a|, |n|, floor)`. The floor keeps gradients that are zero
/// on both sides (dead ReLU units) from dividing by rounding noise.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Perturbs every parameter by `±h` with fixed `targets` and compares.
pub fn check_td_gradients(
    net: &QNetwork<f64>,
    batch: &Batch<f64>,
    targets: &[f64],
    h: f64,
    tol: f64,
    floor: f64,
) -> Result<GradCheckReport, DqnError> {
    let (_, grads) = td_loss_and_gradients(net, batch, targets)?;
    let analytic: Vec<f64> = grads.iter().collect();
    let mut probe = net.clone();
    let mut within = 0;
    let mut max_rel = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe.param(i);
        probe.set_param(i, orig + h);
        let plus = td_loss_and_gradients(&probe, batch, targets)?.0;
        probe.set_param(i, orig - h);
        let minus = td_loss_and_gradients(&probe, batch, targets)?.0;
        probe.set_param(i, orig);
        let rel = relative_error(a, (plus - minus) / (2.0 * h), floor);
        max_rel = max_rel.max(rel);
        if rel <= tol {
            within += 1;
        }
    }
    Ok(GradCheckReport {
        params: analytic.len(),
        within_tolerance: within,
        max_rel_error: max_rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng;

    #[test]
    fn small_network_passes() {
        let mut rng = rng_from(11, &[]);
        let net = QNetwork::<f64>::new(&[3, 5, 4], &mut rng).unwrap();
        let size = 4;
        let batch = Batch {
            size,
            dim: 3,
            states: (0..size * 3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            actions: (0..size).map(|_| rng.gen_range(0..4)).collect(),
            rewards: vec![0.0; size],
            next_states: vec![0.0; size * 3],
            terminals: vec![true; size],
        };
        let targets: Vec<f64> = (0..size).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let r = check_td_gradients(&net, &batch, &targets, 1e-5, 1e-4, 1e-8).unwrap();
        assert_eq!(r.params, 3 * 5 + 5 + 5 * 4 + 4);
        assert!(r.pass_fraction() >= 0.99, "{r:?}");
    }

    #[test]
    fn relative_error_uses_the_floor() {
        assert_eq!(relative_error(0.0, 0.0, 1e-8), 0.0);
        assert_eq!(relative_error(2.0, 1.0, 1e-8), 0.5);
        assert!((relative_error(1e-12, 0.0, 1e-8) - 1e-4).abs() < 1e-12);
    }
}
