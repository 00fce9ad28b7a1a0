//! Exhaustive search for the largest feasible switch-off count.
//!
//! Two feasibility notions are supported. `Assoc` reuses the environment's
//! strongest-RSS association, so it answers what the learned policy could
//! reach at best. `Matching` lets UEs be steered to any ON card they can hear,
//! subject to per-card capacity, decided by an augmenting-path max-flow.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::OracleError;
use crate::netmodel::{check_constraints, compute_rss_matrix, count_off, NetworkConfig, NetworkState, RssMatrix, UeLayout};

pub const ENUMERATION_GUARD: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    Assoc,
    Matching,
}

impl OracleMode {
    pub fn name(self) -> &'static str {
        match self {
            OracleMode::Assoc => "assoc",
            OracleMode::Matching => "matching",
        }
    }
}

impl std::str::FromStr for OracleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "assoc" => Ok(OracleMode::Assoc),
            "matching" => Ok(OracleMode::Matching),
            other => Err(format!("unknown oracle mode `{other}`; expected assoc or matching")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    pub max_off: usize,
    /// `None` only when no configuration at all is feasible.
    pub argmax_flags: Option<Vec<bool>>,
    pub feasible_count: u64,
    pub mode: OracleMode,
}

impl OracleResult {
    /// `1` for ON, `0` for OFF, in RC order; empty when nothing is feasible.
    pub fn flags_bitstring(&self) -> String {
        self.argmax_flags
            .as_deref()
            .map(flags_bitstring)
            .unwrap_or_default()
    }
}

pub fn flags_bitstring(flags: &[bool]) -> String {
    flags.iter().map(|&on| if on { '1' } else { '0' }).collect()
}

/// Whether every UE can be given one of its candidate cards without any card
/// exceeding its capacity.
pub fn matching_feasible(candidates: &[Vec<usize>], capacities: &[usize]) -> bool {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); capacities.len()];
    let mut assigned: Vec<Option<usize>> = vec![None; candidates.len()];
    let mut visited = vec![false; capacities.len()];
    for ue in 0..candidates.len() {
        visited.iter_mut().for_each(|v| *v = false);
        if !augment(ue, candidates, capacities, &mut members, &mut assigned, &mut visited) {
            return false;
        }
    }
    true
}

fn augment(
    ue: usize,
    candidates: &[Vec<usize>],
    capacities: &[usize],
    members: &mut [Vec<usize>],
    assigned: &mut [Option<usize>],
    visited: &mut [bool],
) -> bool {
    for &rc in &candidates[ue] {
        if rc >= capacities.len() || visited[rc] {
            continue;
        }
        visited[rc] = true;
        if members[rc].len() < capacities[rc] {
            place(ue, rc, members, assigned);
            return true;
        }
        for i in 0..members[rc].len() {
            let other = members[rc][i];
            if augment(other, candidates, capacities, members, assigned, visited) {
                place(ue, rc, members, assigned);
                return true;
            }
        }
    }
    false
}

fn place(ue: usize, rc: usize, members: &mut [Vec<usize>], assigned: &mut [Option<usize>]) {
    if let Some(old) = assigned[ue] {
        members[old].retain(|&u| u != ue);
    }
    members[rc].push(ue);
    assigned[ue] = Some(rc);
}

/// Decodes configuration `mask` so that counting upwards visits flag vectors in
/// lexicographic order: RC 0 is the most significant bit, and a set bit is ON.
fn flags_of(mask: u64, m: usize) -> Vec<bool> {
    (0..m).map(|i| mask >> (m - 1 - i) & 1 == 1).collect()
}

struct Evaluator<'a> {
    cfg: &'a NetworkConfig,
    rss: Arc<RssMatrix>,
    mode: OracleMode,
    /// Per UE, every card (ON or not) whose RSS meets R_min.
    reach: Vec<Vec<usize>>,
}

impl Evaluator<'_> {
    fn feasible(&self, flags: &[bool]) -> Result<bool, OracleError> {
        match self.mode {
            OracleMode::Assoc => {
                let state = NetworkState::new(Arc::clone(&self.rss), flags.to_vec(), self.cfg.rss_min_dbm)?;
                Ok(check_constraints(&state, self.cfg).is_feasible())
            }
            OracleMode::Matching => {
                let on: usize = flags.iter().filter(|&&f| f).count();
                if on * self.cfg.capacity_max < self.reach.len() {
                    return Ok(false);
                }
                let candidates: Vec<Vec<usize>> = self
                    .reach
                    .iter()
                    .map(|r| r.iter().copied().filter(|&m| flags[m]).collect())
                    .collect();
                if candidates.iter().any(Vec::is_empty) {
                    return Ok(false);
                }
                Ok(matching_feasible(&candidates, &vec![self.cfg.capacity_max; flags.len()]))
            }
        }
    }
}

#[derive(Default)]
struct Best {
    feasible: u64,
    top: Option<(usize, u64)>,
}

impl Best {
    /// Larger OFF count wins; on ties the smaller mask (lexicographically smaller flags).
    fn consider(&mut self, off: usize, mask: u64) {
        let better = match self.top {
            None => true,
            Some((o, k)) => off > o || (off == o && mask < k),
        };
        if better {
            self.top = Some((off, mask));
        }
    }

    fn merge(mut self, other: Best) -> Best {
        self.feasible += other.feasible;
        if let Some((off, mask)) = other.top {
            self.consider(off, mask);
        }
        self
    }
}

/// Enumerates all `2^M` configurations for the given UE layout.
pub fn oracle_max_off(cfg: &NetworkConfig, layout: &UeLayout, mode: OracleMode) -> Result<OracleResult, OracleError> {
    let rss = compute_rss_matrix(cfg, &cfg.radio_cards(), layout)?;
    oracle_max_off_rss(cfg, Arc::new(rss), mode)
}

/// As [`oracle_max_off`] over a precomputed RSS matrix.
pub fn oracle_max_off_rss(cfg: &NetworkConfig, rss: Arc<RssMatrix>, mode: OracleMode) -> Result<OracleResult, OracleError> {
    let m = rss.num_rcs();
    if m > ENUMERATION_GUARD {
        return Err(OracleError::TooManyRadioCards {
            num_rcs: m,
            guard: ENUMERATION_GUARD,
        });
    }
    let reach = (0..rss.num_ues())
        .map(|k| (0..m).filter(|&r| rss.get(r, k) >= cfg.rss_min_dbm).collect())
        .collect();
    let eval = Evaluator { cfg, rss, mode, reach };
    let best = (0..1u64 << m)
        .into_par_iter()
        .try_fold(Best::default, |mut acc, mask| {
            let flags = flags_of(mask, m);
            if eval.feasible(&flags)? {
                acc.feasible += 1;
                acc.consider(count_off(&flags), mask);
            }
            Ok::<_, OracleError>(acc)
        })
        .try_reduce(Best::default, |a, b| Ok(a.merge(b)))?;
    Ok(OracleResult {
        max_off: best.top.map_or(0, |(off, _)| off),
        argmax_flags: best.top.map(|(_, mask)| flags_of(mask, m)),
        feasible_count: best.feasible,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::Point;
    use crate::rng::rng_from;
    use proptest::prelude::*;
    use rand::Rng;

    fn brute_force(candidates: &[Vec<usize>], capacities: &[usize]) -> bool {
        fn go(i: usize, c: &[Vec<usize>], left: &mut [usize]) -> bool {
            if i == c.len() {
                return true;
            }
            for &m in &c[i] {
                if left[m] > 0 {
                    left[m] -= 1;
                    if go(i + 1, c, left) {
                        return true;
                    }
                    left[m] += 1;
                }
            }
            false
        }
        go(0, candidates, &mut capacities.to_vec())
    }

    fn random_matching_instance(seed: u64) -> (Vec<Vec<usize>>, Vec<usize>) {
        let mut rng = rng_from(seed, &[]);
        let k = rng.gen_range(0..=6);
        let m = rng.gen_range(1..=4);
        let cands = (0..k)
            .map(|_| (0..m).filter(|_| rng.gen_bool(0.5)).collect())
            .collect();
        let caps = (0..m).map(|_| rng.gen_range(0..=3)).collect();
        (cands, caps)
    }

    #[test]
    fn pigeonhole_is_infeasible() {
        assert!(!matching_feasible(&[vec![0], vec![0]], &[1]));
    }

    #[test]
    fn disjoint_singletons_are_feasible() {
        let cands: Vec<Vec<usize>> = (0..5).map(|k| vec![k]).collect();
        assert!(matching_feasible(&cands, &[1; 5]));
    }

    #[test]
    fn augmenting_path_reroutes_an_earlier_ue() {
        // UE0 grabs RC0 first; UE1 can only use RC0, so UE0 must move to RC1.
        assert!(matching_feasible(&[vec![0, 1], vec![0]], &[1, 1]));
    }

    #[test]
    fn matching_agrees_with_brute_force() {
        for seed in 0..2000 {
            let (c, caps) = random_matching_instance(seed);
            assert_eq!(matching_feasible(&c, &caps), brute_force(&c, &caps), "seed {seed}");
        }
    }

    fn two_rc_config() -> NetworkConfig {
        NetworkConfig {
            ru_positions: vec![Point { x: 250.0, y: 250.0 }],
            num_ues: 1,
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn one_ue_two_cards_leaves_one_off() {
        let cfg = two_rc_config();
        let layout = UeLayout { positions: vec![Point { x: 260.0, y: 250.0 }] };
        for mode in [OracleMode::Assoc, OracleMode::Matching] {
            let r = oracle_max_off(&cfg, &layout, mode).unwrap();
            assert_eq!(r.max_off, 1);
            assert_eq!(r.feasible_count, 3);
            // [OFF, ON] sorts before [ON, OFF].
            assert_eq!(r.argmax_flags, Some(vec![false, true]));
            assert_eq!(r.flags_bitstring(), "01");
        }
    }

    #[test]
    fn ten_ues_under_one_card_leave_eleven_off() {
        let cfg = NetworkConfig::default().with_num_ues(10);
        let ru = cfg.ru_positions[2];
        let layout = UeLayout {
            positions: (0..10).map(|i| Point { x: ru.x + i as f64, y: ru.y + 2.0 }).collect(),
        };
        let r = oracle_max_off(&cfg, &layout, OracleMode::Matching).unwrap();
        assert_eq!(r.max_off, cfg.num_rcs() - 1);
        let a = oracle_max_off(&cfg, &layout, OracleMode::Assoc).unwrap();
        assert_eq!(a.max_off, 11);
    }

    #[test]
    fn all_off_is_never_feasible_with_ues() {
        let cfg = two_rc_config();
        let rss = RssMatrix::from_rows(vec![vec![-200.0], vec![-200.0]]).unwrap();
        let r = oracle_max_off_rss(&cfg, Arc::new(rss), OracleMode::Matching).unwrap();
        assert_eq!(r.feasible_count, 0);
        assert_eq!(r.argmax_flags, None);
    }

    #[test]
    fn guard_refuses_large_networks() {
        let cfg = NetworkConfig::default();
        let rss = RssMatrix::from_rows(vec![vec![-50.0]; 21]).unwrap();
        assert!(matches!(
            oracle_max_off_rss(&cfg, Arc::new(rss), OracleMode::Assoc),
            Err(OracleError::TooManyRadioCards { num_rcs: 21, .. })
        ));
    }

    #[test]
    fn flag_order_is_lexicographic() {
        let all: Vec<Vec<bool>> = (0..16).map(|k| flags_of(k, 4)).collect();
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn matching_dominates_assoc(seed in 0u64..100_000, k in 1usize..25) {
            let cfg = NetworkConfig::default().with_num_ues(k);
            let layout = UeLayout::sample(&cfg, &mut rng_from(seed, &[]));
            let a = oracle_max_off(&cfg, &layout, OracleMode::Assoc).unwrap();
            let m = oracle_max_off(&cfg, &layout, OracleMode::Matching).unwrap();
            prop_assert!(a.max_off <= m.max_off);
            prop_assert!(a.feasible_count <= m.feasible_count);
            for r in [&a, &m] {
                let flags = r.argmax_flags.clone().unwrap();
                prop_assert_eq!(count_off(&flags), r.max_off);
            }
            let flags = a.argmax_flags.unwrap();
            let rss = Arc::new(compute_rss_matrix(&cfg, &cfg.radio_cards(), &layout).unwrap());
            let st = NetworkState::new(rss, flags, cfg.rss_min_dbm).unwrap();
            prop_assert!(check_constraints(&st, &cfg).is_feasible());
        }

        #[test]
        fn switching_on_preserves_matching_feasibility(seed in 0u64..100_000) {
            let (c, caps) = random_matching_instance(seed);
            let m = caps.len();
            let mut rng = rng_from(seed, &[1]);
            let on: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.5)).collect();
            let restrict = |on: &[bool]| -> Vec<Vec<usize>> {
                c.iter().map(|r| r.iter().copied().filter(|&x| on[x]).collect()).collect()
            };
            if matching_feasible(&restrict(&on), &caps) {
                for extra in 0..m {
                    let mut more = on.clone();
                    more[extra] = true;
                    prop_assert!(matching_feasible(&restrict(&more), &caps));
                }
            }
        }
    }
}
