//! xApp policies: two DQN variants and three non-learned competitors.
//!
//! Every policy maps a network snapshot to a target flag vector. The DQN
//! policies move one toggle per tick, the others emit a whole vector at once;
//! [`run_to_fixed_point`] drives either style from the all-ON state.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dqn::{greedy_action, QNetwork};
use crate::env::{encode_state, StateEncoding, StateVariant};
use crate::error::{DqnError, ModelError};
use crate::netmodel::{check_constraints, NetworkConfig, NetworkState, RssMatrix, UeLayout};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "dqn-es1")]
    DqnEs1,
    #[serde(rename = "dqn-es2")]
    DqnEs2,
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "heuristic-standin")]
    Heuristic,
    #[serde(rename = "always-on")]
    AlwaysOn,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::DqnEs1,
        PolicyKind::DqnEs2,
        PolicyKind::Heuristic,
        PolicyKind::Baseline,
        PolicyKind::AlwaysOn,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::DqnEs1 => "dqn-es1",
            PolicyKind::DqnEs2 => "dqn-es2",
            PolicyKind::Baseline => "baseline",
            PolicyKind::Heuristic => "heuristic-standin",
            PolicyKind::AlwaysOn => "always-on",
        }
    }

    /// State variant a DQN policy consumes; `None` for the others.
    pub fn variant(self) -> Option<StateVariant> {
        match self {
            PolicyKind::DqnEs1 => Some(StateVariant::RssAndGeo),
            PolicyKind::DqnEs2 => Some(StateVariant::RssOnly),
            _ => None,
        }
    }

    pub fn is_dqn(self) -> bool {
        self.variant().is_some()
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dqn-es1" | "es1" | "dqn_es1" => Ok(PolicyKind::DqnEs1),
            "dqn-es2" | "es2" | "dqn_es2" => Ok(PolicyKind::DqnEs2),
            "baseline" => Ok(PolicyKind::Baseline),
            "heuristic-standin" | "heuristic" => Ok(PolicyKind::Heuristic),
            "always-on" | "always_on" | "alwayson" => Ok(PolicyKind::AlwaysOn),
            other => Err(format!(
                "unknown policy `{other}`; expected one of dqn-es1, dqn-es2, heuristic-standin, baseline, always-on"
            )),
        }
    }
}

/// Switch off exactly the cards serving nobody; leave the rest untouched.
pub fn baseline_decide(state: &NetworkState, _cfg: &NetworkConfig) -> Vec<bool> {
    state
        .rc_flags
        .iter()
        .zip(&state.connection_counts)
        .map(|(&on, &count)| on && count > 0)
        .collect()
}

/// Greedy single pass over ON cards, least loaded first (ties by id). Each card
/// is switched off tentatively and the move kept only if the re-associated
/// network still satisfies every constraint.
pub fn heuristic_decide(state: &NetworkState, cfg: &NetworkConfig) -> Vec<bool> {
    let mut order: Vec<usize> = (0..state.num_rcs()).filter(|&m| state.rc_flags[m]).collect();
    order.sort_by_key(|&m| (state.connection_counts[m], m));
    let mut current = state.clone();
    for m in order {
        let mut flags = current.rc_flags.clone();
        flags[m] = false;
        let trial = current
            .with_flags(flags, cfg.rss_min_dbm)
            .expect("flag length is preserved");
        if check_constraints(&trial, cfg).is_feasible() {
            current = trial;
        }
    }
    current.rc_flags
}

pub fn always_on_decide(state: &NetworkState) -> Vec<bool> {
    vec![true; state.num_rcs()]
}

/// One greedy toggle applied to the current flags.
pub fn dqn_decide(
    net: &QNetwork<f32>,
    encoding: &StateEncoding,
    state: &NetworkState,
    layout: &UeLayout,
) -> Result<Vec<bool>, DqnError> {
    let obs = encode_state(state, layout, encoding);
    let action = greedy_action(net, &obs)?;
    if action.value() >= 2 * state.num_rcs() {
        return Err(DqnError::InvalidLayout(format!(
            "network has {} actions for {} radio cards",
            net.output_dim(),
            state.num_rcs()
        )));
    }
    let mut flags = state.rc_flags.clone();
    action.apply(&mut flags);
    Ok(flags)
}

/// A policy bound to whatever it needs to decide.
#[derive(Clone, Copy, Debug)]
pub enum Policy<'a> {
    Baseline,
    Heuristic,
    AlwaysOn,
    Dqn {
        kind: PolicyKind,
        net: &'a QNetwork<f32>,
        encoding: StateEncoding,
    },
}

impl<'a> Policy<'a> {
    pub fn dqn(kind: PolicyKind, net: &'a QNetwork<f32>, cfg: &NetworkConfig) -> Option<Self> {
        let variant = kind.variant()?;
        Some(Policy::Dqn {
            kind,
            net,
            encoding: StateEncoding::for_config(cfg, variant),
        })
    }

    /// Non-learned policy by kind; `None` for DQN kinds.
    pub fn classic(kind: PolicyKind) -> Option<Self> {
        match kind {
            PolicyKind::Baseline => Some(Policy::Baseline),
            PolicyKind::Heuristic => Some(Policy::Heuristic),
            PolicyKind::AlwaysOn => Some(Policy::AlwaysOn),
            _ => None,
        }
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::Baseline => PolicyKind::Baseline,
            Policy::Heuristic => PolicyKind::Heuristic,
            Policy::AlwaysOn => PolicyKind::AlwaysOn,
            Policy::Dqn { kind, .. } => *kind,
        }
    }

    pub fn decide(&self, state: &NetworkState, cfg: &NetworkConfig, layout: &UeLayout) -> Result<Vec<bool>, DqnError> {
        Ok(match self {
            Policy::Baseline => baseline_decide(state, cfg),
            Policy::Heuristic => heuristic_decide(state, cfg),
            Policy::AlwaysOn => always_on_decide(state),
            Policy::Dqn { net, encoding, .. } => dqn_decide(net, encoding, state, layout)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointOutcome {
    /// State after `max_ticks` decision ticks.
    pub state: NetworkState,
    /// Tick at which the flags stopped changing, if they did.
    pub settled_at: Option<usize>,
    /// Period of the orbit when the policy cycles instead of settling.
    pub cycle_len: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error(transparent)]
    Dqn(#[from] DqnError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Applies `policy` tick by tick from the all-ON state for `max_ticks` ticks.
/// Decisions depend only on the flags (the layout is fixed), so a repeated
/// flag vector means the rest of the run is periodic and is skipped ahead.
pub fn run_to_fixed_point(
    policy: &Policy<'_>,
    cfg: &NetworkConfig,
    rss: Arc<RssMatrix>,
    layout: &UeLayout,
    max_ticks: usize,
) -> Result<FixedPointOutcome, PolicyError> {
    let start = NetworkState::new(rss, vec![true; cfg.num_rcs()], cfg.rss_min_dbm)?;
    iterate(start, cfg.rss_min_dbm, max_ticks, |s| Ok(policy.decide(s, cfg, layout)?))
}

fn iterate<F>(start: NetworkState, rss_min_dbm: f64, max_ticks: usize, mut decide: F) -> Result<FixedPointOutcome, PolicyError>
where
    F: FnMut(&NetworkState) -> Result<Vec<bool>, PolicyError>,
{
    let mut history = vec![start];
    let mut seen: HashMap<Vec<bool>, usize> = HashMap::new();
    seen.insert(history[0].rc_flags.clone(), 0);
    for tick in 1..=max_ticks {
        let current = history.last().expect("history is never empty");
        let flags = decide(current)?;
        if flags == current.rc_flags {
            return Ok(FixedPointOutcome {
                state: history.pop().expect("history is never empty"),
                settled_at: Some(tick - 1),
                cycle_len: None,
            });
        }
        if let Some(&first) = seen.get(&flags) {
            let period = tick - first;
            let idx = first + (max_ticks - first) % period;
            return Ok(FixedPointOutcome {
                state: history.swap_remove(idx),
                settled_at: None,
                cycle_len: Some(period),
            });
        }
        let next = current.with_flags(flags.clone(), rss_min_dbm)?;
        seen.insert(flags, tick);
        history.push(next);
    }
    Ok(FixedPointOutcome {
        state: history.pop().expect("history is never empty"),
        settled_at: None,
        cycle_len: None,
    })
}
