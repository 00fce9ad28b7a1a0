//! Episodic MDP over the network model.
//!
//! Observation: one block per UE, optionally its normalised position, then
//! its column of the RSS matrix sorted descending (OFF cards replaced by a
//! floor sentinel). Actions: `2·M` toggles laid out `[on₁, off₁, …, on_M, off_M]`.
//! Reward: switch-off term + RSS breach term + per-RC capacity term.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::EnvError;
use crate::netmodel::{
    check_constraints, compute_rss_matrix, count_off, ConstraintReport, NetworkConfig, NetworkState,
    RadioCard, UeLayout,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateVariant {
    /// Positions and sorted RSS (ES-xApp-1).
    RssAndGeo,
    /// Sorted RSS only (ES-xApp-2).
    RssOnly,
}

impl StateVariant {
    pub fn xapp_name(self) -> &'static str {
        match self {
            StateVariant::RssAndGeo => "es1",
            StateVariant::RssOnly => "es2",
        }
    }

    pub fn from_xapp_name(name: &str) -> Option<Self> {
        match name {
            "es1" => Some(StateVariant::RssAndGeo),
            "es2" => Some(StateVariant::RssOnly),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub pos_scale: f64,
    pub rss_lo_dbm: f64,
    pub rss_hi_dbm: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            pos_scale: 500.0,
            rss_lo_dbm: -120.0,
            rss_hi_dbm: -40.0,
        }
    }
}

impl Normalization {
    pub fn for_config(cfg: &NetworkConfig) -> Self {
        Self {
            pos_scale: cfg.area_width_m,
            ..Self::default()
        }
    }

    fn rss(&self, dbm: f64) -> f32 {
        (((dbm - self.rss_lo_dbm) / (self.rss_hi_dbm - self.rss_lo_dbm)).clamp(0.0, 1.0)) as f32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateEncoding {
    pub variant: StateVariant,
    pub normalization: Normalization,
}

impl StateEncoding {
    pub fn new(variant: StateVariant, normalization: Normalization) -> Self {
        Self { variant, normalization }
    }

    pub fn for_config(cfg: &NetworkConfig, variant: StateVariant) -> Self {
        Self::new(variant, Normalization::for_config(cfg))
    }

    pub fn dim(&self, num_ues: usize, num_rcs: usize) -> usize {
        match self.variant {
            StateVariant::RssAndGeo => num_ues * (2 + num_rcs),
            StateVariant::RssOnly => num_ues * num_rcs,
        }
    }
}

pub fn encode_state(state: &NetworkState, layout: &UeLayout, encoding: &StateEncoding) -> Vec<f32> {
    let norm = &encoding.normalization;
    let m = state.num_rcs();
    let k = state.rss_dbm.num_ues();
    let mut out = Vec::with_capacity(encoding.dim(k, m));
    let mut column = Vec::with_capacity(m);
    for ue in 0..k {
        if encoding.variant == StateVariant::RssAndGeo {
            let p = layout.positions[ue];
            out.push((p.x / norm.pos_scale) as f32);
            out.push((p.y / norm.pos_scale) as f32);
        }
        column.clear();
        column.extend(
            state
                .rss_dbm
                .column(ue)
                .zip(&state.rc_flags)
                .map(|(v, &on)| if on { v } else { norm.rss_lo_dbm }),
        );
        column.sort_by(|a, b| b.total_cmp(a));
        out.extend(column.iter().map(|&v| norm.rss(v)));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Toggle {
    On,
    Off,
}

/// Index into the `2·M` action vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionIndex(usize);

impl ActionIndex {
    pub fn new(value: usize, num_rcs: usize) -> Result<Self, EnvError> {
        if value >= 2 * num_rcs {
            return Err(EnvError::InvalidAction {
                index: value,
                num_actions: 2 * num_rcs,
            });
        }
        Ok(Self(value))
    }

    pub fn from_parts(rc: usize, toggle: Toggle) -> Self {
        Self(2 * rc + usize::from(toggle == Toggle::Off))
    }

    pub fn value(self) -> usize {
        self.0
    }

    /// `(rc index, toggle)`; even indices switch on, odd switch off.
    pub fn decode(self) -> (usize, Toggle) {
        let toggle = if self.0.is_multiple_of(2) { Toggle::On } else { Toggle::Off };
        (self.0 / 2, toggle)
    }

    pub fn apply(self, flags: &mut [bool]) {
        let (rc, toggle) = self.decode();
        flags[rc] = toggle == Toggle::On;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Coefficients exactly as printed: switching off is penalised.
    PaperLiteral,
    /// Switch-off term sign flipped so the reward agrees with `max Z`.
    ObjectiveConsistent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub w_off: f64,
    pub w_on: f64,
    pub rss_ok_bonus: f64,
    pub rss_breach_penalty: f64,
    pub cap_ok_per_rc: f64,
    pub cap_breach_per_rc: f64,
    pub mode: RewardMode,
}

impl RewardWeights {
    pub fn preset(mode: RewardMode) -> Self {
        let (w_off, w_on) = match mode {
            RewardMode::PaperLiteral => (-5.0, 1.0),
            RewardMode::ObjectiveConsistent => (5.0, -1.0),
        };
        Self {
            w_off,
            w_on,
            rss_ok_bonus: 5.0,
            rss_breach_penalty: -20.0,
            cap_ok_per_rc: 1.0,
            cap_breach_per_rc: -1.0,
            mode,
        }
    }

    pub fn paper_literal() -> Self {
        Self::preset(RewardMode::PaperLiteral)
    }

    pub fn objective_consistent() -> Self {
        Self::preset(RewardMode::ObjectiveConsistent)
    }
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self::objective_consistent()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub rc_off_term: f64,
    pub rss_breach_term: f64,
    pub capacity_term: f64,
    pub total: f64,
}

pub fn compute_reward(state: &NetworkState, cfg: &NetworkConfig, w: &RewardWeights) -> RewardBreakdown {
    let report = check_constraints(state, cfg);
    reward_from_report(state, &report, w)
}

fn reward_from_report(state: &NetworkState, report: &ConstraintReport, w: &RewardWeights) -> RewardBreakdown {
    let m = state.num_rcs() as f64;
    let z = count_off(&state.rc_flags) as f64;
    let rc_off_term = w.w_off * (z / m) + w.w_on * ((m - z) / m);
    let rss_breach_term = if report.rss_ok {
        w.rss_ok_bonus
    } else {
        w.rss_breach_penalty
    };
    let breached = report.oversubscribed_rcs.len() as f64;
    let capacity_term = (m - breached) * w.cap_ok_per_rc + breached * w.cap_breach_per_rc;
    RewardBreakdown {
        rc_off_term,
        rss_breach_term,
        capacity_term,
        total: rc_off_term + rss_breach_term + capacity_term,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub report: ConstraintReport,
    pub off_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f32>,
    pub reward: RewardBreakdown,
    pub terminal: bool,
    pub info: StepInfo,
}

#[derive(Clone, Debug)]
struct Episode {
    layout: UeLayout,
    state: NetworkState,
    steps: usize,
}

/// Single-owner environment handle. Not for concurrent stepping.
#[derive(Clone, Debug)]
pub struct Env {
    cfg: NetworkConfig,
    rcs: Vec<RadioCard>,
    encoding: StateEncoding,
    weights: RewardWeights,
    horizon: usize,
    episode: Option<Episode>,
}

impl Env {
    pub fn new(
        cfg: NetworkConfig,
        encoding: StateEncoding,
        weights: RewardWeights,
        horizon: usize,
    ) -> Result<Self, EnvError> {
        cfg.validate()?;
        let rcs = cfg.radio_cards();
        Ok(Self {
            cfg,
            rcs,
            encoding,
            weights,
            horizon,
            episode: None,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn encoding(&self) -> &StateEncoding {
        &self.encoding
    }

    pub fn weights(&self) -> &RewardWeights {
        &self.weights
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_actions(&self) -> usize {
        2 * self.cfg.num_rcs()
    }

    pub fn state_dim(&self) -> usize {
        self.encoding.dim(self.cfg.num_ues, self.cfg.num_rcs())
    }

    /// Fresh uniform layout, all cards ON.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f32>, EnvError> {
        let layout = UeLayout::sample(&self.cfg, rng);
        self.reset_with_layout(layout)
    }

    pub fn reset_with_layout(&mut self, layout: UeLayout) -> Result<Vec<f32>, EnvError> {
        let rss = Arc::new(compute_rss_matrix(&self.cfg, &self.rcs, &layout)?);
        let state = NetworkState::new(rss, vec![true; self.cfg.num_rcs()], self.cfg.rss_min_dbm)?;
        let obs = encode_state(&state, &layout, &self.encoding);
        self.episode = Some(Episode { layout, state, steps: 0 });
        Ok(obs)
    }

    pub fn state(&self) -> Option<&NetworkState> {
        self.episode.as_ref().map(|e| &e.state)
    }

    pub fn layout(&self) -> Option<&UeLayout> {
        self.episode.as_ref().map(|e| &e.layout)
    }

    pub fn steps_taken(&self) -> usize {
        self.episode.as_ref().map_or(0, |e| e.steps)
    }

    pub fn is_terminal(&self) -> bool {
        self.episode.as_ref().is_none_or(|e| e.steps >= self.horizon)
    }

    pub fn observe(&self) -> Option<Vec<f32>> {
        self.episode
            .as_ref()
            .map(|e| encode_state(&e.state, &e.layout, &self.encoding))
    }

    pub fn step(&mut self, action: ActionIndex) -> Result<StepResult, EnvError> {
        let num_actions = self.num_actions();
        let horizon = self.horizon;
        let episode = match self.episode.as_mut() {
            Some(e) if e.steps < horizon => e,
            _ => return Err(EnvError::EpisodeTerminal),
        };
        if action.value() >= num_actions {
            return Err(EnvError::InvalidAction {
                index: action.value(),
                num_actions,
            });
        }
        let mut flags = episode.state.rc_flags.clone();
        action.apply(&mut flags);
        if flags != episode.state.rc_flags {
            episode.state = episode.state.with_flags(flags, self.cfg.rss_min_dbm)?;
        }
        episode.steps += 1;
        let report = check_constraints(&episode.state, &self.cfg);
        let reward = reward_from_report(&episode.state, &report, &self.weights);
        Ok(StepResult {
            next_state: encode_state(&episode.state, &episode.layout, &self.encoding),
            reward,
            terminal: episode.steps >= horizon,
            info: StepInfo {
                off_count: count_off(&episode.state.rc_flags),
                report,
            },
        })
    }
}
