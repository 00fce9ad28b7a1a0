//! Training loop and greedy evaluation.
//!
//! Training follows the standard DQN cadence: one ε-greedy environment step,
//! one stored transition, then (once warm-up is satisfied) one gradient step
//! on a uniformly sampled mini-batch, with θ′ refreshed every `tau` gradient
//! steps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dqn::{greedy_action, select_action, FlushDenormals, AdamW, AdamWConfig, Batch, EpsilonSchedule, Learner, QNetwork, ReplayBuffer};
use crate::env::Env;
use crate::error::{CheckpointError, DqnError, TrainError};
use crate::rng::{rng_from, STREAM_EVAL, STREAM_INIT, STREAM_TRAIN};
use crate::stats::{mean, moving_average, sample_std};

/// When gradient steps may begin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmupRule {
    /// As soon as the buffer holds one mini-batch.
    BatchSize,
    /// Only once the buffer is at capacity.
    FullBuffer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub gamma: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub tau: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Defaults to a fifth of `episodes × steps_per_episode`.
    pub eps_decay_steps: Option<f64>,
    pub hidden_dims: Vec<usize>,
    pub seed: u64,
    /// Checkpoint period in episodes; 0 disables periodic checkpoints.
    pub checkpoint_every: usize,
    pub warmup: WarmupRule,
    pub max_grad_norm: Option<f64>,
    /// Stores the step-T transition as non-terminal, so its target bootstraps
    /// through the horizon. Off by default: the horizon-T record then gets `y = r`.
    pub time_limit_bootstrap: bool,
    /// Moving-average window for the log.
    pub log_window: usize,
}

impl TrainConfig {
    /// Full-scale schedule: 30 000 episodes of 100 steps.
    pub fn paper() -> Self {
        Self {
            episodes: 30_000,
            steps_per_episode: 100,
            batch_size: 64,
            buffer_capacity: 300_000,
            gamma: 0.99,
            lr: 1e-4,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            tau: 50,
            eps_start: 0.9,
            eps_end: 0.05,
            eps_decay_steps: None,
            hidden_dims: vec![256, 256],
            seed: 0,
            checkpoint_every: 1000,
            warmup: WarmupRule::BatchSize,
            max_grad_norm: None,
            time_limit_bootstrap: false,
            log_window: 50,
        }
    }

    /// Same as [`TrainConfig::paper`] with 5 000 episodes.
    pub fn desk() -> Self {
        Self {
            episodes: 5_000,
            checkpoint_every: 500,
            ..Self::paper()
        }
    }

    pub fn total_steps(&self) -> u64 {
        (self.episodes * self.steps_per_episode) as u64
    }

    pub fn epsilon_schedule(&self) -> EpsilonSchedule {
        match self.eps_decay_steps {
            Some(d) => EpsilonSchedule::new(self.eps_start, self.eps_end, d),
            None => EpsilonSchedule::for_budget(self.eps_start, self.eps_end, self.total_steps()),
        }
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn layer_dims(&self, input_dim: usize, num_actions: usize) -> Vec<usize> {
        std::iter::once(input_dim)
            .chain(self.hidden_dims.iter().copied())
            .chain(std::iter::once(num_actions))
            .collect()
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.episodes == 0 || self.steps_per_episode == 0 || self.batch_size == 0 {
            return bad("episodes, steps_per_episode and batch_size must be positive");
        }
        if self.buffer_capacity < self.batch_size {
            return bad("buffer_capacity must be at least batch_size");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if self.tau == 0 {
            return bad("tau must be positive");
        }
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=self.eps_start).contains(&self.eps_end) {
            return bad("epsilon bounds must satisfy 0 <= eps_end <= eps_start <= 1");
        }
        if self.hidden_dims.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub mean_reward: f64,
    /// Mean loss over this episode's gradient steps; NaN during warm-up.
    pub mean_loss: f64,
    pub final_off_count: usize,
    pub rss_violations: usize,
    pub capacity_violations: usize,
    pub epsilon: f64,
}

pub const TRAIN_LOG_HEADER: &str =
    "episode,mean_reward,mean_loss,final_off_count,rss_violations,capacity_violations,epsilon";

#[derive(Clone, Debug, PartialEq)]
pub struct TrainLog {
    pub window: usize,
    pub records: Vec<EpisodeRecord>,
}

impl TrainLog {
    pub fn new(window: usize) -> Self {
        Self { window, records: Vec::new() }
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_reward).collect()
    }

    /// Losses of episodes that saw at least one gradient step.
    pub fn losses(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.mean_loss)
            .filter(|l| l.is_finite())
            .collect()
    }

    pub fn reward_moving_average(&self) -> Vec<f64> {
        moving_average(&self.rewards(), self.window)
    }

    pub fn loss_moving_average(&self) -> Vec<f64> {
        moving_average(&self.losses(), self.window)
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        records_to_csv(&self.records)
    }

    pub fn from_csv(text: &str, window: usize) -> Result<Self, csv::Error> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let records = reader.deserialize().collect::<Result<Vec<EpisodeRecord>, _>>()?;
        Ok(Self { window, records })
    }
}

pub(crate) fn records_to_csv<S: Serialize>(rows: &[S]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TrainCounters {
    pub env_steps: u64,
    pub grad_steps: u64,
    pub target_syncs: u64,
    pub max_buffer_len: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub network: QNetwork<f32>,
    pub optimizer: AdamW<f32>,
    pub log: TrainLog,
    pub counters: TrainCounters,
}

/// Receives periodic snapshots during training.
pub trait CheckpointSink {
    fn save(&mut self, episode: usize, network: &QNetwork<f32>, optimizer: &AdamW<f32>) -> Result<(), CheckpointError>;
}

pub struct NoCheckpoints;

impl CheckpointSink for NoCheckpoints {
    fn save(&mut self, _: usize, _: &QNetwork<f32>, _: &AdamW<f32>) -> Result<(), CheckpointError> {
        Ok(())
    }
}

/// Runs `episodes × steps_per_episode` environment steps on `env`.
pub fn train(cfg: &TrainConfig, env: &mut Env, sink: &mut dyn CheckpointSink) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if env.horizon() != cfg.steps_per_episode {
        return Err(TrainError::InvalidConfig(format!(
            "environment horizon {} differs from steps_per_episode {}",
            env.horizon(),
            cfg.steps_per_episode
        )));
    }
    let dim = env.state_dim();
    let num_actions = env.num_actions();
    let dims = cfg.layer_dims(dim, num_actions);
    let _fp = FlushDenormals::enable();
    let policy = QNetwork::<f32>::new(&dims, &mut rng_from(cfg.seed, &[STREAM_INIT]))?;
    let mut learner = Learner::new(policy, cfg.adamw(), cfg.gamma, cfg.tau, cfg.max_grad_norm);
    let mut buffer = ReplayBuffer::<f32>::new(cfg.buffer_capacity, dim);
    let mut batch = Batch::with_dim(dim);
    let mut rng = rng_from(cfg.seed, &[STREAM_TRAIN]);
    let schedule = cfg.epsilon_schedule();
    let mut log = TrainLog::new(cfg.log_window);
    let mut counters = TrainCounters::default();
    let mut last_checkpoint = None;

    for episode in 1..=cfg.episodes {
        let mut obs = env.reset(&mut rng)?;
        let mut reward_sum = 0.0;
        let mut loss_sum = 0.0;
        let mut loss_n = 0usize;
        let mut eps = schedule.value(counters.env_steps);
        let mut last_info = None;
        for _ in 0..cfg.steps_per_episode {
            eps = schedule.value(counters.env_steps);
            let action = select_action(&learner.policy, &obs, eps, &mut rng)?;
            let step = env.step(action)?;
            counters.env_steps += 1;
            reward_sum += step.reward.total;
            buffer.push(&obs, action.value(), step.reward.total as f32, &step.next_state, step.terminal && !cfg.time_limit_bootstrap);
            counters.max_buffer_len = counters.max_buffer_len.max(buffer.len());

            let ready = match cfg.warmup {
                WarmupRule::BatchSize => buffer.len() >= cfg.batch_size,
                WarmupRule::FullBuffer => buffer.is_full(),
            };
            if ready {
                buffer.sample_into(cfg.batch_size, &mut rng, &mut batch);
                let loss = learner.learn(&batch).map_err(|source| TrainError::Divergence {
                    episode,
                    last_checkpoint_episode: last_checkpoint,
                    source,
                })?;
                loss_sum += f64::from(loss);
                loss_n += 1;
            }
            obs = step.next_state;
            last_info = Some(step.info);
        }
        let info = last_info.expect("at least one step per episode");
        log.records.push(EpisodeRecord {
            episode,
            mean_reward: reward_sum / cfg.steps_per_episode as f64,
            mean_loss: if loss_n > 0 { loss_sum / loss_n as f64 } else { f64::NAN },
            final_off_count: info.off_count,
            rss_violations: info.report.unserved_ues.len(),
            capacity_violations: info.report.oversubscribed_rcs.len(),
            epsilon: eps,
        });
        if cfg.checkpoint_every > 0 && episode % cfg.checkpoint_every == 0 {
            sink.save(episode, &learner.policy, &learner.optimizer)?;
            last_checkpoint = Some(episode);
        }
        if episode % 100 == 0 {
            let recent = &log.records[log.records.len().saturating_sub(100)..];
            log::info!(
                "episode {episode}/{}: reward {:.3} off {:.2} eps {:.3}",
                cfg.episodes,
                recent.iter().map(|r| r.mean_reward).sum::<f64>() / recent.len() as f64,
                recent.iter().map(|r| r.final_off_count as f64).sum::<f64>() / recent.len() as f64,
                eps
            );
        }
    }
    counters.grad_steps = learner.grad_steps();
    counters.target_syncs = learner.syncs();
    Ok(TrainOutcome {
        network: learner.policy,
        optimizer: learner.optimizer,
        log,
        counters,
    })
}

/// Outcome of one greedy rollout from the all-ON state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalEpisode {
    pub episode: usize,
    pub final_off_count: usize,
    pub final_off_ratio: f64,
    pub unserved_ues: usize,
    pub oversubscribed_rcs: usize,
    pub violation_free: bool,
    pub mean_reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub mean_off_count: f64,
    pub std_off_count: f64,
    pub mean_off_ratio: f64,
    pub std_off_ratio: f64,
    pub violation_free_rate: f64,
    pub mean_reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub episodes: Vec<EvalEpisode>,
    pub summary: Option<EvalSummary>,
}

#[derive(Serialize)]
struct EvalCsvRow {
    episode: String,
    final_off_count: f64,
    final_off_ratio: f64,
    unserved_ues: f64,
    oversubscribed_rcs: f64,
    violation_free: f64,
    mean_reward: f64,
    std_off_count: Option<f64>,
}

pub const EVAL_CSV_HEADER: &str = "episode,final_off_count,final_off_ratio,unserved_ues,oversubscribed_rcs,violation_free,mean_reward,std_off_count";

impl EvalReport {
    pub fn from_episodes(episodes: Vec<EvalEpisode>) -> Self {
        let summary = (!episodes.is_empty()).then(|| {
            let off: Vec<f64> = episodes.iter().map(|e| e.final_off_count as f64).collect();
            let ratio: Vec<f64> = episodes.iter().map(|e| e.final_off_ratio).collect();
            let ok: Vec<f64> = episodes.iter().map(|e| f64::from(u8::from(e.violation_free))).collect();
            let reward: Vec<f64> = episodes.iter().map(|e| e.mean_reward).collect();
            EvalSummary {
                episodes: episodes.len(),
                mean_off_count: mean(&off),
                std_off_count: sample_std(&off),
                mean_off_ratio: mean(&ratio),
                std_off_ratio: sample_std(&ratio),
                violation_free_rate: mean(&ok),
                mean_reward: mean(&reward),
            }
        });
        Self { episodes, summary }
    }

    /// Per-episode rows followed by one `aggregate` row of means (with the
    /// sample std of the OFF count in the last column). No episodes: header only.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut rows: Vec<EvalCsvRow> = self
            .episodes
            .iter()
            .map(|e| EvalCsvRow {
                episode: e.episode.to_string(),
                final_off_count: e.final_off_count as f64,
                final_off_ratio: e.final_off_ratio,
                unserved_ues: e.unserved_ues as f64,
                oversubscribed_rcs: e.oversubscribed_rcs as f64,
                violation_free: f64::from(u8::from(e.violation_free)),
                mean_reward: e.mean_reward,
                std_off_count: None,
            })
            .collect();
        if let Some(s) = &self.summary {
            let avg = |f: fn(&EvalEpisode) -> f64| mean(&self.episodes.iter().map(f).collect::<Vec<_>>());
            rows.push(EvalCsvRow {
                episode: "aggregate".into(),
                final_off_count: s.mean_off_count,
                final_off_ratio: s.mean_off_ratio,
                unserved_ues: avg(|e| e.unserved_ues as f64),
                oversubscribed_rcs: avg(|e| e.oversubscribed_rcs as f64),
                violation_free: s.violation_free_rate,
                mean_reward: s.mean_reward,
                std_off_count: Some(s.std_off_count),
            });
        }
        if rows.is_empty() {
            return Ok(format!("{EVAL_CSV_HEADER}\n"));
        }
        records_to_csv(&rows)
    }
}

pub(crate) fn check_network_fits(net: &QNetwork<f32>, env: &Env) -> Result<(), DqnError> {
    if net.input_dim() != env.state_dim() {
        return Err(DqnError::InputDimension {
            expected: net.input_dim(),
            got: env.state_dim(),
        });
    }
    if net.output_dim() != env.num_actions() {
        return Err(DqnError::InvalidLayout(format!(
            "network has {} outputs but the environment has {} actions",
            net.output_dim(),
            env.num_actions()
        )));
    }
    Ok(())
}

/// Plays one full greedy episode from the environment's current reset state.
pub fn greedy_rollout(net: &QNetwork<f32>, env: &mut Env, mut obs: Vec<f32>, episode: usize) -> Result<EvalEpisode, TrainError> {
    let m = env.config().num_rcs();
    let mut reward_sum = 0.0;
    let mut last = None;
    while !env.is_terminal() {
        let action = greedy_action(net, &obs)?;
        let step = env.step(action)?;
        reward_sum += step.reward.total;
        obs = step.next_state;
        last = Some(step.info);
    }
    let info = last.ok_or_else(|| TrainError::InvalidConfig("evaluation horizon must be positive".into()))?;
    Ok(EvalEpisode {
        episode,
        final_off_count: info.off_count,
        final_off_ratio: info.off_count as f64 / m as f64,
        unserved_ues: info.report.unserved_ues.len(),
        oversubscribed_rcs: info.report.oversubscribed_rcs.len(),
        violation_free: info.report.is_feasible(),
        mean_reward: reward_sum / env.horizon() as f64,
    })
}

/// Greedy (ε = 0) rollouts on fresh layouts; episode `i` draws its layout from
/// the stream `(seed, i)`, so results do not depend on scheduling.
pub fn evaluate_policy(net: &QNetwork<f32>, env: &Env, episodes: usize, seed: u64) -> Result<EvalReport, TrainError> {
    check_network_fits(net, env)?;
    let rows = (1..=episodes)
        .into_par_iter()
        .map(|ep| {
            let mut env = env.clone();
            let obs = env.reset(&mut rng_from(seed, &[STREAM_EVAL, ep as u64]))?;
            greedy_rollout(net, &mut env, obs, ep)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::from_episodes(rows))
}
