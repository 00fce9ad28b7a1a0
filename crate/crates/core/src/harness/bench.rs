//! Benchmark protocol: every policy plays the same fresh layouts per
//! `(seed, K, sim)` cell, each run to its fixed point from the all-ON state.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use crate::dqn::QNetwork;
use crate::error::{ModelError, OracleError};
use crate::netmodel::{check_constraints, compute_rss_matrix, count_off, UeLayout};
use crate::oracle::{oracle_max_off_rss, OracleMode};
use crate::policies::{run_to_fixed_point, Policy, PolicyError, PolicyKind};
use crate::rng::{rng_from, STREAM_BENCH};
use crate::stats::{mean, sample_std};
use crate::trainer::records_to_csv;

/// Trained networks keyed by DQN policy and UE count.
pub type ModelSet = BTreeMap<(PolicyKind, usize), QNetwork<f32>>;

#[derive(Clone, Debug)]
pub struct BenchPlan {
    pub policies: Vec<PolicyKind>,
    pub ue_counts: Vec<usize>,
    pub sims: usize,
    pub seed: u64,
    pub oracle: bool,
}

impl BenchPlan {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            policies: cfg.bench.policies.clone(),
            ue_counts: cfg.bench.ue_counts.clone(),
            sims: cfg.bench.sims,
            seed: cfg.bench.seed,
            oracle: cfg.bench.oracle,
        }
    }

    /// `(policy, K)` pairs that need a checkpoint but have none in `models`.
    pub fn missing_models(&self, models: &ModelSet) -> Vec<(PolicyKind, usize)> {
        self.policies
            .iter()
            .filter(|p| p.is_dqn())
            .flat_map(|&p| self.ue_counts.iter().map(move |&k| (p, k)))
            .filter(|key| !models.contains_key(key))
            .collect()
    }
}

/// Layout for one benchmark cell; identical for every policy.
pub fn bench_layout(cfg: &RunConfig, seed: u64, ue_count: usize, sim: usize) -> UeLayout {
    let net = cfg.network_for(ue_count);
    UeLayout::sample(&net, &mut rng_from(seed, &[STREAM_BENCH, ue_count as u64, sim as u64]))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimRecord {
    pub policy: PolicyKind,
    pub ue_count: usize,
    pub sim: usize,
    pub off_count: usize,
    pub off_ratio: f64,
    pub violation: bool,
    pub oracle_max_off: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchCell {
    pub policy: PolicyKind,
    pub ue_count: usize,
    pub sims: usize,
    pub mean_off_count: f64,
    pub std_off_count: f64,
    pub mean_off_ratio: f64,
    pub std_off_ratio: f64,
    pub violation_rate: f64,
    pub oracle_mean_max_off: Option<f64>,
}

pub const BENCH_CSV_HEADER: &str = "policy,ue_count,sims,mean_off_count,std_off_count,mean_off_ratio,std_off_ratio,violation_rate,oracle_mean_max_off";

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    /// Ordered by policy (as requested), then UE count.
    pub cells: Vec<BenchCell>,
    pub sims: Vec<SimRecord>,
}

impl BenchReport {
    pub fn cell(&self, policy: PolicyKind, ue_count: usize) -> Option<&BenchCell> {
        self.cells.iter().find(|c| c.policy == policy && c.ue_count == ue_count)
    }

    /// Per-sim records for one cell, in sim order.
    pub fn sims_for(&self, policy: PolicyKind, ue_count: usize) -> Vec<&SimRecord> {
        self.sims
            .iter()
            .filter(|s| s.policy == policy && s.ue_count == ue_count)
            .collect()
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        if self.cells.is_empty() {
            return Ok(format!("{BENCH_CSV_HEADER}\n"));
        }
        records_to_csv(&self.cells)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("missing checkpoints for {}", .0.iter().map(|(p, k)| format!("{p} at K={k}")).collect::<Vec<_>>().join(", "))]
    MissingModels(Vec<(PolicyKind, usize)>),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn run_bench(cfg: &RunConfig, plan: &BenchPlan, models: &ModelSet) -> Result<BenchReport, BenchError> {
    let missing = plan.missing_models(models);
    if !missing.is_empty() {
        return Err(BenchError::MissingModels(missing));
    }
    let jobs: Vec<(usize, usize)> = plan
        .ue_counts
        .iter()
        .flat_map(|&k| (0..plan.sims).map(move |s| (k, s)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(k, sim)| run_cell_sim(cfg, plan, models, k, sim))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sims: Vec<SimRecord> = per_job.into_iter().flatten().collect();
    let rank = |p: PolicyKind| plan.policies.iter().position(|&q| q == p).unwrap_or(usize::MAX);
    let k_rank = |k: usize| plan.ue_counts.iter().position(|&q| q == k).unwrap_or(usize::MAX);
    sims.sort_by_key(|s| (rank(s.policy), k_rank(s.ue_count), s.sim));

    let cells = plan
        .policies
        .iter()
        .flat_map(|&p| plan.ue_counts.iter().map(move |&k| (p, k)))
        .map(|(p, k)| {
            let rows: Vec<&SimRecord> = sims.iter().filter(|s| s.policy == p && s.ue_count == k).collect();
            let off: Vec<f64> = rows.iter().map(|s| s.off_count as f64).collect();
            let ratio: Vec<f64> = rows.iter().map(|s| s.off_ratio).collect();
            let viol: Vec<f64> = rows.iter().map(|s| f64::from(u8::from(s.violation))).collect();
            let oracle: Option<Vec<f64>> = rows.iter().map(|s| s.oracle_max_off.map(|v| v as f64)).collect();
            BenchCell {
                policy: p,
                ue_count: k,
                sims: rows.len(),
                mean_off_count: mean(&off),
                std_off_count: sample_std(&off),
                mean_off_ratio: mean(&ratio),
                std_off_ratio: sample_std(&ratio),
                violation_rate: mean(&viol),
                oracle_mean_max_off: oracle.filter(|v| !v.is_empty()).map(|v| mean(&v)),
            }
        })
        .collect();
    Ok(BenchReport { cells, sims })
}

fn run_cell_sim(
    cfg: &RunConfig,
    plan: &BenchPlan,
    models: &ModelSet,
    k: usize,
    sim: usize,
) -> Result<Vec<SimRecord>, BenchError> {
    let net_cfg = cfg.network_for(k);
    let layout = bench_layout(cfg, plan.seed, k, sim);
    let rss = Arc::new(compute_rss_matrix(&net_cfg, &net_cfg.radio_cards(), &layout)?);
    let oracle_max_off = if plan.oracle {
        Some(oracle_max_off_rss(&net_cfg, Arc::clone(&rss), OracleMode::Assoc)?.max_off)
    } else {
        None
    };
    let m = net_cfg.num_rcs();
    plan.policies
        .iter()
        .map(|&kind| {
            let policy = match Policy::classic(kind) {
                Some(p) => p,
                None => Policy::dqn(kind, &models[&(kind, k)], &net_cfg).expect("DQN kind"),
            };
            let out = run_to_fixed_point(&policy, &net_cfg, Arc::clone(&rss), &layout, cfg.horizon())?;
            let off = count_off(&out.state.rc_flags);
            Ok(SimRecord {
                policy: kind,
                ue_count: k,
                sim,
                off_count: off,
                off_ratio: off as f64 / m as f64,
                violation: !check_constraints(&out.state, &net_cfg).is_feasible(),
                oracle_max_off,
            })
        })
        .collect()
}
