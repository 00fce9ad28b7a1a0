//! Subcommand bodies. Each returns a [`CliError`] carrying its exit code.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use eslab_core::dqn::{AdamW, Checkpoint, QNetwork};
use eslab_core::env::StateVariant;
use eslab_core::error::{CheckpointError, DqnError, OracleError, TrainError};
use eslab_core::harness::bench::{run_bench, BenchError, BenchPlan, ModelSet};
use eslab_core::harness::config::{ConfigError, Preset, RunConfig};
use eslab_core::harness::{oracle_csv, oracle_rows, svg};
use eslab_core::policies::PolicyKind;
use eslab_core::trainer::{evaluate_policy, train as run_training, CheckpointSink, TrainLog};
use serde_json::json;

use crate::{BenchArgs, EvalArgs, OracleArgs, PlotArgs, TrainArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(format!("csv: {e}"))
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Divergence { .. } | TrainError::Dqn(DqnError::NonFiniteLoss { .. }) => {
                CliError::Numeric(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

/// `SOURCE_DATE_EPOCH` when set, so reproducible builds of a run stay byte-identical.
fn created_utc() -> Result<String, CliError> {
    let when = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(raw) => {
            let secs: i64 = raw
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("SOURCE_DATE_EPOCH must be an integer, got `{raw}`")))?;
            DateTime::<Utc>::from_timestamp(secs, 0)
                .ok_or_else(|| CliError::Usage(format!("SOURCE_DATE_EPOCH out of range: {secs}")))?
        }
        Err(_) => Utc::now(),
    };
    Ok(when.to_rfc3339_opts(SecondsFormat::Secs, true))
}

fn variant_arg(xapp: &str) -> Result<StateVariant, CliError> {
    StateVariant::from_xapp_name(xapp).ok_or_else(|| CliError::Usage(format!("unknown xapp `{xapp}`; expected es1 or es2")))
}

/// Overwrites `model.json` with the latest snapshot, optimizer state included.
struct FileSink<'a> {
    path: PathBuf,
    variant: StateVariant,
    digest: &'a str,
    created: &'a str,
}

impl CheckpointSink for FileSink<'_> {
    fn save(&mut self, episode: usize, network: &QNetwork<f32>, optimizer: &AdamW<f32>) -> Result<(), CheckpointError> {
        log::info!("checkpoint at episode {episode} -> {}", self.path.display());
        Checkpoint::new(network, self.variant, self.digest, self.created, Some(optimizer)).save(&self.path)
    }
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let variant = variant_arg(&args.xapp)?;
    let mut cfg = RunConfig::load(&args.config, args.preset)?;
    cfg.dqn.seed = args.seed;
    let digest = cfg.digest();
    let created = created_utc()?;
    let mut env = cfg
        .env_for(variant, cfg.network.num_ues)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    fs::create_dir_all(&args.out).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", args.out.display())))?;
    let model_path = args.out.join("model.json");
    let mut sink = FileSink {
        path: model_path.clone(),
        variant,
        digest: &digest,
        created: &created,
    };
    let outcome = run_training(&cfg.dqn, &mut env, &mut sink)?;

    Checkpoint::new(&outcome.network, variant, digest.as_str(), created.as_str(), Some(&outcome.optimizer)).save(&model_path)?;
    write_file(&args.out.join("train_log.csv"), &outcome.log.to_csv()?)?;
    let meta = json!({
        "xapp": variant.xapp_name(),
        "seed": args.seed,
        "preset": args.preset,
        "created_utc": created,
        "config_digest": digest,
        "input_dim": env.state_dim(),
        "num_actions": env.num_actions(),
        "counters": outcome.counters,
        "config": cfg,
    });
    write_file(&args.out.join("meta.json"), &serde_json::to_string_pretty(&meta).expect("meta serialises"))?;
    Ok(())
}

fn config_beside(model: &Path) -> Result<RunConfig, CliError> {
    let meta_path = model.with_file_name("meta.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| {
        CliError::Usage(format!("no --config given and cannot read {}: {e}", meta_path.display()))
    })?;
    let meta: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", meta_path.display())))?;
    let cfg = meta
        .get("config")
        .cloned()
        .ok_or_else(|| CliError::Usage(format!("{} has no config section", meta_path.display())))?;
    serde_json::from_value(cfg).map_err(|e| CliError::Usage(format!("{}: {e}", meta_path.display())))
}

/// Loads a checkpoint and checks it against the environment `cfg` builds for `num_ues`.
fn load_model(path: &Path, cfg: &RunConfig, num_ues: usize, expect: Option<StateVariant>) -> Result<(QNetwork<f32>, StateVariant), CliError> {
    let ckpt = Checkpoint::load(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if let Some(v) = expect.filter(|v| *v != ckpt.encoding_variant) {
        return Err(CliError::Usage(format!(
            "{} holds a {} model, expected {}",
            path.display(),
            ckpt.encoding_variant.xapp_name(),
            v.xapp_name()
        )));
    }
    let env = cfg
        .env_for(ckpt.encoding_variant, num_ues)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if ckpt.input_dim() != env.state_dim() {
        return Err(CheckpointError::DimensionMismatch {
            checkpoint: ckpt.input_dim(),
            configured: env.state_dim(),
        }
        .into());
    }
    let net = ckpt.network()?;
    if net.output_dim() != env.num_actions() {
        return Err(CliError::Usage(format!(
            "{}: {} outputs but the configured network has {} actions",
            path.display(),
            net.output_dim(),
            env.num_actions()
        )));
    }
    Ok((net, ckpt.encoding_variant))
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let cfg = match &args.config {
        Some(p) => RunConfig::load(p, Preset::Desk)?,
        None => config_beside(&args.model)?,
    };
    let (net, variant) = load_model(&args.model, &cfg, cfg.network.num_ues, None)?;
    let env = cfg
        .env_for(variant, cfg.network.num_ues)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let report = evaluate_policy(&net, &env, args.episodes, args.seed)?;
    if let Some(s) = &report.summary {
        log::info!(
            "{} episodes: mean OFF ratio {:.3}, violation-free {:.1}%",
            s.episodes,
            s.mean_off_ratio,
            100.0 * s.violation_free_rate
        );
    }
    write_file(&args.csv, &report.to_csv()?)
}

pub fn model_path(dir: &Path, kind: PolicyKind, k: usize) -> Option<PathBuf> {
    kind.variant().map(|v| dir.join(format!("{}_k{k}", v.xapp_name())).join("model.json"))
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(&args.config, args.preset)?;
    let mut plan = BenchPlan::from_config(&cfg);
    if let Some(p) = &args.policies {
        plan.policies.clone_from(p);
    }
    if let Some(k) = &args.ue_counts {
        plan.ue_counts.clone_from(k);
    }
    if let Some(s) = args.sims {
        plan.sims = s;
    }
    if let Some(s) = args.seed {
        plan.seed = s;
    }
    plan.oracle |= args.oracle;
    if plan.policies.is_empty() || plan.ue_counts.is_empty() {
        return Err(CliError::Usage("at least one policy and one UE count are required".into()));
    }

    let mut models = ModelSet::new();
    let mut gaps = Vec::new();
    for &kind in plan.policies.iter().filter(|p| p.is_dqn()) {
        for &k in &plan.ue_counts {
            let path = model_path(&args.models, kind, k).expect("DQN policy");
            if path.is_file() {
                models.insert((kind, k), load_model(&path, &cfg, k, kind.variant())?.0);
            } else {
                gaps.push(format!("{kind} at K={k} ({})", path.display()));
            }
        }
    }
    if !gaps.is_empty() {
        return Err(CliError::Usage(format!("missing checkpoints: {}", gaps.join(", "))));
    }

    let report = run_bench(&cfg, &plan, &models)?;
    write_file(&args.csv, &report.to_csv()?)?;
    if let Some(path) = &args.svg {
        write_file(path, &svg::bench_bar_chart(&report, "Switched-off radio cards per policy"))?;
    }
    Ok(())
}

pub fn oracle(args: &OracleArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(&args.config, Preset::Desk)?;
    let rows = oracle_rows(&cfg, args.layouts, args.seed, args.mode)?;
    write_file(&args.csv, &oracle_csv(&rows)?)
}

pub fn plot(args: &PlotArgs) -> Result<(), CliError> {
    if args.window == 0 {
        return Err(CliError::Usage("--window must be at least 1".into()));
    }
    let text = fs::read_to_string(&args.train_log)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.train_log.display())))?;
    let log = TrainLog::from_csv(&text, args.window)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.train_log.display())))?;
    if args.window > log.records.len() {
        eprintln!(
            "warning: window {} exceeds the {} logged episodes; plotting a single averaged point",
            args.window,
            log.records.len()
        );
    }
    write_file(&args.svg, &svg::training_curves(&log))
}
