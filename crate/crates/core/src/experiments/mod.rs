//! Experiment configuration, single runs, the canonical studies and the
//! golden trace scenario.

mod config;
pub mod presets;
pub mod studies;
pub mod trace;

use std::path::Path;

use thiserror::Error;

pub use config::{ExperimentConfig, RotationMode, TtlMode};

use crate::cache::{Admission, StoreMode};
use crate::engine::{rng_stream, EngineError, RunOutput, SimConfig, Simulator};
use crate::metrics::RunLabels;
use crate::node::NodeConfig;
use crate::provider::{NamingMode, ProviderConfig, RotationParams};
use crate::time::SimTime;
use crate::topology::{apply_deployment, load_topology, synth, DeploymentPlan, Graph, RoleMap, TopologyError};
use crate::workload::{self, Arrivals, WorkloadConfig, WorkloadError};

pub const FIG2_TOPOLOGY: &str = include_str!("../../topologies/fig2.topo");

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("unknown study `{0}` (expected deployment, ratio, purging, incremental or trace)")]
    UnknownStudy(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("cannot write {path}")]
    Io { path: String, source: std::io::Error },
}

/// Bundled name or path.
pub fn resolve_topology(name: &str) -> Result<Graph, ExperimentError> {
    if name == "fig2" {
        return Ok(Graph::parse(FIG2_TOPOLOGY)?);
    }
    if let Some(spec) = synth::by_name(name) {
        return Ok(synth::generate(&spec)?);
    }
    Ok(load_topology(Path::new(name))?)
}

pub fn policy_label(p: Admission) -> &'static str {
    match p {
        Admission::Lce => "lce",
        Admission::Choice => "choice",
    }
}

/// Everything needed to start one simulation.
pub struct Prepared {
    pub roles: RoleMap,
    pub sim: SimConfig,
    pub labels: RunLabels,
}

pub fn deployment_plan(cfg: &ExperimentConfig) -> DeploymentPlan {
    let chunks = cfg.catalog_size as f64 * cfg.chunks_per_object as f64;
    let budget = (cfg.cache_budget * chunks).round().max(1.0) as usize;
    let mut plan = DeploymentPlan::for_strategy(cfg.strategy, budget, cfg.cfib_ratio);
    plan.sizing = cfg.sizing;
    if let Some(f) = cfg.cache_fraction {
        plan.cache_fraction = f;
    }
    if let Some(f) = cfg.cfib_fraction {
        plan.cfib_fraction = f;
    }
    plan
}

pub fn sim_config(cfg: &ExperimentConfig) -> SimConfig {
    let ttl = cfg.ttl.first().copied();
    let rotating = cfg.rotation != RotationMode::Off || ttl.is_some();
    SimConfig {
        node: NodeConfig {
            admission: cfg.policy,
            chunk_duration: SimTime::from_ms(cfg.chunk_ms),
            forward_policy: cfg.forward_policy,
            piggyback_first_chunk: cfg.piggyback,
            ..NodeConfig::default()
        },
        provider: ProviderConfig {
            bundle: cfg.bundle,
            naming: if ttl.is_some() { NamingMode::Permanent } else { NamingMode::Ephemeral },
            rotation: rotating.then(|| RotationParams {
                t_base: SimTime::from_secs(cfg.t_base),
                t_min: SimTime::from_secs(cfg.t_min),
            }),
            purge_lists: cfg.rotation == RotationMode::WithReplacement,
            ..ProviderConfig::default()
        },
        store_mode: match ttl {
            Some(t) => StoreMode::Ttl { ttl: SimTime::from_secs(t) },
            None => StoreMode::Lira,
        },
        cfib_replacement: cfg.cfib_replacement,
        catalog_size: cfg.catalog_size,
        chunks_per_object: cfg.chunks_per_object,
        arrivals: if cfg.rate > 0.0 { Arrivals::Poisson { rate: cfg.rate } } else { Arrivals::Sequential },
        freshness_every: cfg.freshness_every,
        freshness_depth: cfg.freshness_depth,
        ..SimConfig::default()
    }
}

pub fn prepare(cfg: &ExperimentConfig, graph: &Graph, seed: u64) -> Result<Prepared, ExperimentError> {
    cfg.validate()?;
    let roles = apply_deployment(graph, &deployment_plan(cfg), None)?;
    let labels = RunLabels {
        topology: cfg.topology.clone(),
        strategy: cfg.strategy.label().to_string(),
        policy: policy_label(cfg.policy).to_string(),
        ratio: cfg.cfib_ratio,
        alpha: cfg.alpha,
        seed,
    };
    Ok(Prepared { roles, sim: sim_config(cfg), labels })
}

pub fn workload_config(cfg: &ExperimentConfig) -> WorkloadConfig {
    WorkloadConfig {
        catalog_size: cfg.catalog_size,
        chunks_per_object: cfg.chunks_per_object,
        alpha: cfg.alpha,
        arrivals: if cfg.rate > 0.0 { Arrivals::Poisson { rate: cfg.rate } } else { Arrivals::Sequential },
        warmup: cfg.warmup,
        measure: cfg.measure,
    }
}

/// One simulation of `cfg` under `seed` on an already loaded graph.
pub fn run_on(cfg: &ExperimentConfig, graph: &Graph, seed: u64) -> Result<(RunLabels, RunOutput), ExperimentError> {
    let p = prepare(cfg, graph, seed)?;
    let fetches = workload::generate(&workload_config(cfg), graph.clients(), &mut rng_stream(seed, "workload"))?;
    let out = Simulator::new(graph.clone(), &p.roles, p.sim, fetches, seed)?.run()?;
    Ok((p.labels, out))
}

pub fn run_one(cfg: &ExperimentConfig, seed: u64) -> Result<(RunLabels, RunOutput), ExperimentError> {
    let g = resolve_topology(&cfg.topology)?;
    run_on(cfg, &g, seed)
}

pub fn write_file(path: &Path, text: &str) -> Result<(), ExperimentError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|source| ExperimentError::Io { path: dir.display().to_string(), source })?;
    }
    std::fs::write(path, text).map_err(|source| ExperimentError::Io { path: path.display().to_string(), source })
}
