//! Experiment front end: configuration, dataset preparation, scenario
//! assembly, execution and export of metrics, traces and contact plans.

mod config;

pub use config::{
    load_config, Algorithm, ConstellationConfig, DataConfig, DataMode, ExperimentConfig,
    LearningConfig, Outage, ServerConfig, SyntheticConfig, HAP_ALTITUDE_M, MNIST_FILES,
};

use std::fmt::Display;
use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::learning::{
    gaussian_blobs, load_mnist, partition_iid, partition_noniid, stream_seed, Activation, Dataset,
    IdxError, LearningError, MlpArchitecture,
};
use crate::links::{link_budget_table, BudgetLine, LinkError};
use crate::orbital::{
    compute_contact_plan, ContactIndex, ContactPlan, Geometry, NodeId, OrbitalError,
};
use crate::protocol::{AsyncFl, FedHap, ServerRing, StarSync};
use crate::simengine::{run, LearningEnv, Network, ProtocolStats, RunOutcome, SimContext, SimError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Idx(#[from] IdxError),
    #[error(transparent)]
    Orbital(#[from] OrbitalError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl ExperimentError {
    pub fn invalid(key: &str, reason: impl Display) -> Self {
        ExperimentError::Invalid {
            key: key.into(),
            reason: reason.to_string(),
        }
    }
}

/// Training and test data for one run.
#[derive(Debug, Clone)]
pub struct DataBundle {
    pub train: Dataset,
    pub test: Dataset,
}

/// Loads or generates the data the config asks for. The test set is cut to
/// `data.test_samples`.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<DataBundle, ExperimentError> {
    let d = &cfg.data;
    match d.mode {
        DataMode::Synthetic => {
            let sats = cfg.constellation.build()?.num_satellites().max(1);
            let s = &d.synthetic;
            // One draw so that train and test share class means.
            let n = sats * d.samples_per_satellite;
            let all = gaussian_blobs(n + d.test_samples, s.dim, s.classes, s.separation, stream_seed(cfg.seed, 10));
            let idx: Vec<usize> = (0..all.len()).collect();
            let (train, test) = (all.subset(&idx[..n]), all.subset(&idx[n..]));
            Ok(DataBundle { train, test })
        }
        DataMode::Iid | DataMode::Noniid => {
            cfg.check_files()?;
            let train = load_mnist(&d.mnist_file(MNIST_FILES[0])?, &d.mnist_file(MNIST_FILES[1])?)?;
            let test = load_mnist(&d.mnist_file(MNIST_FILES[2])?, &d.mnist_file(MNIST_FILES[3])?)?;
            let test = test.head(d.test_samples);
            Ok(DataBundle { train, test })
        }
    }
}

/// Geometry and contact plan of a config, outages applied.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub geometry: Geometry,
    pub plan: ContactPlan,
    pub contacts: ContactIndex,
}

impl Scenario {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        cfg.validate()?;
        let constellation = cfg.constellation.build()?;
        let geometry = Geometry::new(constellation, cfg.server_nodes(), cfg.constants, cfg.los_margin_m)?;
        let plan = compute_contact_plan(&geometry, 0.0, cfg.horizon_s, cfg.contacts)?;
        let mut contacts = ContactIndex::new(&plan);
        for o in &cfg.outages {
            let nodes: Vec<NodeId> = geometry
                .constellation()
                .orbit_members(o.orbit)
                .into_iter()
                .map(NodeId::Sat)
                .collect();
            contacts.apply_outage(&nodes, o.start_s, o.end_s);
        }
        let plan = contacts.to_plan();
        Ok(Self {
            geometry,
            plan,
            contacts,
        })
    }
}

/// Contact plan of the config's geometry over its horizon.
pub fn export_contact_plan(cfg: &ExperimentConfig) -> Result<ContactPlan, ExperimentError> {
    Ok(Scenario::build(cfg)?.plan)
}

/// Link budget of every link class at the given distance for one model
/// payload.
pub fn link_budget(
    cfg: &ExperimentConfig,
    distance_m: f64,
    altitude_m: f64,
) -> Result<Vec<BudgetLine>, ExperimentError> {
    let arch = architecture(cfg, 784, 10)?;
    let bits = cfg.links.payload_bits(1, arch.param_count());
    Ok(link_budget_table(&cfg.links, distance_m, altitude_m, bits, &cfg.constants)?)
}

fn architecture(cfg: &ExperimentConfig, input: usize, classes: usize) -> Result<MlpArchitecture, ExperimentError> {
    let mut sizes = vec![input];
    sizes.extend(&cfg.learning.hidden_layers);
    sizes.push(classes);
    Ok(MlpArchitecture::new(sizes, Activation::Relu)?)
}

/// End-of-run digest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub rounds: u64,
    pub final_accuracy: f64,
    pub final_loss: f64,
    pub target_accuracy: Option<f64>,
    pub time_to_target_s: Option<f64>,
    pub total_bits: u64,
    pub end_time_s: f64,
    pub starved: bool,
    pub stats: ProtocolStats,
}

impl Summary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

impl Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "algorithm        {}", self.algorithm.name())?;
        writeln!(f, "seed             {}", self.seed)?;
        writeln!(f, "rounds           {}", self.rounds)?;
        writeln!(f, "final accuracy   {:.4}", self.final_accuracy)?;
        writeln!(f, "final loss       {:.4}", self.final_loss)?;
        match (self.target_accuracy, self.time_to_target_s) {
            (Some(t), Some(s)) => writeln!(f, "time to {:.0}%      {:.0} s ({:.2} h)", t * 100.0, s, s / 3600.0)?,
            (Some(t), None) => writeln!(f, "time to {:.0}%      not reached", t * 100.0)?,
            _ => {}
        }
        writeln!(f, "total bits       {}", self.total_bits)?;
        write!(f, "simulated time   {:.0} s", self.end_time_s)
    }
}

pub struct ExperimentOutcome {
    pub run: RunOutcome,
    pub plan: ContactPlan,
    pub summary: Summary,
}

impl ExperimentOutcome {
    /// Writes `metrics.csv`, `trace.jsonl`, `contact_plan.json` and
    /// `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        let io = |e: std::io::Error| ExperimentError::Io(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        fs::write(dir.join("metrics.csv"), self.run.metrics.to_csv()).map_err(io)?;
        fs::write(dir.join("trace.jsonl"), self.run.trace.to_jsonl()).map_err(io)?;
        fs::write(dir.join("contact_plan.json"), self.plan.to_json()).map_err(io)?;
        fs::write(dir.join("summary.json"), self.summary.to_json()).map_err(io)?;
        Ok(())
    }
}

/// Loads data and runs the configured experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    let data = prepare_data(cfg)?;
    run_with_data(cfg, &data)
}

/// Runs the configured experiment on already prepared data.
pub fn run_with_data(cfg: &ExperimentConfig, data: &DataBundle) -> Result<ExperimentOutcome, ExperimentError> {
    let scenario = Scenario::build(cfg)?;
    run_in_scenario(cfg, data, scenario)
}

/// Runs the configured experiment on prepared data and geometry.
pub fn run_in_scenario(
    cfg: &ExperimentConfig,
    data: &DataBundle,
    scenario: Scenario,
) -> Result<ExperimentOutcome, ExperimentError> {
    cfg.validate()?;
    let constellation = scenario.geometry.constellation().clone();
    let sats: Vec<_> = constellation.satellites().collect();
    let per_sat = Some(cfg.data.samples_per_satellite);
    let part_seed = stream_seed(cfg.seed, 1);
    let shards = match cfg.data.mode {
        DataMode::Noniid => partition_noniid(&data.train, &constellation, part_seed, per_sat)?,
        DataMode::Iid | DataMode::Synthetic => partition_iid(&data.train, &sats, part_seed, per_sat)?,
    };
    let arch = architecture(cfg, data.train.dim(), data.train.num_classes())?;
    let init = arch.init(stream_seed(cfg.seed, 2));
    let env = LearningEnv::new(
        arch,
        shards,
        data.test.clone(),
        cfg.hyper_params(0),
        stream_seed(cfg.seed, 3),
        init.clone(),
    )?;
    let network = Network::new(scenario.geometry, scenario.contacts, cfg.links.clone());
    let horizon = cfg.horizon_s;
    let delay = cfg.protocol.compute_delay_s;
    let target = cfg.target_accuracy;
    let servers: Vec<u16> = (0..cfg.servers.len() as u16).collect();

    let outcome = match cfg.algorithm {
        Algorithm::Fedhap | Algorithm::FedhapGs => {
            let ring = ServerRing::new(servers).map_err(SimError::from)?;
            let mut p = FedHap::new(ring, constellation, cfg.protocol, init)?;
            run(&mut p, SimContext::new(network, env, horizon, delay, target), cfg.checkpoint_s)?
        }
        Algorithm::StarSync => {
            let mut p = StarSync::new(servers[0], sats, init);
            run(&mut p, SimContext::new(network, env, horizon, delay, target), cfg.checkpoint_s)?
        }
        Algorithm::Async => {
            let mut p = AsyncFl::new(servers[0], sats, cfg.protocol.async_eta0, init)?;
            run(&mut p, SimContext::new(network, env, horizon, delay, target), cfg.checkpoint_s)?
        }
    };

    let last = outcome.metrics.last();
    let summary = Summary {
        algorithm: cfg.algorithm,
        seed: cfg.seed,
        rounds: outcome.stats.rounds,
        final_accuracy: last.map_or(0.0, |r| r.test_accuracy),
        final_loss: last.map_or(f64::NAN, |r| r.test_loss),
        target_accuracy: target,
        time_to_target_s: target.and_then(|t| outcome.time_to_accuracy(t)),
        total_bits: outcome.total_bits,
        end_time_s: outcome.end_time_s,
        starved: outcome.starved,
        stats: outcome.stats.clone(),
    };
    Ok(ExperimentOutcome {
        run: outcome,
        plan: scenario.plan,
        summary,
    })
}

#[cfg(test)]
mod tests;
