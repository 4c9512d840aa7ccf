use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::links::LinkConfig;
use crate::orbital::{
    ConstellationSpec, ElevationReference, GroundKind, GroundNodeSpec, PhysicalConstants,
    WindowSearch,
};
use crate::protocol::ProtocolConfig;

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Fedhap,
    /// FedHAP with every server replaced by a ground station at the same site.
    FedhapGs,
    StarSync,
    Async,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fedhap => "fedhap",
            Algorithm::FedhapGs => "fedhap_gs",
            Algorithm::StarSync => "star_sync",
            Algorithm::Async => "async",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    #[default]
    Iid,
    Noniid,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationConfig {
    pub num_orbits: u16,
    pub sats_per_orbit: u16,
    pub altitude_m: f64,
    pub inclination_deg: f64,
    pub raan_spread_deg: f64,
    pub phasing: f64,
}

impl Default for ConstellationConfig {
    fn default() -> Self {
        Self {
            num_orbits: 5,
            sats_per_orbit: 8,
            altitude_m: 2.0e6,
            inclination_deg: 80.0,
            raan_spread_deg: 360.0,
            phasing: 1.0,
        }
    }
}

impl ConstellationConfig {
    pub fn build(&self) -> Result<ConstellationSpec, ExperimentError> {
        ConstellationSpec::walker_delta(
            self.num_orbits,
            self.sats_per_orbit,
            self.altitude_m,
            self.inclination_deg.to_radians(),
            self.raan_spread_deg.to_radians(),
            self.phasing,
        )
        .map_err(|e| ExperimentError::invalid("constellation", e))
    }
}

/// A parameter-server site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    pub name: String,
    #[serde(default = "hap")]
    pub kind: GroundKind,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    /// Defaults to 20 km for a HAP and 0 for a ground station.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub altitude_m: Option<f64>,
    #[serde(default = "ten_degrees")]
    pub min_elevation_deg: f64,
    /// Defaults to the apparent horizon for a HAP and the local horizontal
    /// for a ground station.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elevation_reference: Option<ElevationReference>,
}

fn hap() -> GroundKind {
    GroundKind::Hap
}

fn ten_degrees() -> f64 {
    10.0
}

pub const HAP_ALTITUDE_M: f64 = 20.0e3;

impl ServerConfig {
    pub fn rolla() -> Self {
        Self::hap_at("Rolla", 37.951, -91.768)
    }

    pub fn dallas() -> Self {
        Self::hap_at("Dallas", 32.777, -96.797)
    }

    pub fn hap_at(name: &str, latitude_deg: f64, longitude_deg: f64) -> Self {
        Self {
            name: name.into(),
            kind: GroundKind::Hap,
            latitude_deg,
            longitude_deg,
            altitude_m: None,
            min_elevation_deg: 10.0,
            elevation_reference: None,
        }
    }

    pub fn to_node(&self, node_id: u16) -> GroundNodeSpec {
        let (altitude_m, reference) = match self.kind {
            GroundKind::Hap => (HAP_ALTITUDE_M, ElevationReference::ApparentHorizon),
            GroundKind::Gs => (0.0, ElevationReference::LocalHorizontal),
        };
        GroundNodeSpec {
            node_id,
            name: self.name.clone(),
            kind: self.kind,
            latitude_rad: self.latitude_deg.to_radians(),
            longitude_rad: self.longitude_deg.to_radians(),
            altitude_m: self.altitude_m.unwrap_or(altitude_m),
            min_elevation_rad: self.min_elevation_deg.to_radians(),
            elevation_reference: self.elevation_reference.unwrap_or(reference),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub local_epochs: u32,
    pub batch_size: usize,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![64],
            learning_rate: 0.01,
            local_epochs: 5,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub dim: usize,
    pub classes: usize,
    pub separation: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            classes: 4,
            separation: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub mode: DataMode,
    /// Directory holding the four MNIST IDX files (optionally gzipped).
    pub mnist_dir: PathBuf,
    pub samples_per_satellite: usize,
    pub test_samples: usize,
    pub synthetic: SyntheticConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            mode: DataMode::Iid,
            mnist_dir: PathBuf::from("data/mnist"),
            samples_per_satellite: 600,
            test_samples: 2000,
            synthetic: SyntheticConfig::default(),
        }
    }
}

impl DataConfig {
    /// Locates an MNIST file by its canonical name, with or without `.gz`.
    pub fn mnist_file(&self, stem: &str) -> Result<PathBuf, ExperimentError> {
        let plain = self.mnist_dir.join(stem);
        let gz = self.mnist_dir.join(format!("{stem}.gz"));
        [gz, plain]
            .into_iter()
            .find(|p| p.is_file())
            .ok_or_else(|| {
                ExperimentError::invalid(
                    "data.mnist_dir",
                    format!("{stem}[.gz] not found in {}", self.mnist_dir.display()),
                )
            })
    }
}

/// Ground visibility of a whole orbit removed for an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outage {
    pub orbit: u16,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub horizon_s: f64,
    /// Interval between periodic metric rows.
    pub checkpoint_s: f64,
    /// Stop once the test accuracy reaches this value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_accuracy: Option<f64>,
    pub los_margin_m: f64,
    pub constellation: ConstellationConfig,
    pub servers: Vec<ServerConfig>,
    pub outages: Vec<Outage>,
    pub learning: LearningConfig,
    pub data: DataConfig,
    pub protocol: ProtocolConfig,
    pub contacts: WindowSearch,
    pub links: LinkConfig,
    pub constants: PhysicalConstants,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Fedhap,
            seed: 1,
            horizon_s: 3.0 * 86_400.0,
            checkpoint_s: 3600.0,
            target_accuracy: None,
            los_margin_m: 0.0,
            constellation: ConstellationConfig::default(),
            servers: vec![ServerConfig::rolla()],
            outages: Vec::new(),
            learning: LearningConfig::default(),
            data: DataConfig::default(),
            protocol: ProtocolConfig::default(),
            contacts: WindowSearch::default(),
            links: LinkConfig::default(),
            constants: PhysicalConstants::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Checks every field except file existence; errors name the offending
    /// key.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        use ExperimentError as E;
        if !(self.horizon_s > 0.0 && self.horizon_s.is_finite()) {
            return Err(E::invalid("horizon_s", "must be finite and positive"));
        }
        if !(self.checkpoint_s > 0.0 && self.checkpoint_s.is_finite()) {
            return Err(E::invalid("checkpoint_s", "must be finite and positive"));
        }
        if let Some(t) = self.target_accuracy {
            if !(0.0..=1.0).contains(&t) {
                return Err(E::invalid("target_accuracy", "must lie in [0, 1]"));
            }
        }
        if !(self.los_margin_m >= 0.0 && self.los_margin_m.is_finite()) {
            return Err(E::invalid("los_margin_m", "must be finite and >= 0"));
        }
        let c = &self.constellation;
        if !(c.altitude_m > 0.0 && c.altitude_m.is_finite()) {
            return Err(E::invalid("constellation.altitude_m", format!("must be positive, got {}", c.altitude_m)));
        }
        if !(c.inclination_deg.is_finite() && c.raan_spread_deg.is_finite() && c.phasing.is_finite()) {
            return Err(E::invalid("constellation", "angles and phasing must be finite"));
        }
        let constellation = c.build()?;
        if self.servers.is_empty() {
            return Err(E::invalid("servers", "at least one server is required"));
        }
        if self.servers.len() > usize::from(u16::MAX) {
            return Err(E::invalid("servers", "too many servers"));
        }
        for (i, s) in self.servers.iter().enumerate() {
            s.to_node(i as u16)
                .validate()
                .map_err(|e| E::invalid(&format!("servers[{i}]"), e))?;
        }
        if matches!(self.algorithm, Algorithm::StarSync | Algorithm::Async) && self.servers.len() != 1 {
            return Err(E::invalid(
                "servers",
                format!("{} needs exactly one server", self.algorithm.name()),
            ));
        }
        for (i, o) in self.outages.iter().enumerate() {
            if constellation.orbit(o.orbit).is_none() {
                return Err(E::invalid(&format!("outages[{i}].orbit"), format!("no orbit {}", o.orbit)));
            }
            if !(o.start_s <= o.end_s) {
                return Err(E::invalid(&format!("outages[{i}]"), "start_s must not exceed end_s"));
            }
        }
        let l = &self.learning;
        if l.hidden_layers.contains(&0) {
            return Err(E::invalid("learning.hidden_layers", "layer sizes must be positive"));
        }
        self.hyper_params(0)
            .validate()
            .map_err(|e| E::invalid("learning", e))?;
        let d = &self.data;
        if d.samples_per_satellite == 0 {
            return Err(E::invalid("data.samples_per_satellite", "must be positive"));
        }
        if d.test_samples == 0 {
            return Err(E::invalid("data.test_samples", "must be positive"));
        }
        if d.mode == DataMode::Synthetic {
            let s = &d.synthetic;
            if s.dim == 0 || !(2..=256).contains(&s.classes) || !s.separation.is_finite() {
                return Err(E::invalid("data.synthetic", "need dim > 0, 2..=256 classes, finite separation"));
            }
        }
        self.protocol.validate().map_err(|e| E::invalid("protocol", e))?;
        self.contacts.validate().map_err(|e| E::invalid("contacts", e))?;
        self.links.validate().map_err(|e| E::invalid("links", e))?;
        self.constants.validate().map_err(|e| E::invalid("constants", e))?;
        Ok(())
    }

    /// Checks that the files the data mode needs exist.
    pub fn check_files(&self) -> Result<(), ExperimentError> {
        if self.data.mode != DataMode::Synthetic {
            for stem in MNIST_FILES {
                self.data.mnist_file(stem)?;
            }
        }
        Ok(())
    }

    pub fn hyper_params(&self, rng_seed: u64) -> crate::learning::HyperParams {
        crate::learning::HyperParams {
            learning_rate: self.learning.learning_rate,
            local_epochs: self.learning.local_epochs,
            batch_size: self.learning.batch_size,
            rng_seed,
        }
    }

    /// Server nodes as used by the configured algorithm.
    pub fn server_nodes(&self) -> Vec<GroundNodeSpec> {
        self.servers
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let node = s.to_node(i as u16);
                match self.algorithm {
                    Algorithm::FedhapGs => node.as_ground_station(),
                    _ => node,
                }
            })
            .collect()
    }
}

pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

/// Reads and validates a TOML configuration file. Relative data paths are
/// resolved against the file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig =
        toml::from_str(&text).map_err(|e| ExperimentError::Parse(e.to_string()))?;
    if cfg.data.mnist_dir.is_relative() && !cfg.data.mnist_dir.exists() {
        if let Some(dir) = path.parent() {
            let candidate = dir.join(&cfg.data.mnist_dir);
            if candidate.exists() {
                cfg.data.mnist_dir = candidate;
            }
        }
    }
    cfg.validate()?;
    cfg.check_files()?;
    Ok(cfg)
}
