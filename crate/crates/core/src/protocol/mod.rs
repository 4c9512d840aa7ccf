//! Orchestration schemes driven by the event engine: FedHAP with its
//! server ring and per-orbit chains, plus synchronous and asynchronous
//! star baselines.

mod asynchronous;
mod fedhap;
mod ring;
#[cfg(test)]
mod scenarios;
mod star;

pub use asynchronous::{AsyncFl, AsyncMsg};
pub use fedhap::{ChainState, FedHap, FedHapMsg, Phase, ReceivedPartial};
pub use ring::ServerRing;
pub use star::{StarMsg, StarSync};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbital::{ConstellationSpec, ContactIndex, Direction, NodeId, SatId};
use crate::simengine::SimError;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid protocol configuration: {0}")]
    Config(String),
}

impl From<ProtocolError> for SimError {
    fn from(e: ProtocolError) -> Self {
        SimError::Protocol(e.to_string())
    }
}

/// Tunables shared by all schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub direction: Direction,
    /// Time charged for one local training run.
    pub compute_delay_s: f64,
    /// A round without progress for this long raises a diagnostic.
    pub watchdog_s: f64,
    /// Base blend factor of the asynchronous baseline.
    pub async_eta0: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            direction: Direction::Clockwise,
            compute_delay_s: 60.0,
            watchdog_s: 6.0 * 3600.0,
            async_eta0: 0.5,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !(self.compute_delay_s >= 0.0 && self.compute_delay_s.is_finite()) {
            return Err(ProtocolError::Config("compute_delay_s must be finite and >= 0".into()));
        }
        if !(self.watchdog_s > 0.0) {
            return Err(ProtocolError::Config("watchdog_s must be > 0".into()));
        }
        if !(self.async_eta0 > 0.0 && self.async_eta0 <= 1.0) {
            return Err(ProtocolError::Config("async_eta0 must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// The satellite of `orbit` visible to `server` at `t` with the longest
/// remaining window. Ties go to the lowest satellite ID.
pub fn select_entry_satellite(
    contacts: &ContactIndex,
    constellation: &ConstellationSpec,
    orbit: u16,
    server: NodeId,
    t: f64,
) -> Option<SatId> {
    let mut best: Option<(f64, SatId)> = None;
    for sat in constellation.orbit_members(orbit) {
        let Some(left) = contacts.remaining(NodeId::Sat(sat), server, t) else {
            continue;
        };
        if best.map_or(true, |(b, _)| left > b) {
            best = Some((left, sat));
        }
    }
    best.map(|(_, s)| s)
}

/// The server in `servers` visible to `sat` at `t` with the longest
/// remaining window, ties to the lowest ID.
pub fn best_visible_server(
    contacts: &ContactIndex,
    servers: &[u16],
    sat: SatId,
    t: f64,
) -> Option<u16> {
    let mut best: Option<(f64, u16)> = None;
    for &h in servers {
        let Some(left) = contacts.remaining(NodeId::Sat(sat), NodeId::Ground(h), t) else {
            continue;
        };
        if best.map_or(true, |(b, _)| left > b) {
            best = Some((left, h));
        }
    }
    best.map(|(_, h)| h)
}
