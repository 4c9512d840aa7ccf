use std::collections::BTreeSet;

use crate::learning::{blend, ModelVector};
use crate::orbital::{NodeId, SatId};
use crate::simengine::{Event, EventKind, Protocol, ProtocolStats, SimContext, SimError};

#[derive(Debug, Clone, PartialEq)]
pub enum AsyncMsg {
    Down { sat: SatId, version: u64, model: ModelVector },
    Trained { sat: SatId, version: u64, local: ModelVector },
    Up { sat: SatId, version: u64, local: ModelVector },
}

/// Asynchronous star baseline. Every upload is blended into the server
/// model at once with a staleness-discounted factor
/// `η = η₀ / (1 + staleness)`, where staleness counts server updates since
/// the satellite fetched its model, in units of one update per satellite.
#[derive(Debug, Clone)]
pub struct AsyncFl {
    server: u16,
    sats: Vec<SatId>,
    eta0: f64,
    global: ModelVector,
    version: u64,
    idle: BTreeSet<SatId>,
    stats: ProtocolStats,
}

impl AsyncFl {
    pub fn new(server: u16, sats: Vec<SatId>, eta0: f64, initial_model: ModelVector) -> Result<Self, SimError> {
        if !(eta0 > 0.0 && eta0 <= 1.0) {
            return Err(SimError::Protocol("async eta0 must lie in (0, 1]".into()));
        }
        if sats.is_empty() {
            return Err(SimError::Protocol("async baseline needs satellites".into()));
        }
        Ok(Self {
            server,
            idle: sats.iter().copied().collect(),
            sats,
            eta0,
            global: initial_model,
            version: 0,
            stats: ProtocolStats::default(),
        })
    }

    /// Server updates applied so far.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Blend factor for an update trained on `fetched` while the server is
    /// at `now`.
    pub fn eta(&self, fetched: u64, now: u64) -> f64 {
        let staleness = now.saturating_sub(fetched) as f64 / self.sats.len() as f64;
        self.eta0 / (1.0 + staleness)
    }

    /// Sends the current model to `sat` if it is idle and in contact.
    fn offer(&mut self, sat: SatId, ctx: &mut SimContext<AsyncMsg>) -> Result<(), SimError> {
        let (s, g) = (NodeId::Sat(sat), NodeId::Ground(self.server));
        if !self.idle.contains(&sat) || !ctx.is_connected(g, s)? {
            return Ok(());
        }
        let msg = AsyncMsg::Down {
            sat,
            version: self.version,
            model: self.global.clone(),
        };
        let round = self.round();
        let bits = ctx.payload_bits(1);
        if ctx.send(g, s, bits, round, msg)?.is_some() {
            self.idle.remove(&sat);
        }
        Ok(())
    }
}

impl Protocol for AsyncFl {
    type Msg = AsyncMsg;

    fn start(&mut self, ctx: &mut SimContext<AsyncMsg>) -> Result<(), SimError> {
        for sat in self.sats.clone() {
            self.offer(sat, ctx)?;
        }
        Ok(())
    }

    fn handle(&mut self, event: Event<AsyncMsg>, ctx: &mut SimContext<AsyncMsg>) -> Result<(), SimError> {
        let msg = match event.kind {
            EventKind::TransferComplete(m) | EventKind::TrainingComplete(m) => m,
            EventKind::WindowOpen { sat, ground } => {
                if let (Some(s), Some(g)) = (sat.as_sat(), ground.as_ground()) {
                    if g == self.server {
                        self.offer(s, ctx)?;
                    }
                }
                return Ok(());
            }
            _ => return Ok(()),
        };
        match msg {
            AsyncMsg::Down { sat, version, model } => {
                let round = version / self.sats.len() as u64;
                ctx.train(sat, &model, round, |local| AsyncMsg::Trained { sat, version, local })?;
            }
            AsyncMsg::Trained { sat, version, local } => {
                let bits = ctx.payload_bits(1);
                let round = self.round();
                let msg = AsyncMsg::Up { sat, version, local };
                if ctx
                    .send(NodeId::Sat(sat), NodeId::Ground(self.server), bits, round, msg)?
                    .is_none()
                {
                    self.idle.insert(sat);
                }
            }
            AsyncMsg::Up { sat, version, local } => {
                let eta = self.eta(version, self.version);
                self.global = blend(&self.global, &local, eta)?;
                self.version += 1;
                self.stats.updates += 1;
                if self.version % self.sats.len() as u64 == 0 {
                    self.stats.rounds += 1;
                    let model = self.global.clone();
                    ctx.record_metrics(&model, self.round())?;
                }
                self.idle.insert(sat);
                self.offer(sat, ctx)?;
            }
        }
        Ok(())
    }

    fn global_model(&self) -> &ModelVector {
        &self.global
    }

    /// One round per satellite-count updates.
    fn round(&self) -> u64 {
        self.version / self.sats.len() as u64
    }

    fn stats(&self) -> ProtocolStats {
        self.stats.clone()
    }
}
