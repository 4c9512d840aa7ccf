use std::collections::BTreeMap;

use crate::learning::{fedavg, ModelVector};
use crate::orbital::{NodeId, SatId};
use crate::simengine::{Event, EventKind, Protocol, ProtocolStats, SimContext, SimError, TraceKind};

#[derive(Debug, Clone, PartialEq)]
pub enum StarMsg {
    Down { round: u64, sat: SatId },
    Trained { round: u64, sat: SatId, local: ModelVector },
    Up { round: u64, sat: SatId, local: ModelVector },
}

/// Synchronous star baseline: one parameter server sends `w^β` to every
/// satellite at its next contact, waits for all local models and averages
/// them by data size.
#[derive(Debug, Clone)]
pub struct StarSync {
    server: u16,
    sats: Vec<SatId>,
    round: u64,
    global: ModelVector,
    reports: BTreeMap<SatId, ModelVector>,
    stats: ProtocolStats,
}

impl StarSync {
    pub fn new(server: u16, sats: Vec<SatId>, initial_model: ModelVector) -> Self {
        Self {
            server,
            sats,
            round: 0,
            global: initial_model,
            reports: BTreeMap::new(),
            stats: ProtocolStats::default(),
        }
    }

    fn broadcast(&mut self, ctx: &mut SimContext<StarMsg>) -> Result<(), SimError> {
        let bits = ctx.payload_bits(1);
        for &sat in &self.sats {
            let msg = StarMsg::Down {
                round: self.round,
                sat,
            };
            if ctx
                .send(NodeId::Ground(self.server), NodeId::Sat(sat), bits, self.round, msg)?
                .is_none()
            {
                ctx.note(
                    TraceKind::Watchdog,
                    Some(NodeId::Sat(sat)),
                    self.round,
                    "no further contact with the server".into(),
                );
            }
        }
        Ok(())
    }
}

impl Protocol for StarSync {
    type Msg = StarMsg;

    fn start(&mut self, ctx: &mut SimContext<StarMsg>) -> Result<(), SimError> {
        self.broadcast(ctx)
    }

    fn handle(&mut self, event: Event<StarMsg>, ctx: &mut SimContext<StarMsg>) -> Result<(), SimError> {
        let msg = match event.kind {
            EventKind::TransferComplete(m) | EventKind::TrainingComplete(m) => m,
            _ => return Ok(()),
        };
        match msg {
            StarMsg::Down { round, sat } if round == self.round => {
                ctx.train(sat, &self.global, round, |local| StarMsg::Trained { round, sat, local })?;
            }
            StarMsg::Trained { round, sat, local } if round == self.round => {
                let bits = ctx.payload_bits(1);
                let msg = StarMsg::Up { round, sat, local };
                ctx.send(NodeId::Sat(sat), NodeId::Ground(self.server), bits, round, msg)?;
            }
            StarMsg::Up { round, sat, local } if round == self.round => {
                self.reports.insert(sat, local);
                self.stats.updates += 1;
                if self.reports.len() == self.sats.len() {
                    let pairs = self
                        .reports
                        .iter()
                        .map(|(&s, m)| Ok((m, ctx.env.mass(s)?)))
                        .collect::<Result<Vec<(&ModelVector, u64)>, SimError>>()?;
                    self.global = fedavg(&pairs)?;
                    self.reports.clear();
                    self.round += 1;
                    self.stats.rounds += 1;
                    ctx.note(
                        TraceKind::Aggregate,
                        Some(NodeId::Ground(self.server)),
                        self.round,
                        String::new(),
                    );
                    let model = self.global.clone();
                    ctx.record_metrics(&model, self.round)?;
                    self.broadcast(ctx)?;
                }
            }
            _ => self.stats.stale_drops += 1,
        }
        Ok(())
    }

    fn global_model(&self) -> &ModelVector {
        &self.global
    }

    fn round(&self) -> u64 {
        self.round
    }

    fn stats(&self) -> ProtocolStats {
        self.stats.clone()
    }
}
