use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::learning::{global_aggregate, organize_and_filter, LearningError, ModelVector, PartialModel};
use crate::orbital::{ConstellationSpec, Direction, NodeId, SatId};
use crate::simengine::{Event, EventKind, Protocol, ProtocolStats, SimContext, SimError, TraceKind};

use super::{best_visible_server, select_entry_satellite, ProtocolConfig, ServerRing};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    ForwardDissemination,
    ChainsActive,
    ReverseCollection,
    Rescheduled,
}

/// One chain walking an orbit ring, carrying `w^β` and a partial model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub id: u64,
    pub orbit: u16,
    pub server: u16,
    pub direction: Direction,
    pub entry: SatId,
    pub holder: SatId,
    /// Ring steps taken from the entry.
    pub hop_count: u16,
    pub carried: Option<PartialModel>,
}

/// A partial as held by a server, stamped with its arrival for the
/// earliest-first filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedPartial {
    pub arrived_s: f64,
    pub seq: u64,
    pub server: u16,
    pub partial: PartialModel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FedHapMsg {
    /// `w^β` over an inter-server link.
    Forward { round: u64, to: u16 },
    /// `w^β` from a server to a chain's entry satellite.
    Entry { round: u64, chain: u64 },
    /// `w^β` and the carried partial over an ISL hop.
    Hop { round: u64, chain: u64 },
    Trained { round: u64, chain: u64, local: ModelVector },
    Upload { round: u64, to: u16, partial: PartialModel },
    /// A server's partial set handed towards the source.
    Collect { round: u64, to: u16, partials: Vec<ReceivedPartial> },
}

/// FedHAP orchestration: ring dissemination, chain-wise partial
/// aggregation, reverse collection and coverage-checked global aggregation.
#[derive(Debug, Clone)]
pub struct FedHap {
    ring: ServerRing,
    constellation: ConstellationSpec,
    config: ProtocolConfig,
    round: u64,
    global: ModelVector,
    phase: Phase,
    has_model: BTreeSet<u16>,
    held: BTreeMap<u16, Vec<ReceivedPartial>>,
    collect_inputs: BTreeMap<u16, usize>,
    retained: Vec<ReceivedPartial>,
    claimed: BTreeSet<SatId>,
    chains: BTreeMap<u64, ChainState>,
    active: BTreeSet<(u16, u16)>,
    next_chain: u64,
    next_seq: u64,
    in_flight: usize,
    fresh: bool,
    last_progress_s: f64,
    stats: ProtocolStats,
}

impl FedHap {
    pub fn new(
        ring: ServerRing,
        constellation: ConstellationSpec,
        config: ProtocolConfig,
        initial_model: ModelVector,
    ) -> Result<Self, SimError> {
        config.validate()?;
        constellation.validate()?;
        Ok(Self {
            ring,
            constellation,
            config,
            round: 0,
            global: initial_model,
            phase: Phase::ForwardDissemination,
            has_model: BTreeSet::new(),
            held: BTreeMap::new(),
            collect_inputs: BTreeMap::new(),
            retained: Vec::new(),
            claimed: BTreeSet::new(),
            chains: BTreeMap::new(),
            active: BTreeSet::new(),
            next_chain: 0,
            next_seq: 0,
            in_flight: 0,
            fresh: false,
            last_progress_s: 0.0,
            stats: ProtocolStats::default(),
        })
    }

    pub fn ring(&self) -> &ServerRing {
        &self.ring
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn chains(&self) -> impl Iterator<Item = &ChainState> {
        self.chains.values()
    }

    fn launching(&self) -> bool {
        self.phase != Phase::ReverseCollection
    }

    fn begin_round(&mut self, ctx: &mut SimContext<FedHapMsg>) -> Result<(), SimError> {
        self.phase = Phase::ForwardDissemination;
        self.has_model.clear();
        self.held.clear();
        self.collect_inputs.clear();
        self.retained.clear();
        self.claimed.clear();
        self.fresh = false;
        self.last_progress_s = ctx.now();
        self.receive_model(self.ring.source(), ctx)
    }

    /// Server `h` now holds `w^β`: pass it on and start chains.
    fn receive_model(&mut self, h: u16, ctx: &mut SimContext<FedHapMsg>) -> Result<(), SimError> {
        if !self.has_model.insert(h) {
            return Ok(());
        }
        let bits = ctx.payload_bits(1);
        for next in self.ring.forward_next(h) {
            let msg = FedHapMsg::Forward {
                round: self.round,
                to: next,
            };
            if ctx
                .send(NodeId::Ground(h), NodeId::Ground(next), bits, self.round, msg)?
                .is_some()
            {
                self.in_flight += 1;
            }
        }
        for orbit in 0..self.constellation.orbits.len() as u16 {
            self.try_launch(h, orbit, ctx)?;
        }
        Ok(())
    }

    fn has_unclaimed(&self, orbit: u16) -> bool {
        self.constellation
            .orbit_members(orbit)
            .iter()
            .any(|s| !self.claimed.contains(s))
    }

    /// Starts a chain of `orbit` from server `h` if the orbit still has
    /// untrained satellites and `h` sees one of them now.
    fn try_launch(&mut self, h: u16, orbit: u16, ctx: &mut SimContext<FedHapMsg>) -> Result<(), SimError> {
        if !self.launching()
            || !self.has_model.contains(&h)
            || self.active.contains(&(orbit, h))
            || !self.has_unclaimed(orbit)
        {
            return Ok(());
        }
        let server = NodeId::Ground(h);
        let Some(entry) =
            select_entry_satellite(ctx.network.contacts(), &self.constellation, orbit, server, ctx.now())
        else {
            return Ok(());
        };
        let id = self.next_chain;
        let msg = FedHapMsg::Entry {
            round: self.round,
            chain: id,
        };
        let bits = ctx.payload_bits(1);
        if ctx.send(server, NodeId::Sat(entry), bits, self.round, msg)?.is_none() {
            return Ok(());
        }
        self.next_chain += 1;
        self.in_flight += 1;
        self.active.insert((orbit, h));
        self.chains.insert(
            id,
            ChainState {
                id,
                orbit,
                server: h,
                direction: self.config.direction,
                entry,
                holder: entry,
                hop_count: 0,
                carried: None,
            },
        );
        if self.phase == Phase::ForwardDissemination {
            self.phase = Phase::ChainsActive;
        }
        Ok(())
    }

    fn launch_everywhere(&mut self, ctx: &mut SimContext<FedHapMsg>) -> Result<(), SimError> {
        let servers: Vec<u16> = self.has_model.iter().copied().collect();
        for h in servers {
            for orbit in 0..self.constellation.orbits.len() as u16 {
                self.try_launch(h, orbit, ctx)?;
            }
        }
        Ok(())
    }

    /// Satellites the chain has not yet passed, excluding its entry.
    fn ahead(&self, chain: &ChainState) -> Vec<SatId> {
        let k = self.constellation.orbit(chain.orbit).map_or(0, |o| o.num_satellites);
        let mut out = Vec::new();
        let mut cur = chain.holder;
        for _ in (chain.hop_count + 1)..k {
            match self.constellation.ring_neighbor(cur, chain.direction) {
                Some(n) => {
                    out.push(n);
                    cur = n;
                }
                None => break,
            }
        }
        out
    }

    /// Holder of chain `id` has just arrived or finished training.
    fn arrive(&mut self, id: u64, ctx: &mut SimContext<FedHapMsg>) -> Result<(), SimError> {
        let sat = self.chains[&id].holder;
        if self.claimed.insert(sat) {
            let round = self.round;
            ctx.train(sat, &self.global, round, |local| FedHapMsg::Trained {
                round,
                chain: id,
                local,
            })?;
            self.in_flight += 1;
            return Ok(());
        }
        self.advance(id, ctx)
    }

    /// Upload, hop or stop, evaluated at the current instant.
    fn advance(&mut self, id: u64, ctx: &mut SimContext<FedHapMsg>) -> Result<(), SimError> {
        let now = ctx.now();
        let chain = self.chains[&id].clone();
        let k = self.constellation.orbit(chain.orbit).map_or(0, |o| o.num_satellites);
        let unclaimed_ahead = self.ahead(&chain).iter().any(|s| !self.claimed.contains(s));
        let can_move = chain.hop_count < k;
        let mut carried = chain.carried.clone();

        if let Some(p) = &carried {
            let terminal = p.covered.len() >= 2 || !unclaimed_ahead || !can_move;
            let server = best_visible_server(ctx.network.contacts(), self.ring.nodes(), chain.holder, now);
            if let (true, Some(h)) = (terminal, server) {
                let msg = FedHapMsg::Upload {
                    round: self.round,
                    to: h,
                    partial: p.clone(),
                };
                let bits = ctx.payload_bits(1);
                if ctx
                    .send(NodeId::Sat(chain.holder), NodeId::Ground(h), bits, self.round, msg)?
                    .is_some()
                {
                    self.in_flight += 1;
                } else {
                    self.release(p);
                    self.stats.expired_walks += 1;
                }
                carried = None;
            }
        }
        if let Some(c) = self.chains.get_mut(&id) {
            c.carried = carried.clone();
        }

        if carried.is_none() && !unclaimed_ahead {
            return self.end_chain(id, ctx);
        }
        if !can_move {
            if let Some(p) = &carried {
                self.release(p);
                self.stats.expired_walks += 1;
                ctx.note(
                    TraceKind::Reschedule,
                    Some(NodeId::Sat(chain.holder)),
                    self.round,
                    format!("chain of orbit {} expired after {} hops", chain.orbit, chain.hop_count),
                );
            }
            return self.end_chain(id, ctx);
        }
        let Some(next) = self.constellation.ring_neighbor(chain.holder, chain.direction) else {
            return self.end_chain(id, ctx);
        };
        let models = 1 + u64::from(carried.is_some());
        let bits = ctx.payload_bits(models);
        let msg = FedHapMsg::Hop {
            round: self.round,
            chain: id,
        };
        if ctx
            .send(NodeId::Sat(chain.holder), NodeId::Sat(next), bits, self.round, msg)?
            .is_none()
        {
            if let Some(p) = &carried {
                self.release(p);
                self.stats.expired_walks += 1;
            }
            return self.end_chain(id, ctx);
        }
        self.in_flight += 1;
        let c = self.chains.get_mut(&id).expect("chain exists");
        c.holder = next;
        c.hop_count += 1;
        Ok(())
    }

    /// Lost partial: its satellites become trainable again.
    fn release(&mut self, p: &PartialModel) {
        for s in &p.covered {
            self.claimed.remove(s);
        }
    }

    fn end_chain(&mut self, id: u64, ctx: &mut SimContext<FedHapMsg>) -> Result<(), SimError> {
        if let Some(c) = self.chains.remove(&id) {
            self.active.remove(&(c.orbit, c.server));
            self.try_launch(c.server, c.orbit, ctx)?;
        }
        Ok(())
    }

    fn stale(&mut self, round: u64) -> bool {
        if round != self.round {
            self.stats.stale_drops += 1;
            return true;
        }
        false
    }

    fn maybe_collect(&mut self, ctx: &mut SimContext<FedHapMsg>) -> Result<(), SimError> {
        if !self.launching() || !self.chains.is_empty() || self.in_flight > 0 || !self.fresh {
            return Ok(());
        }
        self.phase = Phase::ReverseCollection;
        self.fresh = false;
        self.collect_inputs.clear();
        let leaves = self.ring.reverse_leaves();
        if leaves.is_empty() {
            return self.finalize(ctx);
        }
        for leaf in leaves {
            self.forward_collection(leaf, ctx)?;
        }
        Ok(())
    }

    fn forward_collection(&mut self, h: u16, ctx: &mut SimContext<FedHapMsg>) -> Result<(), SimError> {
        let Some(next) = self.ring.reverse_next(h) else {
            return self.finalize(ctx);
        };
        let partials = self.held.remove(&h).unwrap_or_default();
        let bits = ctx.payload_bits(partials.len() as u64);
        let msg = FedHapMsg::Collect {
            round: self.round,
            to: next,
            partials,
        };
        if ctx
            .send(NodeId::Ground(h), NodeId::Ground(next), bits, self.round, msg)?
            .is_none()
        {
            return Err(SimError::Protocol(format!("no link from server {h} to {next}")));
        }
        Ok(())
    }

    fn finalize(&mut self, ctx: &mut SimContext<FedHapMsg>) -> Result<(), SimError> {
        let mut all = std::mem::take(&mut self.retained);
        all.extend(self.held.remove(&self.ring.source()).unwrap_or_default());
        all.sort_by(|a, b| a.arrived_s.total_cmp(&b.arrived_s).then(a.seq.cmp(&b.seq)));
        let partials: Vec<PartialModel> = all.iter().map(|r| r.partial.clone()).collect();
        let masses = ctx.env.masses();
        let filtered = organize_and_filter(&partials, &masses)?;
        let source = Some(NodeId::Ground(self.ring.source()));
        match global_aggregate(&filtered) {
            Ok((model, weights)) => {
                self.global = model;
                self.round += 1;
                self.stats.rounds += 1;
                ctx.note(
                    TraceKind::Aggregate,
                    source,
                    self.round,
                    format!(
                        "{} partials kept, {} dropped, weights {:?}",
                        filtered.kept.len(),
                        filtered.dropped,
                        weights
                    ),
                );
                let model = self.global.clone();
                ctx.record_metrics(&model, self.round)?;
                self.begin_round(ctx)
            }
            Err(LearningError::Reschedule { missing }) => {
                self.stats.reschedules += 1;
                ctx.note(
                    TraceKind::Reschedule,
                    source,
                    self.round,
                    format!(
                        "{} satellites missing in orbits {:?}",
                        missing.len(),
                        filtered.report.missing_orbits()
                    ),
                );
                // Kept partials come back in input order.
                let mut kept = filtered.kept.iter().peekable();
                self.retained = all
                    .into_iter()
                    .filter(|r| {
                        let hit = kept.peek().is_some_and(|k| k.partial == r.partial);
                        if hit {
                            kept.next();
                        }
                        hit
                    })
                    .collect();
                self.claimed = self
                    .retained
                    .iter()
                    .flat_map(|r| r.partial.covered.iter().copied())
                    .collect();
                self.phase = Phase::Rescheduled;
                self.launch_everywhere(ctx)
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Protocol for FedHap {
    type Msg = FedHapMsg;

    fn start(&mut self, ctx: &mut SimContext<FedHapMsg>) -> Result<(), SimError> {
        for &h in self.ring.nodes() {
            ctx.network
                .geometry()
                .ground_node(h)
                .ok_or(SimError::UnknownNode(NodeId::Ground(h)))?;
        }
        self.begin_round(ctx)
    }

    fn handle(&mut self, event: Event<FedHapMsg>, ctx: &mut SimContext<FedHapMsg>) -> Result<(), SimError> {
        match event.kind {
            EventKind::TransferComplete(msg) | EventKind::TrainingComplete(msg) => {
                self.on_message(msg, ctx)?
            }
            EventKind::WindowOpen { sat, ground } => {
                if let (Some(s), Some(h)) = (sat.as_sat(), ground.as_ground()) {
                    if self.ring.contains(h) {
                        self.try_launch(h, s.orbit, ctx)?;
                    }
                }
            }
            EventKind::WindowClose { .. } | EventKind::EvalCheckpoint => {}
        }
        self.maybe_collect(ctx)
    }

    fn on_checkpoint(&mut self, ctx: &mut SimContext<FedHapMsg>) -> Result<(), SimError> {
        let now = ctx.now();
        if now - self.last_progress_s >= self.config.watchdog_s {
            self.stats.watchdog_alerts += 1;
            let note = format!(
                "no progress in round {} for {:.0} s (phase {:?}, {} chains, {} in flight)",
                self.round,
                now - self.last_progress_s,
                self.phase,
                self.chains.len(),
                self.in_flight
            );
            log::warn!("{note}");
            ctx.note(TraceKind::Watchdog, None, self.round, note);
            self.last_progress_s = now;
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

impl FedHap {
    fn on_message(&mut self, msg: FedHapMsg, ctx: &mut SimContext<FedHapMsg>) -> Result<(), SimError> {
        match msg {
            FedHapMsg::Forward { round, to } => {
                self.in_flight -= 1;
                if !self.stale(round) {
                    self.receive_model(to, ctx)?;
                }
            }
            FedHapMsg::Entry { round, chain } | FedHapMsg::Hop { round, chain } => {
                self.in_flight -= 1;
                if !self.stale(round) && self.chains.contains_key(&chain) {
                    self.arrive(chain, ctx)?;
                }
            }
            FedHapMsg::Trained { round, chain, local } => {
                self.in_flight -= 1;
                if self.stale(round) || !self.chains.contains_key(&chain) {
                    return Ok(());
                }
                let sat = self.chains[&chain].holder;
                let n = ctx.env.mass(sat)?;
                let m = ctx.env.orbit_mass(sat.orbit);
                let c = self.chains.get_mut(&chain).expect("chain exists");
                match &mut c.carried {
                    Some(p) => p.absorb(sat, &local, n, m)?,
                    None => c.carried = Some(PartialModel::start(sat, local, n)?),
                }
                self.advance(chain, ctx)?;
            }
            FedHapMsg::Upload { round, to, partial } => {
                self.in_flight -= 1;
                if self.stale(round) {
                    return Ok(());
                }
                ctx.note(
                    TraceKind::PartialUpload,
                    Some(NodeId::Ground(to)),
                    round,
                    format!("orbit {} covering {} satellites", partial.orbit, partial.covered.len()),
                );
                let seq = self.next_seq;
                self.next_seq += 1;
                self.held.entry(to).or_default().push(ReceivedPartial {
                    arrived_s: ctx.now(),
                    seq,
                    server: to,
                    partial,
                });
                self.fresh = true;
                self.last_progress_s = ctx.now();
            }
            FedHapMsg::Collect { round, to, partials } => {
                if self.stale(round) {
                    return Ok(());
                }
                self.held.entry(to).or_default().extend(partials);
                let got = self.collect_inputs.entry(to).or_insert(0);
                *got += 1;
                if *got == self.ring.reverse_inputs(to) {
                    self.forward_collection(to, ctx)?;
                }
            }
        }
        Ok(())
    }
}
