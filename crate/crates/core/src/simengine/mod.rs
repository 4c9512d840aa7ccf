//! Deterministic discrete-event core: event queue, window-aware transfer
//! scheduling, training bookkeeping and metric/trace logging.

mod metrics;
mod network;
mod queue;

pub use metrics::{MetricsLog, MetricsRecord, Trace, TraceKind, TraceRecord};
pub use network::{Network, TransferPlan};
pub use queue::{Event, EventKind, EventQueue, SimClock};

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::learning::{
    derive_seed, evaluate, local_train, DataShard, Dataset, Evaluation, HyperParams,
    LearningError, MlpArchitecture, ModelVector,
};
use crate::links::{LinkClass, LinkError};
use crate::orbital::{NodeId, OrbitalError, SatId};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("event at {time_s} s scheduled before the clock ({now_s} s)")]
    PastEvent { time_s: f64, now_s: f64 },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error(transparent)]
    Orbital(#[from] OrbitalError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("output error: {0}")]
    Output(String),
}

/// Everything the satellites need to train and the servers need to
/// evaluate.
#[derive(Debug, Clone)]
pub struct LearningEnv {
    pub arch: MlpArchitecture,
    pub shards: BTreeMap<SatId, DataShard>,
    pub test: Dataset,
    pub hyper: HyperParams,
    pub seed: u64,
    pub initial_model: ModelVector,
}

impl LearningEnv {
    pub fn new(
        arch: MlpArchitecture,
        shards: Vec<DataShard>,
        test: Dataset,
        hyper: HyperParams,
        seed: u64,
        initial_model: ModelVector,
    ) -> Result<Self, SimError> {
        arch.validate()?;
        arch.check_model(&initial_model)?;
        hyper.validate()?;
        if test.is_empty() {
            return Err(LearningError::Empty("test set").into());
        }
        let mut map = BTreeMap::new();
        for s in shards {
            if map.insert(s.owner, s).is_some() {
                return Err(SimError::Protocol("two shards for one satellite".into()));
            }
        }
        Ok(Self {
            arch,
            shards: map,
            test,
            hyper,
            seed,
            initial_model,
        })
    }

    pub fn masses(&self) -> BTreeMap<SatId, u64> {
        self.shards.iter().map(|(&k, s)| (k, s.len() as u64)).collect()
    }

    pub fn mass(&self, sat: SatId) -> Result<u64, SimError> {
        self.shards
            .get(&sat)
            .map(|s| s.len() as u64)
            .ok_or(SimError::UnknownNode(NodeId::Sat(sat)))
    }

    pub fn orbit_mass(&self, orbit: u16) -> u64 {
        self.shards
            .range(SatId::new(orbit, 0)..=SatId::new(orbit, u16::MAX))
            .map(|(_, s)| s.len() as u64)
            .sum()
    }

    /// Local training of `sat` in `round`, seeded per (run, round, sat).
    pub fn train(&self, sat: SatId, model: &ModelVector, round: u64) -> Result<ModelVector, SimError> {
        let shard = self
            .shards
            .get(&sat)
            .ok_or(SimError::UnknownNode(NodeId::Sat(sat)))?;
        let hyper = HyperParams {
            rng_seed: derive_seed(self.seed, round, sat),
            ..self.hyper
        };
        Ok(local_train(&self.arch, model, shard, &hyper)?)
    }

    pub fn evaluate(&self, model: &ModelVector) -> Result<Evaluation, SimError> {
        Ok(evaluate(&self.arch, model, &self.test)?)
    }
}

/// Counters a protocol reports at the end of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProtocolStats {
    pub rounds: u64,
    pub reschedules: u64,
    pub expired_walks: u64,
    pub stale_drops: u64,
    pub watchdog_alerts: u64,
    pub updates: u64,
}

/// Mutable simulation state shared with the protocol handlers.
pub struct SimContext<M> {
    pub queue: EventQueue<M>,
    pub network: Network,
    pub env: LearningEnv,
    pub trace: Trace,
    pub metrics: MetricsLog,
    pub compute_delay_s: f64,
    pub target_accuracy: Option<f64>,
    cumulative_bits: u64,
    trained_since_row: BTreeSet<SatId>,
    stop: bool,
}

impl<M> SimContext<M> {
    pub fn new(
        network: Network,
        env: LearningEnv,
        horizon_s: f64,
        compute_delay_s: f64,
        target_accuracy: Option<f64>,
    ) -> Self {
        Self {
            queue: EventQueue::new(horizon_s),
            network,
            env,
            trace: Trace::default(),
            metrics: MetricsLog::default(),
            compute_delay_s,
            target_accuracy,
            cumulative_bits: 0,
            trained_since_row: BTreeSet::new(),
            stop: false,
        }
    }

    pub fn now(&self) -> f64 {
        self.queue.now()
    }

    pub fn horizon(&self) -> f64 {
        self.queue.clock().horizon_s
    }

    pub fn cumulative_bits(&self) -> u64 {
        self.cumulative_bits
    }

    pub fn stopped(&self) -> bool {
        self.stop
    }

    pub fn is_connected(&self, a: NodeId, b: NodeId) -> Result<bool, SimError> {
        self.network.is_connected(a, b, self.now())
    }

    /// Payload size of `models` model vectors plus metadata.
    pub fn payload_bits(&self, models: u64) -> u64 {
        self.network
            .links()
            .payload_bits(models, self.env.arch.param_count())
    }

    /// Schedules a transfer starting no earlier than now and queues
    /// `TransferComplete(msg)` at its completion. Returns `None` if the
    /// contact plan offers no window for it.
    pub fn send(
        &mut self,
        src: NodeId,
        dst: NodeId,
        payload_bits: u64,
        round: u64,
        msg: M,
    ) -> Result<Option<TransferPlan>, SimError> {
        let now = self.now();
        let Some(plan) = self.network.transmit(src, dst, payload_bits, now)? else {
            return Ok(None);
        };
        for &(s, e) in &plan.aborted {
            self.trace.push(TraceRecord {
                time_s: e,
                kind: TraceKind::TransferAborted,
                link: Some(plan.class),
                src: Some(src),
                dst: Some(dst),
                payload_bits,
                round,
                start_s: s,
                note: String::new(),
            });
        }
        self.trace.push(TraceRecord {
            time_s: plan.complete_s,
            kind: TraceKind::Transfer,
            link: Some(plan.class),
            src: Some(src),
            dst: Some(dst),
            payload_bits,
            round,
            start_s: plan.start_s,
            note: String::new(),
        });
        self.cumulative_bits += payload_bits;
        self.queue
            .schedule(plan.complete_s, EventKind::TransferComplete(msg))?;
        Ok(Some(plan))
    }

    /// Trains `sat` on `model` and queues `TrainingComplete(msg)` after the
    /// compute delay. `make_msg` receives the trained local model.
    pub fn train(
        &mut self,
        sat: SatId,
        model: &ModelVector,
        round: u64,
        make_msg: impl FnOnce(ModelVector) -> M,
    ) -> Result<f64, SimError> {
        let local = self.env.train(sat, model, round)?;
        let now = self.now();
        let done = now + self.compute_delay_s;
        self.trace.push(TraceRecord {
            time_s: done,
            kind: TraceKind::Train,
            link: None,
            src: Some(NodeId::Sat(sat)),
            dst: None,
            payload_bits: 0,
            round,
            start_s: now,
            note: String::new(),
        });
        self.trained_since_row.insert(sat);
        self.queue.schedule(done, EventKind::TrainingComplete(make_msg(local)))?;
        Ok(done)
    }

    /// Appends a non-transfer trace record at the current time.
    pub fn note(&mut self, kind: TraceKind, src: Option<NodeId>, round: u64, note: String) {
        let now = self.now();
        self.trace.push(TraceRecord {
            time_s: now,
            kind,
            link: None,
            src,
            dst: None,
            payload_bits: 0,
            round,
            start_s: now,
            note,
        });
    }

    /// Evaluates `model` on the test set and appends a metrics row. Sets the
    /// stop flag when the target accuracy is met.
    pub fn record_metrics(&mut self, model: &ModelVector, round: u64) -> Result<Evaluation, SimError> {
        let eval = self.env.evaluate(model)?;
        self.metrics.push(MetricsRecord {
            sim_time_s: self.now(),
            round,
            test_accuracy: eval.accuracy,
            test_loss: eval.loss,
            cumulative_bits: self.cumulative_bits,
            active_satellites: self.trained_since_row.len(),
        })?;
        self.trained_since_row.clear();
        if self.target_accuracy.is_some_and(|t| eval.accuracy >= t) {
            self.stop = true;
        }
        Ok(eval)
    }
}

/// Event handlers of one orchestration scheme.
pub trait Protocol {
    type Msg;

    fn start(&mut self, ctx: &mut SimContext<Self::Msg>) -> Result<(), SimError>;

    fn handle(&mut self, event: Event<Self::Msg>, ctx: &mut SimContext<Self::Msg>)
        -> Result<(), SimError>;

    /// Called at every periodic checkpoint, after the metrics row.
    fn on_checkpoint(&mut self, _ctx: &mut SimContext<Self::Msg>) -> Result<(), SimError> {
        Ok(())
    }

    fn global_model(&self) -> &ModelVector;

    fn round(&self) -> u64;

    fn stats(&self) -> ProtocolStats;
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub metrics: MetricsLog,
    pub trace: Trace,
    pub end_time_s: f64,
    /// The queue drained before the horizon.
    pub starved: bool,
    pub reached_target: bool,
    /// Bits sent over all links by the end of the run.
    pub total_bits: u64,
    pub stats: ProtocolStats,
    pub final_model: ModelVector,
}

impl RunOutcome {
    pub fn time_to_accuracy(&self, target: f64) -> Option<f64> {
        self.metrics.first_reaching(target).map(|r| r.sim_time_s)
    }
}

/// Runs `protocol` until the horizon, an empty queue or the target accuracy.
/// Window events are generated for every satellite–ground contact and a
/// metrics checkpoint fires at `t = 0` and every `checkpoint_s` thereafter.
pub fn run<P: Protocol>(
    protocol: &mut P,
    mut ctx: SimContext<P::Msg>,
    checkpoint_s: f64,
) -> Result<RunOutcome, SimError> {
    if !(checkpoint_s > 0.0) {
        return Err(SimError::Protocol("checkpoint interval must be positive".into()));
    }
    let horizon = ctx.horizon();
    let mut windows: Vec<(f64, EventKind<P::Msg>)> = Vec::new();
    for (a, b) in ctx.network.contacts().pairs() {
        let (sat, ground) = match (a, b) {
            (NodeId::Sat(_), NodeId::Ground(_)) => (a, b),
            (NodeId::Ground(_), NodeId::Sat(_)) => (b, a),
            _ => continue,
        };
        for &(s, e) in ctx.network.contacts().windows(a, b) {
            if e < 0.0 || s > horizon {
                continue;
            }
            windows.push((s.max(0.0), EventKind::WindowOpen { sat, ground }));
            windows.push((e.max(0.0), EventKind::WindowClose { sat, ground }));
        }
    }
    windows.sort_by(|x, y| x.0.total_cmp(&y.0));
    for (t, k) in windows {
        ctx.queue.schedule(t, k)?;
    }
    ctx.queue.schedule(0.0, EventKind::EvalCheckpoint)?;
    protocol.start(&mut ctx)?;

    let mut next_checkpoint = checkpoint_s;
    while let Some(ev) = ctx.queue.pop() {
        match ev.kind {
            EventKind::EvalCheckpoint => {
                let model = protocol.global_model().clone();
                ctx.record_metrics(&model, protocol.round())?;
                protocol.on_checkpoint(&mut ctx)?;
                if next_checkpoint <= horizon && !ctx.queue.is_empty() {
                    ctx.queue.schedule(next_checkpoint, EventKind::EvalCheckpoint)?;
                    next_checkpoint += checkpoint_s;
                }
            }
            _ => protocol.handle(ev, &mut ctx)?,
        }
        if ctx.stop {
            break;
        }
    }
    let starved = !ctx.stop && ctx.queue.is_empty() && ctx.now() < horizon;
    Ok(RunOutcome {
        end_time_s: ctx.now(),
        starved,
        reached_target: ctx.stop,
        total_bits: ctx.cumulative_bits,
        stats: protocol.stats(),
        final_model: protocol.global_model().clone(),
        metrics: ctx.metrics,
        trace: ctx.trace,
    })
}

/// Link class of a trace record, if it is a transfer.
pub fn transfer_class(rec: &TraceRecord) -> Option<LinkClass> {
    match rec.kind {
        TraceKind::Transfer => rec.link,
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::{two_gaussians, Activation};
    use crate::links::LinkConfig;
    use crate::orbital::{ConstellationSpec, ContactIndex, Geometry, PhysicalConstants};

    fn env() -> LearningEnv {
        let arch = MlpArchitecture::new(vec![2, 2], Activation::Relu).unwrap();
        let data = two_gaussians(40, 2, 6.0, 1);
        let shard = DataShard::new(SatId::new(0, 0), data.clone()).unwrap();
        let init = arch.init(0);
        LearningEnv::new(arch, vec![shard], data, HyperParams::default(), 0, init).unwrap()
    }

    fn empty_network() -> Network {
        let g = Geometry::new(ConstellationSpec::default(), vec![], PhysicalConstants::default(), 0.0)
            .unwrap();
        Network::new(g, ContactIndex::default(), LinkConfig::default())
    }

    struct Idle(ModelVector);

    impl Protocol for Idle {
        type Msg = ();
        fn start(&mut self, _: &mut SimContext<()>) -> Result<(), SimError> {
            Ok(())
        }
        fn handle(&mut self, _: Event<()>, _: &mut SimContext<()>) -> Result<(), SimError> {
            Ok(())
        }
        fn global_model(&self) -> &ModelVector {
            &self.0
        }
        fn round(&self) -> u64 {
            0
        }
        fn stats(&self) -> ProtocolStats {
            ProtocolStats::default()
        }
    }

    #[test]
    fn empty_scenario_exits_starved() {
        let e = env();
        let init = e.initial_model.clone();
        let ctx = SimContext::new(empty_network(), e, 1000.0, 60.0, None);
        let out = run(&mut Idle(init), ctx, 100.0).unwrap();
        assert!(out.starved);
        assert_eq!(out.metrics.rows().len(), 1);
        assert_eq!(out.end_time_s, 0.0);
    }

    /// Trains one satellite over and over, one event chain.
    struct Looper {
        model: ModelVector,
        rounds: u64,
    }

    impl Protocol for Looper {
        type Msg = ModelVector;
        fn start(&mut self, ctx: &mut SimContext<ModelVector>) -> Result<(), SimError> {
            ctx.train(SatId::new(0, 0), &self.model, 0, |m| m)?;
            Ok(())
        }
        fn handle(
            &mut self,
            ev: Event<ModelVector>,
            ctx: &mut SimContext<ModelVector>,
        ) -> Result<(), SimError> {
            if let EventKind::TrainingComplete(m) = ev.kind {
                self.model = m;
                self.rounds += 1;
                ctx.record_metrics(&self.model.clone(), self.rounds)?;
                ctx.train(SatId::new(0, 0), &self.model.clone(), self.rounds, |m| m)?;
            }
            Ok(())
        }
        fn global_model(&self) -> &ModelVector {
            &self.model
        }
        fn round(&self) -> u64 {
            self.rounds
        }
        fn stats(&self) -> ProtocolStats {
            ProtocolStats {
                rounds: self.rounds,
                ..ProtocolStats::default()
            }
        }
    }

    fn run_looper(target: Option<f64>) -> RunOutcome {
        let e = env();
        let model = e.initial_model.clone();
        let ctx = SimContext::new(empty_network(), e, 3000.0, 60.0, target);
        run(&mut Looper { model, rounds: 0 }, ctx, 600.0).unwrap()
    }

    #[test]
    fn runs_to_horizon_deterministically() {
        let a = run_looper(None);
        let b = run_looper(None);
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.trace, b.trace);
        assert!(!a.starved);
        assert_eq!(a.stats.rounds, 50);
        let times: Vec<f64> = a.metrics.rows().iter().map(|r| r.sim_time_s).collect();
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*times.last().unwrap(), 3000.0);
    }

    #[test]
    fn stops_at_first_row_meeting_target() {
        let full = run_looper(None);
        let target = 0.9;
        let first = full.metrics.first_reaching(target).expect("toy problem is separable");
        let early = run_looper(Some(target));
        assert!(early.reached_target);
        assert_eq!(early.end_time_s, first.sim_time_s);
        assert!(early.metrics.last().unwrap().test_accuracy >= target);
        assert_eq!(early.time_to_accuracy(target), Some(first.sim_time_s));
    }
}
