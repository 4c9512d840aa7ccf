//! Scenario tests on hand-built contact plans.

use std::collections::{BTreeMap, BTreeSet};

use super::*;
use crate::learning::{two_gaussians, Activation, DataShard, HyperParams, MlpArchitecture, ModelVector};
use crate::links::{LinkClass, LinkConfig};
use crate::orbital::{
    ContactWindow, ElevationReference, Geometry, GroundKind, GroundNodeSpec, PhysicalConstants,
};
use crate::simengine::{
    run, EventKind, LearningEnv, Network, Protocol, SimContext, TraceKind, TraceRecord,
};

const END: f64 = 1.0e6;
const N: usize = 20;

fn server(id: u16, kind: GroundKind) -> GroundNodeSpec {
    GroundNodeSpec {
        node_id: id,
        name: format!("node{id}"),
        kind,
        latitude_rad: 0.6,
        longitude_rad: -1.6 + 0.02 * f64::from(id),
        altitude_m: if kind == GroundKind::Hap { 20.0e3 } else { 0.0 },
        min_elevation_rad: 10f64.to_radians(),
        elevation_reference: ElevationReference::ApparentHorizon,
    }
}

fn constellation(l: u16, k: u16) -> ConstellationSpec {
    ConstellationSpec::walker_delta(l, k, 2.0e6, 80f64.to_radians(), std::f64::consts::PI, 1.0)
        .unwrap()
}

fn w(a: NodeId, b: NodeId, s: f64, e: f64) -> ContactWindow {
    ContactWindow {
        a,
        b,
        start_s: s,
        end_s: e,
    }
}

fn sat(o: u16, s: u16) -> NodeId {
    NodeId::Sat(SatId::new(o, s))
}

/// Permanent ISL windows between ring neighbours.
fn isl(c: &ConstellationSpec) -> Vec<ContactWindow> {
    c.satellites()
        .map(|s| {
            let n = c.ring_neighbor(s, Direction::Clockwise).unwrap();
            w(NodeId::Sat(s), NodeId::Sat(n), 0.0, END)
        })
        .collect()
}

fn all_visible(c: &ConstellationSpec, servers: &[u16]) -> Vec<ContactWindow> {
    let mut out = isl(c);
    for s in c.satellites() {
        for &h in servers {
            out.push(w(NodeId::Sat(s), NodeId::Ground(h), 0.0, END));
        }
    }
    out
}

fn context<M>(
    c: &ConstellationSpec,
    grounds: Vec<GroundNodeSpec>,
    windows: Vec<ContactWindow>,
    horizon: f64,
) -> SimContext<M> {
    let geometry = Geometry::new(c.clone(), grounds, PhysicalConstants::default(), 0.0).unwrap();
    let network = Network::new(geometry, ContactIndex::from_windows(windows), LinkConfig::default());
    let arch = MlpArchitecture::new(vec![2, 3, 2], Activation::Relu).unwrap();
    let shards = c
        .satellites()
        .enumerate()
        .map(|(i, s)| DataShard::new(s, two_gaussians(N, 2, 3.0, 100 + i as u64)).unwrap())
        .collect();
    let init = arch.init(7);
    let env = LearningEnv::new(
        arch,
        shards,
        two_gaussians(200, 2, 3.0, 1),
        HyperParams::default(),
        11,
        init,
    )
    .unwrap();
    SimContext::new(network, env, horizon, 60.0, None)
}

/// Feeds events to `p` until `done` holds, skipping window and checkpoint
/// events.
fn drive<P: Protocol>(p: &mut P, ctx: &mut SimContext<P::Msg>, done: impl Fn(&P) -> bool) {
    p.start(ctx).unwrap();
    while let Some(ev) = ctx.queue.pop() {
        if matches!(ev.kind, EventKind::EvalCheckpoint) {
            continue;
        }
        p.handle(ev, ctx).unwrap();
        if done(p) {
            return;
        }
    }
    panic!("scenario ran dry at {} s", ctx.now());
}

fn fedhap(c: &ConstellationSpec, servers: Vec<u16>, init: &ModelVector) -> FedHap {
    FedHap::new(
        ServerRing::new(servers).unwrap(),
        c.clone(),
        ProtocolConfig::default(),
        init.clone(),
    )
    .unwrap()
}

/// Every non-IHL transfer lies inside one contact window.
fn assert_backed_by_contacts(records: &[TraceRecord], contacts: &ContactIndex) {
    for r in records.iter().filter(|r| r.kind == TraceKind::Transfer) {
        if r.link == Some(LinkClass::Ihl) {
            continue;
        }
        let (a, b) = (r.src.unwrap(), r.dst.unwrap());
        let (s, e) = contacts
            .window_at(a, b, r.start_s)
            .unwrap_or_else(|| panic!("transfer {a}->{b} at {} s without contact", r.start_s));
        assert!(s <= r.start_s && r.time_s <= e);
    }
}

fn uploads(records: &[TraceRecord], round: u64) -> Vec<&TraceRecord> {
    records
        .iter()
        .filter(|r| r.kind == TraceKind::PartialUpload && r.round == round)
        .collect()
}

#[test]
fn all_visible_round_matches_explicit_convex_weights() {
    let c = constellation(2, 4);
    let mut ctx = context(&c, vec![server(0, GroundKind::Hap)], all_visible(&c, &[0]), 1.0e5);
    let init = ctx.env.initial_model.clone();
    let mut p = fedhap(&c, vec![0], &init);
    drive(&mut p, &mut ctx, |p| p.round() == 1);

    // Chains start at slot 0 and hand in a partial at every second
    // satellite: {0,1} and {2,3} per orbit. Within a pair the second member
    // enters with γ = n / (4n); each pair then weighs 2n / 8n.
    let gamma = 0.25;
    let mut coeffs = BTreeMap::new();
    for o in 0..2 {
        for pair in [(0, 1), (2, 3)] {
            coeffs.insert(SatId::new(o, pair.0), 0.25 * (1.0 - gamma));
            coeffs.insert(SatId::new(o, pair.1), 0.25 * gamma);
        }
    }
    let total: f64 = coeffs.values().sum();
    assert!((total - 1.0).abs() < 1e-15);
    // FedAvg would give each satellite 1/8; the chain weighting does not.
    assert!(coeffs.values().any(|&c| (c - 0.125).abs() > 1e-3));

    let mut expected = vec![0.0; init.len()];
    for (&s, &k) in &coeffs {
        let local = ctx.env.train(s, &init, 0).unwrap();
        for (e, v) in expected.iter_mut().zip(&local.values) {
            *e += k * v;
        }
    }
    for (g, e) in p.global_model().values.iter().zip(&expected) {
        assert!((g - e).abs() < 1e-12, "{g} vs {e}");
    }
    let ups = uploads(ctx.trace.records(), 0);
    assert_eq!(ups.len(), 4);
    assert!(ups.iter().all(|r| r.note.ends_with("covering 2 satellites")));
    assert_backed_by_contacts(ctx.trace.records(), ctx.network.contacts());
}

#[test]
fn single_visible_satellite_makes_chain_wrap_the_ring() {
    let c = constellation(2, 4);
    let mut windows = isl(&c);
    for o in 0..2 {
        windows.push(w(sat(o, 0), NodeId::Ground(0), 0.0, END));
    }
    let mut ctx = context(&c, vec![server(0, GroundKind::Hap)], windows, 1.0e5);
    let init = ctx.env.initial_model.clone();
    let mut p = fedhap(&c, vec![0], &init);
    drive(&mut p, &mut ctx, |p| p.round() == 1);

    let recs = ctx.trace.records();
    let isl_hops = recs
        .iter()
        .filter(|r| r.kind == TraceKind::Transfer && r.link == Some(LinkClass::Isl) && r.round == 0)
        .count();
    assert_eq!(isl_hops, 8);
    let ups = uploads(recs, 0);
    assert_eq!(ups.len(), 2);
    assert!(ups.iter().all(|r| r.note.ends_with("covering 4 satellites")));
    // Each upload leaves from the entry satellite after the full loop.
    let sources: BTreeSet<NodeId> = recs
        .iter()
        .filter(|r| r.kind == TraceKind::Transfer && r.link == Some(LinkClass::Shl) && r.round == 0)
        .filter(|r| r.src.unwrap().as_sat().is_some())
        .map(|r| r.src.unwrap())
        .collect();
    assert_eq!(sources, [sat(0, 0), sat(1, 0)].into_iter().collect());
    assert_backed_by_contacts(recs, ctx.network.contacts());
}

#[test]
fn satellite_visible_by_arrival_ends_the_chain_there() {
    let c = constellation(1, 4);
    let mut windows = isl(&c);
    windows.push(w(sat(0, 0), NodeId::Ground(0), 0.0, END));
    // Slot 2 comes into view after launch but before the chain reaches it.
    windows.push(w(sat(0, 2), NodeId::Ground(0), 100.0, END));
    let mut ctx = context(&c, vec![server(0, GroundKind::Hap)], windows, 1.0e5);
    let init = ctx.env.initial_model.clone();
    let mut p = fedhap(&c, vec![0], &init);
    drive(&mut p, &mut ctx, |p| p.round() == 1);

    let recs = ctx.trace.records();
    let ups: Vec<_> = recs
        .iter()
        .filter(|r| r.kind == TraceKind::Transfer && r.link == Some(LinkClass::Shl))
        .filter(|r| r.src.unwrap().as_sat().is_some() && r.round == 0)
        .collect();
    assert_eq!(ups[0].src, Some(sat(0, 2)));
    assert!(ups[0].start_s >= 100.0);
    let notes = uploads(recs, 0);
    assert!(notes[0].note.ends_with("covering 3 satellites"));
    assert!(notes[1].note.ends_with("covering 1 satellites"));
}

#[test]
fn expired_chain_reschedules_and_retained_partials_finish_the_round() {
    let c = constellation(2, 4);
    let mut windows = isl(&c);
    for s in 0..4 {
        windows.push(w(sat(0, s), NodeId::Ground(0), 0.0, END));
    }
    // Orbit 1's only visible satellite drops out before its chain returns
    // and comes back much later.
    windows.push(w(sat(1, 0), NodeId::Ground(0), 0.0, 100.0));
    windows.push(w(sat(1, 0), NodeId::Ground(0), 5000.0, END));
    let ctx = context(&c, vec![server(0, GroundKind::Hap)], windows, 6000.0);
    let init = ctx.env.initial_model.clone();
    let mut p = fedhap(&c, vec![0], &init);
    let out = run(&mut p, ctx, 3600.0).unwrap();

    assert!(out.stats.expired_walks >= 1);
    assert!(out.stats.reschedules >= 1);
    assert!(out.stats.rounds >= 1);
    let recs = out.trace.records();
    let first_agg = recs.iter().find(|r| r.kind == TraceKind::Aggregate).unwrap();
    assert!(first_agg.time_s > 5000.0);
    let first_resched = recs.iter().find(|r| r.kind == TraceKind::Reschedule).unwrap();
    assert!(first_resched.time_s < 5000.0);
    // Orbit 0 was not re-trained after the reschedule.
    let retrained: Vec<_> = recs
        .iter()
        .filter(|r| r.kind == TraceKind::Train && r.round == 0 && r.start_s > 1000.0)
        .map(|r| r.src.unwrap().as_sat().unwrap().orbit)
        .collect();
    assert!(!retrained.is_empty());
    assert!(retrained.iter().all(|&o| o == 1));
}

#[test]
fn five_server_ring_uses_four_links_each_way() {
    let c = constellation(2, 4);
    let ids = vec![1, 2, 3, 4, 5];
    let grounds = ids.iter().map(|&i| server(i, GroundKind::Hap)).collect();
    let mut ctx = context(&c, grounds, all_visible(&c, &ids), 1.0e5);
    let init = ctx.env.initial_model.clone();
    let mut p = fedhap(&c, ids, &init);
    drive(&mut p, &mut ctx, |p| p.round() == 1);

    let ihl: Vec<_> = ctx
        .trace
        .records()
        .iter()
        .filter(|r| r.kind == TraceKind::Transfer && r.link == Some(LinkClass::Ihl) && r.round == 0)
        .collect();
    assert_eq!(ihl.len(), 8);
    let away_from_source = ihl
        .iter()
        .filter(|r| matches!((r.src, r.dst), (Some(NodeId::Ground(1)), _) | (Some(NodeId::Ground(2)), Some(NodeId::Ground(3))) | (Some(NodeId::Ground(5)), Some(NodeId::Ground(4)))))
        .count();
    assert_eq!(away_from_source, 4);
    assert_backed_by_contacts(ctx.trace.records(), ctx.network.contacts());
}

#[test]
fn single_server_has_no_ihl_traffic() {
    let c = constellation(2, 4);
    let mut ctx = context(&c, vec![server(0, GroundKind::Hap)], all_visible(&c, &[0]), 1.0e5);
    let init = ctx.env.initial_model.clone();
    let mut p = fedhap(&c, vec![0], &init);
    drive(&mut p, &mut ctx, |p| p.round() == 2);
    assert!(ctx.trace.records().iter().all(|r| r.link != Some(LinkClass::Ihl)));
}

#[test]
fn reverse_transfer_carries_every_partial_of_the_sink() {
    let c = constellation(2, 4);
    let grounds = vec![server(0, GroundKind::Hap), server(1, GroundKind::Hap)];
    let mut ctx = context(&c, grounds, all_visible(&c, &[0, 1]), 1.0e5);
    let init = ctx.env.initial_model.clone();
    let mut p = fedhap(&c, vec![0, 1], &init);
    drive(&mut p, &mut ctx, |p| p.round() == 1);

    let recs = ctx.trace.records();
    let at_sink = uploads(recs, 0)
        .iter()
        .filter(|r| r.src == Some(NodeId::Ground(1)))
        .count() as u64;
    let back: Vec<_> = recs
        .iter()
        .filter(|r| r.kind == TraceKind::Transfer && r.src == Some(NodeId::Ground(1)))
        .filter(|r| r.dst == Some(NodeId::Ground(0)) && r.round == 0)
        .collect();
    assert_eq!(back.len(), 1);
    let params = ctx.env.arch.param_count() as u64;
    assert_eq!(back[0].payload_bits, at_sink * params * 32 + 1024);

    let links = ctx.network.links();
    let geo = ctx.network.geometry();
    let (a, b) = (NodeId::Ground(0), NodeId::Ground(1));
    let d = geo.distance(a, b, back[0].start_s).unwrap();
    let delay = links
        .transfer_delay(
            links.media.ihl,
            back[0].payload_bits,
            d,
            20.0e3,
            0.0,
            0.0,
            geo.consts(),
        )
        .unwrap()
        .total();
    assert!((back[0].time_s - back[0].start_s - delay).abs() < 1e-9);
}

#[test]
fn aggregated_satellites_trained_on_the_round_model() {
    let c = constellation(2, 4);
    let grounds = vec![server(0, GroundKind::Hap), server(1, GroundKind::Hap)];
    let mut windows = isl(&c);
    // Staggered passes so chains of both servers overlap.
    for s in c.satellites() {
        let off = f64::from(s.slot) * 150.0 + f64::from(s.orbit) * 40.0;
        windows.push(w(NodeId::Sat(s), NodeId::Ground(0), off, off + 400.0));
        windows.push(w(NodeId::Sat(s), NodeId::Ground(1), off + 200.0, off + 500.0));
        windows.push(w(NodeId::Sat(s), NodeId::Ground(0), off + 3000.0, END));
    }
    let ctx = context(&c, grounds, windows, 20_000.0);
    let init = ctx.env.initial_model.clone();
    let contacts = ctx.network.contacts().clone();
    let mut p = fedhap(&c, vec![0, 1], &init);
    let out = run(&mut p, ctx, 3600.0).unwrap();
    assert!(out.stats.rounds >= 2);

    let recs = out.trace.records();
    assert_backed_by_contacts(recs, &contacts);
    for round in 0..out.stats.rounds {
        let trained: BTreeSet<NodeId> = recs
            .iter()
            .filter(|r| r.kind == TraceKind::Train && r.round == round)
            .map(|r| r.src.unwrap())
            .collect();
        assert_eq!(trained.len(), 8, "round {round}");
    }
    // No training of round r after round r was aggregated.
    let agg_times: Vec<f64> = recs
        .iter()
        .filter(|r| r.kind == TraceKind::Aggregate)
        .map(|r| r.time_s)
        .collect();
    for r in recs.iter().filter(|r| r.kind == TraceKind::Train) {
        if let Some(&t) = agg_times.get(r.round as usize) {
            assert!(r.start_s <= t);
        }
    }
}

#[test]
fn identical_inputs_give_identical_traces() {
    let go = || {
        let c = constellation(2, 4);
        let grounds = vec![server(0, GroundKind::Hap), server(1, GroundKind::Hap)];
        let ctx = context(&c, grounds, all_visible(&c, &[0, 1]), 5000.0);
        let init = ctx.env.initial_model.clone();
        let mut p = fedhap(&c, vec![0, 1], &init);
        run(&mut p, ctx, 600.0).unwrap()
    };
    let (a, b) = (go(), go());
    assert_eq!(a.trace.to_jsonl(), b.trace.to_jsonl());
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.final_model, b.final_model);
}

#[test]
fn star_sync_round_is_fedavg_and_waits_for_everyone() {
    let c = constellation(2, 4);
    let mut windows = Vec::new();
    for s in c.satellites() {
        // Slot 3 only returns much later.
        let (a, b) = if s.slot == 3 { (2000.0, END) } else { (0.0, END) };
        windows.push(w(NodeId::Sat(s), NodeId::Ground(0), a, b));
    }
    let mut ctx = context(&c, vec![server(0, GroundKind::Gs)], windows, 1.0e5);
    let init = ctx.env.initial_model.clone();
    let sats: Vec<SatId> = c.satellites().collect();
    let mut p = StarSync::new(0, sats.clone(), init.clone());
    drive(&mut p, &mut ctx, |p| p.round() == 1);
    assert!(ctx.now() > 2060.0);

    let locals: Vec<ModelVector> = sats.iter().map(|&s| ctx.env.train(s, &init, 0).unwrap()).collect();
    for (i, g) in p.global_model().values.iter().enumerate() {
        let mean = locals.iter().map(|m| m.values[i]).sum::<f64>() / locals.len() as f64;
        assert!((g - mean).abs() < 1e-12);
    }
    assert_backed_by_contacts(ctx.trace.records(), ctx.network.contacts());
}

#[test]
fn async_with_full_step_tracks_the_uploading_satellite() {
    let c = constellation(1, 2);
    let windows = vec![w(sat(0, 0), NodeId::Ground(0), 0.0, END)];
    let mut ctx = context(&c, vec![server(0, GroundKind::Gs)], windows, 1.0e5);
    let init = ctx.env.initial_model.clone();
    let only = SatId::new(0, 0);
    let mut p = AsyncFl::new(0, vec![only], 1.0, init.clone()).unwrap();
    assert_eq!(p.eta(3, 3), 1.0);
    drive(&mut p, &mut ctx, |p| p.version() == 1);
    let local = ctx.env.train(only, &init, 0).unwrap();
    assert_eq!(p.global_model(), &local);
    // The fresh model goes down again on the same pass, right after each
    // upload lands.
    drive_more(&mut p, &mut ctx, |p| p.version() == 2);
    let recs = ctx.trace.records();
    let ups: Vec<f64> = recs
        .iter()
        .filter(|r| r.kind == TraceKind::Transfer && r.dst == Some(NodeId::Ground(0)))
        .map(|r| r.time_s)
        .collect();
    let downs: Vec<f64> = recs
        .iter()
        .filter(|r| r.kind == TraceKind::Transfer && r.src == Some(NodeId::Ground(0)))
        .map(|r| r.start_s)
        .collect();
    assert_eq!(downs.len(), 3);
    assert_eq!(&downs[1..], &ups[..]);
}

#[test]
fn async_discount_halves_per_round_of_staleness() {
    let init = ModelVector::zeros(3);
    let sats: Vec<SatId> = (0..4).map(|s| SatId::new(0, s)).collect();
    let p = AsyncFl::new(0, sats, 0.5, init).unwrap();
    assert_eq!(p.eta(10, 10), 0.5);
    assert_eq!(p.eta(6, 10), 0.25);
    assert_eq!(p.eta(2, 10), 0.5 / 3.0);
    assert!(AsyncFl::new(0, vec![], 0.5, ModelVector::zeros(1)).is_err());
}

fn drive_more<P: Protocol>(p: &mut P, ctx: &mut SimContext<P::Msg>, done: impl Fn(&P) -> bool) {
    while let Some(ev) = ctx.queue.pop() {
        if !matches!(ev.kind, EventKind::EvalCheckpoint) {
            p.handle(ev, ctx).unwrap();
        }
        if done(p) {
            return;
        }
    }
    panic!("scenario ran dry");
}
