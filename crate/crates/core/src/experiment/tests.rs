use super::*;
use crate::orbital::{GroundKind, WindowSearch};

fn mnist_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

/// Small synthetic scenario: one HAP, 5×8 constellation, six hours.
fn tiny(algorithm: Algorithm) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        algorithm,
        horizon_s: 6.0 * 3600.0,
        checkpoint_s: 1800.0,
        ..ExperimentConfig::default()
    };
    cfg.data.mode = DataMode::Synthetic;
    cfg.data.samples_per_satellite = 20;
    cfg.data.test_samples = 200;
    cfg.learning.hidden_layers = vec![8];
    cfg.learning.learning_rate = 0.1;
    cfg.learning.local_epochs = 3;
    cfg.learning.batch_size = 5;
    cfg.contacts = WindowSearch {
        step_s: 30.0,
        refine_tol_s: 0.5,
    };
    cfg
}

#[test]
fn empty_config_is_the_default_setup() {
    let cfg = ExperimentConfig::from_toml("").unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
    assert_eq!(cfg.constellation.num_orbits, 5);
    assert_eq!(cfg.constellation.sats_per_orbit, 8);
    assert_eq!(cfg.constellation.altitude_m, 2.0e6);
    assert_eq!(cfg.constellation.inclination_deg, 80.0);
    assert_eq!(cfg.horizon_s, 259_200.0);
    let node = cfg.servers[0].to_node(0);
    assert_eq!(node.kind, GroundKind::Hap);
    assert_eq!(node.altitude_m, 20.0e3);
    assert!((node.min_elevation_rad - 10f64.to_radians()).abs() < 1e-15);
    assert_eq!(cfg.learning.batch_size, 32);
    assert_eq!(cfg.learning.learning_rate, 0.01);
    assert_eq!(cfg.links.rf.tx_power_dbm, 40.0);
    assert_eq!(cfg.links.rf.carrier_hz, 2.4e9);
    assert_eq!(cfg.links.fso.wind_speed_m_s, 21.0);
}

#[test]
fn negative_altitude_names_the_key() {
    let err = ExperimentConfig::from_toml("[constellation]\naltitude_m = -5.0\n").unwrap_err();
    match err {
        ExperimentError::Invalid { key, .. } => assert_eq!(key, "constellation.altitude_m"),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn unknown_keys_are_rejected_by_name() {
    let err = ExperimentConfig::from_toml("[learning]\nlearning_rat = 0.1\n").unwrap_err();
    assert!(err.to_string().contains("learning_rat"), "{err}");
    let err = ExperimentConfig::from_toml("horizon = 5\n").unwrap_err();
    assert!(err.to_string().contains("horizon"), "{err}");
}

#[test]
fn baselines_need_a_single_server() {
    let mut cfg = tiny(Algorithm::StarSync);
    cfg.servers.push(ServerConfig::dallas());
    let err = cfg.validate().unwrap_err();
    assert!(matches!(err, ExperimentError::Invalid { ref key, .. } if key == "servers"));
    cfg.algorithm = Algorithm::Fedhap;
    cfg.validate().unwrap();
}

#[test]
fn dump_then_load_is_identity() {
    let mut cfg = tiny(Algorithm::Async);
    cfg.target_accuracy = Some(0.65);
    cfg.outages.push(Outage {
        orbit: 2,
        start_s: 0.0,
        end_s: 86_400.0,
    });
    cfg.servers[0].kind = GroundKind::Gs;
    cfg.servers[0].altitude_m = Some(0.0);
    for c in [ExperimentConfig::default(), cfg] {
        let text = c.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml(), text);
    }
}

#[test]
fn load_config_resolves_data_dir_next_to_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, "seed = 3\n[data]\nmnist_dir = \"nowhere\"\n").unwrap();
    let err = load_config(&path).unwrap_err();
    assert!(matches!(err, ExperimentError::Invalid { ref key, .. } if key == "data.mnist_dir"));

    let text = format!("seed = 3\n[data]\nmnist_dir = {:?}\n", mnist_dir().display().to_string());
    std::fs::write(&path, text).unwrap();
    assert_eq!(load_config(&path).unwrap().seed, 3);
    assert!(load_config(&dir.path().join("missing.toml")).is_err());
}

#[test]
fn server_kinds_follow_the_algorithm() {
    let mut cfg = tiny(Algorithm::FedhapGs);
    cfg.servers.push(ServerConfig::dallas());
    let nodes = cfg.server_nodes();
    assert!(nodes.iter().all(|n| n.kind == GroundKind::Gs && n.altitude_m == 0.0));
    cfg.algorithm = Algorithm::Fedhap;
    assert!(cfg.server_nodes().iter().all(|n| n.kind == GroundKind::Hap));
    assert_eq!(cfg.server_nodes()[1].node_id, 1);
}

#[test]
fn zero_satellites_give_an_empty_plan() {
    let mut cfg = tiny(Algorithm::Fedhap);
    cfg.constellation.num_orbits = 0;
    assert!(export_contact_plan(&cfg).unwrap().is_empty());
}

#[test]
fn exported_plan_is_sorted_and_matches_dense_sampling() {
    let mut cfg = tiny(Algorithm::Fedhap);
    cfg.horizon_s = 4.0 * 3600.0;
    cfg.contacts = WindowSearch::default();
    let scenario = Scenario::build(&cfg).unwrap();
    let plan = &scenario.plan;
    assert!(!plan.is_empty());
    assert!(plan.windows.windows(2).all(|w| w[0].start_s <= w[1].start_s));
    // Spot-check ground windows: visible one second inside each edge and
    // invisible one second outside.
    let geo = &scenario.geometry;
    let mut checked = 0;
    for w in plan.windows.iter().filter(|w| w.b.as_ground().is_some() || w.a.as_ground().is_some()) {
        assert!(geo.is_visible(w.a, w.b, w.start_s + 1.0).unwrap());
        assert!(geo.is_visible(w.a, w.b, w.end_s - 1.0).unwrap());
        if w.start_s > 1.0 {
            assert!(!geo.is_visible(w.a, w.b, w.start_s - 1.0).unwrap());
        }
        if w.end_s < cfg.horizon_s - 1.0 {
            assert!(!geo.is_visible(w.a, w.b, w.end_s + 1.0).unwrap());
        }
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn outages_cut_ground_windows_of_the_orbit() {
    let mut cfg = tiny(Algorithm::Fedhap);
    cfg.outages.push(Outage {
        orbit: 1,
        start_s: 0.0,
        end_s: 3.0 * 3600.0,
    });
    let plan = export_contact_plan(&cfg).unwrap();
    for w in &plan.windows {
        let sat = w.a.as_sat().or(w.b.as_sat()).unwrap();
        let grounded = w.a.as_ground().is_some() || w.b.as_ground().is_some();
        if grounded && sat.orbit == 1 {
            assert!(w.start_s >= 3.0 * 3600.0);
        }
    }
}

#[test]
fn synthetic_fedhap_smoke_run_completes_rounds() {
    let cfg = tiny(Algorithm::Fedhap);
    let out = run_experiment(&cfg).unwrap();
    assert!(out.summary.rounds >= 1, "{}", out.summary);
    let rows = out.run.metrics.rows();
    assert!(rows.windows(2).all(|w| w[0].sim_time_s < w[1].sim_time_s));
    assert!(rows.windows(2).all(|w| w[0].cumulative_bits <= w[1].cumulative_bits));
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.test_accuracy)));
}

#[test]
fn identical_config_and_seed_give_identical_files() {
    let cfg = tiny(Algorithm::Fedhap);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&cfg).unwrap().write(a.path()).unwrap();
    run_experiment(&cfg).unwrap().write(b.path()).unwrap();
    for f in ["metrics.csv", "trace.jsonl", "contact_plan.json", "summary.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn summary_time_to_target_is_first_qualifying_row() {
    let mut cfg = tiny(Algorithm::Fedhap);
    let full = run_experiment(&cfg).unwrap();
    let best = full
        .run
        .metrics
        .rows()
        .iter()
        .map(|r| r.test_accuracy)
        .fold(0.0, f64::max);
    let first_acc = full.run.metrics.rows()[0].test_accuracy;
    assert!(best > first_acc + 0.1, "tiny scenario does not learn");
    let target = (first_acc + best) / 2.0;
    cfg.target_accuracy = Some(target);
    let early = run_experiment(&cfg).unwrap();
    let csv = MetricsLogRows::parse(&early.run.metrics.to_csv());
    let first = csv.iter().find(|(_, acc)| *acc >= target).map(|(t, _)| *t);
    assert_eq!(early.summary.time_to_target_s, first);
    assert!(early.run.reached_target);
}

#[test]
fn every_algorithm_runs_on_the_tiny_scenario() {
    for alg in [Algorithm::FedhapGs, Algorithm::StarSync, Algorithm::Async] {
        let out = run_experiment(&tiny(alg)).unwrap();
        assert!(out.summary.stats.updates > 0 || out.summary.rounds > 0, "{alg:?}");
    }
}

/// Reads `(sim_time_s, test_accuracy)` back from CSV text independently of
/// the writer.
struct MetricsLogRows;

impl MetricsLogRows {
    fn parse(text: &str) -> Vec<(f64, f64)> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let ti = header.iter().position(|h| *h == "sim_time_s").unwrap();
        let ai = header.iter().position(|h| *h == "test_accuracy").unwrap();
        lines
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[ti].parse().unwrap(), f[ai].parse().unwrap())
            })
            .collect()
    }
}
