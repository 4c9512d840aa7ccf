use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fedhap::experiment::{
    export_contact_plan, link_budget, load_config, prepare_data, run_with_data, DataMode,
    ExperimentConfig,
};
use fedhap::learning::{partition_iid, partition_noniid, stream_seed};

#[derive(Parser)]
#[command(name = "fedhap", version, about = "Satellite federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write metrics, trace, contact plan and summary.
    Run(RunArgs),
    /// Compute the contact plan of the configured geometry.
    ContactPlan(PlanArgs),
    /// Print the RF and FSO link budget for one model transfer.
    LinkBudget(BudgetArgs),
    /// Load the configured dataset and report its shape and partition.
    DatasetCheck(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML experiment config. Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the simulated horizon.
    #[arg(long)]
    horizon_s: Option<f64>,
    /// Override the seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated seed list; each run goes to `<out-dir>/seed-<n>`.
    #[arg(long, value_delimiter = ',', conflicts_with = "seed")]
    seeds: Vec<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Stop once test accuracy reaches this fraction.
    #[arg(long)]
    target_accuracy: Option<f64>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BudgetArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Link distance.
    #[arg(long, default_value_t = 2.0e6)]
    distance_m: f64,
    /// Altitude used for the turbulence profile.
    #[arg(long, default_value_t = 20.0e3)]
    altitude_m: f64,
    /// Emit JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn config(args: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(h) = args.horizon_s {
        cfg.horizon_s = h;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = config(&args.common)?;
    if args.target_accuracy.is_some() {
        cfg.target_accuracy = args.target_accuracy;
        cfg.validate()?;
    }
    let seeds = if args.seeds.is_empty() { vec![cfg.seed] } else { args.seeds.clone() };
    let data = prepare_data(&cfg)?;
    for &seed in &seeds {
        cfg.seed = seed;
        let dir = if args.seeds.is_empty() {
            args.out_dir.clone()
        } else {
            args.out_dir.join(format!("seed-{seed}"))
        };
        log::info!("running {} seed {seed}", cfg.algorithm.name());
        let out = run_with_data(&cfg, &data)?;
        out.write(&dir)?;
        println!("{}", out.summary);
        println!("output           {}\n", dir.display());
    }
    Ok(())
}

fn contact_plan(args: PlanArgs) -> Result<()> {
    let cfg = config(&args.common)?;
    let json = export_contact_plan(&cfg)?.to_json();
    match args.out {
        Some(p) => std::fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn budget(args: BudgetArgs) -> Result<()> {
    let cfg = config(&args.common)?;
    if !(args.distance_m > 0.0) {
        bail!("--distance-m must be > 0");
    }
    let lines = link_budget(&cfg, args.distance_m, args.altitude_m)?;
    if args.json {
        let rows: Vec<_> = lines
            .iter()
            .map(|l| serde_json::json!({ "quantity": l.quantity, "value": l.value, "unit": l.unit }))
            .collect();
        println!("{}", serde_json::to_string_pretty(&rows)?);
        return Ok(());
    }
    let width = lines.iter().map(|l| l.quantity.len()).max().unwrap_or(0);
    for l in &lines {
        println!("{:<width$}  {:>16.6e}  {}", l.quantity, l.value, l.unit);
    }
    Ok(())
}

fn dataset_check(args: CommonArgs) -> Result<()> {
    let cfg = config(&args)?;
    let data = prepare_data(&cfg)?;
    for (name, d) in [("train", &data.train), ("test", &data.test)] {
        println!("{name:<5} {} samples, {} features, classes {:?}", d.len(), d.dim(), d.class_histogram());
    }
    let constellation = cfg.constellation.build()?;
    let sats: Vec<_> = constellation.satellites().collect();
    let seed = stream_seed(cfg.seed, 1);
    let per_sat = Some(cfg.data.samples_per_satellite);
    let shards = match cfg.data.mode {
        DataMode::Noniid => partition_noniid(&data.train, &constellation, seed, per_sat)?,
        DataMode::Iid | DataMode::Synthetic => partition_iid(&data.train, &sats, seed, per_sat)?,
    };
    for s in &shards {
        let present: Vec<usize> = s
            .data
            .class_histogram()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, _)| k)
            .collect();
        println!("{:<8} {:>5} samples, classes {present:?}", s.owner.to_string(), s.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::ContactPlan(a) => contact_plan(a),
        Command::LinkBudget(a) => budget(a),
        Command::DatasetCheck(a) => dataset_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
