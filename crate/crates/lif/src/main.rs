use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lif::config::ExperimentConfig;
use lif::error::{Error, Result};
use lif::{diagnose, experiment, io};
use lif_core::{optimize, Lattice};

#[derive(Parser)]
#[command(name = "lif", version, about = "Matérn covariance estimation with the local interaction fit")]
struct Cli {
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Existing output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the master seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one field and write lattice, filters, partition and sample.
    Simulate(Common),
    /// Estimate from a lattice and sample on disk.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lattice: PathBuf,
        #[arg(long)]
        sample: PathBuf,
        /// Partition CSV; built from the configuration when omitted.
        #[arg(long)]
        partition: Option<PathBuf>,
    },
    /// Run all replicates of a configuration.
    Experiment(Common),
    /// Regularity, effective-rank and decay diagnostics.
    Diagnose(Common),
    /// Check the regularity of a lattice file.
    VerifyLattice {
        #[arg(long)]
        lattice: PathBuf,
        #[arg(long, default_value_t = 100)]
        sites: usize,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if !common.out.is_dir() {
        return Err(Error::Config(format!("output directory {} does not exist", common.out.display())));
    }
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn simulate(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let s = experiment::setup(&cfg, 0)?;
    let raw = s.sampler.sample(experiment::field_seed(&cfg, 0), 0);
    let part = experiment::build_partition(&cfg, &s.lattice, 0)?;
    let out = &common.out;
    io::write_lattice(&out.join("lattice.csv"), &s.lattice, cfg.lattice.delta, experiment::lattice_seed(&cfg, 0))?;
    io::write_coeffs(&out.join("coeffs.csv"), &s.coeffs)?;
    io::write_partition(&out.join("partition.csv"), &part)?;
    io::write_sample(&out.join("sample.csv"), &raw)?;
    log::info!("wrote {} sites to {}", s.lattice.len(), out.display());
    Ok(())
}

fn estimate(common: &Common, lattice: &Path, sample: &Path, partition: Option<&Path>) -> Result<()> {
    let cfg = load(common)?;
    let (lat, _) = io::read_lattice(lattice)?;
    let raw = io::read_sample(sample)?;
    let truth = cfg.truth.params()?;
    let pc = lif_core::precondition::precondition_all(&lat, cfg.precondition.m, truth.nu)?;
    let y = pc.apply(&raw)?;
    let part = match partition {
        Some(p) => io::read_partition(p)?,
        None => experiment::build_partition(&cfg, &lat, 0)?,
    };
    let res = optimize::estimate(
        &lat,
        &y,
        &pc,
        &part,
        &cfg.estimation.optimizer(),
        &cfg.estimation.mode(),
        Some(&truth),
    )?;
    io::write_json(&common.out.join("estimate.json"), &res)?;
    print_json(&res)
}

fn run_experiment(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let out = experiment::run(&cfg)?;
    experiment::write_outputs(&common.out, &cfg, &out)?;
    print_json(&out.summary)
}

fn run_diagnose(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let d = diagnose::diagnose(&cfg)?;
    io::write_json(&common.out.join("diagnostics.json"), &d)?;
    print_json(&d)
}

fn verify_lattice(path: &Path, sites: usize) -> Result<()> {
    let (lat, _): (Lattice, _) = io::read_lattice(path)?;
    print_json(&lat.verify_regularity(sites))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Estimate { common, lattice, sample, partition } => {
            estimate(common, lattice, sample, partition.as_deref())
        }
        Command::Experiment(c) => run_experiment(c),
        Command::Diagnose(c) => run_diagnose(c),
        Command::VerifyLattice { lattice, sites } => verify_lattice(lattice, *sites),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
