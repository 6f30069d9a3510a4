//! Command-line driver for the homogenization experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use homog_core::ensemble::sample_field;
use homog_core::harness::{
    dump_field, report, run, ConfigDocument, ExperimentConfig, ExperimentKind, RunOptions,
};
use homog_core::pde::{DomainKind, Grid, ScalarField};
use homog_core::Error;

#[derive(Parser)]
#[command(
    name = "homog",
    version,
    about = "Stochastic homogenization experiments on finite-difference grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides experiment.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides experiment.samples.
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory for CSV tables and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Also write per-sample fields in the binary dump format.
    #[arg(long)]
    dump_fields: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Samples coefficient fields and dumps their components.
    SampleField(Common),
    Correctors(Common),
    BoundaryLayer(Common),
    Excess(Common),
    MeanValue(Common),
    Hardy(Common),
    Meyers(Common),
    Cone(Common),
    TwoScale(Common),
    SpectralGap(Common),
    /// Recomputes the aggregate table of an output directory from its records.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(common: &Common, kind: ExperimentKind) -> homog_core::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let mut doc = ConfigDocument::parse(&text)?;
    match doc.get("experiment", "kind") {
        Some(k) if k != kind.name() => {
            return Err(Error::Config(format!(
                "config describes a '{k}' experiment, not '{kind}'"
            )))
        }
        Some(_) => {}
        None => doc.set("experiment", "kind", kind.name()),
    }
    ExperimentConfig::from_document(doc)?.with_overrides(common.seed, common.samples)
}

fn run_experiment(common: &Common, kind: ExperimentKind) -> anyhow::Result<()> {
    let cfg = load_config(common, kind)?;
    let opts = RunOptions {
        threads: common.threads,
        out_dir: common.out.clone(),
        dump_fields: common.dump_fields,
    };
    let m = run(&cfg, &opts)?;
    println!(
        "{} samples, {} failed, config {}",
        m.records.len(),
        m.failed,
        &m.config_hash[..12]
    );
    for a in &m.aggregates {
        println!(
            "{:<32} {:>24.16e} +- {:.3e}  (n = {})",
            a.column.name, a.mean, a.stderr, a.count
        );
    }
    Ok(())
}

fn sample_fields(common: &Common) -> anyhow::Result<()> {
    // Only the ensemble and grid sections matter here.
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let mut doc = ConfigDocument::parse(&text)?;
    doc.set("experiment", "kind", "correctors");
    let cfg = ExperimentConfig::from_document(doc)?.with_overrides(common.seed, common.samples)?;
    let grid = Grid::cube(cfg.d, cfg.n, cfg.h)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    for i in 0..cfg.n_samples {
        let a = sample_field(&cfg.ensemble, &grid, i as u64)?;
        let (lo, hi) = a.eigen_scan();
        println!("sample {i}: eigenvalues in [{lo:.6}, {hi:.6}]");
        for k in 0..cfg.d {
            for l in 0..cfg.d {
                let f = ScalarField::from_vec(grid, a.component(k, l))?;
                let path = out.join(format!("a{}{}_{i:05}.hgf", k + 1, l + 1));
                dump_field(&f, DomainKind::Torus, &path)?;
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 2,
        Some(Error::TooManyFailures { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SampleField(c) => sample_fields(c),
        Command::Correctors(c) => run_experiment(c, ExperimentKind::Correctors),
        Command::BoundaryLayer(c) => run_experiment(c, ExperimentKind::BoundaryLayer),
        Command::Excess(c) => run_experiment(c, ExperimentKind::Excess),
        Command::MeanValue(c) => run_experiment(c, ExperimentKind::MeanValue),
        Command::Hardy(c) => run_experiment(c, ExperimentKind::Hardy),
        Command::Meyers(c) => run_experiment(c, ExperimentKind::Meyers),
        Command::Cone(c) => run_experiment(c, ExperimentKind::Cone),
        Command::TwoScale(c) => run_experiment(c, ExperimentKind::TwoScale),
        Command::SpectralGap(c) => run_experiment(c, ExperimentKind::SpectralGap),
        Command::Report { out } => report(out).map_err(Into::into).and_then(|check| {
            for a in &check.aggregates {
                println!(
                    "{:<32} {:>24.16e} +- {:.3e}",
                    a.column.name, a.mean, a.stderr
                );
            }
            println!(
                "largest relative difference to stored aggregates: {:.3e}",
                check.max_difference
            );
            if check.max_difference > 1e-12 {
                anyhow::bail!("stored aggregates do not match the records");
            }
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
