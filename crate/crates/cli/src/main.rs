use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use metrom::pipeline::{
    compare, load_basis, save_training, simulate_fom, train, verify, write_compare_artifacts,
    write_plot_groups, write_singular_value_plot, write_trajectory_csv, Benchmark,
    CompareOptions, ExperimentConfig, BASIS_FILE,
};
use metrom::pod::PodBasis;
use metrom::report::{emit_report, ReportFormat};
use metrom::rom::RomVariant;
use metrom::Error;

const EXIT_INVARIANT: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "metrom", version, about = "Structure-preserving reduced-order models for metriplectic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON experiment configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Benchmark problem (gas or rod)
    #[arg(long, global = true)]
    benchmark: Option<Benchmark>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Comma-separated ROM variants, e.g. SP,EH,G
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<RomVariant>>,

    /// Comma-separated reduced dimensions
    #[arg(long, global = true, value_delimiter = ',')]
    n: Option<Vec<usize>>,

    /// Comma-separated integration horizons
    #[arg(long, global = true, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,

    #[arg(long, global = true)]
    rtol: Option<f64>,

    #[arg(long, global = true)]
    atol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the training set and compute the POD basis
    Train,
    /// Compare ROMs against the full-order model and write CSV and SVG output
    Compare {
        /// Directory holding a trained basis (defaults to --out, training if absent)
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    /// Run the structural invariant checks
    Verify {
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    /// Integrate the full-order model from the test state
    SimulateFom,
    /// Write trajectory and singular-value plots
    Plot {
        #[arg(long)]
        basis: Option<PathBuf>,
    },
}

fn config(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::for_benchmark(common.benchmark.unwrap_or(Benchmark::Gas)),
    };
    if let Some(b) = common.benchmark {
        cfg.benchmark = b;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    if let Some(m) = &common.methods {
        cfg.methods = m.clone();
    }
    if let Some(n) = &common.n {
        cfg.evaluation.n = Some(n.clone());
    }
    if let Some(h) = &common.horizons {
        cfg.evaluation.horizons = Some(h.clone());
    }
    if let Some(r) = common.rtol {
        cfg.integrator.rtol = r;
    }
    if let Some(a) = common.atol {
        cfg.integrator.atol = a;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train_and_save(cfg: &ExperimentConfig) -> anyhow::Result<metrom::pipeline::TrainingOutcome> {
    let outcome = train(cfg)?;
    save_training(&cfg.output_dir, &outcome)?;
    let s = &outcome.summary;
    println!(
        "trained {:?}: dim {}, {} snapshot columns, basis rank {} written to {}",
        s.benchmark,
        s.dim,
        s.snapshot_columns,
        s.retained,
        cfg.output_dir.join(BASIS_FILE).display()
    );
    for c in &s.rank_checks {
        println!(
            "  n = {:>3}: residual {:.6e}  tail {:.6e}  rel_gap {:.3e}",
            c.n, c.residual_sq, c.tail_sq, c.rel_gap
        );
    }
    Ok(outcome)
}

fn basis_for(cfg: &ExperimentConfig, dir: Option<&Path>) -> anyhow::Result<PodBasis> {
    match dir {
        Some(d) => Ok(load_basis(d)?),
        None if cfg.output_dir.join(BASIS_FILE).exists() => Ok(load_basis(&cfg.output_dir)?),
        None => Ok(train_and_save(cfg)?.basis),
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let cfg = config(&cli.common)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    match cli.command {
        Command::Train => {
            train_and_save(&cfg)?;
        }
        Command::Compare { basis } => {
            let basis = basis_for(&cfg, basis.as_deref())?;
            let outcome = compare(&cfg, &basis, CompareOptions::default())?;
            let files = write_compare_artifacts(&cfg, &outcome, &cfg.output_dir)?;
            print!("{}", emit_report(&outcome.rows, ReportFormat::Table)?);
            println!("wrote {} files to {}", files.len(), cfg.output_dir.display());
        }
        Command::Verify { basis } => {
            let training = train(&cfg)?;
            let basis = match basis {
                Some(d) => load_basis(&d)?,
                None if cfg.output_dir.join(BASIS_FILE).exists() => load_basis(&cfg.output_dir)?,
                None => training.basis.clone(),
            };
            let checks = verify(&cfg, &basis, Some(&training))?;
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                eprintln!("{failed} check(s) failed");
                return Ok(EXIT_INVARIANT);
            }
        }
        Command::SimulateFom => {
            let system = cfg.system()?;
            for (h, traj) in simulate_fom(&cfg)? {
                let path = cfg.output_dir.join(format!("fom_T{h}.csv"));
                write_trajectory_csv(system.as_ref(), &traj, &path)?;
                let drift = metrom::metrics::energy_drift(system.as_ref(), &traj, None)?;
                println!(
                    "T = {h}: {} samples, energy drift {drift:.3e}, {:.3} s, written to {}",
                    traj.len(),
                    traj.wall_time,
                    path.display()
                );
            }
        }
        Command::Plot { basis } => {
            let basis = basis_for(&cfg, basis.as_deref())?;
            if cfg.methods.is_empty() {
                bail!("no methods selected");
            }
            let mut files = vec![write_singular_value_plot(&basis, &cfg.output_dir)?];
            let outcome = compare(&cfg, &basis, CompareOptions::default())?;
            files.extend(write_plot_groups(&cfg, &outcome.groups, &cfg.output_dir)?);
            println!("wrote {} plots to {}", files.len(), cfg.output_dir.display());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let solver = e
                .chain()
                .any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_solver_failure));
            ExitCode::from(if solver { EXIT_SOLVER } else { 1 })
        }
    }
}
