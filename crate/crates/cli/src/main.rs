use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use scadboot::{BicConstant, SeMethod};
use scadboot_cli::config::{ConfigFile, Dimension, FitObjective};
use scadboot_cli::fit::{fit_outputs, run_fit};
use scadboot_cli::generate::run_generate;
use scadboot_cli::simulate::run_simulate;
use scadboot_cli::{exit_code, prepare_output_dir, write_outputs};

/// SCAD-penalized logit estimation with pseudo-oracle bootstrap intervals.
#[derive(Debug, Parser)]
#[command(name = "scadboot", version)]
struct Cli {
    /// TOML config with optional [generate], [fit] and [simulate] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, env = "SCADBOOT_OUTPUT_DIR", default_value = ".")]
    output_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a sample from the logit design and write it as CSV.
    Generate(GenerateArgs),
    /// Penalized fit, thresholding, refit and intervals for a CSV dataset.
    Fit(FitArgs),
    /// Monte Carlo coverage experiment.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    /// Dimension: a count or one of n/10, n/2, 3n/4.
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    /// File stem for the sample and its sidecar.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    response: Option<String>,
    #[arg(long)]
    objective: Option<FitObjective>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Bootstrap replications; 0 skips the bootstrap.
    #[arg(long)]
    bootstrap_reps: Option<usize>,
    /// one or loglogp.
    #[arg(long)]
    bic_constant: Option<BicConstant>,
    /// inverse-hessian, outer-product or sandwich.
    #[arg(long)]
    se_method: Option<SeMethod>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    bootstrap_reps: Option<usize>,
    /// Preset (all, full, oracle-only, po, boot, asymp) or comma-separated columns.
    #[arg(long)]
    columns: Option<String>,
    #[arg(long)]
    se_method: Option<SeMethod>,
}

fn dimension(s: String) -> Dimension {
    match s.parse::<usize>() {
        Ok(p) => Dimension::Count(p),
        Err(_) => Dimension::Rule(s),
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let file = ConfigFile::load(cli.config.as_deref())?;
    let outputs = match cli.command {
        Command::Generate(args) => {
            let mut cfg = file.generate;
            cfg.seed = args.seed.unwrap_or(cfg.seed);
            cfg.n = args.n.unwrap_or(cfg.n);
            cfg.p = args.p.map(dimension).unwrap_or(cfg.p);
            cfg.rho = args.rho.unwrap_or(cfg.rho);
            cfg.name = args.name.unwrap_or(cfg.name);
            cfg.design().dgp(cfg.seed).context("invalid design")?;
            prepare_output_dir(&cli.output_dir)?;
            run_generate(&cfg)?
        }
        Command::Fit(args) => {
            let mut cfg = file.fit;
            cfg.data = args.data.or(cfg.data);
            cfg.response = args.response.unwrap_or(cfg.response);
            cfg.objective = args.objective.unwrap_or(cfg.objective);
            cfg.seed = args.seed.unwrap_or(cfg.seed);
            cfg.alpha = args.alpha.unwrap_or(cfg.alpha);
            cfg.bootstrap_reps = args.bootstrap_reps.unwrap_or(cfg.bootstrap_reps);
            cfg.bic_constant = args.bic_constant.unwrap_or(cfg.bic_constant);
            cfg.se_method = args.se_method.or(cfg.se_method);
            scadboot::inference::check_alpha(cfg.alpha)?;
            prepare_output_dir(&cli.output_dir)?;
            let report = run_fit(&cfg)?;
            fit_outputs(&cfg, &report)?
        }
        Command::Simulate(args) => {
            let mut cfg = file.simulate;
            cfg.seed = args.seed.unwrap_or(cfg.seed);
            cfg.n = args.n.unwrap_or(cfg.n);
            cfg.p = args.p.map(dimension).unwrap_or(cfg.p);
            cfg.replications = args.replications.unwrap_or(cfg.replications);
            cfg.alpha = args.alpha.unwrap_or(cfg.alpha);
            cfg.bootstrap_reps = args.bootstrap_reps.unwrap_or(cfg.bootstrap_reps);
            cfg.columns = args.columns.unwrap_or(cfg.columns);
            cfg.se_method = args.se_method.or(cfg.se_method);
            scadboot_cli::simulate::experiment_config(&cfg)?;
            prepare_output_dir(&cli.output_dir)?;
            run_simulate(&cfg)?
        }
    };
    write_outputs(&cli.output_dir, &outputs)?;
    for out in &outputs {
        println!("wrote {}", cli.output_dir.join(&out.name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
