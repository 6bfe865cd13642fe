use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mimo_ilc::cli::{self, CliError, RunConfig};
use mimo_ilc::synthesis::{DesignMode, TuneTarget};

#[derive(Parser)]
#[command(name = "mimo-ilc", version, about = "Multivariable ILC analysis and synthesis")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of frequency grid points.
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Exit with code 4 when the verdict is false.
    #[arg(long, global = true)]
    strict: bool,
    /// Design mode: naive, alg1, alg2 or alg3.
    #[arg(long, global = true)]
    mode: Option<DesignMode>,
    /// Learning-filter preview K in samples.
    #[arg(long, global = true)]
    preview: Option<usize>,
    /// Learning-filter regularization, relative to the peak gain.
    #[arg(long, global = true)]
    reg: Option<f64>,
    /// Tuning target: convergent or monotone.
    #[arg(long, global = true)]
    target: Option<TuneTarget>,
    /// Number of simulated trials.
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample a model on the frequency grid.
    Frf,
    /// Convergence analysis of a stored design.
    Analyze,
    /// Design L and Q for one mode.
    Design,
    /// Lifted trial-domain simulation of a stored design.
    Simulate,
    /// Surrogate case study over all design modes.
    Casestudy,
}

fn config(args: &Args) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(k) = args.grid_points {
        cfg.grid.points = Some(k);
    }
    cfg.strict |= args.strict;
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(k) = args.preview {
        cfg.preview = Some(k);
    }
    if let Some(l) = args.reg {
        cfg.regularization = Some(l);
    }
    if let Some(t) = args.target {
        cfg.target = t;
    }
    if let Some(n) = args.trials {
        cfg.trials = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &Args) -> Result<(), CliError> {
    let cfg = config(args)?;
    match args.command {
        Command::Frf => {
            let frf = cli::cmd_frf(&cfg)?;
            println!("wrote {} frequencies to {}", frf.len(), cfg.out.display());
        }
        Command::Analyze => {
            let report = cli::cmd_analyze(&cfg)?;
            println!("{}", report.verdict_line());
        }
        Command::Design => {
            let d = cli::cmd_design(&cfg)?;
            let cut: Vec<String> = d.cutoffs().iter().map(|f| format!("{f:.1}")).collect();
            println!("mode={} fc=[{}] target_met={} {}", d.mode.name(), cut.join(", "), d.target_met(), d.report.verdict_line());
        }
        Command::Simulate => {
            let s = cli::cmd_simulate(&cfg)?;
            println!("{}", s.verdict_line());
        }
        Command::Casestudy => {
            let report = cli::cmd_casestudy(&cfg)?;
            for line in cli::table_lines(&report) {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
