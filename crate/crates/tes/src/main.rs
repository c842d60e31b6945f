use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tes::commands::{cmd_estimate, cmd_refine, cmd_simulate, cmd_validate};
use tes::config::RunConfig;
use tes::CliResult;

/// Simulate SDE paths with a guaranteed uniform error.
///
/// Exit codes: 0 success, 2 configuration error, 3 invariant violation,
/// 4 iteration guard or level cap reached. The number of estimator threads
/// is read from TES_WORKERS.
#[derive(Parser)]
#[command(name = "tes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunFlags {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model: linear, trig or localized-linear.
    #[arg(long)]
    model: Option<String>,
    /// Uniform error tolerance.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Hölder exponent of the driving path.
    #[arg(long)]
    alpha: Option<f64>,
    /// Window exponent for area records.
    #[arg(long)]
    beta: Option<f64>,
    /// Replications for `estimate`.
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunFlags {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        let flags = [
            ("model", self.model.clone()),
            ("eps", self.eps.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("beta", self.beta.map(|v| v.to_string())),
            ("reps", self.reps.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Certify a Brownian path and write an eps-strong solution.
    Simulate(RunFlags),
    /// Refine a previous run to a smaller tolerance.
    Refine {
        /// Directory of the run to refine.
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Unbiased estimates of E f(X).
    Estimate {
        #[command(flatten)]
        run: RunFlags,
        /// constant:<c>, distance or terminal:<lo>:<hi>.
        #[arg(long, default_value = "distance")]
        functional: String,
    },
    /// Check a configuration and, with --from, a stored run.
    Validate {
        #[command(flatten)]
        run: RunFlags,
        #[arg(long)]
        from: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(flags) => {
            let cfg = flags.resolve()?;
            let path = cmd_simulate(&cfg)?;
            println!(
                "level {} (G = {:e}), wrote {}",
                path.level,
                path.constants.g,
                cfg.out.display()
            );
        }
        Command::Refine { from, eps, out } => {
            let path = cmd_refine(&from, eps, &out)?;
            println!("refined to level {}, wrote {}", path.level, out.display());
        }
        Command::Estimate { run, functional } => {
            let cfg = run.resolve()?;
            let s = cmd_estimate(&cfg, &functional)?;
            println!("mean {} se {} over {} replications", s.mean, s.se, s.samples.len());
        }
        Command::Validate { run, from } => {
            let cfg = run.resolve()?;
            for line in cmd_validate(&cfg, from.as_deref())? {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tes: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
