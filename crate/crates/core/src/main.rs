use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use svw::harness::{self, BlowupParams, RunConfig};
use svw::SvwError;

#[derive(Parser)]
#[command(name = "svw", version, about = "Stochastic variational wave equation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `noise.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for ensembles; defaults to all cores.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Single path with full time series.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Independent paths with summary statistics.
    Ensemble {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Blow-up sweep over eps with the steep bump data.
    Blowup {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 1.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.25)]
        nu: f64,
        #[arg(long, default_value_t = 0.4)]
        gamma: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        ustar: f64,
        /// Bump coordinate of the designated tracer (steepest point if omitted).
        #[arg(long)]
        x0: Option<f64>,
    },
    /// Theta scaling and eps convergence of the regularized system.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
        eps: Vec<f64>,
    },
}

fn load(common: &Common, paths: Option<usize>) -> svw::Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.noise.seed = seed;
    }
    if let Some(p) = paths {
        cfg.paths = p;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    let out = cfg.out.clone().ok_or_else(|| SvwError::ConfigInvalid("no output directory (use --out)".into()))?;
    // Fail on bad configs before any output directory is touched.
    cfg.setup()?;
    Ok((cfg, out))
}

fn execute(cli: Cli) -> svw::Result<String> {
    match cli.command {
        Command::Run { common } => {
            let (cfg, out) = load(&common, None)?;
            let r = harness::run_single(&cfg, &out)?;
            Ok(format!("run done: t = {:.6}, relative ledger residual {:.3e}", r.record.t_final, r.relative_residual))
        }
        Command::Ensemble { common, paths } => {
            let (cfg, out) = load(&common, paths)?;
            let s = harness::run_ensemble(&cfg, &out, common.workers)?;
            Ok(format!("ensemble done: {} paths, {} exploded", s.paths, s.exploded))
        }
        Command::Blowup { common, paths, eps, alpha, nu, gamma, ustar, x0 } => {
            let (cfg, out) = load(&common, paths)?;
            let params = BlowupParams { alpha, nu, gamma, u_star: ustar, x0 };
            let t = harness::preset_blowup(&cfg, &eps, params, &out, common.workers)?;
            let fr: Vec<String> = t.rows.iter().map(|r| format!("{}: {:.3}", r.eps, r.fraction)).collect();
            Ok(format!("blow-up fractions {}", fr.join(", ")))
        }
        Command::Converge { common, paths, eps } => {
            let (cfg, out) = load(&common, paths)?;
            let t = harness::preset_convergence(&cfg, &eps, &out, common.workers)?;
            Ok(format!("convergence done: Theta slope {:.3} +- {:.3}", t.theta_slope, t.theta_slope_se))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("svw: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
