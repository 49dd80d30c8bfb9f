use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use oscqft_cli::commands::{self, CmdError, Context, RunMode};
use oscqft_cli::config::Config;

/// Oscillator-mode Fourier-transform simulator: staged register→resonator
/// transfer, cross-Kerr transform, post-selection, and the analyses built on
/// top of them.
#[derive(Parser)]
#[command(name = "oscqft", version, about)]
struct Cli {
    /// TOML configuration file; built-in nominal parameters when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every stochastic element (sampling, Monte-Carlo draws).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// "ideal" runs exact permutations and closed forms; "physical" runs the
    /// pulse-level dynamics.
    #[arg(long, global = true)]
    mode: Option<String>,

    /// Override the resonator-A Fock padding above 2^n.
    #[arg(long, global = true)]
    fock_pad: Option<usize>,

    /// Refine the integrator step by this factor in (0, 1].
    #[arg(long, global = true, default_value_t = 1.0)]
    step_scale: f64,

    /// Output directory (one subdirectory per run).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Staged register → resonator transfer with per-step reports.
    Transfer,
    /// Transform an input state through the cross-Kerr stage.
    Qft,
    /// Phase estimation through the inverse transform.
    Phase,
    /// Analytic error sweeps, budgets, and the jitter Monte-Carlo.
    Errors,
    /// Operation-count comparison over a register-size range.
    Resources {
        #[arg(default_value_t = 1)]
        n_min: usize,
        #[arg(default_value_t = 10)]
        n_max: usize,
    },
    /// Wigner snapshots of the reduced B state during the Kerr stage.
    Wigner,
}

fn run() -> Result<(), CmdError> {
    let cli = Cli::parse();

    let config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CmdError {
                message: format!("cannot read {}: {e}", path.display()),
                exit_code: 2,
            })?;
            Config::from_toml(&text)?
        }
        None => Config::default(),
    };

    let mode = match cli.mode.as_deref() {
        None => default_mode(&cli.command),
        Some("ideal") => RunMode::Ideal,
        Some("physical") => RunMode::Physical,
        Some(other) => {
            return Err(CmdError {
                message: format!("--mode must be \"ideal\" or \"physical\", got {other:?}"),
                exit_code: 2,
            })
        }
    };
    if !(cli.step_scale > 0.0 && cli.step_scale <= 1.0) {
        return Err(CmdError {
            message: "--step-scale must lie in (0, 1]".to_string(),
            exit_code: 2,
        });
    }

    let command_name = match &cli.command {
        Command::Transfer => "transfer",
        Command::Qft => "qft",
        Command::Phase => "phase",
        Command::Errors => "errors",
        Command::Resources { .. } => "resources",
        Command::Wigner => "wigner",
    };
    let out_dir = cli
        .out
        .unwrap_or_else(|| PathBuf::from(&config.output.dir).join(command_name));

    let ctx = Context {
        config,
        seed: cli.seed,
        mode,
        step_scale: cli.step_scale,
        fock_pad: cli.fock_pad,
        out_dir,
    };

    let record = match cli.command {
        Command::Transfer => commands::cmd_transfer(&ctx)?,
        Command::Qft => commands::cmd_qft(&ctx)?,
        Command::Phase => commands::cmd_phase(&ctx)?,
        Command::Errors => commands::cmd_errors(&ctx)?,
        Command::Resources { n_min, n_max } => commands::cmd_resources(&ctx, n_min, n_max)?,
        Command::Wigner => commands::cmd_wigner(&ctx)?,
    };
    println!(
        "{}: wrote {} artifact(s) to {} in {:.2} s",
        record.command,
        record.outputs.len() + 2, // + config echo + run record
        ctx.out_dir.display(),
        record.wall_clock_s
    );
    Ok(())
}

fn default_mode(command: &Command) -> RunMode {
    match command {
        // The transfer command exists to exercise the pulse dynamics.
        Command::Transfer => RunMode::Physical,
        _ => RunMode::Ideal,
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("oscqft: {}", e.message);
            ExitCode::from(e.exit_code.clamp(0, 255) as u8)
        }
    }
}
