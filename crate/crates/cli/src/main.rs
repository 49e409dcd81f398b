use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, Parser, Subcommand};
use cutoff_core::Error;

mod commands;
mod manifest;
mod plot;

#[derive(Parser, Debug)]
#[command(name = "cutoff", version, about = "V-states, linearized operator and dynamics of the cut-off corner model")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the quadratic-kernel compatibility system
    ModelCase(ModelCaseArgs),
    /// Solve for the even V-state at one λ
    Vstate(VStateArgs),
    /// Evolve an interface under the cut-off transport equation
    Dynamics(DynamicsArgs),
    /// Coefficients and invertibility diagnostics of the linearized operator
    OperatorAudit(AuditArgs),
    /// Quadratic-form, positivity and difference-quotient checks
    Checks(ChecksArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Directory for CSV, manifest and plot script
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ModelCaseArgs {
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct VStateArgs {
    #[arg(long, default_value_t = 1e-2)]
    lambda: f64,
    #[arg(long, default_value_t = 256)]
    grid_n: usize,
    #[arg(long, default_value_t = 2.0)]
    grading: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Solve with log√(δ²+r²) in place of the Euler kernel
    #[arg(long)]
    delta_reg: Option<f64>,
    /// Bound on ‖ψ'‖∞ during the iteration
    #[arg(long, default_value_t = 0.25)]
    delta_box: f64,
    /// Full Newton instead of the frozen Jacobian
    #[arg(long)]
    newton: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
enum Initial {
    /// √(λ²+x²)
    Hyperbola,
    /// the converged V-state for λ on the same grid
    Vstate,
    /// |x|
    Corner,
}

#[derive(Args, Debug)]
struct DynamicsArgs {
    #[arg(long, default_value_t = 1e-2)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = Initial::Hyperbola)]
    init: Initial,
    #[arg(long, default_value_t = 64)]
    grid_n: usize,
    #[arg(long, default_value_t = 1.5)]
    grading: f64,
    /// Time step; defaults to the empirical stability estimate
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    /// Residual tolerance for the V-state initial data
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Steps between samples of 𝔡(t)
    #[arg(long, default_value_t = 10)]
    sample_every: usize,
    /// Samples between profile snapshots (0 = none)
    #[arg(long, default_value_t = 10)]
    snapshot_every: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[arg(long, default_value_t = 1e-2)]
    lambda: f64,
    #[arg(long, default_value_t = 256)]
    grid_n: usize,
    #[arg(long, default_value_t = 2.0)]
    grading: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ChecksArgs {
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

/// Exit status: 0 success, 2 solver did not converge or checks failed,
/// 3 invalid input.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::NotANode(_) | Error::Parse { .. } | Error::Io(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    let res = match cli.cmd {
        Command::ModelCase(a) => commands::model_case(a),
        Command::Vstate(a) => commands::vstate(a),
        Command::Dynamics(a) => commands::dynamics(a),
        Command::OperatorAudit(a) => commands::operator_audit(a),
        Command::Checks(a) => commands::checks(a),
    };
    match res {
        Ok(commands::Outcome::Done) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
