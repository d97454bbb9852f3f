use clap::{Parser, Subcommand};
use degenmax::cli;
use degenmax::error::Error;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "degenmax",
    about = "Boundary-degenerate elliptic/parabolic operators: classification, reference solutions, perturbation certificates, coordinate changes, solvers, and the verification suite"
)]
struct Cli {
    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Classify the boundary, compute Fichera values and the Lipschitz probe.
    Classify {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Solve the equation (elliptic or parabolic per the config).
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Solve the obstacle problem by projected SOR.
    Obstacle {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the local-maximum perturbation construction and certificate.
    Perturb {
        #[arg(long)]
        problem: PathBuf,
        /// Base point on the degenerate boundary, e.g. "0" or "0.5,0".
        #[arg(long)]
        point: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Boundary straightening or the tangential-drift killing map.
    Transform {
        #[arg(long)]
        problem: PathBuf,
        /// straighten | kill-tangential
        #[arg(long)]
        map: String,
        /// Fail (exit 1) when the verification report does not pass.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Confluent hypergeometric evaluations and regularity classification.
    Special {
        #[command(subcommand)]
        cmd: SpecialCmd,
    },
    /// Run the verification battery.
    VerifySuite {
        /// Group name (all, special, solver, perturbation, transform,
        /// obstacle, diagnostics, determinism) or comma-separated ids.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SpecialCmd {
    /// Print M, U, Mprime, or Uprime at (a, b, x) in full double precision.
    Eval {
        #[arg(long = "fn")]
        func: String,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        x: f64,
    },
    /// Print the regularity class of U(a,b,.) at x = 0.
    Classify {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .init();
    let outcome = match &cli.cmd {
        Cmd::Classify { problem, out } => cli::cmd_classify(problem, out).map(|_| true),
        Cmd::Solve { problem, out } => cli::cmd_solve(problem, out).map(|_| true),
        Cmd::Obstacle { problem, out } => cli::cmd_obstacle(problem, out).map(|_| true),
        Cmd::Perturb {
            problem,
            point,
            out,
        } => cli::cmd_perturb(problem, point, out).map(|_| true),
        Cmd::Transform {
            problem,
            map,
            verify,
            out,
        } => cli::cmd_transform(problem, map, *verify, out).map(|_| true),
        Cmd::Special { cmd } => match cmd {
            SpecialCmd::Eval { func, a, b, x } => {
                cli::cmd_special_eval(func, *a, *b, *x).map(|_| true)
            }
            SpecialCmd::Classify { a, b } => cli::cmd_special_classify(*a, *b).map(|_| true),
        },
        Cmd::VerifySuite { suite, seed, out } => {
            cli::cmd_verify_suite(suite, *seed, out.as_deref())
        }
    };
    let code = match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 2,
                _ => 1,
            }
        }
    };
    std::process::exit(code);
}
