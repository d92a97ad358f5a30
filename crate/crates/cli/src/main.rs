//! `nlcorr`: extreme eigenvalues of nonlinear correlation matrices from the
//! command line. Every run writes one JSON report.

mod commands;
mod context;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlcorr_core::rng::DEFAULT_SEED;

use context::{CliError, Context};

#[derive(Parser)]
#[command(name = "nlcorr", version, about = "Extreme nonlinear correlations: oracles, bounds and checks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Override the main numerical tolerance of the subcommand.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "NLCORR_THREADS")]
    threads: Option<usize>,
    /// Write the plot-ready CSV curve of the run here.
    #[arg(long, global = true)]
    curve: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Spectrum of a weighted correlation matrix, or Nyström eigenvalues of a kernel.
    Eig(commands::EigArgs),
    /// Schur-power contraction certificate.
    SchurCheck(commands::SchurArgs),
    /// Hermite expansions and the nonlinear Gram of a pairwise Gaussian vector.
    Hermite(commands::HermiteArgs),
    /// Exact extreme weighted maximal correlations of a discrete joint.
    Oracle(commands::OracleArgs),
    /// Alternating conditional expectations on samples or a joint.
    Ace(commands::AceArgs),
    /// Correlation matrix of nested partial sums.
    Nested(commands::NestedArgs),
    /// Symmetric extremes and the shadow-group check of a group system.
    Groups(commands::GroupsArgs),
    /// Hoeffding decomposition of a symmetric function.
    Hoeffding(commands::HoeffdingArgs),
    /// Correlations of the sin construction along a sequence of t.
    Sinlimit(commands::SinArgs),
    /// Spectral extremes of a stationary kernel.
    Stationary(commands::StationaryArgs),
    /// Pointwise spectral density and autocorrelations of a kernel.
    Kernel(commands::KernelArgs),
    /// Compatibility constant of an additive model under a Gaussian copula.
    CopulaCheck(commands::CopulaArgs),
    /// Variance sandwich for additive differences under a Gaussian copula.
    Sandwich(commands::SandwichArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Eig(_) => "eig",
            Command::SchurCheck(_) => "schur-check",
            Command::Hermite(_) => "hermite",
            Command::Oracle(_) => "oracle",
            Command::Ace(_) => "ace",
            Command::Nested(_) => "nested",
            Command::Groups(_) => "groups",
            Command::Hoeffding(_) => "hoeffding",
            Command::Sinlimit(_) => "sinlimit",
            Command::Stationary(_) => "stationary",
            Command::Kernel(_) => "kernel",
            Command::CopulaCheck(_) => "copula-check",
            Command::Sandwich(_) => "sandwich",
        }
    }
}

fn dispatch(command: &Command, ctx: &mut Context) -> Result<commands::Outcome, CliError> {
    match command {
        Command::Eig(a) => commands::eig(a, ctx),
        Command::SchurCheck(a) => commands::schur_check(a, ctx),
        Command::Hermite(a) => commands::hermite(a, ctx),
        Command::Oracle(a) => commands::oracle(a, ctx),
        Command::Ace(a) => commands::ace(a, ctx),
        Command::Nested(a) => commands::nested(a, ctx),
        Command::Groups(a) => commands::groups(a, ctx),
        Command::Hoeffding(a) => commands::hoeffding(a, ctx),
        Command::Sinlimit(a) => commands::sinlimit(a, ctx),
        Command::Stationary(a) => commands::stationary(a, ctx),
        Command::Kernel(a) => commands::kernel(a, ctx),
        Command::CopulaCheck(a) => commands::copula_check(a, ctx),
        Command::Sandwich(a) => commands::sandwich(a, ctx),
    }
}

/// argv with output-only flags removed, so the digest tracks inputs only.
fn digest_argv() -> Vec<String> {
    let mut out = Vec::new();
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        let flag = a.split('=').next().unwrap_or_default();
        if matches!(flag, "--out" | "--curve" | "--threads") {
            if !a.contains('=') {
                args.next();
            }
            continue;
        }
        out.push(a);
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    if let Some(n) = cli.common.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: --threads must be a positive integer");
            return ExitCode::from(2);
        }
    }
    let mut ctx = Context::new(cli.common.clone());
    for a in digest_argv() {
        ctx.digest.update("arg", a.as_bytes());
    }
    match dispatch(&cli.command, &mut ctx).and_then(|outcome| ctx.finish(name, outcome)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            let text = report::render(&e.to_json(name));
            match &cli.common.out {
                Some(path) if std::fs::write(path, &text).is_ok() => {}
                _ => print!("{text}"),
            }
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
