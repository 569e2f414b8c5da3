use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vekua_cli::error::exit;
use vekua_cli::{run, BergmanOp, CliError, Command, Example, Overrides, RunConfig};
use vekua_core::{DomainSpec, VekuaError};

#[derive(Parser)]
#[command(name = "vekua", version, about = "Numerical experiments for Vekua-Bergman spaces")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    domain: Option<DomainArg>,
    /// Grid resolution.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Number of exterior points for the basis.
    #[arg(long, global = true)]
    m: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Ball,
    Box,
}

#[derive(Subcommand)]
enum Cmd {
    /// Biquaternion identities on seeded samples.
    AlgebraCheck,
    /// Right-inverse and Borel-Pompeiu refinement study.
    OperatorConvergence,
    /// Vekua basis, kernel and projection.
    Bergman {
        #[arg(value_enum)]
        op: BergmanArg,
        /// Existing basis container to load instead of building one.
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    /// Orthogonal decomposition checks.
    Decompose,
    /// Closed-form examples.
    Examples {
        #[arg(value_enum)]
        which: ExampleArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BergmanArg {
    Build,
    Reproduce,
    Project,
    KernelMatrix,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleArg {
    Schrodinger,
    Df,
    Helmholtz,
    Bessel,
    TAlpha,
}

fn command(cmd: Cmd) -> Command {
    match cmd {
        Cmd::AlgebraCheck => Command::AlgebraCheck,
        Cmd::OperatorConvergence => Command::OperatorConvergence,
        Cmd::Bergman { op, basis } => Command::Bergman {
            op: match op {
                BergmanArg::Build => BergmanOp::Build,
                BergmanArg::Reproduce => BergmanOp::Reproduce,
                BergmanArg::Project => BergmanOp::Project,
                BergmanArg::KernelMatrix => BergmanOp::KernelMatrix,
            },
            basis,
        },
        Cmd::Decompose => Command::Decompose,
        Cmd::Examples { which } => Command::Examples(match which {
            ExampleArg::Schrodinger => Example::Schrodinger,
            ExampleArg::Df => Example::Df,
            ExampleArg::Helmholtz => Example::Helmholtz,
            ExampleArg::Bessel => Example::Bessel,
            ExampleArg::TAlpha => Example::TAlpha,
        }),
    }
}

fn main_inner(cli: Cli) -> Result<i32, CliError> {
    let file = match &cli.config {
        Some(p) => Some(std::fs::read(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let overrides = Overrides {
        domain: cli.domain.map(|d| match d {
            DomainArg::Ball => DomainSpec::unit_ball(),
            DomainArg::Box => DomainSpec::unit_box(),
        }),
        n: cli.n,
        basis_m: cli.m,
        seed: cli.seed,
        output_dir: cli.out,
    };
    let cfg = RunConfig::resolve(file.as_deref(), &overrides)?;
    let outcome = run(&cfg, &command(cli.command))?;
    outcome.write(&cfg.output_dir)?;
    let rep = &outcome.report;
    for c in &rep.checks {
        println!("{} {} {:.3e} (bound {:.3e})", if c.pass { "ok  " } else { "FAIL" }, c.name, c.value, c.bound);
    }
    println!("{}: {}", rep.command, if rep.pass { "pass" } else { "fail" });
    Ok(if rep.pass { exit::PASS } else { exit::TOLERANCE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match main_inner(cli) {
        Ok(c) => c,
        Err(e) => {
            if let CliError::Core(VekuaError::ContractionViolated { kappa }) = &e {
                eprintln!("contraction violated: kappa = {kappa}");
            } else {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
