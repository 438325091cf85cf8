use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lightlike_cli::{cmd_build, cmd_prop1, cmd_validate, cmd_verify, OutputFormat, RunOptions};
use lightlike_core::verify::Prop1Direction;

/// Construct and certify linear connections on degenerate-metric charts.
#[derive(Parser)]
#[command(name = "lightlike", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the declared bundle invariants of a manifest.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Construct the connection and dump its coefficients.
    Build {
        #[command(flatten)]
        common: CommonArgs,
        /// Evaluate at a single chart point, e.g. `--point 0,1,0`.
        #[arg(long, value_name = "c0,c1,...")]
        point: Option<String>,
        /// Evaluate on a uniform grid with this many points per axis.
        #[arg(long, value_name = "K", conflicts_with = "point")]
        grid: Option<usize>,
    },
    /// Run the full construction-and-certification pipeline.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the nullity-degree-1 pipeline in either direction.
    Prop1 {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        direction: DirectionArg,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the manifest file.
    manifest: PathBuf,
    /// Override the sample count.
    #[arg(long, value_name = "N")]
    samples: Option<usize>,
    /// Override the RNG seed.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Override the analytic residual tolerance.
    #[arg(long = "tol-analytic", value_name = "X")]
    tol_analytic: Option<f64>,
    /// Override the finite-difference residual tolerance.
    #[arg(long = "tol-fd", value_name = "X")]
    tol_fd: Option<f64>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Machine,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Forward,
    Reverse,
}

impl CommonArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            samples: self.samples,
            seed: self.seed,
            tol_analytic: self.tol_analytic,
            tol_fd: self.tol_fd,
            format: match self.format {
                FormatArg::Text => OutputFormat::Text,
                FormatArg::Machine => OutputFormat::Machine,
            },
        }
    }
}

fn parse_point(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{part}` is not a number"))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { common } => cmd_validate(&common.manifest, &common.options()),
        Command::Verify { common } => cmd_verify(&common.manifest, &common.options()),
        Command::Prop1 { common, direction } => {
            let direction = match direction {
                DirectionArg::Forward => Prop1Direction::Forward,
                DirectionArg::Reverse => Prop1Direction::Reverse,
            };
            cmd_prop1(&common.manifest, direction, &common.options())
        }
        Command::Build {
            common,
            point,
            grid,
        } => {
            let parsed = match point.as_deref().map(parse_point).transpose() {
                Ok(p) => p,
                Err(message) => {
                    eprintln!("error: --point: {message}");
                    return ExitCode::from(2);
                }
            };
            cmd_build(
                &common.manifest,
                parsed.as_deref(),
                *grid,
                &common.options(),
            )
        }
    };
    match result {
        Ok(output) => {
            print!("{}", output.stdout);
            ExitCode::from(output.exit_code as u8)
        }
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
