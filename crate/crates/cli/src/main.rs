//! `ionjunction` command-line tool.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ionjunction::config::KeyValues;

/// Outcome of a successful command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A simulated ion left the trap.
    Lost,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ionjunction::Error),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{0}: {1}")]
    Csv(PathBuf, csv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use ionjunction::Error as E;
        match self {
            CliError::Usage(_) | CliError::Core(E::Config(_) | E::Parse { .. } | E::InvalidArgument(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "ionjunction", version, about = "Stability maps, field grids and ion flights for two-layer trap junctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Output directory (created if missing).
    #[arg(long, default_value = "ionjunction-out")]
    out: PathBuf,
    /// Also write SVG figures.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundled preset: transfer-a, transfer-b, transfer-c, transfer-d or midplane.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Mathieu stability verdicts over a (U, V) grid.
    StabilityMap {
        /// U range as `min:max:points`, or a single value.
        #[arg(long, default_value = "-1:1.5:300", allow_hyphen_values = true)]
        u: String,
        /// V range as `min:max:points`, or a single value; must be non-negative.
        #[arg(long, default_value = "0:1.5:300", allow_hyphen_values = true)]
        v: String,
        /// hill, floquet or both.
        #[arg(long, default_value = "both")]
        method: String,
        #[command(flatten)]
        output: Output,
    },
    /// Tabulated a0, b1 and a1 boundary curves.
    BoundaryCurves {
        #[arg(long, default_value_t = 2.0)]
        v_max: f64,
        #[arg(long, default_value_t = 400)]
        knots: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Simple-trap and transfer verdicts over a (μ, β, α) grid.
    JunctionMap {
        /// μ cells as `min:max:cells`, or a single value.
        #[arg(long, default_value = "0:1.5:16", allow_hyphen_values = true)]
        mu: String,
        #[arg(long, default_value = "-0.8:0.8:16", allow_hyphen_values = true)]
        beta: String,
        #[arg(long, default_value = "0:1.5:16", allow_hyphen_values = true)]
        alpha: String,
        /// Path samples per transfer check.
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Flies one ion through a transfer; exits 3 if it is lost.
    TransferSim {
        #[command(flatten)]
        experiment: ExperimentArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Repeats a transfer for a range of α.
    AlphaSweep {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// α values as `min:max:points` (positive, ascending).
        #[arg(long, default_value = "0.05:0.5:10")]
        alphas: String,
        #[command(flatten)]
        output: Output,
    },
    /// Secular frequencies measured from a simulated trajectory.
    Secular {
        #[command(flatten)]
        experiment: ExperimentArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Samples an electrode layout onto a grid file.
    Fieldgen {
        /// Layout preset (two-layer, single-layer, parallel-plate) or a layout file.
        #[arg(long, default_value = "two-layer")]
        layout: String,
        /// Grid centre `x,y,z` in µm.
        #[arg(long, default_value = "0,0,0", allow_hyphen_values = true)]
        center: String,
        /// Grid extent `x,y,z` in µm.
        #[arg(long, default_value = "40,40,40")]
        extent: String,
        /// Grid points `nx,ny,nz`.
        #[arg(long, default_value = "41,41,41")]
        dims: String,
        /// Image pairs per electrode (layout default if omitted).
        #[arg(long)]
        image_order: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Locates the RF nulls of a grid file.
    NullFind {
        /// Grid file written by `fieldgen`.
        #[arg(long)]
        grid: PathBuf,
        /// Half the distance between the electrode planes (µm).
        #[arg(long, default_value_t = 25.0)]
        plane_half_separation: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Repeats the run recorded in a manifest.
    Rerun {
        manifest: PathBuf,
        #[command(flatten)]
        output: Output,
    },
}

fn experiment_settings(args: &ExperimentArgs) -> Result<KeyValues, CliError> {
    let mut kv = match &args.config {
        Some(path) => KeyValues::from_file(path)?,
        None => KeyValues::new(),
    };
    if let Some(p) = &args.preset {
        kv.set("preset", p);
    }
    for s in &args.sets {
        let (k, v) = s.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {s:?}")))?;
        kv.set(k.trim(), v.trim());
    }
    if kv.iter().next().is_none() {
        return Err(CliError::Usage("give --config, --preset or --set".into()));
    }
    Ok(kv)
}

fn run(cli: Cli) -> Result<Status, CliError> {
    let (name, mut kv, output) = match cli.command {
        Command::StabilityMap { u, v, method, output } => {
            let mut kv = KeyValues::new();
            kv.set("u", u);
            kv.set("v", v);
            kv.set("method", method);
            ("stability-map", kv, output)
        }
        Command::BoundaryCurves { v_max, knots, output } => {
            let mut kv = KeyValues::new();
            kv.set("v_max", v_max);
            kv.set("knots", knots);
            ("boundary-curves", kv, output)
        }
        Command::JunctionMap { mu, beta, alpha, samples, output } => {
            let mut kv = KeyValues::new();
            kv.set("mu", mu);
            kv.set("beta", beta);
            kv.set("alpha", alpha);
            kv.set("samples", samples);
            ("junction-map", kv, output)
        }
        Command::TransferSim { experiment, output } => ("transfer-sim", experiment_settings(&experiment)?, output),
        Command::AlphaSweep { experiment, alphas, output } => {
            let mut kv = experiment_settings(&experiment)?;
            kv.set("alphas", alphas);
            ("alpha-sweep", kv, output)
        }
        Command::Secular { experiment, output } => ("secular", experiment_settings(&experiment)?, output),
        Command::Fieldgen { layout, center, extent, dims, image_order, output } => {
            let mut kv = KeyValues::new();
            kv.set("layout", layout);
            kv.set("center", center);
            kv.set("extent", extent);
            kv.set("dims", dims);
            if let Some(o) = image_order {
                kv.set("image_order", o);
            }
            ("fieldgen", kv, output)
        }
        Command::NullFind { grid, plane_half_separation, output } => {
            let mut kv = KeyValues::new();
            kv.set("grid", grid.display());
            kv.set("plane_half_separation", plane_half_separation);
            ("null-find", kv, output)
        }
        Command::Rerun { manifest, output } => {
            let kv = KeyValues::from_file(&manifest)?;
            let name = kv.raw("command").ok_or_else(|| CliError::Usage("manifest has no command key".into()))?;
            let name = commands::NAMES
                .iter()
                .find(|n| **n == name)
                .ok_or_else(|| CliError::Usage(format!("unknown command {name:?} in manifest")))?;
            (*name, kv, output)
        }
    };
    if output.svg {
        kv.set("svg", true);
    }
    commands::dispatch(name, &kv, &output.out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Lost) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
