//! `calderon`: meshing, forward solves, gradient checks and inversions for
//! the inverse conductivity problem.

mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_config, parse_override, Entry, ExperimentConfig, Preset};
use error::CliError;

#[derive(Parser)]
#[command(name = "calderon", version, about = "Adjoint-based inversion for the inverse conductivity problem")]
struct Cli {
    /// Output directory; overrides $CALDERON_OUT_DIR and the config file.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a structured simplex mesh of an axis-aligned box.
    Mesh {
        /// Box corners `LO:HI`, comma-separated coordinates, e.g. `0,0,0:1,1,0.05`.
        #[arg(long = "box")]
        bbox: String,
        /// Cells per axis, comma-separated, e.g. `20,20,1`.
        #[arg(long)]
        div: String,
        /// Mesh file to write; defaults to `mesh.txt` in the output directory.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve the forward problems of a preset and write potentials and fluxes.
    Forward(ExperimentArgs),
    /// Compare the adjoint gradient with finite differences on sampled elements.
    Gradcheck {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Test hook: scale the adjoint gradient by 1.1 before comparing.
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Recover the conductivity of a preset from its synthetic boundary data.
    Invert(ExperimentArgs),
    /// Write the one-dimensional non-uniqueness profiles and their shared boundary data.
    OnedDemo(ExperimentArgs),
}

#[derive(Args, Default)]
struct ExperimentArgs {
    /// Config file of `key = value` lines under `[section]` headers.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Cells per in-plane axis.
    #[arg(long)]
    div: Option<usize>,
    #[arg(long)]
    measurements: Option<usize>,
    /// `element`, or a total region count such as 25 or 125.
    #[arg(long)]
    dofs: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k0: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Override any config key, e.g. `--set descent.lambda=0.1`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

impl ExperimentArgs {
    fn resolve(&self, fallback: Preset) -> Result<ExperimentConfig, CliError> {
        let mut entries = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(CliError::io(format!("reading {}", path.display())))?;
                parse_config(&text, path)?
            }
            None => Vec::new(),
        };
        let flag = |section: &str, key: &str, value: String| Entry {
            section: section.into(),
            key: key.into(),
            value,
            origin: format!("--{}", key.replace('_', "-")),
        };
        let flags = [
            ("experiment", "preset", self.preset.clone()),
            ("experiment", "divisions", self.div.map(|v| v.to_string())),
            ("experiment", "measurements", self.measurements.map(|v| v.to_string())),
            ("experiment", "dofs", self.dofs.clone()),
            ("experiment", "seed", self.seed.map(|v| v.to_string())),
            ("descent", "k0", self.k0.map(|v| v.to_string())),
            ("descent", "max_iters", self.max_iters.map(|v| v.to_string())),
            ("descent", "alpha", self.alpha.map(|v| v.to_string())),
        ];
        for (section, key, value) in flags {
            if let Some(v) = value {
                entries.push(flag(section, key, v));
            }
        }
        for s in &self.overrides {
            entries.push(parse_override(s)?);
        }
        ExperimentConfig::resolve(&entries, fallback)
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let flag_dir = cli.out_dir.as_deref();
    match cli.command {
        Command::Mesh { bbox, div, output } => {
            let path = match output {
                Some(p) => p,
                None => run::output_dir(flag_dir, None)?.join("mesh.txt"),
            };
            run::cmd_mesh(&bbox, &div, &path)
        }
        Command::Forward(exp) => {
            let cfg = exp.resolve(Preset::SquareConstant)?;
            let dir = run::output_dir(flag_dir, cfg.out_dir.as_deref())?;
            run::cmd_forward(&cfg, &dir)
        }
        Command::Gradcheck { exp, corrupt_gradient } => {
            let cfg = exp.resolve(Preset::SquareConstant)?;
            let dir = run::output_dir(flag_dir, cfg.out_dir.as_deref())?;
            run::cmd_gradcheck(&cfg, &dir, corrupt_gradient)
        }
        Command::Invert(exp) => {
            let cfg = exp.resolve(Preset::SquareConstant)?;
            let dir = run::output_dir(flag_dir, cfg.out_dir.as_deref())?;
            run::cmd_invert(&cfg, &dir)
        }
        Command::OnedDemo(exp) => {
            let cfg = exp.resolve(Preset::OnedDemo)?;
            let dir = run::output_dir(flag_dir, cfg.out_dir.as_deref())?;
            run::cmd_oned(&cfg, &dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
