//! `pacm`: optimize, verify, extract and export pressure-actuated compliant
//! mechanisms.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pacm_core::error::Result;
use pacm_core::io::{Length, RunConfig};
use pacm_core::mesh::PresetKind;

#[derive(Parser)]
#[command(name = "pacm", version, about = "Topology optimization of pressure-actuated compliant mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the robust three-field optimization.
    Optimize {
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Threshold a design and run the large-deformation pressure sweep.
    Verify {
        #[command(flatten)]
        opts: CommonOpts,
        /// Physical density field, one value per element.
        #[arg(long)]
        design: PathBuf,
        /// Comma-separated pressures in bar.
        #[arg(long, value_delimiter = ',')]
        pressures: Option<Vec<f64>>,
    },
    /// Extract closed design outlines by iso-contouring.
    Extract {
        #[command(flatten)]
        opts: CommonOpts,
        #[arg(long)]
        design: PathBuf,
        /// Iso-level of the outline; defaults to verify.threshold.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Analyze a design and write its density, pressure and displacement to VTK.
    Export {
        #[command(flatten)]
        opts: CommonOpts,
        #[arg(long)]
        design: PathBuf,
    },
}

#[derive(Args, Clone, Debug, Default)]
pub struct CommonOpts {
    /// TOML run configuration; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in problem: inverter, gripper or contractor.
    #[arg(long)]
    preset: Option<PresetKind>,
    /// Elements along x.
    #[arg(long)]
    nex: Option<usize>,
    /// Elements along y.
    #[arg(long)]
    ney: Option<usize>,
    /// Permitted volume fraction of the intermediate design.
    #[arg(long)]
    volfrac: Option<f64>,
    /// Threshold offset of the eroded and dilated realizations.
    #[arg(long)]
    delta_eta: Option<f64>,
    /// Filter radius as a multiple of the element size.
    #[arg(long)]
    rfill_mult: Option<f64>,
    /// Optimization iterations.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Iterations between doublings of the projection sharpness.
    #[arg(long)]
    beta_interval: Option<usize>,
    /// Output directory; overrides PACM_OUT_DIR and the config file.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl CommonOpts {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = self.preset {
            cfg.mesh.preset = p;
        }
        if let Some(n) = self.nex {
            cfg.mesh.nex = n;
        }
        if let Some(n) = self.ney {
            cfg.mesh.ney = n;
        }
        if let Some(v) = self.volfrac {
            cfg.optimizer.volume_fraction = v;
        }
        if let Some(d) = self.delta_eta {
            cfg.optimizer.delta_eta = d;
        }
        if let Some(k) = self.rfill_mult {
            cfg.analysis.filter_radius = Length::ElementSizes(k);
        }
        if let Some(n) = self.max_iter {
            cfg.optimizer.max_iterations = n;
        }
        if let Some(n) = self.beta_interval {
            cfg.optimizer.beta_interval = n;
        }
        if let Some(dir) = std::env::var_os("PACM_OUT_DIR") {
            cfg.output.dir = dir.into();
        }
        if let Some(dir) = &self.out_dir {
            cfg.output.dir = dir.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Optimize { opts } => commands::optimize(&opts.resolve()?),
        Command::Verify { opts, design, pressures } => {
            let mut cfg = opts.resolve()?;
            if let Some(bar) = pressures {
                cfg.verify.pressures = bar.iter().map(|p| p * 1e5).collect();
                cfg.validate()?;
            }
            commands::verify(&cfg, &design)
        }
        Command::Extract { opts, design, threshold } => {
            let cfg = opts.resolve()?;
            commands::extract(&cfg, &design, threshold.unwrap_or(cfg.verify.threshold))
        }
        Command::Export { opts, design } => commands::export(&opts.resolve()?, &design),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
