//! `vmspod`: mesh → DNS → POD → ROM/VMS → studies and audits.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vmspod::diagnostics::StudyKind;
use vmspod::{Error, RunConfig, TimeScheme};

mod commands;
mod output;

/// Environment variable that overrides the configured output directory.
const OUT_ENV: &str = "VMSPOD_OUT";

#[derive(Parser)]
#[command(name = "vmspod", version, about = "POD reduced-order models with VMS post-processing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full-order solver; writes the snapshot file and an energy trace.
    Dns {
        #[command(flatten)]
        common: Common,
    },
    /// Build the POD basis from a snapshot file.
    Pod {
        #[command(flatten)]
        common: Common,
        /// Snapshot file (default: <out>/snapshots.vps).
        #[arg(long, value_name = "FILE")]
        snapshots: Option<PathBuf>,
    },
    /// Evolve the reduced model with VMS post-processing.
    Rom {
        #[command(flatten)]
        common: Common,
        /// Basis file (default: <out>/basis.vpb).
        #[arg(long, value_name = "FILE")]
        basis: Option<PathBuf>,
    },
    /// Sweep the reduced time step or the VMS cutoff against the full-order run.
    Study {
        #[command(flatten)]
        common: Common,
        /// `dt` or `R`; overrides `study.kind`.
        #[arg(long)]
        kind: Option<StudyKind>,
    },
    /// Audit a reduced trajectory against its energy law.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Trajectory CSV (default: <out>/rom_trajectory.csv).
        #[arg(long, value_name = "FILE")]
        trajectory: Option<PathBuf>,
        /// Basis file (default: <out>/basis.vpb).
        #[arg(long, value_name = "FILE")]
        basis: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Number of POD modes.
    #[arg(long = "r")]
    r: Option<usize>,
    /// VMS cutoff: gradients of the first R modes are resolved.
    #[arg(long = "R")]
    cutoff: Option<usize>,
    /// Eddy viscosity of the post-processing step.
    #[arg(long = "nu-t")]
    nu_t: Option<f64>,
    /// Reduced time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Time scheme: backward_euler or bdf2.
    #[arg(long)]
    scheme: Option<TimeScheme>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig::from_path(&self.config)?;
        if let Some(dir) = std::env::var_os(OUT_ENV) {
            cfg.out = dir.into();
        }
        if let Some(r) = self.r {
            cfg.r = r;
        }
        if let Some(c) = self.cutoff {
            cfg.cutoff = c;
        }
        if let Some(v) = self.nu_t {
            cfg.nu_t = v;
        }
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(s) = self.scheme {
            cfg.scheme = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.out)?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Dns { common } => commands::dns(&common.load()?),
        Command::Pod { common, snapshots } => commands::pod(&common.load()?, snapshots),
        Command::Rom { common, basis } => commands::rom(&common.load()?, basis),
        Command::Study { common, kind } => {
            let mut cfg = common.load()?;
            if let Some(k) = kind {
                cfg.study.kind = k;
            }
            commands::study(&cfg)
        }
        Command::Audit {
            common,
            trajectory,
            basis,
        } => commands::audit(&common.load()?, trajectory, basis),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
