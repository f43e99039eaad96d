//! `forchms`: batch driver for fine, offline and online Darcy-Forchheimer runs.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Setup;
use crate::config::RawConfig;
use crate::failure::Failure;

#[derive(Parser, Debug)]
#[command(name = "forchms", version, about = "Multiscale Darcy-Forchheimer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fine-grid reference solves and iteration counts.
    Fine(Common),
    /// Offline and updated-offline error tables.
    Offline(Common),
    /// Online enrichment histories.
    Online(Common),
    /// Write the configured permeability field as a raster.
    GenField(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Permeability raster.
    #[arg(long)]
    perm: Option<String>,
    /// Raster values are base-10 logarithms.
    #[arg(long)]
    log10: bool,
    /// Comma-separated β0 values.
    #[arg(long)]
    beta0: Option<String>,
    /// `picard`, `newton` or a comma-separated list.
    #[arg(long)]
    scheme: Option<String>,
    /// Comma-separated offline basis counts per coarse element.
    #[arg(long = "dof-per-t")]
    dof_per_t: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    xi: Option<String>,
    /// `updating`, `fixed` or a comma-separated list.
    #[arg(long)]
    variant: Option<String>,
    /// `uniform`, `adaptive` or a comma-separated list.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    sweeps: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// `preset:left-right` or `preset:five-spot`.
    #[arg(long)]
    bc: Option<String>,
    /// Synthetic field kind: `layered`, `channel` or `blobs`.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    contrast: Option<String>,
    /// Any configuration key, e.g. `--set nx=32`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn raw_config(&self) -> Result<RawConfig, Failure> {
        let mut raw = RawConfig::default();
        if let Some(path) = &self.config {
            raw.merge_file(path)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::input(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            raw.set(k, v)?;
        }
        let flags = [
            ("perm", &self.perm),
            ("beta0", &self.beta0),
            ("scheme", &self.scheme),
            ("dof_per_t", &self.dof_per_t),
            ("theta", &self.theta),
            ("xi", &self.xi),
            ("variant", &self.variant),
            ("mode", &self.mode),
            ("sweeps", &self.sweeps),
            ("out", &self.out),
            ("bc", &self.bc),
            ("field", &self.kind),
            ("seed", &self.seed),
            ("contrast", &self.contrast),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                raw.set(k, v)?;
            }
        }
        if self.log10 {
            raw.set("log10", "true")?;
        }
        Ok(raw)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (common, cmd): (&Common, fn(&Setup) -> Result<(), Failure>) = match &cli.command {
        Command::Fine(c) => (c, commands::cmd_fine),
        Command::Offline(c) => (c, commands::cmd_offline),
        Command::Online(c) => (c, commands::cmd_online),
        Command::GenField(c) => (c, commands::cmd_gen_field),
    };
    let cfg = common.raw_config()?.resolve()?;
    cmd(&Setup::new(cfg)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", Failure::input(e.to_string().lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ")).line());
            return ExitCode::from(failure::EXIT_INPUT);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.line());
            ExitCode::from(f.code)
        }
    }
}
