//! Seeded, replayable simulation runs of the cavity-array model.
//!
//! Each invocation writes its outputs plus a `manifest.json` into
//! `<out>/<run_id>/`, where the run id is a digest of the command, its
//! arguments, the seed and the full configuration.

pub mod commands;
pub mod config;
pub mod run;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::run::{RunDir, RunManifest, MANIFEST_NAME};

/// Bad arguments or configuration; reported with exit code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Parser)]
#[command(name = "cavity-array", version, about = "Seeded tweezer-array and cavity-spectrum simulations")]
pub struct Cli {
    /// TOML configuration; missing keys fall back to the preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Named parameter preset.
    #[arg(long, global = true, default_value = "paper-2024")]
    pub preset: String,
    /// Master seed of every random stream.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Root directory for run outputs.
    #[arg(long, global = true, default_value = "runs")]
    pub out: PathBuf,
    /// Number of Monte Carlo trials (or planning attempts).
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CouplingArg {
    Uniform,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Subcommand)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    /// Stochastic loading: per-trial occupancies and the atom-number histogram.
    LoadSim,
    /// Defect-free success probability against target length.
    DefectFreeCurve {
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        #[arg(long, default_value_t = 40)]
        n_max: usize,
    },
    /// Synthesize one transmission spectrum.
    Spectrum {
        /// Collective coupling Ω (MHz); overrides --atoms.
        #[arg(long)]
        omega: Option<f64>,
        /// Number of uniformly coupled atoms, Ω = g√N.
        #[arg(long, default_value_t = 1)]
        atoms: usize,
        /// Cavity-atom detuning (MHz); defaults to the config value.
        #[arg(long, allow_hyphen_values = true)]
        delta_ca: Option<f64>,
        /// Additive noise level; defaults to the config value.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Fit a spectrum CSV (`detuning_MHz,transmission,sigma`).
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
    /// Synthesize-and-fit series over atom numbers and the √N regression.
    Scaling {
        #[arg(long, default_value_t = 3)]
        n_min: usize,
        #[arg(long, default_value_t = 26)]
        n_max: usize,
        #[arg(long, value_enum, default_value_t = CouplingArg::Uniform)]
        coupling: CouplingArg,
    },
    /// Load until a defect-free block is possible, then plan moves and tone sweeps.
    Plan {
        #[arg(long, default_value_t = 20)]
        n_target: usize,
    },
    /// Re-run the invocation recorded in a manifest.
    Replay { manifest: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::LoadSim => "load-sim",
            Command::DefectFreeCurve { .. } => "defect-free-curve",
            Command::Spectrum { .. } => "spectrum",
            Command::Fit { .. } => "fit",
            Command::Scaling { .. } => "scaling",
            Command::Plan { .. } => "plan",
            Command::Replay { .. } => "replay",
        }
    }

    /// Trial count used when `--trials` is absent.
    pub fn default_trials(&self) -> Option<u64> {
        match self {
            Command::LoadSim => Some(890),
            Command::DefectFreeCurve { .. } => Some(100_000),
            Command::Plan { .. } => Some(1000),
            _ => None,
        }
    }
}

/// A fully resolved run: what `execute` needs and what the manifest records.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub command: Command,
    pub trials: Option<u64>,
    pub master_seed: u64,
    pub preset: String,
    pub config: Config,
}

impl Invocation {
    pub fn from_cli(cli: &Cli) -> anyhow::Result<Self> {
        let config = match &cli.config {
            Some(path) => Config::load(path)?,
            None => Config::preset(&cli.preset)?,
        };
        Ok(Self {
            trials: cli.trials.or_else(|| cli.command.default_trials()),
            command: cli.command.clone(),
            master_seed: cli.seed,
            preset: cli.preset.clone(),
            config,
        })
    }

    pub fn from_manifest(m: RunManifest) -> Self {
        Self {
            command: m.invocation,
            trials: m.trials,
            master_seed: m.master_seed,
            preset: m.preset,
            config: m.config,
        }
    }

    pub fn run_id(&self) -> anyhow::Result<String> {
        run::run_id(&self.command, self.trials, self.master_seed, &self.config)
    }
}

/// Runs `cli` without printing anything and returns the run directory.
pub fn run_cli(cli: &Cli) -> anyhow::Result<PathBuf> {
    if let Command::Replay { manifest } = &cli.command {
        let m = run::read_manifest(manifest)?;
        if matches!(m.invocation, Command::Replay { .. }) {
            anyhow::bail!(UsageError("a manifest cannot record a replay".into()));
        }
        return execute(&Invocation::from_manifest(m), &cli.out);
    }
    execute(&Invocation::from_cli(cli)?, &cli.out)
}

/// Runs `inv` into `<out_root>/<run_id>/` and writes its manifest last.
pub fn execute(inv: &Invocation, out_root: &Path) -> anyhow::Result<PathBuf> {
    inv.config.validate()?;
    if let Some(0) = inv.trials {
        anyhow::bail!(UsageError("--trials must be at least 1".into()));
    }
    let run_id = inv.run_id()?;
    let mut dir = RunDir::create(out_root, &run_id)?;
    commands::dispatch(inv, &mut dir)?;
    let manifest = RunManifest {
        run_id,
        timestamp_unix: run::now_unix(),
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: inv.command.name().to_string(),
        invocation: inv.command.clone(),
        trials: inv.trials,
        master_seed: inv.master_seed,
        preset: inv.preset.clone(),
        config: inv.config.clone(),
        outputs: dir.outputs().to_vec(),
    };
    dir.write_json(MANIFEST_NAME, &manifest)?;
    Ok(dir.path().to_path_buf())
}

/// 2 for usage and configuration errors, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.downcast_ref::<UsageError>().is_some()) {
        2
    } else {
        1
    }
}
