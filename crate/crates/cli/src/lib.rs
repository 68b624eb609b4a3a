//! `casimir` command-line front end.
//!
//! Separations are given and written in nm, force gradients in μN/m.
//! Every output file starts with a `#` manifest holding the command line
//! and the fully resolved configuration.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

pub use commands::{set_seed, Runner};
pub use config::{ConfigError, ModelChoice, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "casimir", version, about = "Casimir force gradients, synthetic FM-AFM campaigns and model exclusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelChoice>,
    /// Relative tolerance of the Lifshitz sums and integrals.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drude and/or plasma gradient sweeps over the [theory] grid.
    Theory,
    /// Synthetic measurement grids for the configured sets.
    Synth,
    /// Electrostatic calibration of grid files.
    Calibrate {
        /// Grid files (default: the configured sets in the output directory).
        inputs: Vec<PathBuf>,
    },
    /// Gradient extraction, set averaging and model comparison.
    Compare {
        inputs: Vec<PathBuf>,
        /// Theory table (default: theory.txt in the output directory).
        #[arg(long)]
        theory: Option<PathBuf>,
    },
    /// theory, synth, calibrate and compare in sequence.
    Pipeline,
}

impl Cli {
    /// Loads the config and applies the flag overrides.
    pub fn runner(&self) -> Result<Runner> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.run.seed = seed;
        }
        if let Some(out) = &self.out {
            config.run.out = out.clone();
        }
        if let Some(model) = self.model {
            config.run.model = model;
        }
        if let Some(tol) = self.tol {
            config.run.tol = tol;
        }
        config.validate()?;
        Ok(Runner::new(config, self.config.clone()))
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut runner = cli.runner()?;
    runner.verbose = true;
    match &cli.command {
        Command::Theory => {
            runner.theory()?;
        }
        Command::Synth => {
            runner.synth()?;
        }
        Command::Calibrate { inputs } => {
            runner.calibrate(inputs)?;
        }
        Command::Compare { inputs, theory } => {
            runner.compare(inputs, theory.as_deref())?;
        }
        Command::Pipeline => {
            runner.pipeline()?;
        }
    }
    Ok(())
}
