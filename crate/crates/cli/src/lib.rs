//! Command-line pipeline for two-atom partial tomography: simulate the
//! blockade sequence, sample push-out shots, reconstruct the density
//! matrix elements and compare with the published values.

pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{Flags, REPRODUCE_REPS};
use crate::config::{Grid, RunConfig};
pub use crate::error::{CliError, Result};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "RYDTOMO_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "rydtomo",
    version,
    about = "Rydberg-blockade entanglement: simulation and partial tomography"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,

    /// Print the default run configuration as JSON and exit.
    #[arg(long)]
    pub print_default_config: bool,

    /// JSON run configuration; missing fields take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random stream of the run
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Repetitions per rotation angle.
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Rotation angles as START:STOP:COUNT, e.g. 0:4pi:41.
    #[arg(long, global = true, value_name = "START:STOP:COUNT")]
    pub grid: Option<String>,
    /// Perfect blockade: no double excitation in the coherent part.
    #[arg(long, global = true)]
    pub ideal: bool,
    /// Read out without the push-out pulse (every trapped atom reads 1).
    #[arg(long, global = true)]
    pub no_pushout: bool,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the generating state and its exact observable curves.
    Simulate,
    /// Sample push-out shots and the recapture probability.
    Experiment,
    /// Reconstruct the density matrix elements from a shot directory.
    Analyze {
        /// Directory holding shots.csv and shots_meta.json [default: the output directory]
        input: Option<PathBuf>,
    },
    /// Run the calibrated pipeline and compare with the published values.
    ReproducePaper,
    /// Loss channels from the five-level optical Bloch simulation.
    BlochBudget,
}

impl Cli {
    /// Config file plus command-line overrides.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(reps) = self.reps {
            config.reps = reps;
        }
        if let Some(grid) = &self.grid {
            config.grid = Grid::parse(grid)?;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        Ok(config)
    }

    fn flags(&self) -> Flags {
        Flags {
            ideal: self.ideal,
            no_pushout: self.no_pushout,
        }
    }
}

/// Parses the thread cap; `None` leaves the default pool alone.
pub fn thread_cap(value: Option<&str>) -> Result<Option<usize>> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

pub fn run(cli: &Cli, stdout: &mut impl Write) -> Result<()> {
    let print = |stdout: &mut dyn Write, text: &str| -> Result<()> {
        stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(std::path::Path::new("<stdout>"), e))
    };
    if cli.print_default_config {
        return print(stdout, &(RunConfig::default().to_pretty_json() + "\n"));
    }
    let Some(command) = &cli.command else {
        return Err(CliError::Config("no subcommand given; see --help".into()));
    };
    let config = cli.run_config()?;
    let out = config.output_dir.clone();
    match command {
        Command::Simulate => {
            let s = commands::simulate(&config, cli.flags(), &out)?;
            print(
                stdout,
                &format!(
                    "F = {:.4}  L_total = {:.4}  p_recap = {:.4}\nwrote {} and {} in {}\n",
                    s.fidelity,
                    s.summary.l_total,
                    s.p_recap,
                    commands::RHO_FILE,
                    commands::CURVES_FILE,
                    out.display()
                ),
            )
        }
        Command::Experiment => {
            let meta = commands::experiment(&config, cli.flags(), &out)?;
            let recap = meta.p_recap.expect("experiment records p_recap");
            print(
                stdout,
                &format!(
                    "{} angles × {} reps; p_recap = {:.4} ± {:.4}\nwrote {} and {} in {}\n",
                    meta.grid.len(),
                    meta.reps,
                    recap.estimate,
                    recap.sigma(),
                    commands::SHOTS_FILE,
                    commands::META_FILE,
                    out.display()
                ),
            )
        }
        Command::Analyze { input } => {
            let input = input.clone().unwrap_or_else(|| out.clone());
            let r = commands::analyze(&config, cli.seed, &input, &out)?;
            let mut text = String::new();
            for (name, e) in r.reconstruction.fields() {
                text += &format!("{name:<20} {:>8.4} ± {:.4}\n", e.value, e.sigma);
            }
            for w in &r.reconstruction.warnings {
                text += &format!("warning: {w}\n");
            }
            if !r.reconstruction.clipped.is_empty() {
                text += &format!("clipped: {}\n", r.reconstruction.clipped.join(", "));
            }
            text += &format!("verdict: {:?}\n", r.verdict.classification);
            print(stdout, &text)
        }
        Command::ReproducePaper => {
            let reps = cli.reps.unwrap_or(REPRODUCE_REPS);
            let report = commands::reproduce_paper(&config, cli.flags(), reps)?;
            commands::write_reproduce(&report, &out)?;
            print(stdout, &report.table())
        }
        Command::BlochBudget => {
            let r = commands::bloch_budget(&config, &out)?;
            let b = &r.loss_budget;
            print(
                stdout,
                &format!(
                    "effective Rabi frequency {:.3} MHz (nominal {:.3} MHz)\n\
                     spontaneous then Rydberg {:.4}\nmapping failure {:.4}\nto m1 {:.4}\nleft in p {:.4}\n\
                     back to up {:.4}\ncoherent residual {:.4}\n",
                    r.effective_rabi_hz / 1e6,
                    r.nominal_rabi_hz / 1e6,
                    b.p_spont_then_rydberg,
                    b.p_map_fail,
                    b.p_to_m1,
                    b.p_left_in_p,
                    b.p_back_to_up,
                    b.coherent_residual
                ),
            )
        }
    }
}
