//! Subcommand bodies. Each writes its files into an output directory and
//! returns a summary for the caller to print.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rydtomo_core::blochsim::{
    effective_rabi_frequency, evolve_lindblad, ground_state, FiveLevelConfig, Level5, LossBudget,
};
use rydtomo_core::dynamics::{p_recap_predicted, run_sequence, ErrorBudget};
use rydtomo_core::estimator::{
    entanglement_verdict, reconstruct, ReconstructOptions, ReconstructionReport, Verdict,
};
use rydtomo_core::measure::{
    sample_dataset_with, sample_p_recap, Readout, RecaptureEstimate, ShotDataset, ShotMeta,
};
use rydtomo_core::qstate::{qubit_summary, DensityMatrix, QubitSummary};
use rydtomo_core::rotation::curves_closed_form;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const RHO_FILE: &str = "rho.json";
pub const CURVES_FILE: &str = "curves_exact.csv";
pub const SHOTS_FILE: &str = "shots.csv";
pub const META_FILE: &str = "shots_meta.json";
pub const REPORT_FILE: &str = "report.json";
pub const FIT_FILE: &str = "fit_curves.csv";
pub const REPRODUCE_FILE: &str = "reproduce_report.json";
pub const BUDGET_FILE: &str = "budget.json";
pub const TIMESERIES_FILE: &str = "timeseries.csv";

/// Default repetitions per angle for `reproduce-paper`.
pub const REPRODUCE_REPS: usize = 10_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Flags {
    /// Perfect blockade: the coherent part of the pair is exactly Ψ⁺.
    pub ideal: bool,
    pub no_pushout: bool,
}

fn create(out: &Path, name: &str) -> Result<(std::path::PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let path = out.join(name);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    Ok((path, BufWriter::new(file)))
}

fn write_with(
    out: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> rydtomo_core::Result<()>,
) -> Result<()> {
    let (path, mut w) = create(out, name)?;
    f(&mut w).map_err(|e| CliError::io(&path, e))?;
    w.flush().map_err(|e| CliError::io(&path, e))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<()> {
    write_with(out, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

/// Generating state for a run, after the optional five-level budget.
pub fn prepare_state(
    config: &RunConfig,
    flags: Flags,
) -> Result<(DensityMatrix, ErrorBudget, Option<LossBudget>)> {
    config.validate()?;
    let (budget, losses) = config.effective_budget()?;
    let rho = run_sequence(&config.blockade, &budget, flags.ideal)?;
    Ok((rho, budget, losses))
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateSummary {
    pub summary: QubitSummary,
    pub fidelity: f64,
    pub p_recap: f64,
}

pub fn simulate(config: &RunConfig, flags: Flags, out: &Path) -> Result<SimulateSummary> {
    let (rho, _, _) = prepare_state(config, flags)?;
    write_with(out, RHO_FILE, |w| {
        w.write_all(rho.to_json()?.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    })?;
    let curves = curves_closed_form(&rho, &config.grid.thetas());
    write_with(out, CURVES_FILE, |w| curves.write_csv(w))?;
    let summary = qubit_summary(&rho);
    Ok(SimulateSummary {
        summary,
        fidelity: summary.fidelity(),
        p_recap: p_recap_predicted(&rho),
    })
}

/// Shots plus the separate recapture run; one no-push-out shot is taken per
/// push-out shot.
pub fn sample(config: &RunConfig, flags: Flags) -> Result<(ShotDataset, RecaptureEstimate)> {
    let (rho, _, _) = prepare_state(config, flags)?;
    let readout = if flags.no_pushout {
        Readout::NoPushOut
    } else {
        Readout::PushOut
    };
    let grid = config.grid.thetas();
    let data = sample_dataset_with(
        &rho,
        &grid,
        config.reps,
        config.detect_error,
        config.seed,
        readout,
    )?;
    let recap = sample_p_recap(&rho, (config.reps * grid.len()) as u64, config.seed)?;
    Ok((data, recap))
}

pub fn experiment(config: &RunConfig, flags: Flags, out: &Path) -> Result<ShotMeta> {
    let (data, recap) = sample(config, flags)?;
    write_with(out, SHOTS_FILE, |w| data.write_csv(w))?;
    let meta = ShotMeta {
        config_hash: Some(config.hash()),
        p_recap: Some(recap),
        ..data.meta()
    };
    write_json(out, META_FILE, &meta)?;
    Ok(meta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub seed: u64,
    pub reps: usize,
    pub verdict: Verdict,
    pub reconstruction: ReconstructionReport,
}

pub fn analyze_dataset(
    data: &ShotDataset,
    recap: &RecaptureEstimate,
    bootstrap_resamples: usize,
    seed: u64,
) -> Result<(ReconstructionReport, Verdict)> {
    if data.readout != Readout::PushOut {
        return Err(CliError::Analysis(
            "reconstruction needs push-out data".into(),
        ));
    }
    let report = reconstruct(
        data,
        recap,
        &ReconstructOptions {
            bootstrap_resamples,
            seed,
        },
    )?;
    let verdict = entanglement_verdict(&report);
    Ok((report, verdict))
}

/// Reads `shots.csv` and `shots_meta.json` from `input`. The bootstrap seed
/// defaults to the seed the shots were drawn with.
pub fn analyze(
    config: &RunConfig,
    seed: Option<u64>,
    input: &Path,
    out: &Path,
) -> Result<AnalysisReport> {
    let meta_path = input.join(META_FILE);
    let meta: ShotMeta = read_json(&meta_path)?;
    let shots_path = input.join(SHOTS_FILE);
    let file = File::open(&shots_path).map_err(|e| CliError::io(&shots_path, e))?;
    let data = ShotDataset::read_csv(std::io::BufReader::new(file), &meta)
        .map_err(|e| CliError::io(&shots_path, e))?;
    let recap = meta.p_recap.ok_or_else(|| {
        CliError::Config(format!("{}: no p_recap measurement", meta_path.display()))
    })?;
    let seed = seed.unwrap_or(meta.seed);
    let (reconstruction, verdict) =
        analyze_dataset(&data, &recap, config.bootstrap_resamples, seed)?;
    write_with(out, FIT_FILE, |w| {
        reconstruction.write_fit_curves_csv(&data, w)
    })?;
    let report = AnalysisReport {
        config_hash: meta.config_hash,
        seed,
        reps: meta.reps,
        verdict,
        reconstruction,
    };
    write_json(out, REPORT_FILE, &report)?;
    Ok(report)
}

/// Published values as (value, one-sigma), keyed like the report fields.
pub const PAPER_VALUES: [(&str, f64, f64); 12] = [
    ("p_dd", 0.06, 0.02),
    ("p_uu", 0.09, 0.02),
    ("p_ud_plus_du", 0.46, 0.03),
    ("re_coh", 0.23, 0.04),
    ("re_coh_crosscheck", 0.22, 0.04),
    ("l_a", 0.22, 0.01),
    ("l_b", 0.22, 0.01),
    ("l_total", 0.39, 0.02),
    ("p_recap", 0.62, 0.03),
    ("f", 0.46, 0.04),
    ("f_pairs", 0.74, 0.07),
    ("f_qubit", 0.75, 0.07),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub paper: f64,
    pub paper_sigma: f64,
    pub estimate: f64,
    pub sigma: f64,
    /// (estimate − paper) / sigma
    pub deviation_sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproduceReport {
    pub seed: u64,
    pub reps: usize,
    pub config_hash: String,
    pub budget: ErrorBudget,
    /// Exact values of the simulated state.
    pub truth: QubitSummary,
    pub rows: Vec<ComparisonRow>,
    pub verdict: Verdict,
    pub reconstruction: ReconstructionReport,
}

impl ReproduceReport {
    pub fn row(&self, name: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<20} {:>14} {:>20} {:>8}\n",
            "quantity", "paper", "estimate", "dev/σ"
        );
        for r in &self.rows {
            let paper = format!("{:.2} ± {:.2}", r.paper, r.paper_sigma);
            let est = format!("{:.4} ± {:.4}", r.estimate, r.sigma);
            s += &format!(
                "{:<20} {:>14} {:>20} {:>8.2}\n",
                r.name, paper, est, r.deviation_sigma
            );
        }
        s += &format!(
            "verdict: {:?} (F_pairs {:.1}σ above 1/2)\n",
            self.verdict.classification, self.verdict.margin_sigma
        );
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Calibrated pipeline at `reps` repetitions per angle against the
/// published numbers.
pub fn reproduce_paper(config: &RunConfig, flags: Flags, reps: usize) -> Result<ReproduceReport> {
    let config = RunConfig {
        reps,
        ..config.clone()
    };
    let (rho, budget, _) = prepare_state(&config, flags)?;
    let (data, recap) = sample(
        &config,
        Flags {
            no_pushout: false,
            ..flags
        },
    )?;
    let (reconstruction, verdict) =
        analyze_dataset(&data, &recap, config.bootstrap_resamples, config.seed)?;
    let fields = reconstruction.fields();
    let rows = PAPER_VALUES
        .iter()
        .map(|&(name, paper, paper_sigma)| {
            let (_, e) = fields
                .iter()
                .find(|(n, _)| *n == name)
                .copied()
                .expect("every paper value is a report field");
            let deviation_sigma = if e.sigma > 0.0 {
                (e.value - paper) / e.sigma
            } else {
                f64::INFINITY
            };
            ComparisonRow {
                name: name.to_owned(),
                paper,
                paper_sigma,
                estimate: e.value,
                sigma: e.sigma,
                deviation_sigma,
            }
        })
        .collect();
    Ok(ReproduceReport {
        seed: config.seed,
        reps,
        config_hash: config.hash(),
        budget,
        truth: qubit_summary(&rho),
        rows,
        verdict,
        reconstruction,
    })
}

pub fn write_reproduce(report: &ReproduceReport, out: &Path) -> Result<()> {
    write_with(out, REPRODUCE_FILE, |w| {
        Ok(w.write_all(report.to_json().as_bytes())?)
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BlochReport {
    pub config_hash: String,
    pub seed: u64,
    pub config: FiveLevelConfig,
    pub loss_budget: LossBudget,
    /// Measured r-population oscillation frequency, Hz.
    pub effective_rabi_hz: f64,
    /// Ω_R Ω_B / 2δ, Hz.
    pub nominal_rabi_hz: f64,
    pub final_populations: [f64; 5],
    pub max_p_population: f64,
    pub max_trace_error: f64,
    /// Configured budget with the simulated channels substituted.
    pub error_budget: ErrorBudget,
}

pub fn bloch_budget(config: &RunConfig, out: &Path) -> Result<BlochReport> {
    let bloch = config.bloch.unwrap_or_default();
    bloch.validate()?;
    if config.bloch_noise_samples == 0 {
        return Err(CliError::Config(
            "bloch_noise_samples must be at least 1".into(),
        ));
    }
    let pulses = bloch.standard_pulses();
    let series = evolve_lindblad(&bloch, &pulses, &ground_state(), bloch.max_step())?;
    write_with(out, TIMESERIES_FILE, |w| series.write_csv(w))?;
    let loss_budget = rydtomo_core::blochsim::loss_budget(
        &bloch,
        &pulses,
        config.bloch_noise_samples,
        config.seed,
    )?;
    let mut error_budget = config.budget;
    loss_budget.apply_to(&mut error_budget);
    let two_pi = 2.0 * std::f64::consts::PI;
    let report = BlochReport {
        config_hash: config.hash(),
        seed: config.seed,
        config: bloch,
        loss_budget,
        effective_rabi_hz: effective_rabi_frequency(&bloch)? / two_pi,
        nominal_rabi_hz: bloch.effective_rabi_excitation() / two_pi,
        final_populations: series.final_populations(),
        max_p_population: series.max_population(Level5::P),
        max_trace_error: series
            .states
            .iter()
            .map(|r| (r.trace().re - 1.0).abs())
            .fold(0.0, f64::max),
        error_budget,
    };
    write_json(out, BUDGET_FILE, &report)?;
    Ok(report)
}
