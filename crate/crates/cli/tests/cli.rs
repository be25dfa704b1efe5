use std::path::Path;
use std::process::Command;

use clap::Parser;
use rydtomo_cli::commands::{self, Flags};
use rydtomo_cli::config::{Grid, RunConfig};
use rydtomo_cli::{run, thread_cap, Cli};
use rydtomo_core::dynamics::ErrorBudget;
use rydtomo_core::estimator::{fit_cosine_series, Classification, CurveData};
use rydtomo_core::measure::{ShotDataset, ShotMeta};
use rydtomo_core::rotation::ObservableCurves;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rydtomo"))
}

fn config_in(dir: &Path) -> RunConfig {
    RunConfig {
        output_dir: dir.to_owned(),
        ..Default::default()
    }
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn simulate_default_curves_fit_published_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    commands::simulate(&config_in(dir.path()), Flags::default(), dir.path()).unwrap();
    let curves = ObservableCurves::read_csv(
        std::fs::File::open(dir.path().join(commands::CURVES_FILE)).unwrap(),
    )
    .unwrap();
    let fit = fit_cosine_series(&CurveData::unweighted(&curves.thetas, &curves.p11)).unwrap();
    assert!((fit.b + 0.096).abs() < 0.001, "{}", fit.b);
    let rho = std::fs::read_to_string(dir.path().join(commands::RHO_FILE)).unwrap();
    rydtomo_core::qstate::DensityMatrix::from_json(&rho).unwrap();
}

#[test]
fn simulate_ideal_gives_bell_curves() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        budget: ErrorBudget::zero(),
        ..config_in(dir.path())
    };
    let s = commands::simulate(
        &config,
        Flags {
            ideal: true,
            ..Default::default()
        },
        dir.path(),
    )
    .unwrap();
    assert!((s.fidelity - 1.0).abs() < 1e-12);
    let curves = ObservableCurves::read_csv(
        std::fs::File::open(dir.path().join(commands::CURVES_FILE)).unwrap(),
    )
    .unwrap();
    assert!(curves
        .p11
        .iter()
        .all(|&p| (-1e-12..=0.5 + 1e-12).contains(&p)));
}

#[test]
fn same_seed_same_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        let config = config_in(dir);
        commands::simulate(&config, Flags::default(), dir).unwrap();
        commands::experiment(&config, Flags::default(), dir).unwrap();
        commands::analyze(&config, None, dir, dir).unwrap();
    }
    for name in [
        commands::RHO_FILE,
        commands::CURVES_FILE,
        commands::SHOTS_FILE,
        commands::META_FILE,
        commands::REPORT_FILE,
        commands::FIT_FILE,
    ] {
        assert_eq!(
            read(&a.path().join(name)),
            read(&b.path().join(name)),
            "{name}"
        );
    }
}

#[test]
fn experiment_measures_recapture() {
    let dir = tempfile::tempdir().unwrap();
    let meta = commands::experiment(&config_in(dir.path()), Flags::default(), dir.path()).unwrap();
    let recap = meta.p_recap.unwrap();
    assert!((recap.estimate - 0.62).abs() < 0.03);
    assert_eq!(meta.reps, 100);
    assert_eq!(meta.config_hash, Some(config_in(dir.path()).hash()));
    // Binomial error of one angle at 100 repetitions is at most 0.05.
    let data = ShotDataset::read_csv(
        std::fs::File::open(dir.path().join(commands::SHOTS_FILE)).unwrap(),
        &meta,
    )
    .unwrap();
    for p in data.empirical_curves().p11 {
        assert!((p * (1.0 - p) / 100.0).sqrt() <= 0.05);
    }
}

#[test]
fn no_pushout_reads_trapped_leakage_as_present() {
    let dir = tempfile::tempdir().unwrap();
    let budget = ErrorBudget {
        p_spont_to_xtrap: 1.0,
        ..ErrorBudget::zero()
    };
    let config = RunConfig {
        budget,
        reps: 20,
        ..config_in(dir.path())
    };
    let data = |flags| commands::sample(&config, flags).unwrap().0;
    let without = data(Flags {
        no_pushout: true,
        ..Default::default()
    });
    assert!(without.counts().iter().all(|c| c.n11 == 20));
    let with = data(Flags::default());
    assert!(with.counts().iter().all(|c| c.n00 == 20));
}

#[test]
fn analysis_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_in(dir.path());
    commands::experiment(&config, Flags::default(), dir.path()).unwrap();
    let first = commands::analyze(&config, None, dir.path(), dir.path()).unwrap();
    let bytes = read(&dir.path().join(commands::REPORT_FILE));
    let again = commands::analyze(&config, None, dir.path(), dir.path()).unwrap();
    assert_eq!(first, again);
    assert_eq!(bytes, read(&dir.path().join(commands::REPORT_FILE)));

    let (data, recap) = commands::sample(&config, Flags::default()).unwrap();
    let (direct, _) =
        commands::analyze_dataset(&data, &recap, config.bootstrap_resamples, config.seed).unwrap();
    assert_eq!(direct, first.reconstruction);
    let parsed: commands::AnalysisReport = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(parsed, first);
}

#[test]
fn ideal_run_has_unit_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        budget: ErrorBudget::zero(),
        reps: 2000,
        bootstrap_resamples: 200,
        ..config_in(dir.path())
    };
    commands::experiment(
        &config,
        Flags {
            ideal: true,
            ..Default::default()
        },
        dir.path(),
    )
    .unwrap();
    let r = commands::analyze(&config, None, dir.path(), dir.path()).unwrap();
    assert!(r.reconstruction.f.value > 0.97, "{:?}", r.reconstruction.f);
    assert_eq!(r.verdict.classification, Classification::EntangledPairs);
}

#[test]
fn tiny_runs_have_wide_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        reps: 10,
        bootstrap_resamples: 300,
        ..config_in(dir.path())
    };
    commands::experiment(&config, Flags::default(), dir.path()).unwrap();
    let r = commands::analyze(&config, None, dir.path(), dir.path()).unwrap();
    assert!(r.reconstruction.f.sigma > 0.05, "{:?}", r.reconstruction.f);
}

#[test]
fn paper_regime_is_entangled() {
    let r = commands::reproduce_paper(&RunConfig::default(), Flags::default(), 10_000).unwrap();
    let f_pairs = r.row("f_pairs").unwrap();
    assert!((f_pairs.estimate - 0.74).abs() < 0.07);
    assert_eq!(r.verdict.classification, Classification::EntangledPairs);
    assert!(r.table().contains("re_coh"));
}

#[test]
fn bloch_section_overrides_budget() {
    let config: RunConfig =
        serde_json::from_str(r#"{"bloch": {}, "bloch_noise_samples": 2}"#).unwrap();
    let (budget, losses) = config.effective_budget().unwrap();
    let losses = losses.unwrap();
    assert_eq!(budget.p_map_fail, losses.p_map_fail);
    assert_eq!(budget.p_spont_to_xtrap, losses.p_to_m1);
    assert_eq!(budget.p_trap_off, ErrorBudget::default().p_trap_off);
}

#[test]
fn bloch_budget_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        bloch_noise_samples: 2,
        ..config_in(dir.path())
    };
    let r = commands::bloch_budget(&config, dir.path()).unwrap();
    assert!(r.max_trace_error < 1e-9);
    assert!(dir.path().join(commands::TIMESERIES_FILE).exists());
    let json: serde_json::Value =
        serde_json::from_slice(&read(&dir.path().join(commands::BUDGET_FILE))).unwrap();
    assert!(json["loss_budget"]["p_map_fail"].is_number());
    assert_eq!(json["config_hash"], config.hash());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"reps": 7, "seed": 3}"#).unwrap();
    let cli = Cli::try_parse_from([
        "rydtomo",
        "simulate",
        "--config",
        path.to_str().unwrap(),
        "--seed",
        "9",
        "--grid",
        "0:2pi:9",
    ])
    .unwrap();
    let c = cli.run_config().unwrap();
    assert_eq!((c.reps, c.seed), (7, 9));
    assert_eq!(
        c.grid,
        Grid::Range {
            start: 0.0,
            stop: 2.0 * std::f64::consts::PI,
            count: 9
        }
    );
}

#[test]
fn print_default_config_parses_back() {
    let cli = Cli::try_parse_from(["rydtomo", "--print-default-config"]).unwrap();
    let mut out = Vec::new();
    run(&cli, &mut out).unwrap();
    let parsed: RunConfig = serde_json::from_slice(&out).unwrap();
    assert_eq!(parsed, RunConfig::default());
}

#[test]
fn thread_cap_parsing() {
    assert_eq!(thread_cap(None).unwrap(), None);
    assert_eq!(thread_cap(Some("4")).unwrap(), Some(4));
    assert!(thread_cap(Some("0")).is_err());
    assert!(thread_cap(Some("many")).is_err());
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code().unwrap();

    assert_eq!(code(&["simulate", "--out", out]), 0);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"reps": 0}"#).unwrap();
    assert_eq!(
        code(&["simulate", "--config", bad.to_str().unwrap(), "--out", out]),
        2
    );
    std::fs::write(&bad, r#"{"unknown": 1}"#).unwrap();
    assert_eq!(
        code(&["simulate", "--config", bad.to_str().unwrap(), "--out", out]),
        2
    );
    assert_eq!(code(&["simulate", "--config", "/nonexistent/run.json"]), 4);
    assert_eq!(code(&["analyze", "/nonexistent", "--out", out]), 4);
    assert_eq!(code(&["experiment", "--grid", "0:4pi:4", "--out", out]), 0);
    assert_eq!(code(&["analyze", "--out", out]), 3);
    let threads = bin()
        .args(["simulate", "--out", out])
        .env("RYDTOMO_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn binary_reproduce_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        let out = bin()
            .args([
                "reproduce-paper",
                "--reps",
                "500",
                "--seed",
                "4",
                "--out",
                dir.to_str().unwrap(),
            ])
            .env("RYDTOMO_THREADS", "2")
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let name = commands::REPRODUCE_FILE;
    assert_eq!(read(&a.path().join(name)), read(&b.path().join(name)));
    let meta: Result<ShotMeta, _> = serde_json::from_slice(&read(&a.path().join(name)));
    assert!(meta.is_err(), "report is not a shot sidecar");
}
