mod common;

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use common::{random_density_matrix, table_state};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rydtomo_core::dynamics::{
    run_sequence, run_sequence_with_losses, AtomLoss, BlockadeConfig, ErrorBudget,
};
use rydtomo_core::estimator::{
    entanglement_verdict, extract_losses, fit_cosine_series, reconstruct, reconstruct_counts,
    Classification, CurveData, ReconstructOptions, ReconstructionReport,
};
use rydtomo_core::measure::{sample_dataset, sample_p_recap, JointCounts, RecaptureEstimate};
use rydtomo_core::qstate::{qubit_summary, DensityMatrix};
use rydtomo_core::rotation::{curves_closed_form, default_grid, linear_grid};

/// Counts proportional to the exact joint probabilities.
fn exact_counts(rho: &DensityMatrix, thetas: &[f64], n: u64) -> Vec<JointCounts> {
    curves_closed_form(rho, thetas)
        .points()
        .map(|p| {
            let k = |x: f64| (x * n as f64).round() as u64;
            let (n11, n10, n01) = (k(p.p11), k(p.p10), k(p.p01));
            JointCounts {
                n11,
                n10,
                n01,
                n00: n - n11 - n10 - n01,
            }
        })
        .collect()
}

fn noiseless_report(rho: &DensityMatrix) -> ReconstructionReport {
    let g = default_grid();
    let s = qubit_summary(rho);
    let options = ReconstructOptions {
        bootstrap_resamples: 0,
        seed: 0,
    };
    reconstruct_counts(
        &g,
        &exact_counts(rho, &g, 1_000_000_000_000),
        &RecaptureEstimate::exact(1.0 - s.l_total),
        &options,
    )
    .unwrap()
}

#[test]
fn noiseless_table_state_is_recovered() {
    let rho = table_state();
    let s = qubit_summary(&rho);
    let r = noiseless_report(&rho);
    for (got, want) in [
        (r.p_dd.value, 0.06),
        (r.p_uu.value, 0.09),
        // The estimator assumes independent losses, so the 0.0016 of double
        // loss above l_a·l_b moves from P_{↓↑}+P_{↑↓} into the coherence.
        (r.p_ud_plus_du.value, 0.46 - 0.0016),
        (r.re_coh.value, 0.23 + 0.0008),
        (r.l_a.value, 0.22),
        (r.l_b.value, 0.22),
        (r.l_total.value, 0.3916),
        (r.f.value, 0.46),
        (
            r.re_coh_crosscheck.value,
            0.23 + (s.p_xx - s.l_a * s.l_b) / 2.0,
        ),
    ] {
        assert_abs_diff_eq!(got, want, epsilon = 1e-9);
    }
    assert_abs_diff_eq!(r.fits.p11.b, -0.09625, epsilon = 1e-9);
    assert_abs_diff_eq!(r.fits.parity.b, -0.385, epsilon = 1e-9);
    assert!(r.clipped.is_empty() && r.warnings.is_empty());
}

#[test]
fn noiseless_independent_losses_close_exactly() {
    for seed in 0..10 {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let budget = ErrorBudget {
            p_trap_off: g.random_range(0.0..0.1),
            p_map_fail: g.random_range(0.0..0.1),
            p_double_excite: g.random_range(0.0..0.1),
            p_uu_spontaneous: g.random_range(0.0..0.1),
            ..ErrorBudget::zero()
        };
        let rho = run_sequence(&BlockadeConfig::default(), &budget, false).unwrap();
        let s = qubit_summary(&rho);
        let r = noiseless_report(&rho);
        for (got, want) in [
            (r.p_dd.value, s.p_dd),
            (r.p_uu.value, s.p_uu),
            (r.p_ud_plus_du.value, s.p_ud + s.p_du),
            (r.re_coh.value, s.re_coh),
            (r.re_coh_crosscheck.value, s.re_coh),
            (r.l_a.value, s.l_a),
            (r.l_total.value, s.l_total),
            (r.f_qubit.value, s.fidelity() / (1.0 - s.l_total)),
        ] {
            assert_abs_diff_eq!(got, want, epsilon = 1e-9);
        }
    }
}

#[test]
fn sampled_budgets_are_recovered() {
    let g = default_grid();
    let options = ReconstructOptions {
        bootstrap_resamples: 300,
        seed: 1,
    };
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let budget = ErrorBudget {
            p_trap_off: rng.random_range(0.0..0.05),
            p_detect: rng.random_range(0.0..0.05),
            p_spont_to_rydberg: rng.random_range(0.0..0.1),
            p_map_fail: rng.random_range(0.0..0.1),
            p_spont_to_xtrap: rng.random_range(0.0..0.02),
            p_double_excite: rng.random_range(0.0..0.1),
            p_uu_spontaneous: rng.random_range(0.0..0.1),
            p_uu_imperfect_excitation: rng.random_range(0.0..0.1),
        };
        let rho = run_sequence(&BlockadeConfig::default(), &budget, false).unwrap();
        let s = qubit_summary(&rho);
        let d = sample_dataset(&rho, &g, 100_000, 0.0, seed).unwrap();
        let recap = sample_p_recap(&rho, 100_000, seed).unwrap();
        let r = reconstruct(&d, &recap, &options).unwrap();
        for (name, est, want) in [
            ("p_dd", r.p_dd, s.p_dd),
            ("p_uu", r.p_uu, s.p_uu),
            ("p_ud_plus_du", r.p_ud_plus_du, s.p_ud + s.p_du),
            ("re_coh", r.re_coh, s.re_coh),
            ("l_a", r.l_a, s.l_a),
            ("l_b", r.l_b, s.l_b),
            ("l_total", r.l_total, s.l_total),
        ] {
            assert!(
                (est.value - want).abs() < 4.0 * est.sigma,
                "seed {seed} {name}: {} ± {} vs {want}",
                est.value,
                est.sigma
            );
        }
    }
}

#[test]
fn asymmetric_losses_are_resolved() {
    let rho = run_sequence_with_losses(
        &BlockadeConfig::default(),
        &ErrorBudget::zero(),
        AtomLoss {
            gone: 0.10,
            trap: 0.0,
        },
        AtomLoss {
            gone: 0.30,
            trap: 0.0,
        },
        true,
    )
    .unwrap();
    let d = sample_dataset(&rho, &default_grid(), 10_000, 0.0, 4).unwrap();
    let r = reconstruct(
        &d,
        &sample_p_recap(&rho, 10_000, 4).unwrap(),
        &ReconstructOptions::default(),
    )
    .unwrap();
    assert!(
        (r.l_a.value - 0.10).abs() < 3.0 * r.l_a.sigma,
        "{:?}",
        r.l_a
    );
    assert!(
        (r.l_b.value - 0.30).abs() < 3.0 * r.l_b.sigma,
        "{:?}",
        r.l_b
    );
    let losses = extract_losses(&d).unwrap();
    assert_eq!(losses.l_a, r.l_a.value);
}

#[test]
fn bootstrap_is_seeded() {
    let rho = table_state();
    let d = sample_dataset(&rho, &default_grid(), 2000, 0.0, 8).unwrap();
    let recap = sample_p_recap(&rho, 2000, 8).unwrap();
    let options = ReconstructOptions {
        bootstrap_resamples: 200,
        seed: 5,
    };
    let a = reconstruct(&d, &recap, &options).unwrap();
    assert_eq!(a, reconstruct(&d, &recap, &options).unwrap());
    let b = reconstruct(&d, &recap, &ReconstructOptions { seed: 6, ..options }).unwrap();
    assert_eq!(a.f.value, b.f.value);
    assert_ne!(a.f.sigma, b.f.sigma);
}

#[test]
fn scaled_fidelities_agree_without_trapped_leakage() {
    let budget = ErrorBudget {
        p_spont_to_xtrap: 0.0,
        ..ErrorBudget::default()
    };
    let rho = run_sequence(&BlockadeConfig::default(), &budget, true).unwrap();
    let d = sample_dataset(&rho, &default_grid(), 10_000, 0.0, 2).unwrap();
    let r = reconstruct(
        &d,
        &sample_p_recap(&rho, 10_000, 2).unwrap(),
        &ReconstructOptions::default(),
    )
    .unwrap();
    assert!(
        (r.f_pairs.value - r.f_qubit.value).abs() < 2.0 * r.f_pairs.sigma,
        "{:?} {:?}",
        r.f_pairs,
        r.f_qubit
    );
    assert_abs_diff_eq!(
        r.p_dd.value + r.p_uu.value + r.p_ud_plus_du.value + r.l_total.value,
        1.0,
        epsilon = 1e-12
    );
}

#[test]
fn verdicts() {
    let g = default_grid();
    let good = DensityMatrix::psi_plus(0.0);
    let d = sample_dataset(&good, &g, 1000, 0.0, 1).unwrap();
    let r = reconstruct(
        &d,
        &RecaptureEstimate::exact(1.0),
        &ReconstructOptions::default(),
    )
    .unwrap();
    assert_eq!(
        entanglement_verdict(&r).classification,
        Classification::EntangledPairs
    );

    let mixed = DensityMatrix::mixture(&[
        (0.5, &DensityMatrix::psi_plus(0.0)),
        (0.5, &DensityMatrix::psi_minus()),
    ])
    .unwrap();
    let d = sample_dataset(&mixed, &g, 1000, 0.0, 1).unwrap();
    let r = reconstruct(
        &d,
        &RecaptureEstimate::exact(1.0),
        &ReconstructOptions::default(),
    )
    .unwrap();
    let v = entanglement_verdict(&r);
    assert_eq!(v.classification, Classification::NotProven);
    assert!(v.margin_sigma.abs() < 4.0);
}

#[test]
fn partial_grid_warns() {
    let g = linear_grid(0.0, 2.0 * PI + 1.0, 21);
    let d = sample_dataset(&table_state(), &g, 500, 0.0, 1).unwrap();
    let r = reconstruct(
        &d,
        &RecaptureEstimate::exact(0.61),
        &ReconstructOptions {
            bootstrap_resamples: 10,
            seed: 0,
        },
    )
    .unwrap();
    assert!(r.warnings.iter().any(|w| w.contains("biased")));
}

#[test]
fn rejects_degenerate_input() {
    let rho = table_state();
    let short = sample_dataset(&rho, &linear_grid(0.0, 4.0 * PI, 4), 100, 0.0, 1).unwrap();
    assert!(reconstruct(
        &short,
        &RecaptureEstimate::exact(0.6),
        &ReconstructOptions::default()
    )
    .is_err());
    let narrow = sample_dataset(&rho, &linear_grid(0.0, PI, 10), 100, 0.0, 1).unwrap();
    assert!(reconstruct(
        &narrow,
        &RecaptureEstimate::exact(0.6),
        &ReconstructOptions::default()
    )
    .is_err());
    let d = sample_dataset(&rho, &default_grid(), 100, 0.0, 1).unwrap();
    assert!(reconstruct(
        &d,
        &RecaptureEstimate::exact(0.0),
        &ReconstructOptions::default()
    )
    .is_err());
}

#[test]
fn fit_curves_csv() {
    let rho = table_state();
    let d = sample_dataset(&rho, &default_grid(), 200, 0.0, 1).unwrap();
    let r = reconstruct(
        &d,
        &RecaptureEstimate::exact(0.61),
        &ReconstructOptions {
            bootstrap_resamples: 0,
            seed: 0,
        },
    )
    .unwrap();
    let mut buf = Vec::new();
    r.write_fit_curves_csv(&d, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("theta,p11,p11_fit,pi,pi_fit\n"));
    assert_eq!(text.lines().count(), 42);
}

#[test]
fn aliased_grid_is_rank_deficient() {
    // Steps of π make cos 2θ constant; steps of 2π/3 make it equal cos θ.
    for n in [5, 7] {
        let g = linear_grid(0.0, 4.0 * PI, n);
        assert!(fit_cosine_series(&CurveData::unweighted(&g, &vec![0.0; n])).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_recovers_exact_series(y0 in -1.0..1.0f64, a in -1.0..1.0f64, b in -1.0..1.0f64, n in 6usize..60) {
        prop_assume!(n != 7);
        let g = linear_grid(0.0, 4.0 * PI, n);
        let v: Vec<f64> = g.iter().map(|t| y0 + a * t.cos() + b * (2.0 * t).cos()).collect();
        let fit = fit_cosine_series(&CurveData::unweighted(&g, &v)).unwrap();
        prop_assert!((fit.y0 - y0).abs() < 1e-9 && (fit.a - a).abs() < 1e-9 && (fit.b - b).abs() < 1e-9);
        prop_assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn noiseless_losses_for_any_state(seed in any::<u64>(), rank in 1usize..=16) {
        let rho = random_density_matrix(seed, rank);
        let s = qubit_summary(&rho);
        let g = default_grid();
        let opts = ReconstructOptions { bootstrap_resamples: 0, seed: 0 };
        let counts = exact_counts(&rho, &g, 1_000_000_000_000);
        if let Ok(r) = reconstruct_counts(&g, &counts, &RecaptureEstimate::exact(0.5), &opts) {
            prop_assert!((r.l_a.value - s.l_a).abs() < 1e-9 || r.clipped.contains(&"l_a".to_owned()));
            prop_assert!((r.p_dd.value - s.p_dd).abs() < 1e-9 || r.clipped.contains(&"p_dd".to_owned()));
        }
    }
}
