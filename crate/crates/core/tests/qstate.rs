mod common;

use approx::assert_abs_diff_eq;
use common::{random_density_matrix, table_state};
use proptest::prelude::*;
use rydtomo_core::qstate::{
    pair_index, qubit_summary, qubit_trace, DensityMatrix, Level, Mat16, PartialState,
};
use rydtomo_core::C64;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_states_are_valid(seed in any::<u64>(), rank in 1usize..=16) {
        let rho = random_density_matrix(seed, rank);
        prop_assert!(rho.validate().is_ok());
        prop_assert!((rho.trace() - 1.0).abs() < 1e-12);
        prop_assert!(rho.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn summary_accounts_for_every_population(seed in any::<u64>(), rank in 1usize..=16) {
        let rho = random_density_matrix(seed, rank);
        let s = qubit_summary(&rho);
        let qubit = s.p_dd + s.p_uu + s.p_ud + s.p_du;
        prop_assert!((qubit - qubit_trace(&rho)).abs() < 1e-12);
        prop_assert!((s.l_total - (1.0 - qubit)).abs() < 1e-12);
        // Inclusion-exclusion over the two loss events.
        prop_assert!((s.l_a + s.l_b - s.p_xx - s.l_total).abs() < 1e-12);
        prop_assert!(s.re_coh.abs() <= (s.p_ud * s.p_du).sqrt() + 1e-12);
        let f = s.fidelity();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
    }

    #[test]
    fn json_round_trip(seed in any::<u64>(), rank in 1usize..=16) {
        let rho = random_density_matrix(seed, rank);
        let back = DensityMatrix::from_json(&rho.to_json().unwrap()).unwrap();
        prop_assert!(common::max_abs_diff(rho.matrix(), back.matrix()) <= 1e-15);
    }

    #[test]
    fn partial_state_round_trip(
        dd in 0.0..1.0f64, uu in 0.0..1.0f64, ud in 0.0..1.0f64, du in 0.0..1.0f64,
        coh in -1.0..1.0f64, la in 0.0..0.5f64, lb in 0.0..0.5f64,
    ) {
        let keep = (1.0 - la) * (1.0 - lb);
        let norm = (dd + uu + ud + du).max(1e-3);
        let (dd, uu, ud, du) = (dd / norm * keep, uu / norm * keep, ud / norm * keep, du / norm * keep);
        let re_coh = coh * (ud * du).sqrt();
        let p = PartialState { p_dd: dd, p_uu: uu, p_ud: ud, p_du: du, re_coh, l_a: la, l_b: lb };
        let s = qubit_summary(&p.to_density_matrix().unwrap());
        for (got, want) in [(s.p_dd, dd), (s.p_uu, uu), (s.p_ud, ud), (s.p_du, du), (s.re_coh, re_coh), (s.l_a, la), (s.l_b, lb)] {
            prop_assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }
}

#[test]
fn bell_state_fidelities() {
    assert_abs_diff_eq!(
        qubit_summary(&DensityMatrix::psi_plus(0.0)).fidelity(),
        1.0,
        epsilon = 1e-15
    );
    assert_abs_diff_eq!(
        qubit_summary(&DensityMatrix::psi_minus()).fidelity(),
        0.0,
        epsilon = 1e-15
    );
    assert_abs_diff_eq!(
        qubit_summary(&DensityMatrix::phi(1.0)).fidelity(),
        0.0,
        epsilon = 1e-15
    );
    // A relative phase of π turns Ψ⁺ into Ψ⁻.
    let flipped = DensityMatrix::psi_plus(std::f64::consts::PI);
    assert_abs_diff_eq!(qubit_summary(&flipped).fidelity(), 0.0, epsilon = 1e-15);
}

#[test]
fn table_state_summary() {
    let s = qubit_summary(&table_state());
    assert_abs_diff_eq!(s.l_total, 0.39, epsilon = 1e-12);
    assert_abs_diff_eq!(s.fidelity(), 0.46, epsilon = 1e-12);
    assert_abs_diff_eq!(
        s.fidelity() / (1.0 - s.l_total),
        0.46 / 0.61,
        epsilon = 1e-12
    );
}

#[test]
fn rejects_unphysical_matrices() {
    let up_down = pair_index(Level::Up, Level::Down);
    let mut m = Mat16::zeros();
    m[(0, 0)] = C64::new(2.0, 0.0);
    assert!(DensityMatrix::from_matrix(m).is_err());

    let mut m = Mat16::zeros();
    m[(0, 0)] = C64::new(1.0, 0.0);
    m[(0, up_down)] = C64::new(0.1, 0.0);
    assert!(DensityMatrix::from_matrix(m).is_err(), "not Hermitian");

    let mut m = Mat16::zeros();
    m[(0, 0)] = C64::new(1.5, 0.0);
    m[(1, 1)] = C64::new(-0.5, 0.0);
    assert!(
        DensityMatrix::from_matrix(m).is_err(),
        "negative eigenvalue"
    );

    assert!(DensityMatrix::from_json(r#"{"dim":4,"re":[1],"im":[0]}"#).is_err());
}
