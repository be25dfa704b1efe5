//! Entangling sequence: blockaded excitation, mapping back to the ground
//! state, and the loss channels that degrade the result.
//!
//! The blockade pulse is solved on the symmetric three-state ladder
//! `|↑↑⟩ ↔ |Ψ_r⟩ ↔ |rr⟩`, with `|rr⟩` shifted by ΔE. Mapping sends
//! `|Ψ_r⟩` to `(|↓↑⟩ + e^{iφ}|↑↓⟩)/√2` and `|rr⟩` to `|↓↓⟩`.
//!
//! Error channels come in two kinds:
//!
//! * pair-level admixtures, which replace a fraction of the coherent output
//!   by `|↓↓⟩` (double excitation) or `|↑↑⟩` (spontaneous emission or
//!   incomplete excitation);
//! * per-atom losses, applied independently to each atom, which move the
//!   atom to `XGone` or `XTrap` and erase its coherences while keeping the
//!   partner's reduced state.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::qstate::{pair_index, DensityMatrix, Level, DIM, NORM_TOL};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockadeConfig {
    /// Two-photon Rabi frequency |↑⟩ ↔ |r⟩, rad/s.
    pub omega_ur: f64,
    /// Mapping Rabi frequency |r⟩ ↔ |↓⟩, rad/s.
    pub omega_rd: f64,
    /// Blockade shift ΔE/ħ, rad/s.
    pub delta_e: f64,
    /// Relative phase φ of the prepared state, radians.
    pub entangled_phase: f64,
}

impl Default for BlockadeConfig {
    fn default() -> Self {
        Self {
            omega_ur: 2.0 * PI * 6e6,
            omega_rd: 2.0 * PI * 5e6,
            delta_e: 2.0 * PI * 50e6,
            entangled_phase: 0.0,
        }
    }
}

impl BlockadeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_ur", self.omega_ur),
            ("omega_rd", self.omega_rd),
            ("delta_e", self.delta_e),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::input(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..2.0 * PI).contains(&self.entangled_phase) {
            return Err(Error::input(format!(
                "entangled_phase must lie in [0, 2π), got {}",
                self.entangled_phase
            )));
        }
        Ok(())
    }

    /// Collective Rabi frequency √2 Ω_{↑r} of the blockaded pair.
    pub fn collective_rabi(&self) -> f64 {
        SQRT_2 * self.omega_ur
    }

    /// π/(√2 Ω_{↑r}): full transfer to |Ψ_r⟩ under perfect blockade.
    pub fn pi_pulse_duration(&self) -> f64 {
        PI / self.collective_rabi()
    }

    /// Ladder Hamiltonian over ħ in the basis (|↑↑⟩, |Ψ_r⟩, |rr⟩).
    pub fn ladder_hamiltonian(&self) -> Matrix3<f64> {
        let g = self.collective_rabi() / 2.0;
        Matrix3::new(0.0, g, 0.0, g, 0.0, g, 0.0, g, self.delta_e)
    }
}

/// Per-atom and pair-level error probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorBudget {
    /// Loss while the trap is switched off. → XGone
    pub p_trap_off: f64,
    /// Atom reported absent although present. → XGone
    pub p_detect: f64,
    /// Spontaneous emission then re-excitation to the Rydberg state by the
    /// mapping pulse. → XGone
    pub p_spont_to_rydberg: f64,
    /// Mapping pulse leaves the atom in the Rydberg state. → XGone
    pub p_map_fail: f64,
    /// Spontaneous emission into a trapped state outside the qubit. → XTrap
    pub p_spont_to_xtrap: f64,
    /// Pair fraction doubly excited and mapped to |↓↓⟩.
    pub p_double_excite: f64,
    /// Pair fraction left in |↑↑⟩ after spontaneous emission.
    pub p_uu_spontaneous: f64,
    /// Pair fraction left in |↑↑⟩ by imperfect excitation.
    pub p_uu_imperfect_excitation: f64,
}

impl Default for ErrorBudget {
    fn default() -> Self {
        Self {
            p_trap_off: 0.03,
            p_detect: 0.03,
            p_spont_to_rydberg: 0.0763,
            p_map_fail: 0.0763,
            p_spont_to_xtrap: 0.0064,
            p_double_excite: 0.093,
            p_uu_spontaneous: 0.073,
            p_uu_imperfect_excitation: 0.073,
        }
    }
}

/// Probabilities with which one atom ends up outside the qubit basis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AtomLoss {
    pub gone: f64,
    pub trap: f64,
}

impl AtomLoss {
    pub fn total(&self) -> f64 {
        self.gone + self.trap
    }

    pub fn validate(&self) -> Result<()> {
        if self.gone < 0.0 || self.trap < 0.0 || self.total() > 1.0 + NORM_TOL {
            return Err(Error::input(format!("invalid atom loss {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Atom {
    A,
    B,
}

impl ErrorBudget {
    pub fn zero() -> Self {
        Self {
            p_trap_off: 0.0,
            p_detect: 0.0,
            p_spont_to_rydberg: 0.0,
            p_map_fail: 0.0,
            p_spont_to_xtrap: 0.0,
            p_double_excite: 0.0,
            p_uu_spontaneous: 0.0,
            p_uu_imperfect_excitation: 0.0,
        }
    }

    pub fn fields(&self) -> [(&'static str, f64); 8] {
        [
            ("p_trap_off", self.p_trap_off),
            ("p_detect", self.p_detect),
            ("p_spont_to_rydberg", self.p_spont_to_rydberg),
            ("p_map_fail", self.p_map_fail),
            ("p_spont_to_xtrap", self.p_spont_to_xtrap),
            ("p_double_excite", self.p_double_excite),
            ("p_uu_spontaneous", self.p_uu_spontaneous),
            ("p_uu_imperfect_excitation", self.p_uu_imperfect_excitation),
        ]
    }

    pub fn field_mut(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "p_trap_off" => &mut self.p_trap_off,
            "p_detect" => &mut self.p_detect,
            "p_spont_to_rydberg" => &mut self.p_spont_to_rydberg,
            "p_map_fail" => &mut self.p_map_fail,
            "p_spont_to_xtrap" => &mut self.p_spont_to_xtrap,
            "p_double_excite" => &mut self.p_double_excite,
            "p_uu_spontaneous" => &mut self.p_uu_spontaneous,
            "p_uu_imperfect_excitation" => &mut self.p_uu_imperfect_excitation,
            _ => return None,
        })
    }

    pub fn atom_loss(&self) -> AtomLoss {
        AtomLoss {
            gone: self.p_trap_off + self.p_detect + self.p_spont_to_rydberg + self.p_map_fail,
            trap: self.p_spont_to_xtrap,
        }
    }

    /// Pair fraction not replaced by a pair-level admixture.
    pub fn coherent_fraction(&self) -> f64 {
        1.0 - self.p_double_excite - self.p_uu_spontaneous - self.p_uu_imperfect_excitation
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.fields() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::input(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.atom_loss().total() > 1.0 + NORM_TOL {
            return Err(Error::input("per-atom loss channels sum to more than 1"));
        }
        if self.coherent_fraction() < -NORM_TOL {
            return Err(Error::input("pair-level error channels sum to more than 1"));
        }
        Ok(())
    }
}

/// Amplitudes on (|↑↑⟩, |Ψ_r⟩, |rr⟩).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderState {
    pub amplitudes: [C64; 3],
}

impl LadderState {
    pub fn ground() -> Self {
        Self {
            amplitudes: [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
        }
    }

    pub fn populations(&self) -> [f64; 3] {
        self.amplitudes.map(|a| a.norm_sqr())
    }

    pub fn norm(&self) -> f64 {
        self.populations().iter().sum::<f64>().sqrt()
    }
}

/// exp(−iHt) for the ladder, from the eigendecomposition of the real
/// symmetric Hamiltonian.
pub fn blockade_pulse_unitary(config: &BlockadeConfig, duration: f64) -> Result<Matrix3<C64>> {
    config.validate()?;
    if !(duration >= 0.0) {
        return Err(Error::input(format!(
            "pulse duration must be ≥ 0, got {duration}"
        )));
    }
    let eig = SymmetricEigen::new(config.ladder_hamiltonian());
    let v = eig.eigenvectors.map(|x| C64::new(x, 0.0));
    let phases =
        Matrix3::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * duration)));
    Ok(v * phases * v.transpose())
}

/// Ladder state after a pulse of `duration` starting from |↑↑⟩.
pub fn blockade_pulse(config: &BlockadeConfig, duration: f64) -> Result<LadderState> {
    let u = blockade_pulse_unitary(config, duration)?;
    Ok(LadderState {
        amplitudes: [u[(0, 0)], u[(1, 0)], u[(2, 0)]],
    })
}

/// Maps the ladder output to ground-state pair amplitudes.
fn mapped_state(ladder: &LadderState, phase: f64) -> DensityMatrix {
    use Level::*;
    let [uu, psi, rr] = ladder.amplitudes;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = [C64::new(0.0, 0.0); DIM];
    amps[pair_index(Up, Up)] = uu;
    amps[pair_index(Down, Up)] = psi * s;
    amps[pair_index(Up, Down)] = psi * C64::from_polar(s, phase);
    amps[pair_index(Down, Down)] = rr;
    let norm = ladder.norm();
    amps.iter_mut().for_each(|a| *a /= norm);
    DensityMatrix::pure_state(&amps).expect("normalized above")
}

/// Replaces `atom` by |x⟩ with the probabilities in `loss`, keeping the
/// partner's reduced state.
pub fn apply_atom_loss(rho: &DensityMatrix, atom: Atom, loss: AtomLoss) -> Result<DensityMatrix> {
    loss.validate()?;
    let m = rho.matrix();
    let keep = 1.0 - loss.total();
    let mut out = m * C64::new(keep, 0.0);
    let idx = |own: Level, partner: Level| match atom {
        Atom::A => pair_index(own, partner),
        Atom::B => pair_index(partner, own),
    };
    for (x, p) in [(Level::XGone, loss.gone), (Level::XTrap, loss.trap)] {
        if p == 0.0 {
            continue;
        }
        for q in Level::ALL {
            for q2 in Level::ALL {
                let reduced: C64 = Level::ALL.iter().map(|&l| m[(idx(l, q), idx(l, q2))]).sum();
                out[(idx(x, q), idx(x, q2))] += reduced * p;
            }
        }
    }
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// Pair state after the blockade and mapping pulses with pair-level errors,
/// before any per-atom loss. With `ideal`, the blockade is perfect.
pub fn prepare_pair(
    config: &BlockadeConfig,
    budget: &ErrorBudget,
    ideal: bool,
) -> Result<DensityMatrix> {
    config.validate()?;
    budget.validate()?;
    let ladder = if ideal {
        LadderState {
            amplitudes: [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        }
    } else {
        blockade_pulse(config, config.pi_pulse_duration())?
    };
    let coherent = mapped_state(&ladder, config.entangled_phase);
    let p_uu = budget.p_uu_spontaneous + budget.p_uu_imperfect_excitation;
    DensityMatrix::mixture(&[
        (budget.coherent_fraction().max(0.0), &coherent),
        (
            budget.p_double_excite,
            &DensityMatrix::basis(Level::Down, Level::Down),
        ),
        (p_uu, &DensityMatrix::basis(Level::Up, Level::Up)),
    ])
}

/// Full sequence with the same budget on both atoms.
pub fn run_sequence(
    config: &BlockadeConfig,
    budget: &ErrorBudget,
    ideal: bool,
) -> Result<DensityMatrix> {
    let loss = budget.atom_loss();
    run_sequence_with_losses(config, budget, loss, loss, ideal)
}

/// Full sequence with separate per-atom losses; the loss fields of `budget`
/// are ignored.
pub fn run_sequence_with_losses(
    config: &BlockadeConfig,
    budget: &ErrorBudget,
    loss_a: AtomLoss,
    loss_b: AtomLoss,
    ideal: bool,
) -> Result<DensityMatrix> {
    let pair = prepare_pair(config, budget, ideal)?;
    let rho = apply_atom_loss(&pair, Atom::A, loss_a)?;
    let rho = apply_atom_loss(&rho, Atom::B, loss_b)?;
    rho.validate()?;
    Ok(rho)
}

/// Probability that neither atom is in `XGone`.
pub fn p_recap_predicted(rho: &DensityMatrix) -> f64 {
    let mut p = 0.0;
    for a in Level::ALL {
        for b in Level::ALL {
            if a.is_trapped() && b.is_trapped() {
                p += rho.population(a, b);
            }
        }
    }
    p
}
