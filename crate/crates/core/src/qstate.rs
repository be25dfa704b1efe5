//! Extended-basis state algebra for two atoms.
//!
//! Each atom lives in a four-level space: the qubit states `Up` and `Down`,
//! plus two aggregated loss levels. `XGone` collects every way of being
//! physically absent at readout; `XTrap` collects atoms that are still
//! trapped but sit outside the qubit basis. Push-out readout cannot tell
//! either loss level from `Up`, but a recapture measurement without push-out
//! does see `XTrap` atoms.
//!
//! Pair index ordering is atom-a-major: `index = 4 * level_a + level_b` with
//! levels ordered `Up, Down, XGone, XTrap`. Every module uses
//! [`pair_index`] / [`pair_levels`] rather than raw arithmetic.

use nalgebra::{SMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

pub const LEVELS: usize = 4;
pub const DIM: usize = LEVELS * LEVELS;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const EIGEN_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-9;

pub type Mat16 = SMatrix<C64, DIM, DIM>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    /// |F=2, M=2⟩
    Up,
    /// |F=1, M=1⟩
    Down,
    /// Atom absent from its tweezer at readout.
    XGone,
    /// Atom trapped but outside the qubit basis.
    XTrap,
}

impl Level {
    pub const ALL: [Level; LEVELS] = [Level::Up, Level::Down, Level::XGone, Level::XTrap];
    pub const QUBIT: [Level; 2] = [Level::Up, Level::Down];
    pub const LOSS: [Level; 2] = [Level::XGone, Level::XTrap];

    #[inline]
    pub const fn index(self) -> usize {
        match self {
            Level::Up => 0,
            Level::Down => 1,
            Level::XGone => 2,
            Level::XTrap => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Level::ALL.get(i).copied()
    }

    #[inline]
    pub const fn is_qubit(self) -> bool {
        matches!(self, Level::Up | Level::Down)
    }

    /// Whether the atom is still in its trap (everything except `XGone`).
    #[inline]
    pub const fn is_trapped(self) -> bool {
        !matches!(self, Level::XGone)
    }
}

#[inline]
pub const fn pair_index(a: Level, b: Level) -> usize {
    a.index() * LEVELS + b.index()
}

#[inline]
pub fn pair_levels(index: usize) -> (Level, Level) {
    assert!(index < DIM, "pair index {index} out of range");
    (Level::ALL[index / LEVELS], Level::ALL[index % LEVELS])
}

/// Two-atom density matrix on the 16-dimensional extended basis.
///
/// Construction through the public API validates Hermiticity, unit trace
/// over the full extended basis and positivity.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: Mat16,
}

impl DensityMatrix {
    /// |ψ⟩⟨ψ| for a normalized 16-component amplitude vector.
    pub fn pure_state(amplitudes: &[C64; DIM]) -> Result<Self> {
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > NORM_TOL {
            return Err(Error::Normalization(norm2));
        }
        let m = Mat16::from_fn(|i, j| amplitudes[i] * amplitudes[j].conj());
        Ok(Self { m })
    }

    /// |a, b⟩⟨a, b|
    pub fn basis(a: Level, b: Level) -> Self {
        let mut m = Mat16::zeros();
        let i = pair_index(a, b);
        m[(i, i)] = C64::new(1.0, 0.0);
        Self { m }
    }

    /// (|↓↑⟩ + e^{iφ}|↑↓⟩)/√2; φ = 0 is Ψ⁺.
    pub fn psi_plus(phase: f64) -> Self {
        let mut amps = [C64::new(0.0, 0.0); DIM];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        amps[pair_index(Level::Down, Level::Up)] = C64::new(s, 0.0);
        amps[pair_index(Level::Up, Level::Down)] = C64::from_polar(s, phase);
        Self::pure_state(&amps).expect("unit norm by construction")
    }

    /// (|↓↑⟩ − |↑↓⟩)/√2, the rotation-invariant singlet.
    pub fn psi_minus() -> Self {
        Self::psi_plus(std::f64::consts::PI)
    }

    /// (|↑↑⟩ ± |↓↓⟩)/√2
    pub fn phi(sign: f64) -> Self {
        let mut amps = [C64::new(0.0, 0.0); DIM];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        amps[pair_index(Level::Up, Level::Up)] = C64::new(s, 0.0);
        amps[pair_index(Level::Down, Level::Down)] = C64::new(sign.signum() * s, 0.0);
        Self::pure_state(&amps).expect("unit norm by construction")
    }

    /// Validates and wraps a raw matrix.
    pub fn from_matrix(m: Mat16) -> Result<Self> {
        let rho = Self { m };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(m: Mat16) -> Self {
        Self { m }
    }

    /// Convex combination Σ wᵢ ρᵢ. Weights must be non-negative and sum to 1.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > NORM_TOL {
            return Err(Error::input(format!(
                "mixture weights must be ≥ 0 and sum to 1 (sum = {total})"
            )));
        }
        let mut m = Mat16::zeros();
        for (w, rho) in parts {
            m += rho.m * C64::new(*w, 0.0);
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &Mat16 {
        &self.m
    }

    pub fn into_matrix(self) -> Mat16 {
        self.m
    }

    #[inline]
    pub fn element(&self, row: (Level, Level), col: (Level, Level)) -> C64 {
        self.m[(pair_index(row.0, row.1), pair_index(col.0, col.1))]
    }

    /// P_{a,b} = ⟨a,b|ρ|a,b⟩
    #[inline]
    pub fn population(&self, a: Level, b: Level) -> f64 {
        let i = pair_index(a, b);
        self.m[(i, i)].re
    }

    pub fn populations(&self) -> [f64; DIM] {
        std::array::from_fn(|i| self.m[(i, i)].re)
    }

    pub fn trace(&self) -> f64 {
        (0..DIM).map(|i| self.m[(i, i)].re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..DIM {
            for j in i..DIM {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        // Symmetrize so tiny anti-Hermitian noise cannot upset the solver.
        let h = (self.m + self.m.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.min()
    }

    /// Fidelity ⟨ψ|ρ|ψ⟩ with a pure state.
    pub fn overlap(&self, psi: &[C64; DIM]) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..DIM {
            for j in 0..DIM {
                acc += psi[i].conj() * self.m[(i, j)] * psi[j];
            }
        }
        acc.re
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (max |ρ − ρ†| = {herm:e})"
            )));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} ≠ 1")));
        }
        let lambda = self.min_eigenvalue();
        if lambda < -EIGEN_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {lambda:e}"
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixRepr {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut re = Vec::with_capacity(DIM * DIM);
        let mut im = Vec::with_capacity(DIM * DIM);
        for i in 0..DIM {
            for j in 0..DIM {
                re.push(self.m[(i, j)].re);
                im.push(self.m[(i, j)].im);
            }
        }
        DensityMatrixRepr { dim: DIM, re, im }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = DensityMatrixRepr::deserialize(d)?;
        if r.dim != DIM || r.re.len() != DIM * DIM || r.im.len() != DIM * DIM {
            return Err(D::Error::custom(format!(
                "expected dim {DIM} with {} entries",
                DIM * DIM
            )));
        }
        let m = Mat16::from_fn(|i, j| C64::new(r.re[i * DIM + j], r.im[i * DIM + j]));
        DensityMatrix::from_matrix(m).map_err(D::Error::custom)
    }
}

/// Qubit-basis populations, the measurable coherence and loss totals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitSummary {
    pub p_dd: f64,
    pub p_uu: f64,
    pub p_ud: f64,
    pub p_du: f64,
    /// Re ρ_{↓↑,↑↓}
    pub re_coh: f64,
    pub l_a: f64,
    pub l_b: f64,
    pub l_total: f64,
    /// Σ_{x,x'} P_{xx'}: both atoms outside the qubit basis.
    pub p_xx: f64,
}

impl QubitSummary {
    /// ⟨Ψ⁺|ρ|Ψ⁺⟩
    pub fn fidelity(&self) -> f64 {
        (self.p_ud + self.p_du) / 2.0 + self.re_coh
    }
}

pub fn qubit_summary(rho: &DensityMatrix) -> QubitSummary {
    use Level::*;
    let p = |a, b| rho.population(a, b);
    let p_dd = p(Down, Down);
    let p_uu = p(Up, Up);
    let p_ud = p(Up, Down);
    let p_du = p(Down, Up);

    let mut only_a_lost = 0.0;
    let mut only_b_lost = 0.0;
    let mut p_xx = 0.0;
    for x in Level::LOSS {
        for q in Level::QUBIT {
            only_a_lost += p(x, q);
            only_b_lost += p(q, x);
        }
        for y in Level::LOSS {
            p_xx += p(x, y);
        }
    }

    QubitSummary {
        p_dd,
        p_uu,
        p_ud,
        p_du,
        re_coh: rho.element((Down, Up), (Up, Down)).re,
        l_a: only_a_lost + p_xx,
        l_b: only_b_lost + p_xx,
        l_total: 1.0 - (p_dd + p_uu + p_ud + p_du),
        p_xx,
    }
}

/// Trace restricted to pairs with both atoms in the qubit basis.
pub fn qubit_trace(rho: &DensityMatrix) -> f64 {
    let mut t = 0.0;
    for a in Level::QUBIT {
        for b in Level::QUBIT {
            t += rho.population(a, b);
        }
    }
    t
}

/// Minimal state consistent with a set of measured qubit-block quantities and
/// per-atom losses.
///
/// Loss populations all go to `XGone`. The surviving partner of a single
/// loss is distributed like that atom's marginal in the qubit block, which
/// is what independent per-atom loss produces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialState {
    pub p_dd: f64,
    pub p_uu: f64,
    pub p_ud: f64,
    pub p_du: f64,
    pub re_coh: f64,
    pub l_a: f64,
    pub l_b: f64,
}

impl PartialState {
    pub fn to_density_matrix(&self) -> Result<DensityMatrix> {
        use Level::*;
        let qubit = self.p_dd + self.p_uu + self.p_ud + self.p_du;
        let p_xx = self.l_a + self.l_b - (1.0 - qubit);
        let only_a = self.l_a - p_xx;
        let only_b = self.l_b - p_xx;
        if [
            self.p_dd, self.p_uu, self.p_ud, self.p_du, p_xx, only_a, only_b,
        ]
        .iter()
        .any(|&v| v < -NORM_TOL)
            || qubit <= 0.0
        {
            return Err(Error::input("inconsistent populations and losses"));
        }

        let mut m = Mat16::zeros();
        let mut set = |a, b, v: f64| {
            let i = pair_index(a, b);
            m[(i, i)] = C64::new(v, 0.0);
        };
        set(Down, Down, self.p_dd);
        set(Up, Up, self.p_uu);
        set(Up, Down, self.p_ud);
        set(Down, Up, self.p_du);
        set(XGone, XGone, p_xx.max(0.0));

        // Marginals of each atom inside the qubit block.
        let a_up = (self.p_uu + self.p_ud) / qubit;
        let b_up = (self.p_uu + self.p_du) / qubit;
        set(XGone, Up, only_a * b_up);
        set(XGone, Down, only_a * (1.0 - b_up));
        set(Up, XGone, only_b * a_up);
        set(Down, XGone, only_b * (1.0 - a_up));

        let du = pair_index(Down, Up);
        let ud = pair_index(Up, Down);
        m[(du, ud)] = C64::new(self.re_coh, 0.0);
        m[(ud, du)] = C64::new(self.re_coh, 0.0);
        DensityMatrix::from_matrix(m)
    }
}
