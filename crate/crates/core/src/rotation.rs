//! Global Raman rotations and the phase-averaged observables they produce.
//!
//! Both atoms see the same rotation `R(θ, φ)`, which mixes `Up` and `Down`
//! and leaves the loss levels untouched. The Raman phase φ is uncontrolled
//! and uniformly random from shot to shot, so every measured quantity is a
//! φ-average. Three independent routes compute those averages:
//!
//! * [`curves_closed_form`]: explicit formulas in the populations and the
//!   single surviving coherence Re ρ_{↓↑,↑↓};
//! * [`phase_averaged_state`] + [`curves_from_populations`]: exact discrete
//!   average of the rotated state over a uniform φ grid;
//! * [`curves_monte_carlo`]: random φ samples.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::Matrix4;
use rand_distr::{Distribution, UnitCircle};
use serde::{Deserialize, Serialize};

use crate::qstate::{pair_index, pair_levels, DensityMatrix, Level, Mat16, DIM};
use crate::{par, rng, text, Error, Result, C64};

/// Number of φ samples used for exact averaging.
pub const PHASE_GRID: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationParams {
    /// Rotation angle θ = Ω_{↑↓} τ, radians.
    pub theta: f64,
    /// Raman phase difference φ, radians.
    pub phi: f64,
    /// Raman Rabi frequency Ω_{↑↓}, rad/s.
    pub omega_raman: f64,
}

impl RotationParams {
    pub const PAPER_OMEGA_RAMAN: f64 = 2.0 * PI * 250e3;

    pub fn new(theta: f64, phi: f64) -> Self {
        Self {
            theta,
            phi,
            omega_raman: Self::PAPER_OMEGA_RAMAN,
        }
    }

    /// Rotation produced by a Raman pulse of length `tau` seconds.
    pub fn from_duration(tau: f64, phi: f64, omega_raman: f64) -> Result<Self> {
        if omega_raman <= 0.0 {
            return Err(Error::input("Raman Rabi frequency must be positive"));
        }
        Ok(Self {
            theta: omega_raman * tau,
            phi,
            omega_raman,
        })
    }

    pub fn duration(&self) -> f64 {
        self.theta / self.omega_raman
    }
}

/// Single-atom rotation on (Up, Down, XGone, XTrap).
pub fn rotation_matrix(params: &RotationParams) -> Matrix4<C64> {
    let (s, c) = (params.theta / 2.0).sin_cos();
    let i = C64::i();
    let mut r = Matrix4::identity();
    r[(0, 0)] = C64::new(c, 0.0);
    r[(1, 1)] = C64::new(c, 0.0);
    r[(0, 1)] = i * C64::from_polar(s, params.phi);
    r[(1, 0)] = i * C64::from_polar(s, -params.phi);
    r
}

/// R_a ⊗ R_b with identical parameters on both atoms.
pub fn pair_rotation(params: &RotationParams) -> Mat16 {
    let r = rotation_matrix(params);
    Mat16::from_fn(|i, j| {
        let (a, b) = pair_levels(i);
        let (a2, b2) = pair_levels(j);
        r[(a.index(), a2.index())] * r[(b.index(), b2.index())]
    })
}

pub fn apply_rotation(rho: &DensityMatrix, params: &RotationParams) -> DensityMatrix {
    let r = pair_rotation(params);
    DensityMatrix::from_matrix_unchecked(r * rho.matrix() * r.adjoint())
}

/// ⟨R ρ R†⟩_φ for φ uniform on [0, 2π).
pub fn phase_averaged_state(rho: &DensityMatrix, theta: f64) -> DensityMatrix {
    phase_averaged_state_with(rho, theta, PHASE_GRID)
}

/// Mean over a uniform `m`-point φ grid. The rotated state is a trigonometric
/// polynomial of degree two in φ, so any `m ≥ 5` gives the exact average.
pub fn phase_averaged_state_with(rho: &DensityMatrix, theta: f64, m: usize) -> DensityMatrix {
    assert!(m >= 1, "need at least one phase sample");
    let mut acc = Mat16::zeros();
    for k in 0..m {
        let phi = 2.0 * PI * k as f64 / m as f64;
        acc += apply_rotation(rho, &RotationParams::new(theta, phi)).into_matrix();
    }
    DensityMatrix::from_matrix_unchecked(acc / C64::new(m as f64, 0.0))
}

/// Nonzero entries of one row of R ⊗ R.
type SparseRow = ([(usize, C64); 4], usize);

fn sparse_rows(params: &RotationParams) -> [SparseRow; DIM] {
    let r = rotation_matrix(params);
    let partners = |l: Level| -> &'static [Level] {
        if l.is_qubit() {
            &Level::QUBIT
        } else if l == Level::XGone {
            &[Level::XGone]
        } else {
            &[Level::XTrap]
        }
    };
    std::array::from_fn(|i| {
        let (a, b) = pair_levels(i);
        let mut row = [(0usize, C64::new(0.0, 0.0)); 4];
        let mut n = 0;
        for &a2 in partners(a) {
            for &b2 in partners(b) {
                row[n] = (
                    pair_index(a2, b2),
                    r[(a.index(), a2.index())] * r[(b.index(), b2.index())],
                );
                n += 1;
            }
        }
        (row, n)
    })
}

/// Diagonal of R ρ R† without forming the full product.
pub fn rotated_populations(rho: &DensityMatrix, params: &RotationParams) -> [f64; DIM] {
    let rows = sparse_rows(params);
    let m = rho.matrix();
    std::array::from_fn(|i| {
        let (row, n) = &rows[i];
        let mut acc = C64::new(0.0, 0.0);
        for &(j, rij) in &row[..*n] {
            for &(k, rik) in &row[..*n] {
                acc += rij * rik.conj() * m[(j, k)];
            }
        }
        acc.re
    })
}

/// φ-Fourier decomposition of the rotated populations at fixed θ:
/// `P_i(φ) = c0_i + 2 Re(c1_i e^{iφ} + c2_i e^{2iφ})`.
///
/// Obtained by a discrete Fourier transform of exact evaluations, so
/// [`PhaseHarmonics::eval`] reproduces [`rotated_populations`] at any φ.
#[derive(Clone, Debug)]
pub struct PhaseHarmonics {
    c0: [f64; DIM],
    c1: [C64; DIM],
    c2: [C64; DIM],
}

impl PhaseHarmonics {
    pub fn new(rho: &DensityMatrix, theta: f64) -> Self {
        let samples: Vec<[f64; DIM]> = (0..PHASE_GRID)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / PHASE_GRID as f64;
                rotated_populations(rho, &RotationParams::new(theta, phi))
            })
            .collect();
        let coeff = |harmonic: f64, i: usize| -> C64 {
            samples
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let phi = 2.0 * PI * k as f64 / PHASE_GRID as f64;
                    C64::from_polar(p[i], -harmonic * phi)
                })
                .sum::<C64>()
                / PHASE_GRID as f64
        };
        Self {
            c0: std::array::from_fn(|i| coeff(0.0, i).re),
            c1: std::array::from_fn(|i| coeff(1.0, i)),
            c2: std::array::from_fn(|i| coeff(2.0, i)),
        }
    }

    /// Populations at phase φ given (cos φ, sin φ).
    #[inline]
    pub fn eval_cs(&self, cos: f64, sin: f64) -> [f64; DIM] {
        let (cos2, sin2) = (2.0 * cos * cos - 1.0, 2.0 * sin * cos);
        std::array::from_fn(|i| {
            self.c0[i]
                + 2.0 * (self.c1[i].re * cos - self.c1[i].im * sin)
                + 2.0 * (self.c2[i].re * cos2 - self.c2[i].im * sin2)
        })
    }

    pub fn eval(&self, phi: f64) -> [f64; DIM] {
        let (s, c) = phi.sin_cos();
        self.eval_cs(c, s)
    }

    /// φ-averaged populations.
    pub fn mean(&self) -> [f64; DIM] {
        self.c0
    }
}

/// Phase-averaged recapture observables versus rotation angle.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableCurves {
    pub thetas: Vec<f64>,
    pub p_a: Vec<f64>,
    pub p_b: Vec<f64>,
    pub p11: Vec<f64>,
    pub p00: Vec<f64>,
    pub p01: Vec<f64>,
    pub p10: Vec<f64>,
    pub pi_signal: Vec<f64>,
}

/// One θ sample of every curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservablePoint {
    pub theta: f64,
    pub p_a: f64,
    pub p_b: f64,
    pub p11: f64,
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub pi_signal: f64,
}

impl ObservablePoint {
    /// Reads the observables off a 16-entry population vector under push-out
    /// detection: an atom reads 1 iff it is in `Down`.
    pub fn from_populations(theta: f64, pops: &[f64; DIM]) -> Self {
        let (mut p11, mut p10, mut p01, mut p00) = (0.0, 0.0, 0.0, 0.0);
        for (i, &p) in pops.iter().enumerate() {
            let (a, b) = pair_levels(i);
            match (a == Level::Down, b == Level::Down) {
                (true, true) => p11 += p,
                (true, false) => p10 += p,
                (false, true) => p01 += p,
                (false, false) => p00 += p,
            }
        }
        Self {
            theta,
            p_a: p11 + p10,
            p_b: p11 + p01,
            p11,
            p00,
            p01,
            p10,
            pi_signal: p11 + p00 - p01 - p10,
        }
    }
}

impl ObservableCurves {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn from_points(points: impl IntoIterator<Item = ObservablePoint>) -> Self {
        let mut c = ObservableCurves::default();
        for p in points {
            c.thetas.push(p.theta);
            c.p_a.push(p.p_a);
            c.p_b.push(p.p_b);
            c.p11.push(p.p11);
            c.p00.push(p.p00);
            c.p01.push(p.p01);
            c.p10.push(p.p10);
            c.pi_signal.push(p.pi_signal);
        }
        c
    }

    pub fn point(&self, i: usize) -> ObservablePoint {
        ObservablePoint {
            theta: self.thetas[i],
            p_a: self.p_a[i],
            p_b: self.p_b[i],
            p11: self.p11[i],
            p00: self.p00[i],
            p01: self.p01[i],
            p10: self.p10[i],
            pi_signal: self.pi_signal[i],
        }
    }

    pub fn points(&self) -> impl Iterator<Item = ObservablePoint> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    /// Largest absolute difference over every curve and angle.
    pub fn max_abs_diff(&self, other: &ObservableCurves) -> f64 {
        assert_eq!(self.len(), other.len(), "curves sampled on different grids");
        let pairs = [
            (&self.p_a, &other.p_a),
            (&self.p_b, &other.p_b),
            (&self.p11, &other.p11),
            (&self.p00, &other.p00),
            (&self.p01, &other.p01),
            (&self.p10, &other.p10),
            (&self.pi_signal, &other.pi_signal),
        ];
        pairs
            .iter()
            .flat_map(|(x, y)| x.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    pub const CSV_HEADER: [&'static str; 8] =
        ["theta", "p_a", "p_b", "p11", "p00", "p01", "p10", "pi"];

    /// CSV with 12 significant digits per value.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::CSV_HEADER)?;
        for p in self.points() {
            out.write_record(
                [
                    p.theta,
                    p.p_a,
                    p.p_b,
                    p.p11,
                    p.p00,
                    p.p01,
                    p.p10,
                    p.pi_signal,
                ]
                .map(|v| text::sig(v, 12)),
            )?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header != Self::CSV_HEADER {
            return Err(Error::Format(format!("unexpected curve header {header:?}")));
        }
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::Format(format!("{s:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            points.push(ObservablePoint {
                theta: v[0],
                p_a: v[1],
                p_b: v[2],
                p11: v[3],
                p00: v[4],
                p01: v[5],
                p10: v[6],
                pi_signal: v[7],
            });
        }
        Ok(Self::from_points(points))
    }
}

/// `count` evenly spaced angles from `start` to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// 0 to 4π in 41 points.
pub fn default_grid() -> Vec<f64> {
    linear_grid(0.0, 4.0 * PI, 41)
}

/// Populations and sums the closed forms are written in.
struct Moments {
    p_dd: f64,
    p_uu: f64,
    p_ud: f64,
    p_du: f64,
    re_coh: f64,
    /// Σ_x P_{↑x}, atom a up, atom b outside the qubit basis; likewise below.
    up_x: f64,
    down_x: f64,
    x_up: f64,
    x_down: f64,
    p_xx: f64,
}

impl Moments {
    fn of(rho: &DensityMatrix) -> Self {
        use Level::*;
        let p = |a, b| rho.population(a, b);
        let sum_x = |f: &dyn Fn(Level) -> f64| Level::LOSS.iter().map(|&x| f(x)).sum::<f64>();
        Self {
            p_dd: p(Down, Down),
            p_uu: p(Up, Up),
            p_ud: p(Up, Down),
            p_du: p(Down, Up),
            re_coh: rho.element((Down, Up), (Up, Down)).re,
            up_x: sum_x(&|x| p(Up, x)),
            down_x: sum_x(&|x| p(Down, x)),
            x_up: sum_x(&|x| p(x, Up)),
            x_down: sum_x(&|x| p(x, Down)),
            p_xx: Level::LOSS
                .iter()
                .flat_map(|&x| Level::LOSS.map(|y| p(x, y)))
                .sum(),
        }
    }

    fn point(&self, theta: f64) -> ObservablePoint {
        let (c1, c2) = (theta.cos(), (2.0 * theta).cos());
        let qubit = self.p_ud + self.p_du + self.p_uu + self.p_dd;

        let p_a = 0.5 * (qubit + self.up_x + self.down_x)
            + 0.5 * (self.p_dd - self.p_uu + self.p_du - self.p_ud + self.down_x - self.up_x) * c1;
        let p_b = 0.5 * (qubit + self.x_up + self.x_down)
            + 0.5 * (self.p_dd - self.p_uu + self.p_ud - self.p_du + self.x_down - self.x_up) * c1;
        let p11 = (self.p_ud + self.p_du + 2.0 * self.re_coh + 3.0 * (self.p_uu + self.p_dd)) / 8.0
            + 0.5 * (self.p_dd - self.p_uu) * c1
            + (self.p_dd + self.p_uu - self.p_ud - self.p_du - 2.0 * self.re_coh) / 8.0 * c2;
        let pi_signal = 0.5
            * (self.p_dd + self.p_uu - self.p_ud - self.p_du + 2.0 * self.re_coh + 2.0 * self.p_xx)
            + (self.x_up + self.up_x - self.x_down - self.down_x) * c1
            + 0.5 * (self.p_dd + self.p_uu - self.p_ud - self.p_du - 2.0 * self.re_coh) * c2;

        // The remaining joint outcomes follow from the marginals.
        let p10 = p_a - p11;
        let p01 = p_b - p11;
        let p00 = 1.0 - p_a - p_b + p11;
        ObservablePoint {
            theta,
            p_a,
            p_b,
            p11,
            p00,
            p01,
            p10,
            pi_signal,
        }
    }
}

/// Phase-averaged curves from the explicit formulas in the matrix elements.
pub fn curves_closed_form(rho: &DensityMatrix, thetas: &[f64]) -> ObservableCurves {
    let m = Moments::of(rho);
    ObservableCurves::from_points(thetas.iter().map(|&t| m.point(t)))
}

/// Phase-averaged curves read off the populations of [`phase_averaged_state`].
pub fn curves_from_populations(rho: &DensityMatrix, thetas: &[f64]) -> ObservableCurves {
    ObservableCurves::from_points(thetas.iter().map(|&t| {
        ObservablePoint::from_populations(t, &phase_averaged_state(rho, t).populations())
    }))
}

/// Joint outcome probabilities (P₁₁, P₁₀, P₀₁, P₀₀) at fixed θ as
/// trigonometric polynomials in φ.
///
/// Uses R(θ, φ) = D R(θ, 0) D† with D = diag(e^{iφ/2}, e^{−iφ/2}, 1, 1) per
/// atom, so the rotated diagonal element i is
/// Σ_{jk} R₀_ij R₀_ik* ρ_jk e^{iφ(s_k − s_j)/2}, with s the number of `Up`
/// minus `Down` atoms.
struct OutcomeHarmonics {
    /// coeff[class][n + 2] multiplies e^{inφ}.
    coeff: [[C64; 5]; 4],
}

impl OutcomeHarmonics {
    fn new(rho: &DensityMatrix, theta: f64) -> Self {
        let r0 = pair_rotation(&RotationParams::new(theta, 0.0));
        let m = rho.matrix();
        let spin = |i: usize| -> i32 {
            let (a, b) = pair_levels(i);
            [a, b]
                .iter()
                .map(|l| match l {
                    Level::Up => 1,
                    Level::Down => -1,
                    _ => 0,
                })
                .sum()
        };
        let mut coeff = [[C64::new(0.0, 0.0); 5]; 4];
        for i in 0..DIM {
            let (a, b) = pair_levels(i);
            let class = match (a == Level::Down, b == Level::Down) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (false, false) => 3,
            };
            for j in 0..DIM {
                if r0[(i, j)] == C64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..DIM {
                    let c = r0[(i, j)] * r0[(i, k)].conj() * m[(j, k)];
                    let n = (spin(k) - spin(j)) / 2;
                    coeff[class][(n + 2) as usize] += c;
                }
            }
        }
        Self { coeff }
    }

    /// Outcome probabilities averaged over phases whose first and second
    /// phasor moments are `z1` and `z2`. Populations are real, so c₋ₙ = c̄ₙ
    /// and only n ≥ 0 is needed.
    fn eval_mean(&self, z1: C64, z2: C64) -> [f64; 4] {
        self.coeff
            .map(|c| c[2].re + 2.0 * ((c[3] * z1).re + (c[4] * z2).re))
    }
}

/// Curves estimated by drawing `shots_phi` uniform phases per angle.
///
/// Angle `i` uses its own random stream, so the result does not depend on
/// scheduling.
pub fn curves_monte_carlo(
    rho: &DensityMatrix,
    thetas: &[f64],
    shots_phi: usize,
    seed: u64,
) -> Result<ObservableCurves> {
    if shots_phi == 0 {
        return Err(Error::input("shots_phi must be at least 1"));
    }
    let points = par::map_indexed(thetas.len(), |i| {
        let theta = thetas[i];
        let h = OutcomeHarmonics::new(rho, theta);
        let mut g = rng::stream(seed ^ rng::STREAM_PHI_ORACLE, i as u64);
        // The outcome probabilities are linear in e^{iφ} and e^{2iφ}, so the
        // shot average only needs the average of those two phasors.
        let (mut z1, mut z2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for _ in 0..shots_phi {
            let [cos, sin]: [f64; 2] = UnitCircle.sample(&mut g);
            z1 += C64::new(cos, sin);
            z2 += C64::new(2.0 * cos * cos - 1.0, 2.0 * sin * cos);
        }
        let [p11, p10, p01, p00] = h.eval_mean(z1 / shots_phi as f64, z2 / shots_phi as f64);
        ObservablePoint {
            theta,
            p_a: p11 + p10,
            p_b: p11 + p01,
            p11,
            p00,
            p01,
            p10,
            pi_signal: p11 + p00 - p01 - p10,
        }
    });
    Ok(ObservableCurves::from_points(points))
}
