//! Single-atom five-level Lindblad model of the excitation and mapping
//! pulses.
//!
//! Levels are `↑`, `↓`, `m1` (a trapped ground state outside the qubit),
//! the intermediate `p` and the Rydberg state `r`. In the frame rotating
//! with the lasers
//!
//! ```text
//! H = −δ|p⟩⟨p| + Δ_r(t)|r⟩⟨r| + (Ω_low s/2)(|p⟩⟨low| + h.c.) + (Ω_B s/2)(|r⟩⟨p| + h.c.)
//! ```
//!
//! where `low` is `↑` during excitation and `↓` during mapping, and `s(t)` is
//! a sin² ramped envelope. `Δ_r` follows the differential light shift of the
//! nominal pulse so the two-photon transition stays resonant; a static
//! noise offset is added per run. `p` decays to `↑`, `↓` and `m1` with rate
//! γ_p and fixed branching.
//!
//! Time stepping is classical RK4 on the vectorized density matrix. While
//! the Hamiltonian is constant the RK4 step is a fixed 25×25 map, applied
//! through repeated squaring.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{SMatrix, SVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::ErrorBudget;
use crate::{par, rng, text, Error, Result, C64};

pub const N5: usize = 5;
const N25: usize = N5 * N5;

pub type Mat5 = SMatrix<C64, N5, N5>;
type Liou = SMatrix<C64, N25, N25>;
type Vec25 = SVector<C64, N25>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level5 {
    Up = 0,
    Down = 1,
    M1 = 2,
    P = 3,
    R = 4,
}

/// Decay fractions of `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branching {
    pub up: f64,
    pub down: f64,
    pub m1: f64,
}

impl Default for Branching {
    /// Squared Clebsch–Gordan coefficients of 5p₁/₂ F'=2, M'=2.
    fn default() -> Self {
        Self {
            up: 1.0 / 3.0,
            down: 0.5,
            m1: 1.0 / 6.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiveLevelConfig {
    /// Red Rabi frequency on ↑ ↔ p during excitation, rad/s.
    pub omega_red: f64,
    /// Red Rabi frequency on ↓ ↔ p during mapping, rad/s.
    pub omega_red_map: f64,
    /// Blue Rabi frequency on p ↔ r, rad/s.
    pub omega_blue: f64,
    /// Detuning above the intermediate state, rad/s.
    pub delta_intermediate: f64,
    /// Decay rate of p, rad/s. Defaults to the Rb D1 natural linewidth.
    pub gamma_p: f64,
    pub branching: Branching,
    /// Relative RMS of each laser intensity.
    pub intensity_noise_rms: f64,
    /// RMS of the two-photon detuning offset, rad/s.
    pub freq_noise_rms: f64,
    /// Length of each sin² ramp, seconds.
    pub rise_time: f64,
}

impl Default for FiveLevelConfig {
    fn default() -> Self {
        Self {
            omega_red: 2.0 * PI * 300e6,
            omega_red_map: 2.0 * PI * 240e6,
            omega_blue: 2.0 * PI * 25e6,
            delta_intermediate: 2.0 * PI * 600e6,
            gamma_p: 2.0 * PI * 5.746e6,
            branching: Branching::default(),
            intensity_noise_rms: 0.05,
            // 3 MHz full width at half maximum.
            freq_noise_rms: 2.0 * PI * 3e6 / 2.354_820_045,
            rise_time: 5e-9,
        }
    }
}

impl FiveLevelConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("omega_red", self.omega_red),
            ("omega_red_map", self.omega_red_map),
            ("omega_blue", self.omega_blue),
            ("delta_intermediate", self.delta_intermediate),
            ("gamma_p", self.gamma_p),
            ("intensity_noise_rms", self.intensity_noise_rms),
            ("freq_noise_rms", self.freq_noise_rms),
            ("rise_time", self.rise_time),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::input(format!("{name} must be ≥ 0, got {v}")));
            }
        }
        if self.delta_intermediate == 0.0 {
            return Err(Error::input("delta_intermediate must be non-zero"));
        }
        let b = self.branching;
        if [b.up, b.down, b.m1].iter().any(|&x| x < 0.0)
            || (b.up + b.down + b.m1 - 1.0).abs() > 1e-9
        {
            return Err(Error::input(format!(
                "branching fractions must be ≥ 0 and sum to 1, got {b:?}"
            )));
        }
        Ok(())
    }

    /// Ω_R Ω_B / 2δ.
    pub fn effective_rabi_excitation(&self) -> f64 {
        self.omega_red * self.omega_blue / (2.0 * self.delta_intermediate)
    }

    /// Ω_M Ω_B / 2δ.
    pub fn effective_rabi_mapping(&self) -> f64 {
        self.omega_red_map * self.omega_blue / (2.0 * self.delta_intermediate)
    }

    /// Largest angular frequency in the model.
    pub fn max_frequency(&self) -> f64 {
        [
            self.omega_red,
            self.omega_red_map,
            self.omega_blue,
            self.delta_intermediate.abs(),
            self.gamma_p,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// 1/(200 × largest angular frequency).
    pub fn max_step(&self) -> f64 {
        1.0 / (200.0 * self.max_frequency())
    }

    fn light_shift(&self, omega: f64) -> f64 {
        let d = self.delta_intermediate;
        ((d * d + omega * omega).sqrt() - d.abs()) / 2.0 * d.signum()
    }

    /// Excitation π pulse followed by mapping π pulse. The ramps lower the
    /// pulse area; the extra 5τ/4 restores it for an s² effective coupling.
    pub fn standard_pulses(&self) -> Vec<PulseShape> {
        let pad = 1.25 * self.rise_time;
        let t1 = PI / self.effective_rabi_excitation() + pad;
        let t2 = PI / self.effective_rabi_mapping() + pad;
        vec![
            PulseShape {
                start: 0.0,
                duration: t1,
                target: PulseTarget::Excitation,
                amplitude_scale: 1.0,
            },
            PulseShape {
                start: t1,
                duration: t2,
                target: PulseTarget::Mapping,
                amplitude_scale: 1.0,
            },
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseTarget {
    Excitation,
    Mapping,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub start: f64,
    pub duration: f64,
    pub target: PulseTarget,
    pub amplitude_scale: f64,
}

/// Static laser imperfections for one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseDraw {
    pub amp_red: f64,
    pub amp_red_map: f64,
    pub amp_blue: f64,
    /// Two-photon detuning offset, rad/s.
    pub detuning: f64,
}

impl Default for NoiseDraw {
    fn default() -> Self {
        Self {
            amp_red: 1.0,
            amp_red_map: 1.0,
            amp_blue: 1.0,
            detuning: 0.0,
        }
    }
}

impl NoiseDraw {
    /// Amplitude factors √(1+ε) with ε ~ N(0, σ_I²), detuning ~ N(0, σ_ν²).
    pub fn sample(config: &FiveLevelConfig, g: &mut rand_chacha::ChaCha8Rng) -> Self {
        let mut amp = || {
            let eps: f64 = StandardNormal.sample(g);
            (1.0 + config.intensity_noise_rms * eps).max(0.0).sqrt()
        };
        let (amp_red, amp_red_map, amp_blue) = (amp(), amp(), amp());
        let z: f64 = StandardNormal.sample(g);
        Self {
            amp_red,
            amp_red_map,
            amp_blue,
            detuning: config.freq_noise_rms * z,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    /// Store every n-th step; segment ends are always stored.
    pub record_every: usize,
    pub noise: NoiseDraw,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            record_every: 100,
            noise: NoiseDraw::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub states: Vec<Mat5>,
}

impl TimeSeries {
    pub fn populations(&self, i: usize) -> [f64; N5] {
        std::array::from_fn(|k| self.states[i][(k, k)].re)
    }

    pub fn last(&self) -> &Mat5 {
        self.states.last().expect("time series is never empty")
    }

    pub fn final_populations(&self) -> [f64; N5] {
        self.populations(self.states.len() - 1)
    }

    pub fn max_population(&self, level: Level5) -> f64 {
        self.states
            .iter()
            .map(|s| s[(level as usize, level as usize)].re)
            .fold(f64::MIN, f64::max)
    }

    pub const CSV_HEADER: [&'static str; 6] =
        ["t", "pop_up", "pop_down", "pop_m1", "pop_p", "pop_r"];

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::CSV_HEADER)?;
        for (i, &t) in self.times.iter().enumerate() {
            let p = self.populations(i);
            out.write_record(std::iter::once(t).chain(p).map(|v| text::sig(v, 12)))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// |i⟩⟨j|
fn ket_bra(i: Level5, j: Level5) -> Mat5 {
    let mut m = Mat5::zeros();
    m[(i as usize, j as usize)] = C64::new(1.0, 0.0);
    m
}

fn envelope(t: f64, duration: f64, rise: f64) -> f64 {
    if !(0.0..=duration).contains(&t) {
        return 0.0;
    }
    let edge = t.min(duration - t);
    if rise > 0.0 && edge < rise {
        (PI * edge / (2.0 * rise)).sin().powi(2)
    } else {
        1.0
    }
}

/// Real Hamiltonian with at most eight nonzero entries.
#[derive(Clone, Copy, Default)]
struct SparseH {
    entries: [(usize, usize, f64); 8],
    len: usize,
}

impl SparseH {
    fn push(&mut self, i: Level5, j: Level5, v: f64) {
        self.entries[self.len] = (i as usize, j as usize, v);
        self.len += 1;
    }

    fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries[..self.len]
    }

    fn dense(&self) -> Mat5 {
        let mut m = Mat5::zeros();
        for &(i, j, v) in self.entries() {
            m[(i, j)] += C64::new(v, 0.0);
        }
        m
    }
}

/// Time-dependent model: Hamiltonian and decay.
struct Model<'a> {
    config: &'a FiveLevelConfig,
    pulses: &'a [PulseShape],
    noise: NoiseDraw,
    collapse: Vec<Mat5>,
    /// Σ c†c
    decay_sum: Mat5,
    /// (target level, rate) of each jump out of p.
    jump_rates: Vec<(usize, f64)>,
    total_rate: f64,
}

impl<'a> Model<'a> {
    fn new(config: &'a FiveLevelConfig, pulses: &'a [PulseShape], noise: NoiseDraw) -> Self {
        let b = config.branching;
        let jump_rates: Vec<(usize, f64)> = [
            (Level5::Up, b.up),
            (Level5::Down, b.down),
            (Level5::M1, b.m1),
        ]
        .iter()
        .filter(|(_, f)| config.gamma_p * f > 0.0)
        .map(|&(k, f)| (k as usize, config.gamma_p * f))
        .collect();
        let collapse: Vec<Mat5> = jump_rates
            .iter()
            .map(|&(k, rate)| {
                let mut c = Mat5::zeros();
                c[(k, Level5::P as usize)] = C64::new(rate.sqrt(), 0.0);
                c
            })
            .collect();
        let decay_sum = collapse
            .iter()
            .map(|c| c.adjoint() * c)
            .fold(Mat5::zeros(), |a, b| a + b);
        let total_rate = jump_rates.iter().map(|&(_, r)| r).sum();
        Self {
            config,
            pulses,
            noise,
            collapse,
            decay_sum,
            jump_rates,
            total_rate,
        }
    }

    fn hamiltonian(&self, t: f64) -> SparseH {
        use Level5::*;
        let c = self.config;
        let mut h = SparseH::default();
        h.push(P, P, -c.delta_intermediate);
        let mut detuning_r = self.noise.detuning;
        if let Some(pulse) = self
            .pulses
            .iter()
            .find(|p| t >= p.start && t <= p.start + p.duration)
        {
            let s = envelope(t - pulse.start, pulse.duration, c.rise_time) * pulse.amplitude_scale;
            let (low, omega_low, amp_low) = match pulse.target {
                PulseTarget::Excitation => (Up, c.omega_red, self.noise.amp_red),
                PulseTarget::Mapping => (Down, c.omega_red_map, self.noise.amp_red_map),
            };
            let red = omega_low * s * amp_low / 2.0;
            let blue = c.omega_blue * s * self.noise.amp_blue / 2.0;
            h.push(P, low, red);
            h.push(low, P, red);
            h.push(R, P, blue);
            h.push(P, R, blue);
            detuning_r += c.light_shift(omega_low * s) - c.light_shift(c.omega_blue * s);
        }
        h.push(R, R, detuning_r);
        h
    }

    /// −i[H, ρ] + Σ_k c_k ρ c_k† − ½{Σ c†c, ρ}, using that every jump starts in p.
    fn derivative(&self, h: &SparseH, rho: &Mat5) -> Mat5 {
        let mut comm = Mat5::zeros();
        for &(i, k, v) in h.entries() {
            for j in 0..N5 {
                comm[(i, j)] += rho[(k, j)] * v;
                comm[(j, k)] -= rho[(j, i)] * v;
            }
        }
        let mut d = comm * C64::new(0.0, -1.0);
        let p = Level5::P as usize;
        let rho_pp = rho[(p, p)];
        for &(k, rate) in &self.jump_rates {
            d[(k, k)] += rho_pp * rate;
        }
        let half_gamma = 0.5 * self.total_rate;
        for j in 0..N5 {
            d[(p, j)] -= rho[(p, j)] * half_gamma;
            d[(j, p)] -= rho[(j, p)] * half_gamma;
        }
        d
    }

    fn rk4_step(&self, t: f64, h: f64, rho: &Mat5) -> Mat5 {
        let h0 = self.hamiltonian(t);
        let hm = self.hamiltonian(t + h / 2.0);
        let h1 = self.hamiltonian(t + h);
        let k1 = self.derivative(&h0, rho);
        let c = |x: f64| C64::new(x, 0.0);
        let k2 = self.derivative(&hm, &(rho + k1 * c(h / 2.0)));
        let k3 = self.derivative(&hm, &(rho + k2 * c(h / 2.0)));
        let k4 = self.derivative(&h1, &(rho + k3 * c(h)));
        rho + (k1 + (k2 + k3) * c(2.0) + k4) * c(h / 6.0)
    }

    /// Liouvillian for a fixed Hamiltonian on row-major vec(ρ):
    /// vec(AρB) = (A ⊗ Bᵀ) vec(ρ).
    fn liouvillian(&self, h: &SparseH) -> Liou {
        let h = &h.dense();
        let id = Mat5::identity();
        let i = C64::i();
        let mut l = (kron(h, &id) - kron(&id, &h.transpose())) * (-i);
        for c in &self.collapse {
            l += kron(c, &c.conjugate());
        }
        l -= (kron(&self.decay_sum, &id) + kron(&id, &self.decay_sum.transpose()))
            * C64::new(0.5, 0.0);
        l
    }
}

fn kron(a: &Mat5, b: &Mat5) -> Liou {
    Liou::from_fn(|r, c| a[(r / N5, c / N5)] * b[(r % N5, c % N5)])
}

fn vec_of(m: &Mat5) -> Vec25 {
    Vec25::from_fn(|k, _| m[(k / N5, k % N5)])
}

fn mat_of(v: &Vec25) -> Mat5 {
    hermitian_part(&Mat5::from_fn(|r, c| v[r * N5 + c]))
}

/// Removes the anti-Hermitian roundoff that accumulates over long runs.
fn hermitian_part(m: &Mat5) -> Mat5 {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn power(m: &Liou, mut n: usize) -> Liou {
    let mut result = Liou::identity();
    let mut base = *m;
    while n > 0 {
        if n & 1 == 1 {
            result *= base;
        }
        n >>= 1;
        if n > 0 {
            base = base * base;
        }
    }
    result
}

/// Interval with constant or ramping Hamiltonian.
struct Segment {
    start: f64,
    end: f64,
    constant: bool,
}

fn segments(config: &FiveLevelConfig, pulses: &[PulseShape]) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut t = 0.0;
    let push = |out: &mut Vec<Segment>, start: f64, end: f64, constant: bool| {
        if end > start {
            out.push(Segment {
                start,
                end,
                constant,
            });
        }
    };
    for p in pulses {
        push(&mut out, t, p.start, true);
        let rise = config.rise_time.min(p.duration / 2.0);
        let end = p.start + p.duration;
        push(&mut out, p.start, p.start + rise, false);
        push(&mut out, p.start + rise, end - rise, true);
        push(&mut out, end - rise, end, false);
        t = end;
    }
    out
}

fn validate_pulses(pulses: &[PulseShape]) -> Result<()> {
    let mut end = 0.0;
    for p in pulses {
        if !(p.duration > 0.0) || p.start < end || !(p.amplitude_scale >= 0.0) {
            return Err(Error::input(format!(
                "pulses must have positive duration, non-negative scale and not overlap: {p:?}"
            )));
        }
        end = p.start + p.duration;
    }
    Ok(())
}

pub fn validate_rho(rho: &Mat5) -> Result<()> {
    let herm = (rho - rho.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let trace = rho.trace();
    if herm > 1e-12 || (trace.re - 1.0).abs() > 1e-12 || trace.im.abs() > 1e-12 {
        return Err(Error::InvalidState(format!(
            "5-level ρ: hermiticity error {herm:e}, trace {trace}"
        )));
    }
    let min_eig = SymmetricEigen::new(*rho).eigenvalues.min();
    if min_eig < -1e-10 {
        return Err(Error::InvalidState(format!(
            "5-level ρ has negative eigenvalue {min_eig:e}"
        )));
    }
    Ok(())
}

/// |↑⟩⟨↑|
pub fn ground_state() -> Mat5 {
    ket_bra(Level5::Up, Level5::Up)
}

/// Integrates the master equation through `pulses` with nominal lasers,
/// storing every 100th step.
pub fn evolve_lindblad(
    config: &FiveLevelConfig,
    pulses: &[PulseShape],
    rho0: &Mat5,
    dt: f64,
) -> Result<TimeSeries> {
    evolve_lindblad_with(config, pulses, rho0, dt, &EvolveOptions::default())
}

pub fn evolve_lindblad_with(
    config: &FiveLevelConfig,
    pulses: &[PulseShape],
    rho0: &Mat5,
    dt: f64,
    options: &EvolveOptions,
) -> Result<TimeSeries> {
    config.validate()?;
    validate_pulses(pulses)?;
    validate_rho(rho0)?;
    let bound = config.max_step();
    if !(dt > 0.0) || dt > bound {
        return Err(Error::StepTooLarge { dt, bound });
    }
    let every = options.record_every.max(1);
    let model = Model::new(config, pulses, options.noise);

    let mut series = TimeSeries {
        times: vec![0.0],
        states: vec![*rho0],
    };
    let mut rho = *rho0;
    for seg in segments(config, pulses) {
        let n = ((seg.end - seg.start) / dt).ceil().max(1.0) as usize;
        let h = (seg.end - seg.start) / n as f64;
        if seg.constant {
            let l = model.liouvillian(&model.hamiltonian(0.5 * (seg.start + seg.end)))
                * C64::new(h, 0.0);
            let l2 = l * l;
            let l3 = l2 * l;
            let step = Liou::identity()
                + l
                + l2 * C64::new(0.5, 0.0)
                + l3 * C64::new(1.0 / 6.0, 0.0)
                + l3 * l * C64::new(1.0 / 24.0, 0.0);
            let stride = power(&step, every.min(n));
            let mut v = vec_of(&rho);
            let mut done = 0;
            while n - done >= every {
                v = stride * v;
                done += every;
                if done < n {
                    series.times.push(seg.start + done as f64 * h);
                    series.states.push(mat_of(&v));
                }
            }
            if done < n {
                v = power(&step, n - done) * v;
            }
            rho = mat_of(&v);
        } else {
            for k in 0..n {
                let t = seg.start + k as f64 * h;
                rho = hermitian_part(&model.rk4_step(t, h, &rho));
                if (k + 1) % every == 0 && k + 1 < n {
                    series.times.push(t + h);
                    series.states.push(rho);
                }
            }
        }
        series.times.push(seg.end);
        series.states.push(rho);
    }
    Ok(series)
}

/// Per-channel probabilities for one atom after excitation and mapping.
///
/// Each channel is the excess over a noiseless, decay-free reference run;
/// the reference's own imperfection is reported as `coherent_residual`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    /// Decay into ↓ followed by excitation to r by the mapping pulse.
    pub p_spont_then_rydberg: f64,
    /// Left in r by a noisy mapping pulse.
    pub p_map_fail: f64,
    /// Decayed into m1.
    pub p_to_m1: f64,
    /// Left in p at the end.
    pub p_left_in_p: f64,
    /// Returned to ↑ by decay or incomplete excitation.
    pub p_back_to_up: f64,
    /// 1 − P(↓) of the reference run.
    pub coherent_residual: f64,
    pub noise_samples: usize,
}

impl LossBudget {
    /// Overwrites the matching fields of `budget`.
    pub fn apply_to(&self, budget: &mut ErrorBudget) {
        budget.p_spont_to_rydberg = self.p_spont_then_rydberg;
        budget.p_map_fail = self.p_map_fail;
        budget.p_spont_to_xtrap = self.p_to_m1;
    }
}

/// Monte-Carlo average over static noise draws. Draw `i` comes from its own
/// random stream.
pub fn loss_budget(
    config: &FiveLevelConfig,
    pulses: &[PulseShape],
    noise_samples: usize,
    seed: u64,
) -> Result<LossBudget> {
    loss_budget_with_step(config, pulses, noise_samples, seed, config.max_step())
}

pub fn loss_budget_with_step(
    config: &FiveLevelConfig,
    pulses: &[PulseShape],
    noise_samples: usize,
    seed: u64,
    dt: f64,
) -> Result<LossBudget> {
    if noise_samples == 0 {
        return Err(Error::input("noise_samples must be at least 1"));
    }
    let no_decay = FiveLevelConfig {
        gamma_p: 0.0,
        ..*config
    };
    let final_pops = |cfg: &FiveLevelConfig, noise: NoiseDraw| -> Result<[f64; N5]> {
        let opts = EvolveOptions {
            record_every: usize::MAX,
            noise,
        };
        Ok(evolve_lindblad_with(cfg, pulses, &ground_state(), dt, &opts)?.final_populations())
    };
    let reference = final_pops(&no_decay, NoiseDraw::default())?;
    let runs = par::map_indexed(noise_samples, |i| -> Result<([f64; N5], [f64; N5])> {
        let noise = NoiseDraw::sample(config, &mut rng::stream(seed, rng::STREAM_NOISE | i as u64));
        Ok((final_pops(&no_decay, noise)?, final_pops(config, noise)?))
    });
    let mut coherent = [0.0; N5];
    let mut full = [0.0; N5];
    for run in runs {
        let (c, f) = run?;
        for k in 0..N5 {
            coherent[k] += c[k] / noise_samples as f64;
            full[k] += f[k] / noise_samples as f64;
        }
    }
    let (r, p) = (Level5::R as usize, Level5::P as usize);
    Ok(LossBudget {
        p_spont_then_rydberg: full[r] - coherent[r],
        p_map_fail: coherent[r] - reference[r],
        p_to_m1: full[Level5::M1 as usize],
        p_left_in_p: full[p] - reference[p],
        p_back_to_up: full[Level5::Up as usize] - reference[Level5::Up as usize],
        coherent_residual: 1.0 - reference[Level5::Down as usize],
        noise_samples,
    })
}

/// Oscillation frequency of the r population under a constant excitation
/// pulse without decay, from the spacing of its first two maxima.
pub fn effective_rabi_frequency(config: &FiveLevelConfig) -> Result<f64> {
    let cfg = FiveLevelConfig {
        gamma_p: 0.0,
        rise_time: 0.0,
        ..*config
    };
    let nominal = cfg.effective_rabi_excitation();
    let pulse = PulseShape {
        start: 0.0,
        duration: 2.6 * 2.0 * PI / nominal,
        target: PulseTarget::Excitation,
        amplitude_scale: 1.0,
    };
    let dt = cfg.max_step();
    let record_every = ((2.0 * PI / nominal) / 4000.0 / dt).floor().max(1.0) as usize;
    let series = evolve_lindblad_with(
        &cfg,
        &[pulse],
        &ground_state(),
        dt,
        &EvolveOptions {
            record_every,
            noise: NoiseDraw::default(),
        },
    )?;
    // Maxima sit near (k + ½) periods; take the largest sample within half
    // a period of each to step over the fast light-shift ripple.
    let period = 2.0 * PI / nominal;
    let peak = |k: f64| -> Option<f64> {
        let (lo, hi) = ((k + 0.5 - 0.5) * period, (k + 0.5 + 0.5) * period);
        series
            .times
            .iter()
            .zip(&series.states)
            .filter(|(&t, _)| t >= lo && t <= hi)
            .max_by(|a, b| {
                a.1[(Level5::R as usize, Level5::R as usize)]
                    .re
                    .total_cmp(&b.1[(Level5::R as usize, Level5::R as usize)].re)
            })
            .map(|(&t, _)| t)
    };
    match (peak(0.0), peak(1.0)) {
        (Some(a), Some(b)) if b > a => Ok(2.0 * PI / (b - a)),
        _ => Err(Error::Fit(
            "could not locate two Rydberg population maxima".into(),
        )),
    }
}
