//! Synthetic shot-level experiment.
//!
//! Each repetition draws a fresh Raman phase, rotates the pair, samples one
//! of the 16 joint levels from the rotated diagonal and converts it to two
//! recapture bits. With push-out readout an atom reads 1 iff it is in
//! `Down`; without push-out every trapped level reads 1.
//!
//! Repetition `r` at angle index `i` uses a fixed slice of the random stream
//! keyed on `i`, so a dataset is a pure function of its inputs and seed.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::qstate::{pair_levels, DensityMatrix, Level, DIM};
use crate::rotation::{ObservableCurves, ObservablePoint, PhaseHarmonics};
use crate::{par, rng, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    PushOut,
    NoPushOut,
}

impl Readout {
    pub fn bit(self, level: Level) -> u8 {
        match self {
            Readout::PushOut => (level == Level::Down) as u8,
            Readout::NoPushOut => level.is_trapped() as u8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShotRecord {
    pub theta: f64,
    pub rep_index: u32,
    pub outcome_a: u8,
    pub outcome_b: u8,
    pub pushout_applied: bool,
}

/// Joint outcome counts at one angle. The first digit is atom a.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointCounts {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl JointCounts {
    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }

    fn add(&mut self, outcome: u8) {
        match outcome {
            0b11 => self.n11 += 1,
            0b10 => self.n10 += 1,
            0b01 => self.n01 += 1,
            _ => self.n00 += 1,
        }
    }

    /// Empirical probabilities; marginals are sums of joint frequencies so
    /// P̂_a = P̂₁₁ + P̂₁₀ holds exactly.
    pub fn point(&self, theta: f64) -> ObservablePoint {
        let n = self.total() as f64;
        let (p11, p10, p01, p00) = (
            self.n11 as f64 / n,
            self.n10 as f64 / n,
            self.n01 as f64 / n,
            self.n00 as f64 / n,
        );
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
    }
}

/// Outcomes of every repetition at every angle.
///
/// Outcomes are packed one byte per shot: bit 1 is atom a, bit 0 atom b.
#[derive(Clone, Debug, PartialEq)]
pub struct ShotDataset {
    pub seed: u64,
    pub repetitions_per_theta: usize,
    pub theta_grid: Vec<f64>,
    pub detect_error: f64,
    pub readout: Readout,
    outcomes: Vec<Vec<u8>>,
}

impl ShotDataset {
    /// Assembles a dataset from packed outcomes, one vector per angle.
    pub fn from_outcomes(
        seed: u64,
        theta_grid: Vec<f64>,
        detect_error: f64,
        readout: Readout,
        outcomes: Vec<Vec<u8>>,
    ) -> Result<Self> {
        if outcomes.len() != theta_grid.len() {
            return Err(Error::Format(format!(
                "{} outcome rows for {} angles",
                outcomes.len(),
                theta_grid.len()
            )));
        }
        let reps = outcomes.first().map_or(0, Vec::len);
        if reps == 0 || outcomes.iter().any(|o| o.len() != reps) {
            return Err(Error::Format(
                "every angle needs the same non-zero number of repetitions".into(),
            ));
        }
        if outcomes.iter().flatten().any(|&o| o > 0b11) {
            return Err(Error::Format("outcome is not a pair of bits".into()));
        }
        Ok(Self {
            seed,
            repetitions_per_theta: reps,
            theta_grid,
            detect_error,
            readout,
            outcomes,
        })
    }

    pub fn outcomes(&self, theta_index: usize) -> &[u8] {
        &self.outcomes[theta_index]
    }

    pub fn len(&self) -> usize {
        self.theta_grid.len() * self.repetitions_per_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn records(&self) -> impl Iterator<Item = ShotRecord> + '_ {
        let pushout = self.readout == Readout::PushOut;
        self.theta_grid
            .iter()
            .zip(&self.outcomes)
            .flat_map(move |(&theta, row)| {
                row.iter().enumerate().map(move |(r, &o)| ShotRecord {
                    theta,
                    rep_index: r as u32,
                    outcome_a: o >> 1,
                    outcome_b: o & 1,
                    pushout_applied: pushout,
                })
            })
    }

    pub fn counts(&self) -> Vec<JointCounts> {
        self.outcomes
            .iter()
            .map(|row| {
                let mut c = JointCounts::default();
                row.iter().for_each(|&o| c.add(o));
                c
            })
            .collect()
    }

    pub fn empirical_curves(&self) -> ObservableCurves {
        ObservableCurves::from_points(
            self.theta_grid
                .iter()
                .zip(self.counts())
                .map(|(&t, c)| c.point(t)),
        )
    }

    pub const CSV_HEADER: [&'static str; 4] = ["theta", "rep", "outcome_a", "outcome_b"];

    /// One row per shot. Angles use the shortest representation that parses
    /// back to the same `f64`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::CSV_HEADER)?;
        for rec in self.records() {
            out.write_record([
                rec.theta.to_string(),
                rec.rep_index.to_string(),
                rec.outcome_a.to_string(),
                rec.outcome_b.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads shots written by [`ShotDataset::write_csv`]; run parameters come
    /// from the sidecar.
    pub fn read_csv<R: Read>(r: R, meta: &ShotMeta) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header != Self::CSV_HEADER {
            return Err(Error::Format(format!("unexpected shot header {header:?}")));
        }
        let n_theta = meta.grid.len();
        let mut outcomes = vec![vec![None; meta.reps]; n_theta];
        let mut theta_index = 0usize;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| {
                rec.get(i)
                    .ok_or_else(|| Error::Format(format!("row {}: missing column {i}", line + 2)))
            };
            let theta: f64 = parse(field(0)?, line)?;
            let rep: usize = parse(field(1)?, line)?;
            let a: u8 = parse(field(2)?, line)?;
            let b: u8 = parse(field(3)?, line)?;
            if a > 1 || b > 1 {
                return Err(Error::Format(format!(
                    "row {}: outcomes must be 0 or 1",
                    line + 2
                )));
            }
            while theta_index < n_theta && meta.grid[theta_index] != theta {
                theta_index += 1;
            }
            if theta_index == n_theta {
                return Err(Error::Format(format!(
                    "row {}: angle {theta} not in grid order",
                    line + 2
                )));
            }
            let slot = outcomes[theta_index].get_mut(rep).ok_or_else(|| {
                Error::Format(format!("row {}: rep {rep} ≥ {}", line + 2, meta.reps))
            })?;
            if slot.replace((a << 1) | b).is_some() {
                return Err(Error::Format(format!("row {}: duplicate shot", line + 2)));
            }
        }
        let outcomes = outcomes
            .into_iter()
            .map(|row| row.into_iter().collect::<Option<Vec<u8>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Format("missing shots".into()))?;
        Self::from_outcomes(
            meta.seed,
            meta.grid.clone(),
            meta.detect_error,
            meta.readout(),
            outcomes,
        )
    }

    pub fn meta(&self) -> ShotMeta {
        ShotMeta {
            seed: self.seed,
            reps: self.repetitions_per_theta,
            grid: self.theta_grid.clone(),
            pushout: self.readout == Readout::PushOut,
            detect_error: self.detect_error,
            config_hash: None,
            p_recap: None,
        }
    }
}

fn parse<T: std::str::FromStr>(s: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse()
        .map_err(|e| Error::Format(format!("row {}: {s:?}: {e}", line + 2)))
}

/// JSON sidecar of a shot CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotMeta {
    pub seed: u64,
    pub reps: usize,
    pub grid: Vec<f64>,
    pub pushout: bool,
    pub detect_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_recap: Option<RecaptureEstimate>,
}

impl ShotMeta {
    pub fn readout(&self) -> Readout {
        if self.pushout {
            Readout::PushOut
        } else {
            Readout::NoPushOut
        }
    }
}

/// Samples the push-out experiment.
pub fn sample_dataset(
    rho: &DensityMatrix,
    theta_grid: &[f64],
    reps: usize,
    detect_error: f64,
    seed: u64,
) -> Result<ShotDataset> {
    sample_dataset_with(rho, theta_grid, reps, detect_error, seed, Readout::PushOut)
}

pub fn sample_dataset_with(
    rho: &DensityMatrix,
    theta_grid: &[f64],
    reps: usize,
    detect_error: f64,
    seed: u64,
    readout: Readout,
) -> Result<ShotDataset> {
    if reps == 0 {
        return Err(Error::input("reps must be at least 1"));
    }
    if theta_grid.is_empty() {
        return Err(Error::input("theta grid is empty"));
    }
    if !(0.0..=1.0).contains(&detect_error) {
        return Err(Error::input(format!(
            "detect_error must lie in [0, 1], got {detect_error}"
        )));
    }
    rho.validate()?;

    let bits: [u8; DIM] = std::array::from_fn(|i| {
        let (a, b) = pair_levels(i);
        (readout.bit(a) << 1) | readout.bit(b)
    });
    let outcomes = par::map_indexed(theta_grid.len(), |i| {
        let harmonics = PhaseHarmonics::new(rho, theta_grid[i]);
        let mut g = rng::stream(seed, i as u64);
        (0..reps)
            .map(|_| {
                let phi = 2.0 * PI * rng::unit(&mut g);
                let u_level = rng::unit(&mut g);
                let flip_a = rng::unit(&mut g) < detect_error;
                let flip_b = rng::unit(&mut g) < detect_error;
                let (s, c) = phi.sin_cos();
                let pops = harmonics.eval_cs(c, s);
                let mut o = bits[pick(&pops, u_level)];
                if flip_a {
                    o &= 0b01;
                }
                if flip_b {
                    o &= 0b10;
                }
                o
            })
            .collect::<Vec<u8>>()
    });
    ShotDataset::from_outcomes(seed, theta_grid.to_vec(), detect_error, readout, outcomes)
}

/// Index drawn from (possibly slightly unnormalized) weights with `u ∈ [0,1)`.
fn pick(weights: &[f64; DIM], u: f64) -> usize {
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if target < acc {
            return i;
        }
    }
    last
}

/// Outcome of the separate no-push-out recapture experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecaptureEstimate {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
}

impl RecaptureEstimate {
    pub fn from_counts(successes: u64, trials: u64) -> Result<Self> {
        if trials == 0 || successes > trials {
            return Err(Error::input(format!(
                "invalid recapture counts {successes}/{trials}"
            )));
        }
        Ok(Self {
            successes,
            trials,
            estimate: successes as f64 / trials as f64,
        })
    }

    /// A value taken as known; carries no sampling error.
    pub fn exact(p: f64) -> Self {
        Self {
            successes: 0,
            trials: 0,
            estimate: p,
        }
    }

    pub fn sigma(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            (self.estimate * (1.0 - self.estimate) / self.trials as f64).sqrt()
        }
    }
}

/// Fraction of repetitions in which neither atom is in `XGone`.
pub fn sample_p_recap(rho: &DensityMatrix, reps: u64, seed: u64) -> Result<RecaptureEstimate> {
    if reps == 0 {
        return Err(Error::input("reps must be at least 1"));
    }
    rho.validate()?;
    let pops = rho.populations();
    let mut g = rng::stream(seed, rng::STREAM_RECAPTURE);
    let successes = (0..reps)
        .filter(|_| {
            let (a, b) = pair_levels(pick(&pops, rng::unit(&mut g)));
            a.is_trapped() && b.is_trapped()
        })
        .count() as u64;
    RecaptureEstimate::from_counts(successes, reps)
}
