use std::f64::consts::PI;
use std::io::Write;

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::fit::{fit_cosine_series, CosineFit, CurveData};
use super::losses::losses_from_counts;
use crate::measure::{JointCounts, RecaptureEstimate, ShotDataset};
use crate::{par, rng, text, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconstructOptions {
    pub bootstrap_resamples: usize,
    pub seed: u64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            bootstrap_resamples: 1000,
            seed: 0,
        }
    }
}

/// A point estimate with its one-sigma bootstrap error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fits {
    pub p11: CosineFit,
    pub parity: CosineFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub p_dd: Estimate,
    pub p_uu: Estimate,
    pub p_ud_plus_du: Estimate,
    pub re_coh: Estimate,
    pub re_coh_crosscheck: Estimate,
    pub l_a: Estimate,
    pub l_b: Estimate,
    pub l_total: Estimate,
    pub p_recap: Estimate,
    pub f: Estimate,
    pub f_pairs: Estimate,
    pub f_qubit: Estimate,
    /// Fields whose point estimate was clipped into [0, 1].
    pub clipped: Vec<String>,
    pub warnings: Vec<String>,
    pub fits: Fits,
    pub bootstrap_resamples: usize,
    pub bootstrap_failures: usize,
}

const FIELD_NAMES: [&str; 12] = [
    "p_dd",
    "p_uu",
    "p_ud_plus_du",
    "re_coh",
    "re_coh_crosscheck",
    "l_a",
    "l_b",
    "l_total",
    "p_recap",
    "f",
    "f_pairs",
    "f_qubit",
];

struct PointEstimate {
    values: [f64; 12],
    clipped: Vec<String>,
    warning: Option<String>,
    fits: Fits,
}

fn clip(name: &str, v: f64, clipped: &mut Vec<String>) -> f64 {
    if (0.0..=1.0).contains(&v) {
        v
    } else {
        clipped.push(name.to_owned());
        v.clamp(0.0, 1.0)
    }
}

fn point_estimate(
    thetas: &[f64],
    counts: &[JointCounts],
    reps: u64,
    p_recap: f64,
) -> Result<PointEstimate> {
    if !(p_recap > 0.0 && p_recap <= 1.0) {
        return Err(Error::input(format!(
            "p_recap must lie in (0, 1], got {p_recap}"
        )));
    }
    let points: Vec<_> = thetas
        .iter()
        .zip(counts)
        .map(|(&t, c)| c.point(t))
        .collect();
    let p11: Vec<f64> = points.iter().map(|p| p.p11).collect();
    let parity: Vec<f64> = points.iter().map(|p| p.pi_signal).collect();
    let fit_p11 = fit_cosine_series(&CurveData::binomial(thetas, &p11, reps))?;
    let fit_parity = fit_cosine_series(&CurveData::parity(thetas, &parity, reps))?;

    let mut clipped = Vec::new();
    let p_dd = clip("p_dd", fit_p11.eval(0.0), &mut clipped);
    let p_uu = clip("p_uu", fit_p11.eval(PI), &mut clipped);
    let losses = losses_from_counts(thetas, counts)?;
    let l_a = clip("l_a", losses.l_a, &mut clipped);
    let l_b = clip("l_b", losses.l_b, &mut clipped);
    let l_total = l_a + l_b - l_a * l_b;
    let p_ud_plus_du = clip("p_ud_plus_du", 1.0 - l_total - p_dd - p_uu, &mut clipped);
    let re_coh = (8.0 * fit_p11.y0 - p_ud_plus_du - 3.0 * (p_dd + p_uu)) / 2.0;
    let re_coh_crosscheck = (fit_parity.eval(PI / 2.0) - l_a * l_b) / 2.0;

    if l_total >= 1.0 {
        return Err(Error::Fit("no pair survives in the qubit basis".into()));
    }
    let f = p_ud_plus_du / 2.0 + re_coh;
    let f_pairs = f / p_recap;
    let f_qubit = f / (1.0 - l_total);
    let f = clip("f", f, &mut clipped);
    let f_pairs = clip("f_pairs", f_pairs, &mut clipped);
    let f_qubit = clip("f_qubit", f_qubit, &mut clipped);

    Ok(PointEstimate {
        values: [
            p_dd,
            p_uu,
            p_ud_plus_du,
            re_coh,
            re_coh_crosscheck,
            l_a,
            l_b,
            l_total,
            p_recap,
            f,
            f_pairs,
            f_qubit,
        ],
        clipped,
        warning: losses.warning,
        fits: Fits {
            p11: fit_p11,
            parity: fit_parity,
        },
    })
}

/// One multinomial draw of the four joint counts with the observed
/// frequencies, as conditional binomials.
fn resample_counts(c: &JointCounts, g: &mut rand_chacha::ChaCha8Rng) -> JointCounts {
    let n = c.total();
    let mut draw = |trials: u64, hits: u64, pool: u64| -> u64 {
        if trials == 0 || hits == 0 {
            0
        } else if hits >= pool {
            trials
        } else {
            Binomial::new(trials, hits as f64 / pool as f64)
                .expect("valid binomial")
                .sample(g)
        }
    };
    let n11 = draw(n, c.n11, n);
    let n10 = draw(n - n11, c.n10, n - c.n11);
    let n01 = draw(n - n11 - n10, c.n01, c.n01 + c.n00);
    JointCounts {
        n11,
        n10,
        n01,
        n00: n - n11 - n10 - n01,
    }
}

/// Table-1 style reconstruction with bootstrap errors.
pub fn reconstruct(
    dataset: &ShotDataset,
    p_recap: &RecaptureEstimate,
    options: &ReconstructOptions,
) -> Result<ReconstructionReport> {
    reconstruct_counts(&dataset.theta_grid, &dataset.counts(), p_recap, options)
}

/// [`reconstruct`] on per-angle joint counts.
pub fn reconstruct_counts(
    thetas: &[f64],
    counts: &[JointCounts],
    p_recap: &RecaptureEstimate,
    options: &ReconstructOptions,
) -> Result<ReconstructionReport> {
    if counts.len() != thetas.len() || counts.is_empty() {
        return Err(Error::input("need one count row per angle"));
    }
    let reps = counts[0].total();
    if reps == 0 || counts.iter().any(|c| c.total() != reps) {
        return Err(Error::input(
            "every angle needs the same non-zero number of repetitions",
        ));
    }
    let point = point_estimate(thetas, counts, reps, p_recap.estimate)?;

    let replicates = par::map_indexed(options.bootstrap_resamples, |b| {
        let mut g = rng::stream(options.seed, rng::STREAM_BOOTSTRAP | b as u64);
        let resampled: Vec<JointCounts> =
            counts.iter().map(|c| resample_counts(c, &mut g)).collect();
        let p = if p_recap.trials > 0 {
            Binomial::new(p_recap.trials, p_recap.estimate)
                .expect("valid binomial")
                .sample(&mut g) as f64
                / p_recap.trials as f64
        } else {
            p_recap.estimate
        };
        point_estimate(thetas, &resampled, reps, p)
            .ok()
            .map(|e| e.values)
    });
    let ok: Vec<[f64; 12]> = replicates.iter().flatten().copied().collect();
    let failures = replicates.len() - ok.len();

    let sigmas: [f64; 12] = std::array::from_fn(|k| {
        if ok.len() < 2 {
            return 0.0;
        }
        let mean = ok.iter().map(|v| v[k]).sum::<f64>() / ok.len() as f64;
        (ok.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt()
    });

    let mut warnings: Vec<String> = point.warning.into_iter().collect();
    if failures > 0 {
        warnings.push(format!(
            "{failures} of {} bootstrap resamples failed and were skipped",
            options.bootstrap_resamples
        ));
    }
    if options.bootstrap_resamples > 0 && ok.len() < 2 {
        warnings.push("too few successful resamples; uncertainties set to zero".into());
    }

    let e = |k: usize| Estimate {
        value: point.values[k],
        sigma: sigmas[k],
    };
    Ok(ReconstructionReport {
        p_dd: e(0),
        p_uu: e(1),
        p_ud_plus_du: e(2),
        re_coh: e(3),
        re_coh_crosscheck: e(4),
        l_a: e(5),
        l_b: e(6),
        l_total: e(7),
        p_recap: e(8),
        f: e(9),
        f_pairs: e(10),
        f_qubit: e(11),
        clipped: point.clipped,
        warnings,
        fits: point.fits,
        bootstrap_resamples: options.bootstrap_resamples,
        bootstrap_failures: failures,
    })
}

impl ReconstructionReport {
    /// (name, estimate) pairs in a fixed order.
    pub fn fields(&self) -> [(&'static str, Estimate); 12] {
        let v = [
            self.p_dd,
            self.p_uu,
            self.p_ud_plus_du,
            self.re_coh,
            self.re_coh_crosscheck,
            self.l_a,
            self.l_b,
            self.l_total,
            self.p_recap,
            self.f,
            self.f_pairs,
            self.f_qubit,
        ];
        std::array::from_fn(|k| (FIELD_NAMES[k], v[k]))
    }

    /// Data and fitted P₁₁ and Π on the dataset's grid.
    pub fn write_fit_curves_csv<W: Write>(&self, dataset: &ShotDataset, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["theta", "p11", "p11_fit", "pi", "pi_fit"])?;
        for p in dataset.empirical_curves().points() {
            out.write_record(
                [
                    p.theta,
                    p.p11,
                    self.fits.p11.eval(p.theta),
                    p.pi_signal,
                    self.fits.parity.eval(p.theta),
                ]
                .map(|v| text::sig(v, 12)),
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    EntangledPairs,
    NotProven,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub classification: Classification,
    /// (F_pairs − 1/2) in units of its bootstrap σ.
    pub margin_sigma: f64,
    /// (F_qubit − 1/2) in units of its bootstrap σ.
    pub qubit_margin_sigma: f64,
}

/// Entangled iff F_pairs lies more than one σ above 1/2.
pub fn entanglement_verdict(report: &ReconstructionReport) -> Verdict {
    let margin = |e: Estimate| {
        if e.sigma > 0.0 {
            (e.value - 0.5) / e.sigma
        } else {
            (e.value - 0.5) * f64::INFINITY
        }
    };
    let classification = if report.f_pairs.value - report.f_pairs.sigma > 0.5 {
        Classification::EntangledPairs
    } else {
        Classification::NotProven
    };
    Verdict {
        classification,
        margin_sigma: margin(report.f_pairs),
        qubit_margin_sigma: margin(report.f_qubit),
    }
}
