//! Partial tomography from push-out data.
//!
//! The pipeline fits P₁₁(θ) and the parity Π(θ) to `y0 + A cos θ + B cos 2θ`,
//! reads P_{↓↓} and P_{↑↑} off the P₁₁ fit at θ = 0 and π, obtains the losses
//! from the angle-averaged single-atom curves, closes the normalization for
//! P_{↓↑}+P_{↑↓}, and recovers Re ρ_{↓↑,↑↓} from the mean of P₁₁. The parity
//! at θ = π/2 gives an independent estimate of the same coherence.
//! Uncertainties come from a nonparametric bootstrap over repetitions.

mod fit;
mod losses;
mod reconstruct;

pub use fit::{fit_cosine_series, CosineFit, CurveData, MIN_POINTS};
pub use losses::{extract_losses, grid_weights, LossEstimate, BIAS_TOL};
pub use reconstruct::{
    entanglement_verdict, reconstruct, reconstruct_counts, Classification, Estimate, Fits,
    ReconstructOptions, ReconstructionReport, Verdict,
};
