//! Analysis pipeline for two atoms entangled through the Rydberg blockade.
//!
//! The crate models the pair on an extended per-atom basis
//! `{Up, Down, XGone, XTrap}` so that atom losses and leakage out of the
//! qubit manifold are carried explicitly through every step:
//!
//! * [`qstate`]: 16×16 two-atom density matrices, populations and summaries.
//! * [`dynamics`]: blockade excitation, mapping and per-atom loss channels.
//! * [`rotation`]: global Raman rotations, phase averaging and the closed-form
//!   recapture/parity curves.
//! * [`measure`]: seeded shot-level synthetic data with push-out readout.
//! * [`estimator`]: cosine-series fits, loss extraction, partial state
//!   reconstruction, fidelities and bootstrap errors.
//! * [`blochsim`]: single-atom five-level Lindblad model of the loss budget.
//!
//! Data-parallel loops (shot sampling, bootstrap, noise averaging) run on
//! rayon when the `parallel` feature is enabled and fall back to plain
//! iterators otherwise. Results never depend on the thread count.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blochsim;
pub mod dynamics;
pub mod error;
pub mod estimator;
pub mod measure;
pub mod qstate;
pub mod rotation;

mod par;
mod rng;
mod text;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;
