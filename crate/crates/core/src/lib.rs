//! Likelihood-based inference for monotone response models
//! `X | Z = z ~ p(x, ψ(z))` with `ψ` nondecreasing.
//!
//! The crate computes unconstrained and pointwise-constrained monotone MLEs
//! (explicitly for exponential families, by the iterative convex minorant
//! algorithm otherwise), the likelihood ratio statistic for `ψ(z0) = θ0`,
//! confidence intervals by inverting it, and Monte Carlo approximations of
//! the universal limit laws used for calibration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod family;
pub mod gcm;
pub mod icm;
pub mod limitlaw;
pub mod lrt;
mod params;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use estimate::{
    check_fenchel, check_fenchel_constrained, fit_constrained, fit_unconstrained, loglik_total, ConstrainedFit,
    FenchelReport, FitOptions, FitResult, Init, Method, Sample, StepFunction,
};
pub use family::{block_solve, BlockSolution, Boundary, Family, NaturalForm, ParametricFamily};
pub use gcm::{pava, slogcm, slogcm0, CsumDiagram, SlopeVector};
pub use limitlaw::{Grid, LimitPath, QuantileTable, Statistic};
pub use lrt::{ci_invert, lr_statistic, ConfidenceInterval, LrProfile, LrtResult};
pub use simulate::{CovariateLaw, ModelSpec, PsiSpec};
