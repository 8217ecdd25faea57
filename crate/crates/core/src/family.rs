//! One-parameter conditional models `p(x, θ)` and the per-block score
//! equation solver shared by every estimator.
//!
//! Built-in families are parametrized on the scale of the monotone link
//! itself (mean, success probability, rate, or the curved-normal θ). Those
//! that are full-rank exponential families additionally expose their
//! natural-scale form through [`NaturalForm`].
//!
//! Log-likelihoods are kernels: additive terms that depend only on `x` are
//! dropped, which leaves likelihood ratios and all derivatives unchanged.
//!
//! Implementations of [`ParametricFamily`] are expected to satisfy the usual
//! regularity contract: a θ-free support, a log-likelihood that is three
//! times differentiable and strictly concave in θ, differentiation under the
//! integral sign, and a locally dominated third derivative. None of these
//! are checked at runtime.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::params::ParamString;

/// A regular one-parameter model for the response given the link value θ.
pub trait ParametricFamily: Send + Sync {
    /// Open interval of valid θ; either end may be infinite.
    fn theta_domain(&self) -> (f64, f64);

    /// Whether `x` lies in the (θ-free) support.
    fn in_support(&self, x: f64) -> bool;

    fn loglik(&self, x: f64, theta: f64) -> f64;

    /// First θ-derivative of [`loglik`](Self::loglik).
    fn score(&self, x: f64, theta: f64) -> f64;

    /// Second θ-derivative of [`loglik`](Self::loglik).
    fn score_deriv(&self, x: f64, theta: f64) -> f64;

    fn fisher_info(&self, theta: f64) -> f64;

    /// Natural-scale structure, present for full-rank exponential families.
    fn exp_family(&self) -> Option<NaturalForm> {
        None
    }

    /// Draws one response at link value `theta`.
    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> f64;

    /// Rough starting point for solving the score equation of a block.
    fn initial_guess(&self, _xs: &[f64]) -> f64 {
        let (lo, hi) = self.theta_domain();
        interior_point(lo, hi)
    }

    fn contains(&self, theta: f64) -> bool {
        let (lo, hi) = self.theta_domain();
        theta > lo && theta < hi
    }

    /// Membership in the closed domain; boundary values arise from blocks
    /// whose score equation has no interior root.
    fn in_closure(&self, theta: f64) -> bool {
        let (lo, hi) = self.theta_domain();
        theta >= lo && theta <= hi && !theta.is_nan()
    }

    fn try_loglik(&self, x: f64, theta: f64) -> Result<f64> {
        if !self.in_closure(theta) {
            return domain(format!("θ = {theta} outside the parameter space"));
        }
        Ok(self.loglik(x, theta))
    }

    fn try_score(&self, x: f64, theta: f64) -> Result<f64> {
        if !self.contains(theta) {
            return domain(format!("θ = {theta} outside the parameter space"));
        }
        Ok(self.score(x, theta))
    }

    fn try_score_deriv(&self, x: f64, theta: f64) -> Result<f64> {
        if !self.contains(theta) {
            return domain(format!("θ = {theta} outside the parameter space"));
        }
        Ok(self.score_deriv(x, theta))
    }
}

fn interior_point(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + 1.0,
        (false, true) => hi - 1.0,
        (false, false) => 0.0,
    }
}

/// Natural-parameter view `p(x, η) = exp[η T(x) − C(η)] h(x)` of a built-in
/// exponential family, together with the map between η and the working θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NaturalForm {
    /// η = μ, T(x) = x/σ², C(η) = η²/(2σ²).
    Gaussian { sigma2: f64 },
    /// η = logit p, T(x) = x, C(η) = log(1 + e^η).
    Bernoulli,
    /// η = log λ, T(x) = x, C(η) = e^η.
    Poisson,
}

impl NaturalForm {
    pub fn t(&self, x: f64) -> f64 {
        match *self {
            NaturalForm::Gaussian { sigma2 } => x / sigma2,
            NaturalForm::Bernoulli | NaturalForm::Poisson => x,
        }
    }

    pub fn c(&self, eta: f64) -> f64 {
        match *self {
            NaturalForm::Gaussian { sigma2 } => eta * eta / (2.0 * sigma2),
            NaturalForm::Bernoulli => softplus(eta),
            NaturalForm::Poisson => eta.exp(),
        }
    }

    pub fn c_prime(&self, eta: f64) -> f64 {
        match *self {
            NaturalForm::Gaussian { sigma2 } => eta / sigma2,
            NaturalForm::Bernoulli => sigmoid(eta),
            NaturalForm::Poisson => eta.exp(),
        }
    }

    pub fn c_second(&self, eta: f64) -> f64 {
        match *self {
            NaturalForm::Gaussian { sigma2 } => 1.0 / sigma2,
            NaturalForm::Bernoulli => {
                let s = sigmoid(eta);
                s * (1.0 - s)
            }
            NaturalForm::Poisson => eta.exp(),
        }
    }

    /// Inverse of `C'`; boundary means map to ±∞.
    pub fn c_prime_inv(&self, mean_t: f64) -> f64 {
        match *self {
            NaturalForm::Gaussian { sigma2 } => sigma2 * mean_t,
            NaturalForm::Bernoulli => (mean_t / (1.0 - mean_t)).ln(),
            NaturalForm::Poisson => mean_t.ln(),
        }
    }

    pub fn natural_to_psi(&self, eta: f64) -> f64 {
        match *self {
            NaturalForm::Gaussian { .. } => eta,
            NaturalForm::Bernoulli => sigmoid(eta),
            NaturalForm::Poisson => eta.exp(),
        }
    }

    pub fn psi_to_natural(&self, theta: f64) -> f64 {
        match *self {
            NaturalForm::Gaussian { .. } => theta,
            NaturalForm::Bernoulli => (theta / (1.0 - theta)).ln(),
            NaturalForm::Poisson => theta.ln(),
        }
    }

    /// `natural_to_psi(c_prime_inv(mean_t))`, evaluated without the round
    /// trip through η so that block proportions and means stay exact.
    pub fn mean_to_psi(&self, mean_t: f64) -> f64 {
        match *self {
            NaturalForm::Gaussian { sigma2 } => sigma2 * mean_t,
            NaturalForm::Bernoulli | NaturalForm::Poisson => mean_t,
        }
    }

    /// Inverse of [`mean_to_psi`](Self::mean_to_psi): `C'(η(θ))`.
    pub fn psi_to_mean(&self, theta: f64) -> f64 {
        match *self {
            NaturalForm::Gaussian { sigma2 } => theta / sigma2,
            NaturalForm::Bernoulli | NaturalForm::Poisson => theta,
        }
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// `a·log(b)` with the convention `0·log 0 = 0`.
fn xlogy(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * b.ln()
    }
}

/// The built-in response models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `X ~ N(θ, σ²)` with σ² known.
    Gaussian { sigma2: f64 },
    /// `X ~ Bernoulli(θ)`.
    Bernoulli,
    /// `X ~ Poisson(θ)`.
    Poisson,
    /// `X ~ N(cθ^(1−2m), dθ^(−2m))`, a curved exponential family.
    CurvedNormal { m: f64, c: f64, d: f64 },
}

impl Family {
    pub fn gaussian(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return domain(format!("gaussian variance must be positive, got {sigma2}"));
        }
        Ok(Family::Gaussian { sigma2 })
    }

    pub fn bernoulli() -> Self {
        Family::Bernoulli
    }

    pub fn poisson() -> Self {
        Family::Poisson
    }

    pub fn curved_normal(m: f64, c: f64, d: f64) -> Result<Self> {
        if !(m >= 1.0 && m.is_finite()) {
            return domain(format!("curved_normal requires m >= 1, got {m}"));
        }
        if !(c > 0.0 && c.is_finite() && d > 0.0 && d.is_finite()) {
            return domain(format!("curved_normal requires c, d > 0, got c={c}, d={d}"));
        }
        Ok(Family::CurvedNormal { m, c, d })
    }

    /// `u(θ) = xθ^m − cθ^(1−m)` and its first two θ-derivatives; the
    /// curved-normal kernel is `m log θ − u²/(2d)`.
    fn curved_u(x: f64, theta: f64, m: f64, c: f64) -> (f64, f64, f64) {
        let tm = theta.powf(m);
        let t1m = theta.powf(1.0 - m);
        let u = x * tm - c * t1m;
        let du = m * x * tm / theta - c * (1.0 - m) * t1m / theta;
        let d2u = m * (m - 1.0) * x * tm / (theta * theta) + c * m * (1.0 - m) * t1m / (theta * theta);
        (u, du, d2u)
    }
}

impl ParametricFamily for Family {
    fn theta_domain(&self) -> (f64, f64) {
        match self {
            Family::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Family::Bernoulli => (0.0, 1.0),
            Family::Poisson | Family::CurvedNormal { .. } => (0.0, f64::INFINITY),
        }
    }

    fn in_support(&self, x: f64) -> bool {
        match self {
            Family::Gaussian { .. } | Family::CurvedNormal { .. } => x.is_finite(),
            Family::Bernoulli => x == 0.0 || x == 1.0,
            Family::Poisson => x >= 0.0 && x.is_finite() && x.fract() == 0.0,
        }
    }

    fn loglik(&self, x: f64, theta: f64) -> f64 {
        match *self {
            Family::Gaussian { sigma2 } => -(x - theta) * (x - theta) / (2.0 * sigma2),
            Family::Bernoulli => xlogy(x, theta) + xlogy(1.0 - x, 1.0 - theta),
            Family::Poisson => xlogy(x, theta) - theta,
            Family::CurvedNormal { m, c, d } => {
                let (u, _, _) = Self::curved_u(x, theta, m, c);
                m * theta.ln() - u * u / (2.0 * d)
            }
        }
    }

    fn score(&self, x: f64, theta: f64) -> f64 {
        match *self {
            Family::Gaussian { sigma2 } => (x - theta) / sigma2,
            Family::Bernoulli => {
                if x == 1.0 {
                    1.0 / theta
                } else {
                    -1.0 / (1.0 - theta)
                }
            }
            Family::Poisson => x / theta - 1.0,
            Family::CurvedNormal { m, c, d } => {
                let (u, du, _) = Self::curved_u(x, theta, m, c);
                m / theta - u * du / d
            }
        }
    }

    fn score_deriv(&self, x: f64, theta: f64) -> f64 {
        match *self {
            Family::Gaussian { sigma2 } => -1.0 / sigma2,
            Family::Bernoulli => {
                if x == 1.0 {
                    -1.0 / (theta * theta)
                } else {
                    -1.0 / ((1.0 - theta) * (1.0 - theta))
                }
            }
            Family::Poisson => -x / (theta * theta),
            Family::CurvedNormal { m, c, d } => {
                let (u, du, d2u) = Self::curved_u(x, theta, m, c);
                -m / (theta * theta) - (du * du + u * d2u) / d
            }
        }
    }

    fn fisher_info(&self, theta: f64) -> f64 {
        match *self {
            Family::Gaussian { sigma2 } => 1.0 / sigma2,
            Family::Bernoulli => 1.0 / (theta * (1.0 - theta)),
            Family::Poisson => 1.0 / theta,
            Family::CurvedNormal { m, c, d } => {
                // Normal with mean μ(θ), variance v(θ): μ'²/v + v'²/(2v²).
                let k = 2.0 * m - 1.0;
                c * c * k * k * theta.powf(-2.0 * m) / d + 2.0 * m * m / (theta * theta)
            }
        }
    }

    fn exp_family(&self) -> Option<NaturalForm> {
        match *self {
            Family::Gaussian { sigma2 } => Some(NaturalForm::Gaussian { sigma2 }),
            Family::Bernoulli => Some(NaturalForm::Bernoulli),
            Family::Poisson => Some(NaturalForm::Poisson),
            Family::CurvedNormal { .. } => None,
        }
    }

    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> f64 {
        match *self {
            Family::Gaussian { sigma2 } => {
                let e: f64 = StandardNormal.sample(rng);
                theta + sigma2.sqrt() * e
            }
            Family::Bernoulli => {
                if rng.random::<f64>() < theta {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Poisson => {
                if theta <= 0.0 {
                    0.0
                } else {
                    Poisson::new(theta).expect("positive rate").sample(rng)
                }
            }
            Family::CurvedNormal { m, c, d } => {
                let e: f64 = StandardNormal.sample(rng);
                (c * theta.powf(1.0 - m) + d.sqrt() * e) / theta.powf(m)
            }
        }
    }

    fn initial_guess(&self, xs: &[f64]) -> f64 {
        let mean = xs.iter().sum::<f64>() / xs.len().max(1) as f64;
        let guess = match *self {
            Family::Gaussian { .. } => mean,
            Family::Bernoulli => mean.clamp(0.05, 0.95),
            Family::Poisson => mean.max(0.05),
            Family::CurvedNormal { m, c, .. } => {
                if mean > 0.0 {
                    (mean / c).powf(1.0 / (1.0 - 2.0 * m))
                } else {
                    1.0
                }
            }
        };
        if self.contains(guess) {
            guess
        } else {
            let (lo, hi) = self.theta_domain();
            interior_point(lo, hi)
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Gaussian { sigma2 } => write!(f, "gaussian:sigma2={sigma2}"),
            Family::Bernoulli => write!(f, "bernoulli"),
            Family::Poisson => write!(f, "poisson"),
            Family::CurvedNormal { m, c, d } => write!(f, "curved_normal:m={m},c={c},d={d}"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    /// Accepts `gaussian:sigma2=<v>`, `bernoulli`, `poisson` and
    /// `curved_normal:m=<v>,c=<v>,d=<v>` (each curved-normal parameter
    /// defaults to 1).
    fn from_str(s: &str) -> Result<Self> {
        let mut p = ParamString::parse(s)?;
        let family = match p.name.as_str() {
            "gaussian" | "normal" => Family::gaussian(p.take("sigma2")?)?,
            "bernoulli" => Family::Bernoulli,
            "poisson" => Family::Poisson,
            "curved_normal" => {
                let m = p.take_or("m", 1.0);
                let c = p.take_or("c", 1.0);
                let d = p.take_or("d", 1.0);
                Family::curved_normal(m, c, d)?
            }
            other => return Err(Error::Parse(format!("unknown family {other:?}"))),
        };
        p.finish()?;
        Ok(family)
    }
}

/// Which end of the parameter space a block value was pushed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Lower,
    Upper,
}

/// Root of a block's score equation `Σ score(x_r, w) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSolution {
    pub value: f64,
    /// Set when the score sum keeps one sign over the whole domain; `value`
    /// is then the corresponding end of the closed domain.
    pub boundary: Option<Boundary>,
}

/// Solves the block score equation, using the exponential-family mean
/// identity when available and safeguarded Newton otherwise.
pub fn block_solve<F: ParametricFamily + ?Sized>(family: &F, xs: &[f64]) -> Result<BlockSolution> {
    if xs.is_empty() {
        return domain("block_solve needs at least one observation");
    }
    match family.exp_family() {
        Some(nat) => {
            let mean_t = xs.iter().map(|&x| nat.t(x)).sum::<f64>() / xs.len() as f64;
            let value = nat.mean_to_psi(mean_t);
            Ok(classify(family, value))
        }
        None => newton_block_solve(family, xs),
    }
}

fn classify<F: ParametricFamily + ?Sized>(family: &F, value: f64) -> BlockSolution {
    let (lo, hi) = family.theta_domain();
    if value <= lo {
        BlockSolution {
            value: lo,
            boundary: Some(Boundary::Lower),
        }
    } else if value >= hi {
        BlockSolution {
            value: hi,
            boundary: Some(Boundary::Upper),
        }
    } else {
        BlockSolution {
            value,
            boundary: None,
        }
    }
}

/// `k`-th probe moving from `from` towards `bound`: geometric expansion for
/// an infinite bound, interval halving for a finite one.
fn probe(from: f64, bound: f64, k: i32) -> f64 {
    if bound.is_finite() {
        bound - (bound - from) * 0.5f64.powi(k)
    } else {
        from + bound.signum() * (from.abs().max(1.0)) * (2.0f64.powi(k) - 1.0)
    }
}

/// Safeguarded Newton on the strictly decreasing map `w ↦ Σ score(x_r, w)`,
/// always keeping a sign-change bracket and falling back to bisection
/// whenever a Newton step leaves it.
pub fn newton_block_solve<F: ParametricFamily + ?Sized>(
    family: &F,
    xs: &[f64],
) -> Result<BlockSolution> {
    if xs.is_empty() {
        return domain("block_solve needs at least one observation");
    }
    let tol = 1e-10 * xs.len() as f64;
    let total = |w: f64| xs.iter().map(|&x| family.score(x, w)).sum::<f64>();
    let slope = |w: f64| xs.iter().map(|&x| family.score_deriv(x, w)).sum::<f64>();
    let (dom_lo, dom_hi) = family.theta_domain();

    let guess = family.initial_guess(xs);
    let f0 = total(guess);
    if f0.abs() <= tol {
        return Ok(BlockSolution {
            value: guess,
            boundary: None,
        });
    }
    // Positive score sum means the root lies above the guess.
    let bound = if f0 > 0.0 { dom_hi } else { dom_lo };
    let mut near = guess;
    let mut far = None;
    for k in 1..=1100 {
        let w = probe(guess, bound, k);
        if !family.contains(w) || w == near {
            break;
        }
        let fw = total(w);
        if fw.is_nan() {
            return Err(Error::Numerical(format!("score sum is NaN at θ = {w}")));
        }
        if fw == 0.0 {
            return Ok(BlockSolution {
                value: w,
                boundary: None,
            });
        }
        if (fw > 0.0) != (f0 > 0.0) {
            far = Some(w);
            break;
        }
        near = w;
    }
    let Some(far) = far else {
        return Ok(BlockSolution {
            value: bound,
            boundary: Some(if f0 > 0.0 { Boundary::Upper } else { Boundary::Lower }),
        });
    };
    // `lo` has positive score sum, `hi` negative.
    let (mut lo, mut hi) = if f0 > 0.0 { (near, far) } else { (far, near) };
    let mut w = 0.5 * (lo + hi);
    for _ in 0..400 {
        let fw = total(w);
        if fw.abs() <= tol {
            break;
        }
        if fw > 0.0 {
            lo = w;
        } else {
            hi = w;
        }
        let dfw = slope(w);
        let newton = w - fw / dfw;
        let next = if dfw < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == w || hi - lo <= 4.0 * f64::EPSILON * w.abs().max(f64::MIN_POSITIVE) {
            w = next;
            break;
        }
        w = next;
    }
    Ok(BlockSolution {
        value: w,
        boundary: None,
    })
}
