//! Data generators for monotone response models and the Monte Carlo
//! studies built on them.

use std::fmt;
use std::str::FromStr;

use rand::{Rng as _, RngCore};
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::estimate::{fit_unconstrained, FitOptions, Method, Sample};
use crate::family::{Family, ParametricFamily};
use crate::limitlaw::QuantileTable;
use crate::lrt::{invert_profile, LrProfile};
use crate::params::ParamString;
use crate::rng;
use crate::stats::{mean, ols_slope, quantile_sorted};

/// Named monotone link functions with analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "psi", rename_all = "snake_case")]
pub enum PsiSpec {
    /// `slope·z + intercept`.
    Linear { slope: f64, intercept: f64 },
    /// `scale·z^exponent`, for `z > 0`.
    Power { scale: f64, exponent: f64 },
    /// `lo + (hi − lo)/(1 + exp(−rate (z − center)))`.
    Logistic { rate: f64, center: f64, lo: f64, hi: f64 },
    /// Flat link, for generating null-effect data only.
    Constant { value: f64 },
}

impl PsiSpec {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            PsiSpec::Linear { slope, intercept } => slope * z + intercept,
            PsiSpec::Power { scale, exponent } => scale * z.powf(exponent),
            PsiSpec::Logistic { rate, center, lo, hi } => lo + (hi - lo) / (1.0 + (-rate * (z - center)).exp()),
            PsiSpec::Constant { value } => value,
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            PsiSpec::Linear { slope, .. } => slope,
            PsiSpec::Power { scale, exponent } => scale * exponent * z.powf(exponent - 1.0),
            PsiSpec::Logistic { rate, center, lo, hi } => {
                let s = 1.0 / (1.0 + (-rate * (z - center)).exp());
                (hi - lo) * rate * s * (1.0 - s)
            }
            PsiSpec::Constant { .. } => 0.0,
        }
    }
}

impl FromStr for PsiSpec {
    type Err = Error;

    /// `linear:slope=1,intercept=0`, `power:scale=1,exponent=2`,
    /// `logistic:rate=1,center=0,lo=0,hi=1`, `constant:value=0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let mut p = ParamString::parse(s)?;
        let spec = match p.name.as_str() {
            "linear" => PsiSpec::Linear {
                slope: p.take_or("slope", 1.0),
                intercept: p.take_or("intercept", 0.0),
            },
            "power" => PsiSpec::Power {
                scale: p.take_or("scale", 1.0),
                exponent: p.take_or("exponent", 1.0),
            },
            "logistic" => PsiSpec::Logistic {
                rate: p.take_or("rate", 1.0),
                center: p.take_or("center", 0.0),
                lo: p.take_or("lo", 0.0),
                hi: p.take_or("hi", 1.0),
            },
            "constant" => PsiSpec::Constant {
                value: p.take("value")?,
            },
            other => return Err(Error::Parse(format!("unknown link '{other}'"))),
        };
        p.finish()?;
        Ok(spec)
    }
}

impl fmt::Display for PsiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiSpec::Linear { slope, intercept } => write!(f, "linear:slope={slope},intercept={intercept}"),
            PsiSpec::Power { scale, exponent } => write!(f, "power:scale={scale},exponent={exponent}"),
            PsiSpec::Logistic { rate, center, lo, hi } => {
                write!(f, "logistic:rate={rate},center={center},lo={lo},hi={hi}")
            }
            PsiSpec::Constant { value } => write!(f, "constant:value={value}"),
        }
    }
}

/// Law of the covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CovariateLaw {
    Uniform { lo: f64, hi: f64 },
    /// `lo + (hi − lo)·B` with `B ~ Beta(alpha, beta)`.
    Beta { alpha: f64, beta: f64, lo: f64, hi: f64 },
}

impl CovariateLaw {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            CovariateLaw::Uniform { lo, hi } | CovariateLaw::Beta { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn density(&self, z: f64) -> f64 {
        let (lo, hi) = self.support();
        if z < lo || z > hi {
            return 0.0;
        }
        match *self {
            CovariateLaw::Uniform { .. } => 1.0 / (hi - lo),
            CovariateLaw::Beta { alpha, beta, .. } => {
                let u = (z - lo) / (hi - lo);
                let ln_b = libm::lgamma(alpha) + libm::lgamma(beta) - libm::lgamma(alpha + beta);
                ((alpha - 1.0) * u.ln() + (beta - 1.0) * (1.0 - u).ln() - ln_b).exp() / (hi - lo)
            }
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        match *self {
            CovariateLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            CovariateLaw::Beta { alpha, beta, lo, hi } => {
                let b: f64 = Beta::new(alpha, beta).expect("validated shape").sample(rng);
                lo + (hi - lo) * b
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support();
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return domain(format!("covariate support [{lo}, {hi}] is empty or unbounded"));
        }
        if let CovariateLaw::Beta { alpha, beta, .. } = *self {
            if !(alpha > 0.0 && beta > 0.0) {
                return domain("beta shapes must be positive");
            }
        }
        Ok(())
    }
}

impl FromStr for CovariateLaw {
    type Err = Error;

    /// `uniform:lo=0,hi=1` or `beta:alpha=2,beta=2,lo=0,hi=1`.
    fn from_str(s: &str) -> Result<Self> {
        let mut p = ParamString::parse(s)?;
        let law = match p.name.as_str() {
            "uniform" => CovariateLaw::Uniform {
                lo: p.take_or("lo", 0.0),
                hi: p.take_or("hi", 1.0),
            },
            "beta" => CovariateLaw::Beta {
                alpha: p.take("alpha")?,
                beta: p.take("beta")?,
                lo: p.take_or("lo", 0.0),
                hi: p.take_or("hi", 1.0),
            },
            other => return Err(Error::Parse(format!("unknown covariate law '{other}'"))),
        };
        p.finish()?;
        law.validate()?;
        Ok(law)
    }
}

impl fmt::Display for CovariateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovariateLaw::Uniform { lo, hi } => write!(f, "uniform:lo={lo},hi={hi}"),
            CovariateLaw::Beta { alpha, beta, lo, hi } => {
                write!(f, "beta:alpha={alpha},beta={beta},lo={lo},hi={hi}")
            }
        }
    }
}

/// A fully specified data-generating model with its local constants at z0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub family: Family,
    pub psi: PsiSpec,
    pub covariate: CovariateLaw,
    pub z0: f64,
}

impl ModelSpec {
    /// Checks the model, requiring a strictly increasing link with
    /// `ψ'(z0) > 0` unless the link is flat (data generation only).
    pub fn new(family: Family, psi: PsiSpec, covariate: CovariateLaw, z0: f64) -> Result<Self> {
        covariate.validate()?;
        let (lo, hi) = covariate.support();
        if !(z0 > lo && z0 < hi) {
            return domain(format!("z0 = {z0} must lie inside the covariate support ({lo}, {hi})"));
        }
        let flat = matches!(psi, PsiSpec::Constant { .. });
        if !flat {
            let increasing = (0..=64).all(|k| psi.derivative(lo + (hi - lo) * k as f64 / 64.0) > 0.0);
            if !increasing || !(psi.derivative(z0) > 0.0) {
                return domain(format!("link {psi} is not strictly increasing on [{lo}, {hi}]"));
            }
        }
        for z in [lo, hi] {
            let v = psi.eval(z);
            if !family.contains(v) {
                return domain(format!("ψ({z}) = {v} is outside the parameter space of {family}"));
            }
        }
        Ok(Self {
            family,
            psi,
            covariate,
            z0,
        })
    }

    /// Curved normal with `m = c = d = 1`, `Z ~ U[1, 2]`, `ψ(z) = z`, `z0 = 1.5`.
    pub fn example_d() -> Self {
        Self::new(
            Family::curved_normal(1.0, 1.0, 1.0).expect("valid"),
            PsiSpec::Linear {
                slope: 1.0,
                intercept: 0.0,
            },
            CovariateLaw::Uniform { lo: 1.0, hi: 2.0 },
            1.5,
        )
        .expect("valid model")
    }

    /// Gaussian regression with variance `sigma2`, `ψ(z) = z`, `Z ~ U[0, 1]`,
    /// `z0 = 0.5`.
    pub fn gaussian_regression(sigma2: f64) -> Result<Self> {
        Self::new(
            Family::gaussian(sigma2)?,
            PsiSpec::Linear {
                slope: 1.0,
                intercept: 0.0,
            },
            CovariateLaw::Uniform { lo: 0.0, hi: 1.0 },
            0.5,
        )
    }

    /// Binary choice with `ψ(z) = z`, `Z ~ U(0.1, 0.9)`, `z0 = 0.5`.
    pub fn binary_choice() -> Self {
        Self::new(
            Family::bernoulli(),
            PsiSpec::Linear {
                slope: 1.0,
                intercept: 0.0,
            },
            CovariateLaw::Uniform { lo: 0.1, hi: 0.9 },
            0.5,
        )
        .expect("valid model")
    }

    pub fn truth(&self) -> f64 {
        self.psi.eval(self.z0)
    }

    pub fn psi_prime(&self) -> f64 {
        self.psi.derivative(self.z0)
    }

    pub fn density(&self) -> f64 {
        self.covariate.density(self.z0)
    }

    pub fn fisher(&self) -> f64 {
        self.family.fisher_info(self.truth())
    }

    /// `a = (I(ψ(z0)) p_Z(z0))^{−1/2}`.
    pub fn a(&self) -> f64 {
        (self.fisher() * self.density()).powf(-0.5)
    }

    /// `b = ψ'(z0)/2`.
    pub fn b(&self) -> f64 {
        0.5 * self.psi_prime()
    }

    /// `(8a²b)^{1/3}`, the scale of the estimator's Chernoff limit.
    pub fn chernoff_scale(&self) -> f64 {
        (8.0 * self.a().powi(2) * self.b()).cbrt()
    }
}

/// `n` draws `(Z_i, X_i)` from the model.
pub fn generate(spec: &ModelSpec, n: usize, rng: &mut dyn RngCore) -> Result<Sample> {
    if n == 0 {
        return domain("cannot generate an empty sample");
    }
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let z = spec.covariate.sample(rng);
            let x = spec.family.sample(spec.psi.eval(z), rng);
            (z, x)
        })
        .collect();
    Sample::from_pairs(pairs)
}

/// Successful replicate values (in replicate order) with failure count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McOutcome<T> {
    pub values: Vec<T>,
    pub failures: usize,
    pub reps: usize,
    /// Largest Fenchel violation over every fit of the study.
    pub max_fenchel_violation: f64,
}

/// Failures must stay strictly below one per thousand replicates.
fn within_budget(failures: usize, reps: usize) -> Result<()> {
    if failures * 1000 >= reps.max(1) && failures > 0 {
        return Err(Error::FailureBudget { failed: failures, total: reps });
    }
    Ok(())
}

/// Runs `reps` replicates in parallel; replicate `i` uses stream
/// `(seed, block, i)`.
fn replicate<T: Send>(
    reps: usize,
    seed: u64,
    block: u32,
    f: impl Fn(&mut rng::Rng) -> Result<(T, f64)> + Sync,
) -> Result<McOutcome<T>> {
    let results: Vec<Result<(T, f64)>> = (0..reps as u32)
        .into_par_iter()
        .map(|i| f(&mut rng::stream2(seed, block, i)))
        .collect();
    let mut values = Vec::with_capacity(reps);
    let mut failures = 0;
    let mut worst = 0.0f64;
    for r in results {
        match r {
            Ok((v, viol)) => {
                values.push(v);
                worst = worst.max(viol);
            }
            Err(_) => failures += 1,
        }
    }
    within_budget(failures, reps)?;
    Ok(McOutcome {
        values,
        failures,
        reps,
        max_fenchel_violation: worst,
    })
}

/// Likelihood ratio statistics over `reps` datasets, testing `θ0` (the true
/// `ψ(z0)` when `None`).
pub fn mc_lrt(spec: &ModelSpec, n: usize, reps: usize, theta0: Option<f64>, seed: u64) -> Result<McOutcome<f64>> {
    let theta0 = theta0.unwrap_or_else(|| spec.truth());
    let opts = FitOptions::default();
    replicate(reps, seed, 0, |rng| {
        let s = generate(spec, n, rng)?;
        let profile = LrProfile::new(&spec.family, &s, spec.z0, &opts)?;
        let r = profile.result(theta0)?;
        let viol = r.fit.fenchel.max_violation.max(r.fit0.fit.fenchel.max_violation);
        Ok((r.two_log_lambda, viol))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub rmse: f64,
    pub bias: f64,
    pub failures: usize,
    /// `n^{1/3}(ψ̂_n(z0) − ψ(z0))/(8a²b)^{1/3}` per successful replicate.
    pub normalized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    /// OLS slope of log RMSE on log n.
    pub slope: f64,
    pub max_fenchel_violation: f64,
}

/// Pointwise estimation error of `ψ̂_n(z0)` across sample sizes.
pub fn mc_estimator(spec: &ModelSpec, n_list: &[usize], reps: usize, seed: u64) -> Result<RateReport> {
    if n_list.len() < 2 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return domain("n_list must hold at least two increasing sizes");
    }
    let truth = spec.truth();
    let scale = spec.chernoff_scale();
    let opts = FitOptions::default();
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (k, &n) in n_list.iter().enumerate() {
        let out = replicate(reps, seed, k as u32, |rng| {
            let s = generate(spec, n, rng)?;
            let fit = fit_unconstrained(&spec.family, &s, &opts)?;
            Ok((fit.psi_hat.eval(spec.z0) - truth, fit.fenchel.max_violation))
        })?;
        worst = worst.max(out.max_fenchel_violation);
        let errs = &out.values;
        let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
        let cube = (n as f64).cbrt();
        rows.push(RateRow {
            n,
            rmse,
            bias: mean(errs),
            failures: out.failures,
            normalized: errs.iter().map(|e| cube * e / scale).collect(),
        });
    }
    let lx: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.rmse.ln()).collect();
    Ok(RateReport {
        slope: ols_slope(&lx, &ly),
        rows,
        max_fenchel_violation: worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationHistogram {
    /// `counts[k]` = runs that converged in exactly `k` iterations.
    pub counts: Vec<usize>,
    /// Runs that did not converge within `max_iter`.
    pub overflow: usize,
    pub max_fenchel_violation: f64,
}

impl IterationHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.overflow
    }

    /// Fraction of runs needing more than `k` iterations (overflow included).
    pub fn fraction_above(&self, k: usize) -> f64 {
        let above: usize = self.counts.iter().skip(k + 1).sum::<usize>() + self.overflow;
        above as f64 / self.total() as f64
    }

    pub fn median(&self) -> f64 {
        let mut all = Vec::with_capacity(self.total());
        for (k, &c) in self.counts.iter().enumerate() {
            all.extend(std::iter::repeat_n(k as f64, c));
        }
        all.extend(std::iter::repeat_n(f64::INFINITY, self.overflow));
        quantile_sorted(&all, 0.5)
    }
}

/// ICM iteration counts of unconstrained fits over `reps` datasets.
pub fn iteration_histogram(
    spec: &ModelSpec,
    n: usize,
    reps: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<IterationHistogram> {
    let opts = FitOptions {
        method: Method::Icm,
        ..opts.clone()
    };
    let runs: Vec<Result<(usize, f64)>> = (0..reps as u32)
        .into_par_iter()
        .map(|i| {
            let s = generate(spec, n, &mut rng::stream2(seed, 0, i))?;
            match fit_unconstrained(&spec.family, &s, &opts) {
                Ok(fit) => Ok((fit.iterations, fit.fenchel.max_violation)),
                Err(Error::NonConvergence { .. }) => Ok((0, 0.0)),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut counts = vec![0usize; opts.max_iter + 1];
    let mut overflow = 0;
    let mut worst = 0.0f64;
    for r in runs {
        let (k, v) = r?;
        if k == 0 {
            overflow += 1;
        } else {
            counts[k] += 1;
            worst = worst.max(v);
        }
    }
    while counts.len() > 1 && counts.last() == Some(&0) {
        counts.pop();
    }
    Ok(IterationHistogram {
        counts,
        overflow,
        max_fenchel_violation: worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub covered: usize,
    pub total: usize,
    pub proportion: f64,
    pub failures: usize,
    pub mean_length: f64,
}

/// Fraction of likelihood ratio intervals containing the true `ψ(z0)`.
pub fn coverage(
    spec: &ModelSpec,
    n: usize,
    reps: usize,
    level: f64,
    table: &QuantileTable,
    seed: u64,
) -> Result<CoverageReport> {
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("level {level} must lie in (0, 1)"));
    }
    let q = table.quantile(level);
    let truth = spec.truth();
    let opts = FitOptions::default();
    let out = replicate(reps, seed, 0, |rng| {
        let s = generate(spec, n, rng)?;
        let profile = LrProfile::new(&spec.family, &s, spec.z0, &opts)?;
        let ci = invert_profile(&profile, level, q)?;
        Ok(((ci.contains(truth), ci.upper - ci.lower), 0.0))
    })?;
    let covered = out.values.iter().filter(|v| v.0).count();
    let total = out.values.len();
    Ok(CoverageReport {
        covered,
        total,
        proportion: covered as f64 / total as f64,
        failures: out.failures,
        mean_length: out.values.iter().map(|v| v.1).sum::<f64>() / total as f64,
    })
}

/// Pairs of sorted Monte Carlo values with table quantiles at the plotting
/// positions `(i + 1/2)/m`.
pub fn qq_pairs(values: &[f64], table: &QuantileTable) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (x, table.quantile((i as f64 + 0.5) / m)))
        .collect()
}
