//! The likelihood ratio statistic for `H0: ψ(z0) = θ0` and confidence
//! intervals obtained by inverting it.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::estimate::{
    fit_groups, fit_unconstrained, ConstrainedFit, FitOptions, FitResult, GroupFit, Sample, SplitFits,
};
use crate::family::ParametricFamily;
use crate::limitlaw::QuantileTable;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LrtResult {
    /// `2 log λ_n`.
    pub two_log_lambda: f64,
    pub fit: FitResult,
    pub fit0: ConstrainedFit,
    /// Covariate range `[left, right]` of the observations where the two
    /// fits differ; `None` when they coincide.
    pub diff_interval: Option<(f64, f64)>,
}

/// Everything needed to evaluate `θ0 ↦ 2 log λ_n(θ0)` at `O(n)` per point:
/// the unconstrained fit and the two half-sample fits, which the
/// constrained MLE merely clamps.
pub struct LrProfile<'a, F: ParametricFamily + ?Sized> {
    family: &'a F,
    sample: &'a Sample,
    z0: f64,
    opts: FitOptions,
    full: GroupFit,
    split: SplitFits,
}

impl<'a, F: ParametricFamily + ?Sized> LrProfile<'a, F> {
    pub fn new(family: &'a F, sample: &'a Sample, z0: f64, opts: &FitOptions) -> Result<Self> {
        let split = SplitFits::new(family, sample, z0, opts)?;
        let full = fit_groups(family, sample, opts)?;
        Ok(Self {
            family,
            sample,
            z0,
            opts: opts.clone(),
            full,
            split,
        })
    }

    /// `ψ̂_n(z0)` of the unconstrained fit.
    pub fn center(&self) -> f64 {
        self.full.values[self.split.split_groups - 1]
    }

    pub fn domain(&self) -> (f64, f64) {
        self.family.theta_domain()
    }

    /// Whether the unconstrained fit already satisfies `H0`.
    fn feasible(&self, theta0: f64) -> bool {
        let s = self.split.split_groups;
        self.full.values[s - 1] <= theta0 && self.full.values.get(s).is_none_or(|&v| theta0 <= v)
    }

    /// `2 Σ [l(x_i, û_i) − l(x_i, û⁰_i)]`, summed termwise so observations
    /// outside the difference set contribute exact zeros.
    pub fn statistic(&self, theta0: f64) -> f64 {
        if self.feasible(theta0) {
            return 0.0;
        }
        let c = self.split.clamped(theta0);
        let mut total = 0.0;
        for (g, (&u, &u0)) in self.full.values.iter().zip(&c.values).enumerate() {
            if u != u0 {
                for &x in self.sample.group_x(g) {
                    total += self.family.loglik(x, u) - self.family.loglik(x, u0);
                }
            }
        }
        2.0 * total
    }

    /// Full result at `theta0`, including both fits.
    pub fn result(&self, theta0: f64) -> Result<LrtResult> {
        if !self.family.in_closure(theta0) {
            return domain(format!("θ0 = {theta0} outside the parameter space"));
        }
        let fit = fit_unconstrained(self.family, self.sample, &self.opts)?;
        let fit0 = if self.feasible(theta0) {
            // The constraint is inactive: the constrained MLE is the
            // unconstrained one.
            let mut f = self.split.constrained_fit(self.family, self.sample, self.z0, theta0, self.opts.tol)?;
            f.fit.values.clone_from(&fit.values);
            f.fit.blocks.clone_from(&fit.blocks);
            f.fit.block_values.clone_from(&fit.block_values);
            f.fit.boundary_flags.clone_from(&fit.boundary_flags);
            f.fit.objective = fit.objective;
            f
        } else {
            self.split.constrained_fit(self.family, self.sample, self.z0, theta0, self.opts.tol)?
        };
        let z = self.sample.z();
        let differs: Vec<usize> = (0..z.len()).filter(|&i| fit.values[i] != fit0.fit.values[i]).collect();
        let diff_interval = differs.first().map(|&a| (z[a], z[*differs.last().unwrap()]));
        Ok(LrtResult {
            two_log_lambda: self.statistic(theta0),
            fit,
            fit0,
            diff_interval,
        })
    }
}

/// `2 log λ_n` for `H0: ψ(z0) = θ0` with default fitting options.
pub fn lr_statistic<F: ParametricFamily + ?Sized>(
    family: &F,
    sample: &Sample,
    z0: f64,
    theta0: f64,
) -> Result<LrtResult> {
    lr_statistic_with(family, sample, z0, theta0, &FitOptions::default())
}

pub fn lr_statistic_with<F: ParametricFamily + ?Sized>(
    family: &F,
    sample: &Sample,
    z0: f64,
    theta0: f64,
    opts: &FitOptions,
) -> Result<LrtResult> {
    if !family.contains(theta0) {
        return domain(format!("θ0 = {theta0} outside the parameter space"));
    }
    LrProfile::new(family, sample, z0, opts)?.result(theta0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub center: f64,
    pub level: f64,
    pub quantile_used: f64,
    pub evaluations: usize,
    /// The acceptance region reaches the end of the parameter space.
    pub lower_open: bool,
    pub upper_open: bool,
    /// The guard scan found the acceptance region not to be an interval
    /// around the center; the bounds are then the scan's hull.
    pub profile_violation: bool,
}

impl ConfidenceInterval {
    pub fn contains(&self, theta: f64) -> bool {
        self.lower <= theta && theta <= self.upper
    }
}

const THETA_TOL: f64 = 1e-6;
const GUARD_POINTS: usize = 64;

struct Counter<'p, 'a, F: ParametricFamily + ?Sized> {
    profile: &'p LrProfile<'a, F>,
    evaluations: usize,
}

impl<F: ParametricFamily + ?Sized> Counter<'_, '_, F> {
    fn stat(&mut self, theta: f64) -> f64 {
        self.evaluations += 1;
        self.profile.statistic(theta)
    }

    /// Last accepted point moving from the center towards `bound`, and
    /// whether the region ran into the bound.
    fn edge(&mut self, center: f64, bound: f64, q: f64) -> (f64, bool) {
        let scale = center.abs().max(1.0);
        let mut inside = center;
        let mut outside = None;
        for k in 0..200 {
            let theta = if bound.is_finite() {
                bound - (bound - center) * 0.5f64.powi(k + 1)
            } else {
                center + bound.signum() * scale * 0.01 * 2f64.powi(k)
            };
            if theta == inside || !theta.is_finite() {
                break;
            }
            if self.stat(theta) > q {
                outside = Some(theta);
                break;
            }
            inside = theta;
        }
        let Some(mut outside) = outside else {
            let end = if bound.is_finite() { bound } else { inside };
            return (end, true);
        };
        while (outside - inside).abs() > THETA_TOL {
            let mid = 0.5 * (inside + outside);
            if self.stat(mid) > q {
                outside = mid;
            } else {
                inside = mid;
            }
        }
        (inside, false)
    }
}

/// `{θ : 2 log λ_n(θ) ≤ q}` with `q` the `level` quantile of the table.
pub fn ci_invert<F: ParametricFamily + ?Sized>(
    family: &F,
    sample: &Sample,
    z0: f64,
    level: f64,
    table: &QuantileTable,
) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("level {level} must lie in (0, 1)"));
    }
    let profile = LrProfile::new(family, sample, z0, &FitOptions::default())?;
    invert_profile(&profile, level, table.quantile(level))
}

/// Inversion of a precomputed profile at critical value `q`.
pub fn invert_profile<F: ParametricFamily + ?Sized>(
    profile: &LrProfile<'_, F>,
    level: f64,
    q: f64,
) -> Result<ConfidenceInterval> {
    if !(q >= 0.0) {
        return domain(format!("critical value {q} must be nonnegative"));
    }
    let center = profile.center();
    let (lo, hi) = profile.domain();
    let mut counter = Counter { profile, evaluations: 0 };
    let (mut lower, mut lower_open) = if center <= lo { (lo, true) } else { counter.edge(center, lo, q) };
    let (mut upper, mut upper_open) = if center >= hi { (hi, true) } else { counter.edge(center, hi, q) };

    // Guard scan over the interval widened by half its length on each side.
    let width = (upper - lower).max(THETA_TOL);
    let scan_lo = if lower_open { lower } else { (lower - 0.5 * width).max(lo) };
    let scan_hi = if upper_open { upper } else { (upper + 0.5 * width).min(hi) };
    let mut violation = false;
    let (mut hull_lo, mut hull_hi) = (lower, upper);
    for i in 0..GUARD_POINTS {
        let theta = scan_lo + (scan_hi - scan_lo) * i as f64 / (GUARD_POINTS - 1) as f64;
        if !profile.family.contains(theta) {
            continue;
        }
        let accepted = counter.stat(theta) <= q;
        let inside = theta >= lower && theta <= upper;
        if accepted != inside && (theta - lower).abs() > THETA_TOL && (theta - upper).abs() > THETA_TOL {
            violation = true;
        }
        if accepted {
            hull_lo = hull_lo.min(theta);
            hull_hi = hull_hi.max(theta);
        }
    }
    if violation {
        if hull_lo < lower {
            lower = hull_lo;
            lower_open |= hull_lo <= lo;
        }
        if hull_hi > upper {
            upper = hull_hi;
            upper_open |= hull_hi >= hi;
        }
    }
    Ok(ConfidenceInterval {
        lower,
        upper,
        center,
        level,
        quantile_used: q,
        evaluations: counter.evaluations,
        lower_open,
        upper_open,
        profile_violation: violation,
    })
}
