//! Unconstrained and pointwise-constrained monotone MLEs.
//!
//! Observations with tied covariates are pooled into one position of the
//! cumulative sum diagram, so every fitted vector is indexed by *group*
//! (distinct covariate value) internally and expanded to observations in
//! the public results.

use std::ops::Range;

use serde::Serialize;

use crate::error::{domain, Result};
use crate::family::{block_solve, newton_block_solve, ParametricFamily};
use crate::gcm::{slogcm, CsumDiagram};
use crate::icm::{self, Clamp};

/// Covariate-sorted pairs `(z_i, x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    z: Vec<f64>,
    x: Vec<f64>,
    /// Start offsets of the runs of equal `z`, terminated by `len()`.
    group_starts: Vec<usize>,
    reordered: bool,
}

impl Sample {
    /// Sorts the pairs by covariate (stable on ties).
    pub fn new(z: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        if z.len() != x.len() {
            return domain(format!("{} covariates but {} responses", z.len(), x.len()));
        }
        Self::from_pairs(z.into_iter().zip(x))
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
        if pairs.is_empty() {
            return domain("a sample needs at least one observation");
        }
        if let Some((z, x)) = pairs.iter().find(|(z, x)| !z.is_finite() || !x.is_finite()) {
            return domain(format!("non-finite observation ({z}, {x})"));
        }
        let reordered = pairs.windows(2).any(|w| w[1].0 < w[0].0);
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (z, x): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let mut group_starts = vec![0];
        group_starts.extend((1..z.len()).filter(|&i| z[i] != z[i - 1]));
        group_starts.push(z.len());
        Ok(Self {
            z,
            x,
            group_starts,
            reordered,
        })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Whether the input had to be reordered to sort the covariates.
    pub fn was_reordered(&self) -> bool {
        self.reordered
    }

    /// Number of distinct covariate values.
    pub fn n_groups(&self) -> usize {
        self.group_starts.len() - 1
    }

    /// Observation indices sharing the `g`-th distinct covariate value.
    pub fn group(&self, g: usize) -> Range<usize> {
        self.group_starts[g]..self.group_starts[g + 1]
    }

    pub fn group_z(&self, g: usize) -> f64 {
        self.z[self.group_starts[g]]
    }

    pub fn group_x(&self, g: usize) -> &[f64] {
        &self.x[self.group(g)]
    }

    pub(crate) fn groups(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.group_starts.windows(2).map(|w| w[0]..w[1])
    }

    /// `#{i : z_i ≤ z0}`.
    pub fn count_at_or_below(&self, z0: f64) -> usize {
        self.z.partition_point(|&z| z <= z0)
    }

    fn groups_at_or_below(&self, z0: f64) -> usize {
        self.group_starts[..self.n_groups()].partition_point(|&s| self.z[s] <= z0)
    }

    /// The observations in `range`, which must not split a tie group.
    pub fn subsample(&self, range: Range<usize>) -> Result<Sample> {
        let aligned = |i: usize| self.group_starts.binary_search(&i).is_ok();
        if range.start >= range.end || range.end > self.len() || !aligned(range.start) || !aligned(range.end) {
            return domain(format!("range {range:?} does not align with covariate groups"));
        }
        Self::from_pairs(
            self.z[range.clone()]
                .iter()
                .copied()
                .zip(self.x[range].iter().copied()),
        )
    }

    /// Expands per-group values to per-observation values.
    pub(crate) fn expand(&self, group_values: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for (g, r) in self.groups().enumerate() {
            out.extend(std::iter::repeat_n(group_values[g], r.len()));
        }
        out
    }
}

/// A nondecreasing, right-continuous step function, constant-extended to
/// the left of its first location.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFunction {
    locations: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    /// `values[k]` holds on `[locations[k], locations[k+1])`. Consecutive
    /// equal values are collapsed.
    pub fn new(locations: &[f64], values: &[f64]) -> Result<Self> {
        if locations.is_empty() || locations.len() != values.len() {
            return domain("step function needs matching, nonempty locations and values");
        }
        if locations.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("step locations must increase strictly");
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return domain("step values must be nondecreasing");
        }
        let mut locs = vec![locations[0]];
        let mut vals = vec![values[0]];
        for (&l, &v) in locations.iter().zip(values).skip(1) {
            if v != *vals.last().unwrap() {
                locs.push(l);
                vals.push(v);
            }
        }
        Ok(Self {
            locations: locs,
            values: vals,
        })
    }

    pub fn eval(&self, z: f64) -> f64 {
        let k = self.locations.partition_point(|&l| l <= z);
        self.values[k.saturating_sub(1)]
    }

    /// `(location, value)` pairs where the function changes value, led by
    /// the first location.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.locations.iter().copied().zip(self.values.iter().copied())
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Constant start at the pooled block solution (θ0 for constrained runs).
    Auto,
    Constant(f64),
    /// One value per distinct covariate.
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Explicit GCM characterization for exponential families, ICM otherwise.
    Auto,
    /// Always iterate, even when an explicit solution exists.
    Icm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Fenchel tolerance on raw (unnormalized) score sums.
    pub tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant of the ICM line search.
    pub armijo: f64,
    pub init: Init,
    pub method: Method,
    pub trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 500,
            armijo: 0.01,
            init: Init::Auto,
            method: Method::Auto,
            trace: false,
        }
    }
}

/// Kuhn–Tucker (Fenchel) diagnostics for a fitted vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FenchelReport {
    /// Smallest Lagrange multiplier; must be ≥ −tol.
    pub min_multiplier: f64,
    /// |total score| for unconstrained fits, 0 for constrained ones.
    pub stationarity: f64,
    /// Largest multiplier at an inactive constraint; must be ≤ tol.
    pub slackness: f64,
    pub max_violation: f64,
    pub tol: f64,
    pub passed: bool,
}

impl FenchelReport {
    fn new(min_multiplier: f64, stationarity: f64, slackness: f64, tol: f64) -> Self {
        let max_violation = (-min_multiplier).max(stationarity).max(slackness).max(0.0);
        Self {
            min_multiplier,
            stationarity,
            slackness,
            max_violation,
            tol,
            passed: max_violation <= tol,
        }
    }
}

/// Fenchel conditions from per-group score sums `s` at the fitted `u`.
///
/// Unconstrained: multipliers are the tail sums `−Σ_{j>i} s_j`, which must
/// be nonnegative, vanish where `u` jumps, and the total must vanish.
/// Constrained at `(split, θ0)`: head sums on the left part and tail sums on
/// the right part play the same role, the sums adjacent to θ0 being the
/// multipliers of `u_split−1 ≤ θ0 ≤ u_split`.
pub(crate) fn fenchel_from_scores(s: &[f64], u: &[f64], clamp: Option<Clamp>, tol: f64) -> FenchelReport {
    let k = s.len();
    let mut min_mult = 0.0f64;
    let mut slack = 0.0f64;
    match clamp {
        None => {
            let mut tail = 0.0;
            for i in (0..k.saturating_sub(1)).rev() {
                tail += s[i + 1];
                let lambda = -tail;
                min_mult = min_mult.min(lambda);
                if u[i] < u[i + 1] {
                    slack = slack.max(lambda.abs());
                }
            }
            let total = tail + s.first().copied().unwrap_or(0.0);
            FenchelReport::new(min_mult, total.abs(), slack, tol)
        }
        Some(Clamp { split, theta0 }) => {
            let mut head = 0.0;
            for i in 0..split {
                head += s[i];
                min_mult = min_mult.min(head);
                let next = if i + 1 < split { u[i + 1] } else { theta0 };
                if u[i] < next {
                    slack = slack.max(head.abs());
                }
            }
            let mut tail = 0.0;
            for i in (split..k).rev() {
                tail += s[i];
                let lambda = -tail;
                min_mult = min_mult.min(lambda);
                let prev = if i > split { u[i - 1] } else { theta0 };
                if prev < u[i] {
                    slack = slack.max(lambda.abs());
                }
            }
            FenchelReport::new(min_mult, 0.0, slack, tol)
        }
    }
}

/// Per-group score sums; groups pinned at a boundary contribute nothing
/// (their gradient is absorbed by the boundary multiplier).
pub(crate) fn group_scores<F: ParametricFamily + ?Sized>(
    family: &F,
    sample: &Sample,
    u: &[f64],
    boundary: &[bool],
) -> Vec<f64> {
    sample
        .groups()
        .enumerate()
        .map(|(g, r)| {
            if boundary.get(g).copied().unwrap_or(false) {
                0.0
            } else {
                sample.x[r].iter().map(|&x| family.score(x, u[g])).sum()
            }
        })
        .collect()
}

/// An unconstrained monotone MLE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub psi_hat: StepFunction,
    /// Fitted value per observation, in sample order.
    pub values: Vec<f64>,
    /// Observation index ranges of the maximal constant blocks.
    pub blocks: Vec<Range<usize>>,
    pub block_values: Vec<f64>,
    pub boundary_flags: Vec<bool>,
    pub fenchel: FenchelReport,
    /// Negative log-likelihood kernel `Σ φ(x_i, û_i)`.
    pub objective: f64,
    pub iterations: usize,
}

impl FitResult {
    pub fn fenchel_max_violation(&self) -> f64 {
        self.fenchel.max_violation
    }

    /// Fitted value at each distinct covariate.
    pub fn group_values(&self, sample: &Sample) -> Vec<f64> {
        sample.groups().map(|r| self.values[r.start]).collect()
    }

    fn group_boundary(&self, sample: &Sample) -> Vec<bool> {
        let mut flags = vec![false; sample.n_groups()];
        let mut g = 0;
        for (b, r) in self.blocks.iter().enumerate() {
            while g < flags.len() && sample.group_starts[g] < r.end {
                flags[g] = self.boundary_flags[b];
                g += 1;
            }
        }
        flags
    }
}

/// A fit under `H0: ψ(z0) = θ0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstrainedFit {
    /// The constrained estimate; `fit.psi_hat` carries the jump to θ0 at z0.
    pub fit: FitResult,
    /// `m = #{i : z_i ≤ z0}`.
    pub split_index: usize,
    pub z0: f64,
    pub theta0: f64,
}

/// Group-level solution of one monotone problem.
#[derive(Debug, Clone)]
pub(crate) struct GroupFit {
    pub values: Vec<f64>,
    pub boundary: Vec<bool>,
    pub iterations: usize,
}

fn check_support<F: ParametricFamily + ?Sized>(family: &F, sample: &Sample) -> Result<()> {
    match sample.x.iter().position(|&x| !family.in_support(x)) {
        Some(i) => domain(format!("observation {} = {} outside the family support", i + 1, sample.x[i])),
        None => Ok(()),
    }
}

/// Blocks of the explicit exponential-family solution: GCM segments of the
/// diagram `{(#{z ≤ Z_(i)}, Σ_{z ≤ Z_(i)} T(x))}`, each valued by its own
/// score equation so the value depends only on the block's observations.
fn exp_family_groups<F: ParametricFamily + ?Sized>(family: &F, sample: &Sample) -> Result<GroupFit> {
    let nat = family.exp_family().expect("exponential family");
    let dx: Vec<f64> = sample.groups().map(|r| r.len() as f64).collect();
    let dy: Vec<f64> = sample
        .groups()
        .map(|r| sample.x[r].iter().map(|&x| nat.t(x)).sum())
        .collect();
    let slopes = slogcm(&CsumDiagram::from_increments(&dx, &dy)?);
    let mut values = vec![0.0; sample.n_groups()];
    let mut boundary = vec![false; sample.n_groups()];
    for seg in slopes.segments() {
        let obs = sample.group_starts[seg.start]..sample.group_starts[seg.end];
        let sol = block_solve(family, &sample.x[obs])?;
        values[seg.clone()].fill(sol.value);
        boundary[seg].fill(sol.boundary.is_some());
    }
    Ok(GroupFit {
        values,
        boundary,
        iterations: 1,
    })
}

/// Replaces each constant run of an ICM solution by the exact root of its
/// block score equation, provided the result is still a valid fit.
fn polish<F: ParametricFamily + ?Sized>(
    family: &F,
    sample: &Sample,
    u: &[f64],
    clamp: Option<Clamp>,
    tol: f64,
) -> Result<Option<Vec<f64>>> {
    let mut out = u.to_vec();
    let mut g = 0;
    while g < u.len() {
        let mut e = g + 1;
        while e < u.len() && u[e] == u[g] {
            e += 1;
        }
        let pinned = clamp.is_some_and(|c| u[g] == c.theta0);
        if !pinned {
            let obs = sample.group_starts[g]..sample.group_starts[e];
            let sol = newton_block_solve(family, &sample.x[obs])?;
            if sol.boundary.is_some() {
                return Ok(None);
            }
            out[g..e].fill(sol.value);
        }
        g = e;
    }
    let monotone = out.windows(2).all(|w| w[0] <= w[1]);
    let feasible = clamp.is_none_or(|c| {
        out[..c.split].iter().all(|&v| v <= c.theta0) && out[c.split..].iter().all(|&v| v >= c.theta0)
    });
    if !monotone || !feasible {
        return Ok(None);
    }
    let s = group_scores(family, sample, &out, &[]);
    let report = fenchel_from_scores(&s, &out, clamp, tol);
    Ok(report.passed.then_some(out))
}

pub(crate) fn fit_groups<F: ParametricFamily + ?Sized>(
    family: &F,
    sample: &Sample,
    opts: &FitOptions,
) -> Result<GroupFit> {
    check_support(family, sample)?;
    if family.exp_family().is_some() && opts.method == Method::Auto {
        return exp_family_groups(family, sample);
    }
    let sol = icm::solve(family, sample, &opts.init, opts, None)?;
    let values = polish(family, sample, &sol.u, None, opts.tol)?.unwrap_or(sol.u);
    Ok(GroupFit {
        boundary: vec![false; values.len()],
        values,
        iterations: sol.iterations,
    })
}

/// Groups into maximal runs of equal value and boundary status.
fn assemble<F: ParametricFamily + ?Sized>(
    family: &F,
    sample: &Sample,
    gf: &GroupFit,
    clamp: Option<Clamp>,
    tol: f64,
    psi_hat: StepFunction,
) -> FitResult {
    let values = sample.expand(&gf.values);
    let mut blocks = Vec::new();
    let mut block_values = Vec::new();
    let mut boundary_flags = Vec::new();
    let mut g = 0;
    let k = sample.n_groups();
    while g < k {
        let mut e = g + 1;
        while e < k && gf.values[e] == gf.values[g] && gf.boundary[e] == gf.boundary[g] {
            e += 1;
        }
        blocks.push(sample.group_starts[g]..sample.group_starts[e]);
        block_values.push(gf.values[g]);
        boundary_flags.push(gf.boundary[g]);
        g = e;
    }
    let s = group_scores(family, sample, &gf.values, &gf.boundary);
    let fenchel = fenchel_from_scores(&s, &gf.values, clamp, tol);
    let objective = -sample
        .x
        .iter()
        .zip(&values)
        .map(|(&x, &v)| family.loglik(x, v))
        .sum::<f64>();
    FitResult {
        psi_hat,
        values,
        blocks,
        block_values,
        boundary_flags,
        fenchel,
        objective,
        iterations: gf.iterations,
    }
}

fn group_step_function(sample: &Sample, values: &[f64]) -> Result<StepFunction> {
    let locs: Vec<f64> = (0..sample.n_groups()).map(|g| sample.group_z(g)).collect();
    StepFunction::new(&locs, values)
}

/// The unconstrained MLE of the monotone link.
pub fn fit_unconstrained<F: ParametricFamily + ?Sized>(
    family: &F,
    sample: &Sample,
    opts: &FitOptions,
) -> Result<FitResult> {
    let gf = fit_groups(family, sample, opts)?;
    let psi_hat = group_step_function(sample, &gf.values)?;
    Ok(assemble(family, sample, &gf, None, opts.tol, psi_hat))
}

/// Unconstrained fits of the two halves `{z ≤ z0}` and `{z > z0}`; the
/// constrained MLE for any θ0 is obtained from these by clamping.
#[derive(Debug, Clone)]
pub(crate) struct SplitFits {
    pub split_obs: usize,
    pub split_groups: usize,
    pub left: GroupFit,
    pub right: GroupFit,
}

impl SplitFits {
    pub fn new<F: ParametricFamily + ?Sized>(
        family: &F,
        sample: &Sample,
        z0: f64,
        opts: &FitOptions,
    ) -> Result<Self> {
        let (zmin, zmax) = (sample.z[0], sample.z[sample.len() - 1]);
        if !(z0 > zmin && z0 < zmax) {
            return domain(format!("z0 = {z0} must lie strictly inside the covariate range [{zmin}, {zmax}]"));
        }
        let split_obs = sample.count_at_or_below(z0);
        let split_groups = sample.groups_at_or_below(z0);
        let left = fit_groups(family, &sample.subsample(0..split_obs)?, opts)?;
        let right = fit_groups(family, &sample.subsample(split_obs..sample.len())?, opts)?;
        Ok(Self {
            split_obs,
            split_groups,
            left,
            right,
        })
    }

    /// Group values of the constrained MLE at θ0 and their boundary flags.
    pub fn clamped(&self, theta0: f64) -> GroupFit {
        let mut values = Vec::with_capacity(self.left.values.len() + self.right.values.len());
        let mut boundary = Vec::with_capacity(values.capacity());
        for (&v, &b) in self.left.values.iter().zip(&self.left.boundary) {
            values.push(v.min(theta0));
            boundary.push(b && v <= theta0);
        }
        for (&v, &b) in self.right.values.iter().zip(&self.right.boundary) {
            values.push(v.max(theta0));
            boundary.push(b && v >= theta0);
        }
        GroupFit {
            values,
            boundary,
            iterations: self.left.iterations + self.right.iterations,
        }
    }

    pub fn constrained_fit<F: ParametricFamily + ?Sized>(
        &self,
        family: &F,
        sample: &Sample,
        z0: f64,
        theta0: f64,
        tol: f64,
    ) -> Result<ConstrainedFit> {
        let gf = self.clamped(theta0);
        let s = self.split_groups;
        let mut locs: Vec<f64> = (0..s).map(|g| sample.group_z(g)).collect();
        let mut vals = gf.values[..s].to_vec();
        if z0 > sample.group_z(s - 1) {
            locs.push(z0);
            vals.push(theta0);
        }
        locs.extend((s..sample.n_groups()).map(|g| sample.group_z(g)));
        vals.extend_from_slice(&gf.values[s..]);
        let psi_hat = StepFunction::new(&locs, &vals)?;
        let clamp = Clamp { split: s, theta0 };
        Ok(ConstrainedFit {
            fit: assemble(family, sample, &gf, Some(clamp), tol, psi_hat),
            split_index: self.split_obs,
            z0,
            theta0,
        })
    }
}

/// The MLE under `H0: ψ(z0) = θ0`: unconstrained fits of each half, capped
/// at θ0 on the left and floored at θ0 on the right.
pub fn fit_constrained<F: ParametricFamily + ?Sized>(
    family: &F,
    sample: &Sample,
    z0: f64,
    theta0: f64,
    opts: &FitOptions,
) -> Result<ConstrainedFit> {
    if !family.contains(theta0) {
        return domain(format!("θ0 = {theta0} outside the parameter space"));
    }
    let split = SplitFits::new(family, sample, z0, opts)?;
    split.constrained_fit(family, sample, z0, theta0, opts.tol)
}

/// Recomputes the Fenchel diagnostics of an unconstrained fit.
pub fn check_fenchel<F: ParametricFamily + ?Sized>(
    family: &F,
    sample: &Sample,
    fit: &FitResult,
    tol: f64,
) -> FenchelReport {
    let u = fit.group_values(sample);
    let s = group_scores(family, sample, &u, &fit.group_boundary(sample));
    fenchel_from_scores(&s, &u, None, tol)
}

/// Fenchel diagnostics of a constrained fit, checked on each half with the
/// θ0 constraint accounted for.
pub fn check_fenchel_constrained<F: ParametricFamily + ?Sized>(
    family: &F,
    sample: &Sample,
    fit: &ConstrainedFit,
    tol: f64,
) -> FenchelReport {
    let u = fit.fit.group_values(sample);
    let s = group_scores(family, sample, &u, &fit.fit.group_boundary(sample));
    let split = sample.groups_at_or_below(fit.z0);
    fenchel_from_scores(
        &s,
        &u,
        Some(Clamp {
            split,
            theta0: fit.theta0,
        }),
        tol,
    )
}

/// `Σ_i l(x_i, f(z_i))`.
pub fn loglik_total<F: ParametricFamily + ?Sized>(family: &F, sample: &Sample, f: &StepFunction) -> Result<f64> {
    sample
        .z
        .iter()
        .zip(&sample.x)
        .map(|(&z, &x)| family.try_loglik(x, f.eval(z)))
        .try_fold(0.0, |acc, l| l.map(|l| acc + l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::family::Family;
    use approx::assert_abs_diff_eq;

    fn sample(z: &[f64], x: &[f64]) -> Sample {
        Sample::new(z.to_vec(), x.to_vec()).unwrap()
    }

    #[test]
    fn sample_sorts_and_groups() {
        let s = sample(&[0.3, 0.1, 0.2, 0.1], &[3.0, 1.0, 2.0, 4.0]);
        assert_eq!(s.z(), &[0.1, 0.1, 0.2, 0.3]);
        // stable on ties
        assert_eq!(s.x(), &[1.0, 4.0, 2.0, 3.0]);
        assert!(s.was_reordered());
        assert_eq!(s.n_groups(), 3);
        assert_eq!(s.group(0), 0..2);
        assert_eq!(s.count_at_or_below(0.2), 3);
        assert_eq!(s.count_at_or_below(0.15), 2);
        assert!(s.subsample(0..1).is_err());
        assert_eq!(s.subsample(0..2).unwrap().len(), 2);
        assert!(Sample::new(vec![], vec![]).is_err());
        assert!(Sample::new(vec![0.0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn step_function_is_right_continuous() {
        let f = StepFunction::new(&[1.0, 2.0, 3.0], &[0.5, 0.5, 2.0]).unwrap();
        assert_eq!(f.eval(0.0), 0.5);
        assert_eq!(f.eval(2.5), 0.5);
        assert_eq!(f.eval(3.0), 2.0);
        assert_eq!(f.eval(2.999), 0.5);
        assert_eq!(f.eval(10.0), 2.0);
        assert_eq!(f.jumps().collect::<Vec<_>>(), vec![(1.0, 0.5), (3.0, 2.0)]);
        assert!(StepFunction::new(&[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(StepFunction::new(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn gaussian_monotone_data_is_interpolated() {
        let g = Family::gaussian(1.0).unwrap();
        let s = sample(&[0.1, 0.2, 0.3], &[1.0, 2.0, 3.0]);
        let fit = fit_unconstrained(&g, &s, &FitOptions::default()).unwrap();
        assert_eq!(fit.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(fit.blocks, vec![0..1, 1..2, 2..3]);
        assert_eq!(fit.iterations, 1);
        assert!(fit.fenchel.passed);
    }

    #[test]
    fn bernoulli_violators_pool() {
        let b = Family::bernoulli();
        let s = sample(&[0.1, 0.2], &[1.0, 0.0]);
        let fit = fit_unconstrained(&b, &s, &FitOptions::default()).unwrap();
        assert_eq!(fit.values, vec![0.5, 0.5]);
        assert_eq!(fit.blocks, vec![0..2]);
    }

    #[test]
    fn bernoulli_boundary_blocks_are_flagged() {
        let b = Family::bernoulli();
        let s = sample(&[0.1, 0.2, 0.3, 0.4], &[0.0, 0.0, 1.0, 1.0]);
        let fit = fit_unconstrained(&b, &s, &FitOptions::default()).unwrap();
        assert_eq!(fit.block_values, vec![0.0, 1.0]);
        assert_eq!(fit.boundary_flags, vec![true, true]);
        assert!(fit.fenchel.passed);
        assert_eq!(fit.objective, 0.0);
    }

    #[test]
    fn tied_covariates_share_a_value() {
        let g = Family::gaussian(1.0).unwrap();
        let s = sample(&[0.1, 0.2, 0.2, 0.3], &[0.0, 3.0, 1.0, 2.5]);
        let fit = fit_unconstrained(&g, &s, &FitOptions::default()).unwrap();
        assert_eq!(fit.values, vec![0.0, 2.0, 2.0, 2.5]);
        let icm = fit_unconstrained(
            &g,
            &s,
            &FitOptions {
                method: Method::Icm,
                ..Default::default()
            },
        )
        .unwrap();
        for (a, b) in fit.values.iter().zip(&icm.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn constrained_examples() {
        let g = Family::gaussian(1.0).unwrap();
        let s = sample(&[0.1, 0.9], &[0.0, 2.0]);
        let opts = FitOptions::default();
        let c = fit_constrained(&g, &s, 0.5, 1.0, &opts).unwrap();
        assert_eq!(c.fit.values, vec![0.0, 2.0]);
        assert_eq!(c.split_index, 1);
        assert_eq!(c.fit.psi_hat.eval(0.5), 1.0);
        assert_eq!(c.fit.psi_hat.eval(0.4), 0.0);
        let c = fit_constrained(&g, &s, 0.5, 3.0, &opts).unwrap();
        assert_eq!(c.fit.values, vec![0.0, 3.0]);
        assert!(c.fit.fenchel.passed);

        let b = Family::bernoulli();
        let s = sample(&[0.1, 0.2, 0.3, 0.4], &[1.0, 1.0, 0.0, 0.0]);
        let c = fit_constrained(&b, &s, 0.25, 0.5, &opts).unwrap();
        assert_eq!(c.fit.values, vec![0.5; 4]);
        assert_eq!(c.fit.boundary_flags, vec![false]);
        assert!(check_fenchel_constrained(&b, &s, &c, 1e-5).passed);
    }

    #[test]
    fn constrained_rejects_bad_inputs() {
        let g = Family::gaussian(1.0).unwrap();
        let s = sample(&[0.1, 0.9], &[0.0, 2.0]);
        let opts = FitOptions::default();
        assert!(fit_constrained(&g, &s, 0.1, 1.0, &opts).is_err());
        assert!(fit_constrained(&g, &s, 1.5, 1.0, &opts).is_err());
        let b = Family::bernoulli();
        let s = sample(&[0.1, 0.9], &[0.0, 1.0]);
        assert!(fit_constrained(&b, &s, 0.5, 1.5, &opts).is_err());
    }

    #[test]
    fn inactive_constraint_reproduces_unconstrained_fit() {
        let g = Family::gaussian(1.0).unwrap();
        let s = sample(&[0.1, 0.2, 0.3, 0.4], &[0.0, 1.0, 2.0, 3.0]);
        let opts = FitOptions::default();
        let fit = fit_unconstrained(&g, &s, &opts).unwrap();
        let c = fit_constrained(&g, &s, 0.25, 1.5, &opts).unwrap();
        assert_eq!(c.fit.values, fit.values);
        assert_eq!(c.fit.objective, fit.objective);
    }

    #[test]
    fn fenchel_detects_perturbation() {
        let g = Family::gaussian(1.0).unwrap();
        let s = sample(&[0.1, 0.2, 0.3, 0.4, 0.5], &[1.0, 0.0, 2.0, 1.5, 3.0]);
        let fit = fit_unconstrained(&g, &s, &FitOptions::default()).unwrap();
        assert!(check_fenchel(&g, &s, &fit, 1e-5).passed);
        let mut bad = fit.clone();
        for i in bad.blocks[1].clone() {
            bad.values[i] += 0.01;
        }
        assert!(!check_fenchel(&g, &s, &bad, 1e-5).passed);
    }

    #[test]
    fn singleton_sample() {
        let c = Family::curved_normal(1.0, 1.0, 1.0).unwrap();
        let s = sample(&[1.0], &[0.8]);
        let fit = fit_unconstrained(&c, &s, &FitOptions::default()).unwrap();
        let resid = c.score(0.8, fit.values[0]);
        assert!(resid.abs() <= 1e-10);
        assert!(fit.iterations <= 2);
    }

    #[test]
    fn unsupported_observations_are_rejected() {
        let b = Family::bernoulli();
        let s = sample(&[0.1, 0.2], &[0.0, 2.0]);
        assert!(matches!(
            fit_unconstrained(&b, &s, &FitOptions::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn loglik_total_examples() {
        let g = Family::gaussian(1.0).unwrap();
        let one = StepFunction::new(&[0.0], &[1.0]).unwrap();
        assert_eq!(loglik_total(&g, &sample(&[0.0], &[1.0]), &one).unwrap(), 0.0);

        let s = sample(&[0.1, 0.2, 0.3], &[0.3, -1.0, 2.0]);
        let f = StepFunction::new(&[0.1, 0.25], &[0.0, 1.0]).unwrap();
        let shifted = sample(&[0.1, 0.2, 0.3], &[5.3, 4.0, 7.0]);
        let fs = StepFunction::new(&[0.1, 0.25], &[5.0, 6.0]).unwrap();
        assert_abs_diff_eq!(
            loglik_total(&g, &s, &f).unwrap(),
            loglik_total(&g, &shifted, &fs).unwrap(),
            epsilon = 1e-12
        );

        let p = Family::poisson();
        let s = sample(&[1.0, 2.0, 3.0], &[0.0, 2.0, 5.0]);
        let f = StepFunction::new(&[1.0, 2.0, 3.0], &[0.5, 1.5, 4.0]).unwrap();
        let direct = (0.0 - 0.5) + (2.0 * 1.5f64.ln() - 1.5) + (5.0 * 4.0f64.ln() - 4.0);
        assert_abs_diff_eq!(loglik_total(&p, &s, &f).unwrap(), direct, epsilon = 1e-12);

        let bad = StepFunction::new(&[1.0], &[-1.0]).unwrap();
        assert!(loglik_total(&p, &s, &bad).is_err());
    }
}
