//! Iterative convex minorant algorithm for families without an explicit
//! block solution.
//!
//! Each step replaces `Σ φ(x_i, u_i)` (with `φ = −l`) by its diagonal
//! quadratic model at the current iterate and projects onto the monotone
//! cone with weighted PAVA; a backtracking line search along the segment to
//! the projection keeps the objective decreasing.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{fenchel_from_scores, FenchelReport, FitOptions, Init, Sample};
use crate::family::{block_solve, ParametricFamily};
use crate::gcm::{pava, slogcm0, CsumDiagram};

/// Pointwise constraint `u_{split−1} ≤ θ0 ≤ u_split` on group indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamp {
    /// Number of groups with covariate at or below z0.
    pub split: usize,
    pub theta0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IcmTraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub violation: f64,
    pub step_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcmSolution {
    /// One value per distinct covariate.
    pub u: Vec<f64>,
    pub iterations: usize,
    pub objective: f64,
    pub fenchel: FenchelReport,
    pub trace: Vec<IcmTraceRow>,
}

/// Per-group score sums and curvature sums `Σ −score_deriv`.
fn derivatives<F: ParametricFamily + ?Sized>(family: &F, sample: &Sample, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = sample.n_groups();
    let mut s = Vec::with_capacity(k);
    let mut d = Vec::with_capacity(k);
    for (g, &ug) in u.iter().enumerate() {
        let (mut sg, mut dg) = (0.0, 0.0);
        for &x in sample.group_x(g) {
            sg += family.try_score(x, ug)?;
            dg -= family.try_score_deriv(x, ug)?;
        }
        if !(dg > 0.0 && dg.is_finite()) || !sg.is_finite() {
            return Err(Error::Numerical(format!(
                "curvature {dg} at θ = {ug}: the log-likelihood is not strictly concave there"
            )));
        }
        s.push(sg);
        d.push(dg);
    }
    Ok((s, d))
}

fn objective<F: ParametricFamily + ?Sized>(family: &F, sample: &Sample, u: &[f64]) -> f64 {
    u.iter()
        .enumerate()
        .map(|(g, &ug)| -sample.group_x(g).iter().map(|&x| family.loglik(x, ug)).sum::<f64>())
        .sum()
}

fn project(s: &[f64], d: &[f64], u: &[f64], clamp: Option<Clamp>) -> Result<Vec<f64>> {
    let targets: Vec<f64> = u.iter().zip(s).zip(d).map(|((&u, &s), &d)| u + s / d).collect();
    match clamp {
        None => pava(&targets, d),
        Some(c) => Ok(slogcm0(&CsumDiagram::weighted(&targets, d)?, c.split, c.theta0)?.slopes),
    }
}

/// One unconstrained ICM proposal: PAVA of the Newton targets
/// `u_i + score_i/d_i` under weights `d_i = −score_deriv_i` (group sums).
pub fn icm_step<F: ParametricFamily + ?Sized>(family: &F, sample: &Sample, u: &[f64]) -> Result<Vec<f64>> {
    let (s, d) = derivatives(family, sample, u)?;
    project(&s, &d, u, None)
}

/// The clamped proposal, computed from the split self-induced diagram.
pub fn icm_step_clamped<F: ParametricFamily + ?Sized>(
    family: &F,
    sample: &Sample,
    u: &[f64],
    clamp: Clamp,
) -> Result<Vec<f64>> {
    let (s, d) = derivatives(family, sample, u)?;
    project(&s, &d, u, Some(clamp))
}

fn initial<F: ParametricFamily + ?Sized>(
    family: &F,
    sample: &Sample,
    init: &Init,
    clamp: Option<Clamp>,
) -> Result<Vec<f64>> {
    let k = sample.n_groups();
    let u = match (init, clamp) {
        (Init::Auto, Some(c)) => vec![c.theta0; k],
        (Init::Auto, None) => {
            let sol = block_solve(family, sample.x())?;
            let value = if sol.boundary.is_some() {
                family.initial_guess(sample.x())
            } else {
                sol.value
            };
            vec![value; k]
        }
        (Init::Constant(v), _) => vec![*v; k],
        (Init::Vector(v), _) => {
            if v.len() != k {
                return Err(Error::Domain(format!(
                    "initial vector has {} entries for {k} distinct covariates",
                    v.len()
                )));
            }
            v.clone()
        }
    };
    if u.iter().any(|&v| !family.contains(v)) || u.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("initial vector must be nondecreasing and inside the domain".into()));
    }
    if let Some(c) = clamp {
        if u[..c.split].iter().any(|&v| v > c.theta0) || u[c.split..].iter().any(|&v| v < c.theta0) {
            return Err(Error::Domain("initial vector violates the pointwise constraint".into()));
        }
    }
    Ok(u)
}

/// Runs the modified ICM until the Fenchel conditions hold at `opts.tol`.
pub fn solve<F: ParametricFamily + ?Sized>(
    family: &F,
    sample: &Sample,
    init: &Init,
    opts: &FitOptions,
    clamp: Option<Clamp>,
) -> Result<IcmSolution> {
    let mut u = initial(family, sample, init, clamp)?;
    let mut obj = objective(family, sample, &u);
    let (mut s, mut d) = derivatives(family, sample, &u)?;
    let mut trace = Vec::new();
    let mut violation = f64::INFINITY;

    for iteration in 1..=opts.max_iter {
        let proposal = project(&s, &d, &u, clamp)?;
        let slope: f64 = s.iter().zip(&proposal).zip(&u).map(|((&s, &p), &u)| -s * (p - u)).sum();
        let slack = 1e-12 * (1.0 + obj.abs());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = if t == 1.0 {
                proposal.clone()
            } else {
                u.iter().zip(&proposal).map(|(&u, &p)| u + t * (p - u)).collect()
            };
            if cand.iter().all(|&v| family.contains(v)) {
                let c_obj = objective(family, sample, &cand);
                if c_obj.is_finite() && c_obj <= obj + opts.armijo * t * slope.min(0.0) + slack {
                    accepted = Some((cand, c_obj));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((next, next_obj)) = accepted else {
            return Err(Error::NonConvergence {
                iterations: iteration,
                violation,
                last: u,
            });
        };
        u = next;
        obj = next_obj;
        (s, d) = derivatives(family, sample, &u)?;
        let report = fenchel_from_scores(&s, &u, clamp, opts.tol);
        violation = report.max_violation;
        if opts.trace {
            trace.push(IcmTraceRow {
                iteration,
                objective: obj,
                violation,
                step_length: t,
            });
        }
        if report.passed {
            return Ok(IcmSolution {
                u,
                iterations: iteration,
                objective: obj,
                fenchel: report,
                trace,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        violation,
        last: u,
    })
}
