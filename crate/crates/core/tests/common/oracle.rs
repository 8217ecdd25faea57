//! Brute-force reference solutions, independent of the library's
//! algorithms. Only usable on tiny inputs.

use monoresp::{ParametricFamily, Sample};

pub const MAX_N: usize = 6;

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    /// Number of grid points across the search range.
    pub grid_points: usize,
    pub max_n: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            grid_points: 200_001,
            max_n: MAX_N,
        }
    }
}

/// Maximizer of `l(x, ·)` over the closed domain, by bisection on the sign
/// of the score.
fn singleton_root<F: ParametricFamily + ?Sized>(family: &F, x: f64) -> f64 {
    let (lo, hi) = family.theta_domain();
    let start = match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + 1.0,
        (false, true) => hi - 1.0,
        (false, false) => 0.0,
    };
    let up = family.score(x, start) > 0.0;
    let (mut a, mut b) = (start, start);
    // expand until the score changes sign or the end of the domain
    let mut step = 1.0;
    loop {
        let next = if up {
            if hi.is_finite() { b + 0.5 * (hi - b) } else { b + step }
        } else if lo.is_finite() {
            a - 0.5 * (a - lo)
        } else {
            a - step
        };
        step *= 2.0;
        if !family.contains(next) || next == a || next == b || step > 1e12 {
            return if up { hi.min(b) } else { lo.max(a) };
        }
        if (family.score(x, next) > 0.0) != up {
            if up {
                a = b;
                b = next;
            } else {
                b = a;
                a = next;
            }
            break;
        }
        if up {
            b = next;
        } else {
            a = next;
        }
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if family.score(x, m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Monotone grid vector maximizing the log-likelihood by dynamic
/// programming over a fine grid spanning the singleton maximizers. With a
/// constraint `(z0, θ0)`, coordinates with `z ≤ z0` are capped at θ0 and
/// the others floored at θ0. Returns one value per distinct covariate.
pub fn brute_mle<F: ParametricFamily + ?Sized>(
    family: &F,
    sample: &Sample,
    constraint: Option<(f64, f64)>,
    cfg: &OracleConfig,
) -> Result<Vec<f64>, String> {
    let k = sample.n_groups();
    if sample.len() > cfg.max_n {
        return Err(format!("oracle refuses n = {} > {}", sample.len(), cfg.max_n));
    }
    let roots: Vec<f64> = sample.x().iter().map(|&x| singleton_root(family, x)).collect();
    let mut lo = roots.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = roots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if let Some((_, t0)) = constraint {
        lo = lo.min(t0);
        hi = hi.max(t0);
    }
    let g = cfg.grid_points;
    let mut grid: Vec<f64> = if hi > lo {
        (0..g).map(|j| lo + (hi - lo) * j as f64 / (g - 1) as f64).collect()
    } else {
        vec![lo]
    };
    if let Some((_, t0)) = constraint {
        grid.push(t0);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
    }
    let allowed = |grp: usize, v: f64| match constraint {
        None => true,
        Some((z0, t0)) => {
            if sample.group_z(grp) <= z0 {
                v <= t0
            } else {
                v >= t0
            }
        }
    };
    let cost = |grp: usize, v: f64| -> f64 {
        if !allowed(grp, v) {
            return f64::INFINITY;
        }
        let c: f64 = sample.group_x(grp).iter().map(|&x| -family.loglik(x, v)).sum();
        if c.is_nan() { f64::INFINITY } else { c }
    };
    // best[j]: minimal cost of groups 0..=i with u_i = grid[j]
    let mut best: Vec<f64> = grid.iter().map(|&v| cost(0, v)).collect();
    let mut choice: Vec<Vec<usize>> = Vec::with_capacity(k);
    choice.push((0..grid.len()).collect());
    for grp in 1..k {
        let mut run_min = f64::INFINITY;
        let mut run_arg = 0;
        let mut next = vec![0.0; grid.len()];
        let mut arg = vec![0; grid.len()];
        for j in 0..grid.len() {
            if best[j] < run_min {
                run_min = best[j];
                run_arg = j;
            }
            next[j] = run_min + cost(grp, grid[j]);
            arg[j] = run_arg;
        }
        best = next;
        choice.push(arg);
    }
    let (mut j, _) = best
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or("empty grid")?;
    let mut out = vec![0.0; k];
    for grp in (0..k).rev() {
        out[grp] = grid[j];
        j = choice[grp][j];
    }
    Ok(out)
}

/// Weighted least-squares isotonic regression by enumerating every
/// partition into consecutive blocks.
pub fn brute_pava(g: &[f64], w: &[f64]) -> Result<Vec<f64>, String> {
    let n = g.len();
    if n > 16 {
        return Err(format!("oracle refuses n = {n} > 16"));
    }
    if n == 0 {
        return Ok(vec![]);
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut u = vec![0.0; n];
        let mut start = 0;
        for end in 1..=n {
            let cut = end == n || mask & (1 << (end - 1)) != 0;
            if cut {
                let sw: f64 = w[start..end].iter().sum();
                let m = (start..end).map(|i| w[i] * g[i]).sum::<f64>() / sw;
                u[start..end].fill(m);
                start = end;
            }
        }
        if u.windows(2).any(|p| p[1] < p[0]) {
            continue;
        }
        let ss: f64 = (0..n).map(|i| w[i] * (g[i] - u[i]).powi(2)).sum();
        if best.as_ref().is_none_or(|b| ss < b.0) {
            best = Some((ss, u));
        }
    }
    Ok(best.expect("the pooled partition is feasible").1)
}

/// Left slopes of the GCM of `points` (first point anchored), from the
/// maximal supporting line through each point among lines through two
/// diagram points that lie below every point.
pub fn brute_gcm(points: &[(f64, f64)]) -> Result<Vec<f64>, String> {
    let n = points.len();
    if n > 13 {
        return Err(format!("oracle refuses {n} points"));
    }
    let mut lines = Vec::new();
    for j in 0..n {
        for k in j + 1..n {
            let (xj, yj) = points[j];
            let (xk, yk) = points[k];
            let s = (yk - yj) / (xk - xj);
            let below = points
                .iter()
                .all(|&(x, y)| yj + s * (x - xj) <= y + 1e-12 * (1.0 + y.abs()));
            if below {
                lines.push((xj, yj, s));
            }
        }
    }
    let hull: Vec<f64> = points
        .iter()
        .map(|&(x, _)| {
            lines
                .iter()
                .map(|&(xj, yj, s)| yj + s * (x - xj))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok((1..n)
        .map(|i| (hull[i] - hull[i - 1]) / (points[i].0 - points[i - 1].0))
        .collect())
}
