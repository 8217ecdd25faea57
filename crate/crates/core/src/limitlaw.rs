//! Monte Carlo realizations of the limit processes: two-sided Brownian
//! motion with parabolic drift `X_{c,d}(h) = c W(h) + d h²`, its slope
//! processes `g = slogcm(X)` and `g⁰ = slogcm⁰(X)` (split at 0, clamped at
//! 0), the likelihood ratio limit `𝔻 = ∫ (g² − g⁰²)`, and Chernoff's `ℤ`.
//!
//! Paths live on the uniform grid `{jδ : |j| ≤ T/δ}` plus a dyadic cluster
//! `±δ/2^k` next to the origin, built by Brownian-bridge interpolation.
//! The cluster resolves the zero neighbourhood of `g⁰` that the continuous
//! processes have almost surely.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::gcm::{slogcm, slogcm0, CsumDiagram};
use crate::rng;
use crate::stats::{ks_two_sample, quantile_sorted};

/// Dyadic refinement levels next to the origin.
pub const ZERO_LEVELS: u32 = 48;

pub const DEFAULT_T: f64 = 4.0;
pub const DEFAULT_DELTA: f64 = 0.005;

/// Grid parameters of simulated paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub t: f64,
    pub delta: f64,
    /// Extra rounds of midpoint refinement of the uniform part; round `r`
    /// reuses the randomness of rounds `< r`, so paths at `δ` and `δ/2`
    /// share their common points.
    pub halvings: u32,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            t: DEFAULT_T,
            delta: DEFAULT_DELTA,
            halvings: 0,
        }
    }
}

impl Grid {
    pub fn new(t: f64, delta: f64) -> Result<Self> {
        let g = Self { t, delta, halvings: 0 };
        g.validate()?;
        Ok(g)
    }

    pub fn halved(self) -> Self {
        Self {
            halvings: self.halvings + 1,
            ..self
        }
    }

    /// Effective uniform spacing.
    pub fn step(&self) -> f64 {
        self.delta / f64::from(1u32 << self.halvings)
    }

    fn half_width(&self) -> Result<usize> {
        let k = self.t / self.delta;
        if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
            return domain(format!("T = {} is not an integer multiple of δ = {}", self.t, self.delta));
        }
        Ok(k.round() as usize)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.delta > 0.0 && self.t.is_finite()) {
            return domain("T and δ must be positive");
        }
        if self.delta > self.t {
            return domain("δ must not exceed T");
        }
        self.half_width().map(|_| ())
    }
}

/// One simulated path of `X_{c,d}` with its slope processes.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitPath {
    pub h: Vec<f64>,
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    /// Slope on `(h[i], h[i+1]]`.
    pub g: Vec<f64>,
    pub g0: Vec<f64>,
    /// Index of `h = 0`.
    pub zero: usize,
    pub d_stat: f64,
}

fn gaussian(rng: &mut dyn RngCore) -> f64 {
    StandardNormal.sample(rng)
}

fn bridge(a: (f64, f64), b: (f64, f64), rng: &mut dyn RngCore) -> (f64, f64) {
    let h = 0.5 * (a.0 + b.0);
    let sd = (0.25 * (b.0 - a.0)).sqrt();
    (h, 0.5 * (a.1 + b.1) + sd * gaussian(rng))
}

/// Brownian motion on the grid, `W(0) = 0`.
fn brownian(grid: &Grid, rng: &mut dyn RngCore) -> Result<Vec<(f64, f64)>> {
    grid.validate()?;
    let n = grid.half_width()?;
    let mut streams: Vec<ChaCha8Rng> = (0..2 + grid.halvings)
        .map(|_| ChaCha8Rng::seed_from_u64(rng.next_u64()))
        .collect();

    let sd = grid.delta.sqrt();
    let mut right = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    let (mut wr, mut wl) = (0.0, 0.0);
    for j in 1..=n {
        wr += sd * gaussian(&mut streams[0]);
        right.push((j as f64 * grid.delta, wr));
    }
    for j in 1..=n {
        wl += sd * gaussian(&mut streams[0]);
        left.push((-(j as f64) * grid.delta, wl));
    }
    let mut pts: Vec<(f64, f64)> = left.into_iter().rev().collect();
    pts.push((0.0, 0.0));
    pts.extend(right);

    // Dyadic cluster around the origin.
    let mut near_right = Vec::new();
    let mut near_left = Vec::new();
    let (mut r, mut l) = (pts[n + 1], pts[n - 1]);
    for _ in 0..ZERO_LEVELS {
        r = bridge((0.0, 0.0), r, &mut streams[1]);
        l = bridge(l, (0.0, 0.0), &mut streams[1]);
        near_right.push(r);
        near_left.push(l);
    }
    let mut all = Vec::with_capacity(pts.len() + 2 * near_right.len());
    all.extend_from_slice(&pts[..n]);
    all.extend(near_left);
    all.push((0.0, 0.0));
    all.extend(near_right.into_iter().rev());
    all.extend_from_slice(&pts[n + 1..]);

    for round in 0..grid.halvings {
        let min_len = 0.75 * grid.delta / f64::from(1u32 << round);
        let stream = &mut streams[2 + round as usize];
        let mut next = Vec::with_capacity(2 * all.len());
        next.push(all[0]);
        for pair in all.windows(2) {
            if pair[1].0 - pair[0].0 > min_len {
                next.push(bridge(pair[0], pair[1], stream));
            }
            next.push(pair[1]);
        }
        all = next;
    }
    Ok(all)
}

/// `Σ (g² − g⁰²) Δh`, the exact integral of the piecewise-constant slopes.
fn d_integral(h: &[f64], g: &[f64], g0: &[f64]) -> f64 {
    h.windows(2)
        .zip(g.iter().zip(g0))
        .map(|(w, (a, b))| (a * a - b * b) * (w[1] - w[0]))
        .sum()
}

/// Simulates `X_{c,d}` on `grid` with slope processes and `𝔻`; `c = 0`
/// gives the deterministic parabola.
pub fn sample_path(c: f64, d: f64, grid: &Grid, rng: &mut dyn RngCore) -> Result<LimitPath> {
    if !(c >= 0.0 && d > 0.0 && c.is_finite() && d.is_finite()) {
        return domain(format!("need c ≥ 0 and d > 0, got c = {c}, d = {d}"));
    }
    let pts = brownian(grid, rng)?;
    let h: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let w: Vec<f64> = if c == 0.0 {
        vec![0.0; h.len()]
    } else {
        pts.iter().map(|p| p.1).collect()
    };
    let x: Vec<f64> = h.iter().zip(&w).map(|(&h, &w)| c * w + d * h * h).collect();
    let zero = h.iter().position(|&v| v == 0.0).expect("grid contains 0");
    let diagram = CsumDiagram::anchored(h.clone(), x.clone())?;
    let g = slogcm(&diagram).slopes;
    let g0 = slogcm0(&diagram, zero, 0.0)?.slopes;
    let d_stat = d_integral(&h, &g, &g0);
    Ok(LimitPath {
        h,
        w,
        x,
        g,
        g0,
        zero,
        d_stat,
    })
}

/// Invariant diagnostics of one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathChecks {
    pub g_monotone: bool,
    pub g0_monotone: bool,
    /// `g⁰ ≤ 0` left of 0 and `≥ 0` right of 0.
    pub g0_signs: bool,
    /// `g⁰` vanishes on both grid intervals adjacent to 0.
    pub zero_neighbourhood: bool,
    /// The set where `g ≠ g⁰` is an interval (possibly empty) around 0.
    pub difference_is_interval: bool,
    /// Length of the smallest interval containing `{g ≠ g⁰}`.
    pub difference_length: f64,
}

impl LimitPath {
    /// `g(0)`, averaged over the two grid intervals adjacent to 0.
    pub fn g_at_zero(&self) -> f64 {
        0.5 * (self.g[self.zero - 1] + self.g[self.zero])
    }

    pub fn checks(&self) -> PathChecks {
        let mono = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
        let z = self.zero;
        let g0_signs = self.g0[..z].iter().all(|&v| v <= 0.0) && self.g0[z..].iter().all(|&v| v >= 0.0);
        let differs: Vec<usize> = (0..self.g.len()).filter(|&i| self.g[i] != self.g0[i]).collect();
        let (difference_is_interval, difference_length) = match (differs.first(), differs.last()) {
            (Some(&a), Some(&b)) => {
                let contiguous = differs.len() == b - a + 1;
                let around_zero = a <= z && b + 1 >= z;
                (contiguous && around_zero, self.h[b + 1] - self.h[a])
            }
            _ => (true, 0.0),
        };
        PathChecks {
            g_monotone: mono(&self.g),
            g0_monotone: mono(&self.g0),
            g0_signs,
            zero_neighbourhood: self.g0[z - 1] == 0.0 && self.g0[z] == 0.0,
            difference_is_interval,
            difference_length,
        }
    }
}

/// Both Chernoff representations read off a canonical path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChernoffDraw {
    /// Grid location minimizing `W(h) + h²`.
    pub z_argmin: f64,
    /// `g(0)/2`, equal in law to `z_argmin`.
    pub half_slope: f64,
    /// The minimizer sits at `±T`: the window is too small.
    pub at_boundary: bool,
}

pub fn chernoff_sample(path: &LimitPath) -> ChernoffDraw {
    let (i, _) = path
        .x
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty path");
    ChernoffDraw {
        z_argmin: path.h[i],
        half_slope: 0.5 * path.g_at_zero(),
        at_boundary: i == 0 || i == path.h.len() - 1,
    }
}

/// Which limit variable a table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// The likelihood ratio limit 𝔻.
    D,
    /// Chernoff's ℤ via the argmin of `W(h) + h²`.
    ChernoffArgmin,
    /// Chernoff's ℤ via `g(0)/2`.
    ChernoffSlope,
}

impl Statistic {
    pub fn as_str(&self) -> &'static str {
        match self {
            Statistic::D => "d",
            Statistic::ChernoffArgmin => "chernoff_argmin",
            Statistic::ChernoffSlope => "chernoff_slope",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "d" => Ok(Statistic::D),
            "chernoff_argmin" => Ok(Statistic::ChernoffArgmin),
            "chernoff_slope" => Ok(Statistic::ChernoffSlope),
            other => Err(Error::Parse(format!("unknown statistic '{other}'"))),
        }
    }
}

/// Sorted Monte Carlo sample of a limit variable with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileTable {
    pub statistic: Statistic,
    pub seed: u64,
    pub c: f64,
    pub d: f64,
    pub t: f64,
    pub delta: f64,
    /// Paths whose minimizer fell on the grid boundary.
    pub boundary_hits: usize,
    samples: Vec<f64>,
}

impl QuantileTable {
    pub fn new(statistic: Statistic, seed: u64, grid: &Grid, mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() || samples.iter().any(|v| !v.is_finite()) {
            return domain("a quantile table needs finite samples");
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self {
            statistic,
            seed,
            c: 1.0,
            d: 1.0,
            t: grid.t,
            delta: grid.step(),
            boundary_hits: 0,
            samples,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn quantile(&self, p: f64) -> f64 {
        quantile_sorted(&self.samples, p)
    }

    pub fn quantiles(&self, ps: &[f64]) -> Vec<f64> {
        ps.iter().map(|&p| self.quantile(p)).collect()
    }

    /// Empirical `P(V ≥ v)`; 1 for `v ≤ 0` when the variable is nonnegative.
    pub fn survival(&self, v: f64) -> f64 {
        if self.statistic == Statistic::D && v <= 0.0 {
            return 1.0;
        }
        let below = self.samples.partition_point(|&s| s < v);
        (self.samples.len() - below) as f64 / self.samples.len() as f64
    }

    /// CSV with `#`-prefixed metadata lines and one `value` column.
    /// `extra` lines are written verbatim after the metadata (without `#`).
    pub fn write_csv(&self, mut out: impl Write, extra: &[String]) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "# statistic={}", self.statistic.as_str());
        let _ = writeln!(s, "# seed={}", self.seed);
        let _ = writeln!(s, "# c={}", self.c);
        let _ = writeln!(s, "# d={}", self.d);
        let _ = writeln!(s, "# T={}", self.t);
        let _ = writeln!(s, "# delta={}", self.delta);
        let _ = writeln!(s, "# n_paths={}", self.samples.len());
        let _ = writeln!(s, "# boundary_hits={}", self.boundary_hits);
        for e in extra {
            let _ = writeln!(s, "# {e}");
        }
        s.push_str("value\n");
        for v in &self.samples {
            let _ = writeln!(s, "{v}");
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_csv(input: impl BufRead) -> Result<Self> {
        let mut meta = std::collections::HashMap::new();
        let mut samples = Vec::new();
        let mut header = false;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(m) = line.strip_prefix('#') {
                if let Some((k, v)) = m.trim().split_once('=') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if !header {
                if line != "value" {
                    return Err(Error::Parse(format!("line {}: expected header 'value'", i + 1)));
                }
                header = true;
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: '{line}' is not a number", i + 1)))?;
            samples.push(v);
        }
        let get = |k: &str| -> Result<&String> {
            meta.get(k)
                .ok_or_else(|| Error::Parse(format!("table metadata lacks '{k}'")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Parse(format!("table metadata '{k}' is not a number")))
        };
        let n_paths: usize = get("n_paths")?
            .parse()
            .map_err(|_| Error::Parse("table metadata 'n_paths' is not a count".into()))?;
        if n_paths != samples.len() {
            return Err(Error::Parse(format!(
                "table declares {n_paths} paths but holds {} values",
                samples.len()
            )));
        }
        if samples.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Parse("table values are not sorted".into()));
        }
        if samples.is_empty() {
            return Err(Error::Parse("table holds no values".into()));
        }
        Ok(Self {
            statistic: Statistic::parse(get("statistic")?)?,
            seed: get("seed")?
                .parse()
                .map_err(|_| Error::Parse("table metadata 'seed' is not an integer".into()))?,
            c: num("c")?,
            d: num("d")?,
            t: num("T")?,
            delta: num("delta")?,
            boundary_hits: meta.get("boundary_hits").and_then(|v| v.parse().ok()).unwrap_or(0),
            samples,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    pub fn save(&self, path: impl AsRef<Path>, extra: &[String]) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w, extra)?;
        w.flush()?;
        Ok(())
    }
}

/// Runs `f` on `n` independent canonical paths, path `i` drawn from
/// stream `(seed, i)`.
pub fn simulate_paths<T: Send>(
    n: usize,
    c: f64,
    d: f64,
    grid: &Grid,
    seed: u64,
    f: impl Fn(LimitPath) -> T + Sync,
) -> Result<Vec<T>> {
    grid.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| sample_path(c, d, grid, &mut rng::stream(seed, i)).map(&f))
        .collect()
}

/// Table of `n_paths` canonical draws of 𝔻.
pub fn d_quantiles(n_paths: usize, grid: &Grid, seed: u64) -> Result<QuantileTable> {
    let draws = simulate_paths(n_paths, 1.0, 1.0, grid, seed, |p| {
        (p.d_stat, chernoff_sample(&p).at_boundary)
    })?;
    let hits = draws.iter().filter(|d| d.1).count();
    let mut t = QuantileTable::new(Statistic::D, seed, grid, draws.into_iter().map(|d| d.0).collect())?;
    t.boundary_hits = hits;
    Ok(t)
}

/// Table of `n_paths` Chernoff draws using the chosen representation.
pub fn chernoff_table(n_paths: usize, grid: &Grid, seed: u64, statistic: Statistic) -> Result<QuantileTable> {
    if statistic == Statistic::D {
        return domain("chernoff_table needs a Chernoff statistic");
    }
    let draws = simulate_paths(n_paths, 1.0, 1.0, grid, seed, |p| chernoff_sample(&p))?;
    let hits = draws.iter().filter(|d| d.at_boundary).count();
    let values = draws
        .into_iter()
        .map(|d| match statistic {
            Statistic::ChernoffArgmin => d.z_argmin,
            _ => d.half_slope,
        })
        .collect();
    let mut t = QuantileTable::new(statistic, seed, grid, values)?;
    t.boundary_hits = hits;
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingReport {
    /// KS distance between `g_{a,b}(0)` and `a(b/a)^{1/3} g(0)`.
    pub ks_slope: f64,
    /// KS distance between `𝔻_{a,b}/a²` and canonical 𝔻.
    pub ks_d: f64,
}

/// Compares direct `(a, b)` simulations with rescaled canonical ones. The
/// `(a, b)` paths use the window and spacing stretched by `(a/b)^{2/3}`,
/// the image of the canonical grid under the Brownian rescaling.
pub fn scaling_check(a: f64, b: f64, n_paths: usize, grid: &Grid, seed: u64) -> Result<ScalingReport> {
    if !(a > 0.0 && b > 0.0) {
        return domain("scaling constants must be positive");
    }
    let s = (a / b).powf(2.0 / 3.0);
    let stretched = Grid {
        t: grid.t * s,
        delta: grid.delta * s,
        halvings: grid.halvings,
    };
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let (seed_direct, seed_canon) = (seeds.random::<u64>(), seeds.random::<u64>());
    let direct = simulate_paths(n_paths, a, b, &stretched, seed_direct, |p| (p.g_at_zero(), p.d_stat))?;
    let canon = simulate_paths(n_paths, 1.0, 1.0, grid, seed_canon, |p| (p.g_at_zero(), p.d_stat))?;
    let factor = a * (b / a).powf(1.0 / 3.0);
    let g_direct: Vec<f64> = direct.iter().map(|v| v.0).collect();
    let g_canon: Vec<f64> = canon.iter().map(|v| factor * v.0).collect();
    let d_direct: Vec<f64> = direct.iter().map(|v| v.1 / (a * a)).collect();
    let d_canon: Vec<f64> = canon.iter().map(|v| v.1).collect();
    Ok(ScalingReport {
        ks_slope: ks_two_sample(&g_direct, &g_canon),
        ks_d: ks_two_sample(&d_direct, &d_canon),
    })
}
