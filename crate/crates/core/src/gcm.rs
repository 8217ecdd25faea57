//! Greatest convex minorants of cumulative sum diagrams.
//!
//! Every estimator in this crate reduces to left slopes of the GCM of some
//! diagram: directly for exponential families, through the self-induced
//! diagram for curved families, and through the Brownian diagram for the
//! limit processes.

use serde::Serialize;

use crate::error::{domain, Result};

/// Points `(x_0, y_0) = (0, 0), (x_1, y_1), …, (x_n, y_n)` with strictly
/// increasing abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct CsumDiagram {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl CsumDiagram {
    /// Builds a diagram from explicit points; the first must be the origin.
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        let Some(&(x0, y0)) = points.first() else {
            return domain("a cumulative sum diagram needs the origin");
        };
        if x0 != 0.0 || y0 != 0.0 {
            return domain(format!("diagram must start at (0, 0), got ({x0}, {y0})"));
        }
        let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        Self::validated(x, y)
    }

    /// A diagram anchored at its first point instead of the origin, as for
    /// a process observed on a grid `x_0 < x_1 < … < x_n`.
    pub fn anchored(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return domain("diagram needs matching, nonempty coordinates");
        }
        Self::validated(x, y)
    }

    /// Builds the diagram of partial sums of `dx` and `dy`.
    pub fn from_increments(dx: &[f64], dy: &[f64]) -> Result<Self> {
        if dx.len() != dy.len() {
            return domain("increment vectors differ in length");
        }
        let mut x = Vec::with_capacity(dx.len() + 1);
        let mut y = Vec::with_capacity(dx.len() + 1);
        let (mut sx, mut sy) = (0.0, 0.0);
        x.push(0.0);
        y.push(0.0);
        for (&a, &b) in dx.iter().zip(dy) {
            sx += a;
            sy += b;
            x.push(sx);
            y.push(sy);
        }
        Self::validated(x, y)
    }

    /// The weighted diagram `{(Σ_{j≤i} w_j, Σ_{j≤i} w_j g_j)}` whose left
    /// GCM slopes are the weighted isotonic regression of `g`.
    pub fn weighted(g: &[f64], w: &[f64]) -> Result<Self> {
        check_weights(g, w)?;
        let wg: Vec<f64> = g.iter().zip(w).map(|(a, b)| a * b).collect();
        Self::from_increments(w, &wg)
    }

    fn validated(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if let Some(i) = (1..x.len()).find(|&i| !(x[i] > x[i - 1])) {
            return domain(format!("diagram abscissae must increase strictly (index {i})"));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return domain("diagram coordinates must be finite");
        }
        Ok(Self { x, y })
    }

    /// Number of points after the origin.
    pub fn len(&self) -> usize {
        self.x.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Points `from..=to`, anchored at point `from`. Slopes only involve
    /// differences, so the points are not translated.
    fn rebased(&self, from: usize, to: usize) -> CsumDiagram {
        CsumDiagram {
            x: self.x[from..=to].to_vec(),
            y: self.y[from..=to].to_vec(),
        }
    }
}

/// Left slopes of a GCM at the diagram points `x_1, …, x_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeVector {
    pub slopes: Vec<f64>,
    /// Diagram indices (origin included) where the GCM touches the diagram.
    pub vertices: Vec<usize>,
}

impl SlopeVector {
    /// Index ranges (into `slopes`) of the linear pieces of the minorant.
    pub fn segments(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.vertices.windows(2).map(|v| v[0]..v[1])
    }
}

/// Left-hand slopes of the greatest convex minorant, by a single
/// monotone-chain pass. Collinear points are merged into one segment.
pub fn slogcm(diagram: &CsumDiagram) -> SlopeVector {
    let (x, y) = (&diagram.x, &diagram.y);
    let mut hull: Vec<usize> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut slopes = vec![0.0; diagram.len()];
    for v in hull.windows(2) {
        let s = (y[v[1]] - y[v[0]]) / (x[v[1]] - x[v[0]]);
        slopes[v[0]..v[1]].fill(s);
    }
    SlopeVector {
        slopes,
        vertices: hull,
    }
}

/// Constrained slopes: the GCM of points `0..=split` with each slope capped
/// at `clamp`, followed by the GCM of the re-based points `split..=n` with
/// each slope floored at `clamp`. Point `split` belongs to the left part.
pub fn slogcm0(diagram: &CsumDiagram, split: usize, clamp: f64) -> Result<SlopeVector> {
    let n = diagram.len();
    if split > n {
        return domain(format!("split index {split} exceeds diagram length {n}"));
    }
    let left = slogcm(&diagram.rebased(0, split));
    let right = slogcm(&diagram.rebased(split, n));
    let slopes = left
        .slopes
        .iter()
        .map(|&s| s.min(clamp))
        .chain(right.slopes.iter().map(|&s| s.max(clamp)))
        .collect();
    let mut vertices = left.vertices;
    vertices.extend(right.vertices.iter().skip(1).map(|v| v + split));
    Ok(SlopeVector { slopes, vertices })
}

fn check_weights(g: &[f64], w: &[f64]) -> Result<()> {
    if g.len() != w.len() {
        return domain(format!("{} values but {} weights", g.len(), w.len()));
    }
    if let Some(bad) = w.iter().find(|&&wi| !(wi > 0.0 && wi.is_finite())) {
        return domain(format!("weights must be positive and finite, got {bad}"));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return domain("values must be finite");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Pool {
    sum_wg: f64,
    sum_w: f64,
    len: usize,
}

impl Pool {
    fn mean(&self) -> f64 {
        self.sum_wg / self.sum_w
    }
}

/// Weighted isotonic regression by pooling adjacent violators: the
/// nondecreasing `u` minimizing `Σ w_i (u_i − g_i)²`.
pub fn pava(g: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    check_weights(g, w)?;
    let mut pools: Vec<Pool> = Vec::with_capacity(g.len());
    for (&gi, &wi) in g.iter().zip(w) {
        let mut cur = Pool {
            sum_wg: gi * wi,
            sum_w: wi,
            len: 1,
        };
        while let Some(prev) = pools.last() {
            if prev.mean() > cur.mean() {
                cur = Pool {
                    sum_wg: prev.sum_wg + cur.sum_wg,
                    sum_w: prev.sum_w + cur.sum_w,
                    len: prev.len + cur.len,
                };
                pools.pop();
            } else {
                break;
            }
        }
        pools.push(cur);
    }
    let mut out = Vec::with_capacity(g.len());
    for p in &pools {
        out.extend(std::iter::repeat_n(p.mean(), p.len));
    }
    Ok(out)
}
