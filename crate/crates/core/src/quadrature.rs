//! Graded grids on [0,1], grid functions, and the quadrature rules used by
//! every solver: weights, log-singular subtraction, finite differences, and
//! a composite Gauss rule for pointwise coefficient integrals.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

/// Nodes xᵢ = (i/n)ᵖ, i = 0..=n, with weights from the end-corrected
/// trapezoid rule in t = i/n pulled back through the grading map.
#[derive(Clone, Debug)]
pub struct Grid {
    n: usize,
    grading: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn graded(n: usize, grading: f64) -> Result<Arc<Grid>> {
        if n < 8 {
            return Err(Error::Domain(format!("grid needs n >= 8, got {n}")));
        }
        if !(grading >= 1.0 && grading.is_finite()) {
            return Err(Error::Domain(format!("grading must be >= 1, got {grading}")));
        }
        let h = 1.0 / n as f64;
        let nodes: Vec<f64> = (0..=n)
            .map(|i| if i == n { 1.0 } else { (i as f64 * h).powf(grading) })
            .collect();
        // Gregory end corrections: 3/8, 7/6, 23/24 at both ends
        let end = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
        let mut weights: Vec<f64> = (0..=n)
            .map(|i| {
                let c = if i < 3 { end[i] } else if n - i < 3 { end[n - i] } else { 1.0 };
                let t = i as f64 * h;
                let jac = if grading == 1.0 { 1.0 } else { grading * t.powf(grading - 1.0) };
                c * h * jac
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Arc::new(Grid { n, grading, nodes, weights }))
    }

    /// Default production grid: n = 256, p = 2.
    pub fn default_grid() -> Arc<Grid> {
        Grid::graded(256, 2.0).expect("default grid")
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn grading(&self) -> f64 {
        self.grading
    }
    pub fn len(&self) -> usize {
        self.n + 1
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node_index(&self, x: f64) -> Option<usize> {
        let i = self.nodes.partition_point(|&v| v < x);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter(|&j| j <= self.n)
            .find(|&j| (self.nodes[j] - x).abs() <= 1e-14 * x.abs().max(1e-300))
    }

    pub fn func(self: &Arc<Self>, values: Vec<f64>) -> GridFn {
        GridFn::new(self.clone(), values)
    }

    pub fn sample(self: &Arc<Self>, f: impl Fn(f64) -> f64) -> GridFn {
        GridFn::new(self.clone(), self.nodes.iter().map(|&x| f(x)).collect())
    }

    /// Row i of the subtracted log rule: Σⱼ c_ij gⱼ ≈ ∫₀¹ g(ξ) log(xᵢ−ξ)² dξ.
    pub fn log_singular_row(&self, i: usize) -> Vec<f64> {
        let x = self.nodes[i];
        let mut row = vec![0.0; self.len()];
        let mut acc = 0.0;
        for (j, (&xj, &wj)) in self.nodes.iter().zip(&self.weights).enumerate() {
            if j != i {
                let c = wj * ((x - xj) * (x - xj)).ln();
                row[j] = c;
                acc += c;
            }
        }
        row[i] = log_sq_moment(x) - acc;
        row
    }
}

/// ∫₀¹ log(x−ξ)² dξ = 2[x log x + (1−x) log(1−x) − 1].
pub fn log_sq_moment(x: f64) -> f64 {
    2.0 * (xlogx(x) + xlogx(1.0 - x) - 1.0)
}

#[inline]
pub(crate) fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Values on a grid, with an optional cached derivative.
#[derive(Clone, Debug)]
pub struct GridFn {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
    pub derivative: Option<Vec<f64>>,
}

impl GridFn {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "grid function length mismatch");
        GridFn { grid, values, derivative: None }
    }

    pub fn with_derivative(mut self) -> Self {
        self.derivative = Some(fd_apply(&fd_stencils(self.grid.nodes()), &self.values));
        self
    }
}

pub fn integrate(f: &GridFn) -> Result<f64> {
    if f.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("integrand".into()));
    }
    Ok(f.values.iter().zip(f.grid.weights()).map(|(v, w)| v * w).sum())
}

/// ∫₀¹ g(ξ) log(x−ξ)² dξ for a node x, by subtracting g(x) and integrating
/// the log part in closed form.
pub fn integrate_log_singular(g: &GridFn, x: f64) -> Result<f64> {
    let grid = &g.grid;
    let i = grid.node_index(x).ok_or(Error::NotANode(x))?;
    if g.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("log-singular integrand".into()));
    }
    let x = grid.nodes()[i];
    let gi = g.values[i];
    let mut s = gi * log_sq_moment(x);
    for (j, ((&xj, &wj), &gj)) in grid.nodes().iter().zip(grid.weights()).zip(&g.values).enumerate() {
        if j != i {
            s += wj * (gj - gi) * ((x - xj) * (x - xj)).ln();
        }
    }
    Ok(s)
}

pub fn derivative(f: &GridFn) -> GridFn {
    let d = fd_apply(&fd_stencils(f.grid.nodes()), &f.values);
    GridFn::new(f.grid.clone(), d)
}

/// Three-point stencil (indices, coefficients) for one row of the FD matrix.
pub type Stencil = [(usize, f64); 3];

/// Second-order three-point differences on arbitrary increasing nodes;
/// one-sided at the two ends.
pub fn fd_stencils(x: &[f64]) -> Vec<Stencil> {
    let m = x.len();
    assert!(m >= 3);
    let one_sided = |a: usize, b: usize, c: usize| -> Stencil {
        // derivative at x[a] from values at a, b, c
        let (h1, h2) = (x[b] - x[a], x[c] - x[b]);
        [
            (a, -(2.0 * h1 + h2) / (h1 * (h1 + h2))),
            (b, (h1 + h2) / (h1 * h2)),
            (c, -h1 / (h2 * (h1 + h2))),
        ]
    };
    (0..m)
        .map(|i| {
            if i == 0 {
                one_sided(0, 1, 2)
            } else if i == m - 1 {
                let (h1, h2) = (x[m - 1] - x[m - 2], x[m - 2] - x[m - 3]);
                [
                    (m - 1, (2.0 * h1 + h2) / (h1 * (h1 + h2))),
                    (m - 2, -(h1 + h2) / (h1 * h2)),
                    (m - 3, h1 / (h2 * (h1 + h2))),
                ]
            } else {
                let (h1, h2) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                [
                    (i - 1, -h2 / (h1 * (h1 + h2))),
                    (i, (h2 - h1) / (h1 * h2)),
                    (i + 1, h1 / (h2 * (h1 + h2))),
                ]
            }
        })
        .collect()
}

pub fn fd_apply(st: &[Stencil], v: &[f64]) -> Vec<f64> {
    st.iter().map(|s| s.iter().map(|&(j, c)| c * v[j]).sum()).collect()
}

// ---------------------------------------------------------------------------
// Composite Gauss–Legendre rule for pointwise integrals.

const GAUSS_M: usize = 16;

/// Gauss–Legendre nodes and weights on [−1, 1] (Newton on Pₘ).
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; m];
    let mut ws = vec![0.0; m];
    for k in 0..(m + 1) / 2 {
        let mut z = (std::f64::consts::PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=m {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (z * pm - pm1) / (z * z - 1.0);
            let dz = pm / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        xs[k] = -z;
        xs[m - 1 - k] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        ws[k] = w;
        ws[m - 1 - k] = w;
    }
    (xs, ws)
}

fn gauss16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GAUSS_M))
}

/// Panel breakpoints on [a,b] refined geometrically (ratio 2) toward each focus.
pub fn graded_breaks(a: f64, b: f64, foci: &[f64]) -> Vec<f64> {
    let mut pts = vec![a, b];
    let len = b - a;
    for &c in foci {
        if !(c >= a && c <= b) {
            continue;
        }
        pts.push(c);
        // keep the innermost panels a few hundred ulps wide so no Gauss node
        // lands on the focus itself
        let tiny = (1e-15 * len).max(1e-13 * c.abs());
        let mut d = 0.5 * len;
        while d > tiny {
            if c - d > a {
                pts.push(c - d);
            }
            if c + d < b {
                pts.push(c + d);
            }
            d *= 0.5;
        }
    }
    pts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    pts.dedup();
    pts
}

/// ∫ₐᵇ f with 16-point Gauss on every panel of `breaks`.
pub fn gauss_panels(f: impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    let (xs, ws) = gauss16();
    let mut total = 0.0;
    for p in breaks.windows(2) {
        let (mid, half) = (0.5 * (p[0] + p[1]), 0.5 * (p[1] - p[0]));
        if half <= 0.0 {
            continue;
        }
        let s: f64 = xs.iter().zip(ws).map(|(&t, &w)| w * f(mid + half * t)).sum();
        total += half * s;
    }
    total
}

/// ∫ₐᵇ f for integrands that are smooth except for (integrable) singular
/// or near-singular behaviour at the listed foci.
pub fn integrate_graded(f: impl Fn(f64) -> f64, a: f64, b: f64, foci: &[f64]) -> f64 {
    if b <= a {
        return 0.0;
    }
    gauss_panels(f, &graded_breaks(a, b, foci))
}
