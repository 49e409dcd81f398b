//! The linearization L_λ of the stationary functional at the straight
//! profile f = x:
//!
//!   L u = A₁ u' + A₂ u + ∫₀¹ M(x,ξ) u'(ξ) dξ,   M = D₂ + ∫_ξ¹ D₁ dτ,
//!
//! its pointwise coefficients, the collocation assembly on a grid, and the
//! reduced second-kind form (I + O_λ) u' = B_λ g.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{eval_r1, log_ratio_sq, logplus_unchecked};
use crate::par::Exec;
use crate::quadrature::{fd_stencils, gauss_panels, graded_breaks, integrate_graded, xlogx, Grid, GridFn};

// ---------------------------------------------------------------------------
// pointwise coefficients

/// ∫₀¹ log((x+τ)/(x−τ))² dτ.
pub fn corner_moment(x: f64) -> f64 {
    2.0 * (xlogx(1.0 + x) - 2.0 * xlogx(x) - xlogx(1.0 - x))
}

fn check_args(x: f64, lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) || !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("need x in [0,1], λ >= 0; got x={x}, λ={lambda}")));
    }
    Ok(())
}

/// ∫₀¹ K₁(x,τ,y_λ) dτ.
fn k1_moment(x: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return corner_moment(x);
    }
    let xh = x / lambda;
    let lr = integrate_graded(|t| eval_r1(xh, t / lambda).ln(), 0.0, 1.0, &[0.0]);
    corner_moment(x) - 4.0 * lr
}

/// ∫₀¹ y_λ'(τ) K₂(x,τ,y_λ) dτ.
pub fn k2_moment(x: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return corner_moment(x);
    }
    integrate_graded(|t| t / lambda.hypot(t) * log_ratio_sq(x, t), 0.0, 1.0, &[0.0, x])
}

pub fn coeff_a1(x: f64, lambda: f64) -> Result<f64> {
    check_args(x, lambda)?;
    if lambda == 0.0 {
        if x == 0.0 {
            return Ok(2.0);
        }
        return Ok(corner_moment(x) / (x * logplus_unchecked(x * x)));
    }
    let y = lambda.hypot(x);
    Ok(k1_moment(x, lambda) / (y * logplus_unchecked(y * y)))
}

/// The B₂ term of A₂, in the scaled variables x̂ = x/λ.
pub fn coeff_b2(x: f64, lambda: f64) -> Result<f64> {
    check_args(x, lambda)?;
    if lambda == 0.0 {
        if x == 0.0 {
            return Ok(0.0);
        }
        return Ok(2.0 * x * (1.0 + 1.0 / (x * x)).ln());
    }
    let xh = x / lambda;
    let sx = xh.hypot(1.0);
    let c = 4.0 * xh / sx;
    let f = |t: f64| {
        let th = t / lambda;
        let st = th.hypot(1.0);
        let r = eval_r1(xh, th);
        let m = xh * st + th * sx;
        if m == 0.0 {
            return 0.0;
        }
        let f1 = -th * r / (st * m * (1.0 + r * r));
        let f2 = (m / st) * th * r / ((xh + th) * (xh + th) + r * r * (xh - th) * (xh - th));
        c * (f1 + f2)
    };
    Ok(integrate_graded(f, 0.0, 1.0, &[0.0, x]))
}

pub fn coeff_a2(x: f64, lambda: f64) -> Result<f64> {
    check_args(x, lambda)?;
    if x == 0.0 {
        return Err(Error::Domain("A2 is unbounded at x = 0".into()));
    }
    if lambda == 0.0 {
        return Ok(2.0 * (1.0 + 1.0 / (x * x)).ln() / (x * logplus_unchecked(x * x)));
    }
    let y = lambda.hypot(x);
    let num = k1_moment(x, lambda) - x / y * k2_moment(x, lambda) + coeff_b2(x, lambda)?;
    Ok(num / (x * y * logplus_unchecked(y * y)))
}

/// D₂(x,ξ) = −K₂(x,ξ,y_λ) ξ/y_λ(ξ) / (x log⁺(x²+λ²)).
pub fn kernel_d2(x: f64, xi: f64, lambda: f64) -> f64 {
    let s = if lambda == 0.0 { 1.0 } else { xi / lambda.hypot(xi) };
    -log_ratio_sq(x, xi) * s / (x * logplus_unchecked(x * x + lambda * lambda))
}

/// D₁(x,τ), the kernel whose tail integral enters M.
pub fn kernel_d1(x: f64, t: f64, lambda: f64) -> f64 {
    let l2 = x * x + lambda * lambda;
    let lp = logplus_unchecked(l2);
    if lambda == 0.0 {
        return 4.0 / ((x * x + t * t) * lp);
    }
    let w = x * l2.sqrt() * lp;
    let (xh, th) = (x / lambda, t / lambda);
    let (sx, st) = (xh.hypot(1.0), th.hypot(1.0));
    let r = eval_r1(xh, th);
    let m = th * sx + xh * st;
    let d1 = 4.0 * th * xh * r / ((1.0 + r * r) * m * (1.0 + th * th));
    let d2 = m / (1.0 + th * th) * (4.0 * xh * th * r / ((xh + th) * (xh + th) + (xh - th) * (xh - th) * r * r));
    let ty = lambda.hypot(t);
    let d3 = -lambda * lambda / (ty * ty * ty) * log_ratio_sq(x, t) / (x * lp);
    (d1 + d2) / w + d3
}

/// ∫_ξ¹ D₁(x,τ) dτ.
pub fn kernel_d1_tail(x: f64, xi: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 4.0 * ((1.0 / x).atan() - (xi / x).atan()) / (x * logplus_unchecked(x * x));
    }
    integrate_graded(|t| kernel_d1(x, t, lambda), xi, 1.0, &[xi, x])
}

pub fn kernel_m(x: f64, xi: f64, lambda: f64) -> Result<f64> {
    check_args(x, lambda)?;
    check_args(xi, lambda)?;
    if x == 0.0 {
        return Err(Error::Domain("M is defined for x > 0".into()));
    }
    if x == xi {
        return Err(Error::SingularKernel { x, xi });
    }
    Ok(kernel_d2(x, xi, lambda) + kernel_d1_tail(x, xi, lambda))
}

// ---------------------------------------------------------------------------
// assembly

/// Collocation discretization of L_λ on nodes 1..=n of a grid (u(0)=0).
///
/// Index k of the per-node vectors refers to node k+1. Derivatives v = u'
/// live on all n+1 nodes (v = D u with the three-point stencil), which is
/// what the integral operator acts on.
#[derive(Clone, Debug)]
pub struct LinearizedSystem {
    pub lambda: f64,
    pub grid: Arc<Grid>,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    /// Quadrature-weighted M: (Mw v)ₖ ≈ ∫ M(xₖ,ξ) v(ξ) dξ; n × (n+1).
    pub mw: DMatrix<f64>,
    /// FD derivative on all nodes from u at nodes 1..=n; (n+1) × n.
    pub diff: DMatrix<f64>,
    /// Local part diag(A₁)D + diag(A₂); n × n.
    pub local: DMatrix<f64>,
    /// B_λ = D (local)⁻¹; (n+1) × n.
    pub bop: DMatrix<f64>,
    /// O_λ = B_λ Mw; (n+1) × (n+1).
    pub omat: DMatrix<f64>,
}

pub fn assemble(lambda: f64, grid: &Arc<Grid>) -> Result<LinearizedSystem> {
    assemble_with(lambda, grid, Exec::default())
}

pub fn assemble_with(lambda: f64, grid: &Arc<Grid>, exec: Exec) -> Result<LinearizedSystem> {
    check_args(0.0, lambda)?;
    let n = grid.n();
    let x = grid.nodes();

    let coeffs: Vec<Result<(f64, f64)>> = exec.map(n, |k| Ok((coeff_a1(x[k + 1], lambda)?, coeff_a2(x[k + 1], lambda)?)));
    let mut a1 = Vec::with_capacity(n);
    let mut a2 = Vec::with_capacity(n);
    for c in coeffs {
        let (p, q) = c?;
        a1.push(p);
        a2.push(q);
    }

    let s: Vec<f64> = x
        .iter()
        .map(|&xi| {
            let y = lambda.hypot(xi);
            if y > 0.0 {
                xi / y
            } else {
                1.0
            }
        })
        .collect();
    let rows: Vec<Vec<f64>> = exec.map(n, |k| mw_row(grid, k + 1, lambda, &s));
    let mut mw = DMatrix::zeros(n, n + 1);
    for (k, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            mw[(k, j)] = *v;
        }
    }

    let st = fd_stencils(x);
    let mut diff = DMatrix::zeros(n + 1, n);
    for (i, sten) in st.iter().enumerate() {
        for &(j, c) in sten {
            if j > 0 {
                diff[(i, j - 1)] += c;
            }
        }
    }
    let mut local = diff.rows(1, n).into_owned();
    for k in 0..n {
        local.row_mut(k).scale_mut(a1[k]);
        local[(k, k)] += a2[k];
    }
    let lu = local.clone().lu();
    let inv = lu
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem { sigma_min: sigma_min_of(&local) })?;
    let bop = &diff * inv;
    let omat = &bop * &mw;

    let sys = LinearizedSystem { lambda, grid: grid.clone(), a1, a2, mw, diff, local, bop, omat };
    if sys.all_finite() {
        Ok(sys)
    } else {
        Err(Error::NonFinite(format!("assembled operator at λ={lambda}")))
    }
}

/// Row of Mw for collocation node i.
fn mw_row(grid: &Grid, i: usize, lambda: f64, s: &[f64]) -> Vec<f64> {
    let x = grid.nodes();
    let w = grid.weights();
    let xi = x[i];
    let m = x.len();
    let lp = logplus_unchecked(xi * xi + lambda * lambda);
    // D₂ part through the log-subtracted rule
    let c = grid.log_singular_row(i);
    let mut row: Vec<f64> = (0..m)
        .map(|j| {
            let plus = (xi + x[j]) * (xi + x[j]);
            -s[j] / (xi * lp) * (w[j] * plus.ln() - c[j])
        })
        .collect();
    // tail ∫_{x_j}^1 D₁ accumulated panel by panel from the right
    if lambda == 0.0 {
        for j in 0..m {
            row[j] += w[j] * kernel_d1_tail(xi, x[j], 0.0);
        }
    } else {
        let mut tail = 0.0;
        for j in (0..m).rev() {
            row[j] += w[j] * tail;
            if j > 0 {
                let (a, b) = (x[j - 1], x[j]);
                let f = |t: f64| kernel_d1(xi, t, lambda);
                let mut foci = Vec::new();
                if j == i || j - 1 == i {
                    foci.push(xi);
                }
                if j == 1 {
                    foci.push(0.0);
                }
                let piece = if foci.is_empty() { gauss_panels(f, &[a, b]) } else { gauss_panels(f, &graded_breaks(a, b, &foci)) };
                tail += piece;
            }
        }
    }
    row
}

fn sigma_min_of(a: &DMatrix<f64>) -> f64 {
    a.clone().svd(false, false).singular_values.min()
}

impl LinearizedSystem {
    pub fn n(&self) -> usize {
        self.grid.n()
    }

    fn all_finite(&self) -> bool {
        self.a1.iter().chain(&self.a2).all(|v| v.is_finite())
            && self.mw.iter().all(|v| v.is_finite())
            && self.omat.iter().all(|v| v.is_finite())
            && self.bop.iter().all(|v| v.is_finite())
    }

    /// The full collocation matrix L = diag(A₁)D + diag(A₂) + Mw D on u.
    pub fn direct_matrix(&self) -> DMatrix<f64> {
        &self.local + &self.mw * &self.diff
    }

    /// I + O_λ acting on u' at all nodes.
    pub fn second_kind_matrix(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n() + 1, self.n() + 1) + &self.omat
    }

    /// p = A₂/A₁ at nodes 1..=n.
    pub fn p(&self) -> Vec<f64> {
        self.a2.iter().zip(&self.a1).map(|(b, a)| b / a).collect()
    }

    /// Discrete integrating factor (D + diag p)⁻¹ on nodes 1..=n, so that
    /// B g = D E (g/A₁).
    pub fn integrating_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.n();
        let mut m = self.diff.rows(1, n).into_owned();
        for (k, pk) in self.p().into_iter().enumerate() {
            m[(k, k)] += pk;
        }
        let sm = sigma_min_of(&m);
        m.try_inverse().ok_or(Error::SingularSystem { sigma_min: sm })
    }

    /// Continuous counterpart of the integrating factor: row k holds
    /// wⱼ exp(−∫_{ξⱼ}^{xₖ} p) for ξⱼ ≤ xₖ, from cumulative trapezoid sums of
    /// p and with the exponent clamped at −700.
    pub fn exp_weights(&self) -> DMatrix<f64> {
        let n = self.n();
        let x = self.grid.nodes();
        let w = self.grid.weights();
        let p = self.p();
        // cumulative ∫_{x_1}^{x_k} p; the stretch (0, x_1] is excluded since p ~ 1/x
        let mut cum = vec![0.0; n];
        for k in 1..n {
            cum[k] = cum[k - 1] + 0.5 * (p[k] + p[k - 1]) * (x[k + 1] - x[k]);
        }
        let mut e = DMatrix::zeros(n, n);
        for k in 0..n {
            for j in 0..=k {
                let expo = (-(cum[k] - cum[j])).max(-700.0);
                e[(k, j)] = w[j + 1] * expo.exp();
            }
        }
        e
    }

    fn g_interior(&self, g: &GridFn) -> Result<DVector<f64>> {
        if g.values.len() != self.grid.len() {
            return Err(Error::Domain("right-hand side lives on a different grid".into()));
        }
        if g.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("right-hand side".into()));
        }
        Ok(DVector::from_column_slice(&g.values[1..]))
    }

    fn to_gridfn(&self, u: &DVector<f64>) -> GridFn {
        let mut vals = vec![0.0];
        vals.extend(u.iter());
        let du = &self.diff * u;
        let mut f = GridFn::new(self.grid.clone(), vals);
        f.derivative = Some(du.iter().copied().collect());
        f
    }

    /// Solve L u = g through (I + O) u' = B g, then recover u.
    pub fn solve(&self, g: &GridFn) -> Result<GridFn> {
        let gv = self.g_interior(g)?;
        let m = self.second_kind_matrix();
        let rhs = &self.bop * &gv;
        let v = m.clone().lu().solve(&rhs).ok_or_else(|| Error::SingularSystem { sigma_min: sigma_min_of(&m) })?;
        let inner = &gv - &self.mw * &v;
        let u = self
            .local
            .clone()
            .lu()
            .solve(&inner)
            .ok_or_else(|| Error::SingularSystem { sigma_min: sigma_min_of(&self.local) })?;
        Ok(self.to_gridfn(&u))
    }

    /// Solve L u = g by LU on the assembled collocation matrix.
    pub fn solve_direct(&self, g: &GridFn) -> Result<GridFn> {
        let gv = self.g_interior(g)?;
        let l = self.direct_matrix();
        let u = l.clone().lu().solve(&gv).ok_or_else(|| Error::SingularSystem { sigma_min: sigma_min_of(&l) })?;
        Ok(self.to_gridfn(&u))
    }

    /// Apply L to u (values on all nodes, u(0) ignored and taken as 0).
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let uv = DVector::from_column_slice(&u[1..]);
        (self.direct_matrix() * uv).iter().copied().collect()
    }

    /// Smallest singular value of I + O_λ in the discrete L² norm,
    /// i.e. of W^{1/2}(I+O)W^{−1/2} over nodes with positive weight.
    pub fn sigma_min_l2(&self) -> f64 {
        let w = self.grid.weights();
        let idx: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0).collect();
        let m = self.second_kind_matrix();
        let k = idx.len();
        let s = DMatrix::from_fn(k, k, |a, b| {
            let (i, j) = (idx[a], idx[b]);
            w[i].sqrt() * m[(i, j)] / w[j].sqrt()
        });
        sigma_min_of(&s)
    }

    /// Weighted L² operator norm of rows of O restricted to x < δ.
    pub fn window_norm(&self, delta: f64) -> f64 {
        let w = self.grid.weights();
        let x = self.grid.nodes();
        let idx: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0).collect();
        let k = idx.len();
        let s = DMatrix::from_fn(k, k, |a, b| {
            let (i, j) = (idx[a], idx[b]);
            if x[i] < delta {
                w[i].sqrt() * self.omat[(i, j)] / w[j].sqrt()
            } else {
                0.0
            }
        });
        s.svd(false, false).singular_values.max()
    }
}

/// Standalone form of the linear solve.
pub fn solve_linear(sys: &LinearizedSystem, g: &GridFn) -> Result<GridFn> {
    sys.solve(g)
}
