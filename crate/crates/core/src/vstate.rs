//! Stationary (V-state) profiles: the residual functional F(f,λ) and the
//! frozen-Jacobian iteration ψ ← ψ − L_λ⁻¹ F(x+ψ, λ).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{euler_k1_k2, KernelFamily, KernelPoint, logplus_unchecked};
use crate::linop::{assemble_with, LinearizedSystem};
use crate::par::Exec;
use crate::quadrature::{fd_apply, fd_stencils, Grid, GridFn};

/// Discrete f = x + ψ with ψ(0) = 0.
#[derive(Clone, Debug)]
pub struct Profile {
    pub grid: Arc<Grid>,
    pub psi: Vec<f64>,
}

/// Heights and slopes derived from a profile.
#[derive(Clone, Debug)]
pub struct Derived {
    pub f: Vec<f64>,
    pub df: Vec<f64>,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

impl Profile {
    pub fn straight(grid: &Arc<Grid>) -> Self {
        Profile { grid: grid.clone(), psi: vec![0.0; grid.len()] }
    }

    pub fn from_psi(grid: &Arc<Grid>, mut psi: Vec<f64>) -> Result<Self> {
        if psi.len() != grid.len() {
            return Err(Error::Domain("ψ length does not match grid".into()));
        }
        psi[0] = 0.0;
        Ok(Profile { grid: grid.clone(), psi })
    }

    pub fn derived(&self, lambda: f64) -> Derived {
        let x = self.grid.nodes();
        let f: Vec<f64> = x.iter().zip(&self.psi).map(|(a, b)| a + b).collect();
        let df = fd_apply(&fd_stencils(x), &f);
        let y: Vec<f64> = f.iter().map(|&v| lambda.hypot(v)).collect();
        // y' is differenced directly so it coincides with the slope of the
        // even extension on the mirrored grid; y'(0) = 0 by evenness
        let mut dy = fd_apply(&fd_stencils(x), &y);
        dy[0] = 0.0;
        Derived { f, df, y, dy }
    }

    /// ‖ψ'‖∞ with the grid difference operator.
    pub fn lip(&self) -> f64 {
        fd_apply(&fd_stencils(self.grid.nodes()), &self.psi).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Weight x√(x²+λ²) log⁺(x²+λ²) dividing the stationary equation.
pub fn normalizer(x: f64, lambda: f64) -> f64 {
    let r2 = x * x + lambda * lambda;
    x * r2.sqrt() * logplus_unchecked(r2)
}

/// Per-node numerators y (y'∫K₁ − ∫y'K₂) (Euler kernel, log part of the
/// diagonal removed by subtraction), rows 1..=n; entry 0 is unused.
fn numerator_euler(grid: &Grid, d: &Derived, exec: Exec) -> Vec<f64> {
    let x = grid.nodes();
    let w = grid.weights();
    let m = x.len();
    let mut out = exec.map(m, |i| {
        if i == 0 {
            return 0.0;
        }
        let xi = x[i];
        let lam_i = grid_log_defect(grid, i);
        let (mut i1, mut i2) = (0.0, 0.0);
        for j in 0..m {
            if j == i {
                continue;
            }
            let p = KernelPoint::new(xi, x[j], d.y[i], d.y[j]);
            let (k1, k2) = euler_k1_k2(&p);
            i1 += w[j] * k1;
            i2 += w[j] * d.dy[j] * k2;
        }
        let (yi, si) = (d.y[i], d.dy[i]);
        let p1 = 4.0 * (xi * xi + yi * yi);
        let (p2, q2) = (4.0 * yi * yi, 4.0 * xi * xi);
        let slope = (1.0 + si * si).ln();
        let r1 = (p1 * p2 / q2).ln() - slope;
        let r2 = (p1 * q2 / p2).ln() - slope;
        i1 += w[i] * r1 - lam_i;
        i2 += w[i] * si * r2 - si * lam_i;
        yi * (si * i1 - i2)
    });
    out[0] = 0.0;
    out
}

/// c_ii of the subtracted log rule, i.e. ∫log(xᵢ−ξ)² minus its off-diagonal sum.
fn grid_log_defect(grid: &Grid, i: usize) -> f64 {
    let x = grid.nodes();
    let w = grid.weights();
    let xi = x[i];
    let off: f64 = x
        .iter()
        .zip(w)
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, (&xj, &wj))| wj * ((xi - xj) * (xi - xj)).ln())
        .sum();
    crate::quadrature::log_sq_moment(xi) - off
}

/// y(x)·Σⱼ wⱼ (y'(x)K₁ − y'(ξⱼ)K₂) for any kernel family. The coincident
/// term only keeps the mirrored interaction 2y'(x)K(x,−x).
pub fn numerator_combined(x: &[f64], w: &[f64], y: &[f64], dy: &[f64], fam: KernelFamily, exec: Exec) -> Vec<f64> {
    let m = x.len();
    exec.map(m, |i| {
        if x[i] == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        for j in 0..m {
            if j == i {
                continue;
            }
            let p = KernelPoint::new(x[i], x[j], y[i], y[j]);
            let a = p.args();
            let k1 = fam.h(a[0]) - fam.h(a[1]) + fam.h(a[2]) - fam.h(a[3]);
            let k2 = fam.h(a[0]) - fam.h(a[1]) - fam.h(a[2]) + fam.h(a[3]);
            s += w[j] * (dy[i] * k1 - dy[j] * k2);
        }
        let mirror = fam.h(4.0 * y[i] * y[i]) - fam.h(4.0 * x[i] * x[i]);
        s += w[i] * 2.0 * dy[i] * mirror;
        y[i] * s
    })
}

fn finish(grid: &Arc<Grid>, lambda: f64, mut num: Vec<f64>) -> Result<GridFn> {
    let x = grid.nodes();
    for i in 1..x.len() {
        num[i] /= normalizer(x[i], lambda);
    }
    num[0] = num[1] - x[1] * (num[2] - num[1]) / (x[2] - x[1]);
    if num.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("residual".into()));
    }
    Ok(GridFn::new(grid.clone(), num))
}

pub fn residual_f(p: &Profile, lambda: f64) -> Result<GridFn> {
    residual_f_with(p, lambda, KernelFamily::EulerLog, Exec::default())
}

pub fn residual_f_with(p: &Profile, lambda: f64, fam: KernelFamily, exec: Exec) -> Result<GridFn> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("λ must be >= 0, got {lambda}")));
    }
    let d = p.derived(lambda);
    if d.f[1..].iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("profile must stay positive for x > 0".into()));
    }
    let num = match fam {
        KernelFamily::EulerLog => numerator_euler(&p.grid, &d, exec),
        _ => numerator_combined(p.grid.nodes(), p.grid.weights(), &d.y, &d.dy, fam, exec),
    };
    finish(&p.grid, lambda, num)
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverConfig {
    pub n: usize,
    pub grading: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub delta_box: f64,
    /// Full Newton with a difference-quotient Jacobian instead of the
    /// frozen linearization.
    pub newton: bool,
    /// Use log√(δ²+r²) in the residual instead of the Euler kernel.
    pub delta_reg: Option<f64>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { n: 256, grading: 2.0, tol: 1e-9, max_iter: 200, delta_box: 0.25, newton: false, delta_reg: None, exec: Exec::default() }
    }
}

impl SolverConfig {
    fn family(&self) -> KernelFamily {
        match self.delta_reg {
            Some(delta) => KernelFamily::RegularizedLog { delta },
            None => KernelFamily::EulerLog,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VStateSolution {
    pub lambda: f64,
    pub profile: Profile,
    pub y: Vec<f64>,
    pub residual_sup: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// Interpolated crossing of y = x and the bracketing nodes.
    pub xstar: Option<(f64, (f64, f64))>,
    pub dist_to_corner: f64,
    /// ‖ψ₀'‖∞ of the first iterate.
    pub psi0_lip: f64,
}

impl VStateSolution {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.profile.grid
    }

    /// Build the diagnostics for a given profile without iterating.
    pub fn from_profile(lambda: f64, profile: Profile, residual_sup: f64) -> Self {
        let x = profile.grid.nodes().to_vec();
        let y: Vec<f64> = x.iter().zip(&profile.psi).map(|(a, b)| lambda.hypot(a + b)).collect();
        let dist = x.iter().zip(&y).map(|(a, b)| (b - a).abs()).fold(0.0, f64::max);
        let xstar = crossing(&x, &y);
        VStateSolution { lambda, profile, y, residual_sup, iterations: 0, residual_history: vec![residual_sup], xstar, dist_to_corner: dist, psi0_lip: 0.0 }
    }
}

fn crossing(x: &[f64], y: &[f64]) -> Option<(f64, (f64, f64))> {
    let g: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - a).collect();
    (1..x.len()).find(|&i| g[i - 1] > 0.0 && g[i] <= 0.0).map(|i| {
        let t = g[i - 1] / (g[i - 1] - g[i]);
        (x[i - 1] + t * (x[i] - x[i - 1]), (x[i - 1], x[i]))
    })
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, a| m.max(a.abs()))
}

pub fn solve_vstate(lambda: f64, cfg: &SolverConfig) -> Result<VStateSolution> {
    let grid = Grid::graded(cfg.n, cfg.grading)?;
    let sys = assemble_with(lambda, &grid, cfg.exec)?;
    solve_vstate_from(&sys, cfg, None)
}

/// Iterate from `start` (default ψ = 0) with a pre-assembled L_λ.
pub fn solve_vstate_from(sys: &LinearizedSystem, cfg: &SolverConfig, start: Option<Profile>) -> Result<VStateSolution> {
    let lambda = sys.lambda;
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("V-states need λ > 0, got {lambda}")));
    }
    let grid = sys.grid.clone();
    let n = grid.n();
    let fam = cfg.family();
    let frozen = sys.direct_matrix().lu();
    let mut prof = start.unwrap_or_else(|| Profile::straight(&grid));
    let mut history = Vec::new();
    let mut psi0_lip = 0.0;
    for k in 0..=cfg.max_iter {
        let f = residual_f_with(&prof, lambda, fam, cfg.exec)?;
        let r = sup(&f.values);
        history.push(r);
        if r < cfg.tol {
            let mut sol = VStateSolution::from_profile(lambda, prof, r);
            sol.iterations = k;
            sol.residual_history = history;
            sol.psi0_lip = psi0_lip;
            return Ok(sol);
        }
        if k == cfg.max_iter {
            break;
        }
        let rhs = DVector::from_column_slice(&f.values[1..]);
        let step = if cfg.newton {
            newton_jacobian(&prof, lambda, fam, cfg.exec, &f)?
                .lu()
                .solve(&rhs)
                .ok_or(Error::SingularSystem { sigma_min: 0.0 })?
        } else {
            frozen.solve(&rhs).ok_or(Error::SingularSystem { sigma_min: 0.0 })?
        };
        for j in 0..n {
            prof.psi[j + 1] -= step[j];
        }
        let lip = prof.lip();
        if k == 0 {
            psi0_lip = lip;
        }
        if !(lip <= cfg.delta_box) {
            return Err(Error::ContractionFailure { iteration: k + 1, lip, trace: history });
        }
    }
    Err(Error::Convergence(format!(
        "‖F‖ = {:.3e} after {} iterations (tol {:.1e})",
        history.last().copied().unwrap_or(f64::NAN),
        cfg.max_iter,
        cfg.tol
    )))
}

/// Difference-quotient Jacobian of the discrete residual w.r.t. ψ at nodes 1..=n.
pub fn newton_jacobian(p: &Profile, lambda: f64, fam: KernelFamily, exec: Exec, f0: &GridFn) -> Result<DMatrix<f64>> {
    let n = p.grid.n();
    let cols: Vec<Result<Vec<f64>>> = exec.map(n, |j| {
        let mut q = p.clone();
        let h = 1e-7 * p.grid.nodes()[j + 1].max(1e-3);
        q.psi[j + 1] += h;
        let f = residual_f_with(&q, lambda, fam, Exec::Sequential)?;
        Ok(f.values[1..].iter().zip(&f0.values[1..]).map(|(a, b)| (a - b) / h).collect())
    });
    let mut jac = DMatrix::zeros(n, n);
    for (j, c) in cols.into_iter().enumerate() {
        let c = c?;
        for i in 0..n {
            jac[(i, j)] = c[i];
        }
    }
    Ok(jac)
}

/// sup over nodes with x ≤ Cλ of |y(x)/λ − √(1+(x/λ)²)|.
pub fn hyperbola_gap(sol: &VStateSolution, c: f64) -> f64 {
    let l = sol.lambda;
    sol.grid()
        .nodes()
        .iter()
        .zip(&sol.y)
        .filter(|(&x, _)| x <= c * l)
        .map(|(&x, &y)| (y / l - (x / l).hypot(1.0)).abs())
        .fold(0.0, f64::max)
}
