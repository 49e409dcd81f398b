//! Time evolution of a single interface μ(t,x), x ∈ [−1,1], under the
//! cut-off transport equation
//!
//!   μ_t(x) = ∫₋₁¹ (μ'(x) − μ'(ξ)) K(x,ξ) dξ,   μ(t,±1) = c(t),
//!
//! discretized on the mirror image of a graded half grid and advanced with
//! classical RK4.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::KernelFamily;
use crate::par::Exec;
use crate::quadrature::{fd_apply, fd_stencils, Grid, Stencil};

/// Nodes −x_n..−x_1, 0, x_1..x_n with mirrored weights.
#[derive(Clone, Debug)]
pub struct SymGrid {
    pub half: Arc<Grid>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    stencils: Vec<Stencil>,
}

impl SymGrid {
    pub fn from_half(half: &Arc<Grid>) -> Arc<SymGrid> {
        let n = half.n();
        let (x, w) = (half.nodes(), half.weights());
        let mut nodes = Vec::with_capacity(2 * n + 1);
        let mut weights = Vec::with_capacity(2 * n + 1);
        for k in (1..=n).rev() {
            nodes.push(-x[k]);
            weights.push(w[k]);
        }
        nodes.push(0.0);
        weights.push(2.0 * w[0]);
        for k in 1..=n {
            nodes.push(x[k]);
            weights.push(w[k]);
        }
        let stencils = fd_stencils(&nodes);
        Arc::new(SymGrid { half: half.clone(), nodes, weights, stencils })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn center(&self) -> usize {
        self.half.n()
    }

    pub fn derivative(&self, mu: &[f64]) -> Vec<f64> {
        fd_apply(&self.stencils, mu)
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&z| f(z)).collect()
    }

    /// Even extension of values given on the half grid.
    pub fn even_extension(&self, half_values: &[f64]) -> Vec<f64> {
        let n = self.half.n();
        (0..self.len()).map(|k| half_values[k.abs_diff(n)]).collect()
    }

    /// max over nodes of |μ(x) − μ(−x)|/2.
    pub fn odd_part(&self, mu: &[f64]) -> f64 {
        let m = mu.len();
        (0..m / 2).map(|k| 0.5 * (mu[k] - mu[m - 1 - k]).abs()).fold(0.0, f64::max)
    }

    /// 𝔡 = min over nodes of |μ − |x||.
    pub fn dist(&self, mu: &[f64]) -> f64 {
        self.nodes.iter().zip(mu).map(|(z, m)| (m - z.abs()).abs()).fold(f64::INFINITY, f64::min)
    }
}

/// Boundary value c(t) at x = ±1.
#[derive(Clone, Debug, Serialize)]
pub enum Control {
    Constant(f64),
    /// Piecewise linear through (t, c) pairs; constant outside the table.
    Table(Vec<(f64, f64)>),
}

impl Control {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Control::Constant(c) => *c,
            Control::Table(tab) => {
                if t <= tab[0].0 {
                    return tab[0].1;
                }
                for p in tab.windows(2) {
                    if t <= p[1].0 {
                        let s = (t - p[0].0) / (p[1].0 - p[0].0);
                        return p[0].1 + s * (p[1].1 - p[0].1);
                    }
                }
                tab[tab.len() - 1].1
            }
        }
    }

    pub fn slope(&self, t: f64) -> f64 {
        match self {
            Control::Constant(_) => 0.0,
            Control::Table(tab) => tab
                .windows(2)
                .find(|p| t >= p[0].0 && t < p[1].0)
                .map(|p| (p[1].1 - p[0].1) / (p[1].0 - p[0].0))
                .unwrap_or(0.0),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DynamicsState {
    pub t: f64,
    pub mu: Vec<f64>,
    pub c: f64,
    pub dist: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Sample {
    pub t: f64,
    pub dist: f64,
    pub odd_part: f64,
    /// Index into `Trajectory::snapshots`, when one was kept.
    pub snapshot: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub final_state: DynamicsState,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct Dynamics {
    pub grid: Arc<SymGrid>,
    pub family: KernelFamily,
    pub control: Control,
    pub exec: Exec,
}

impl Dynamics {
    pub fn new(grid: Arc<SymGrid>, control: Control) -> Self {
        Dynamics { grid, family: KernelFamily::EulerLog, control, exec: Exec::default() }
    }

    pub fn state(&self, t: f64, mu: Vec<f64>) -> DynamicsState {
        let dist = self.grid.dist(&mu);
        DynamicsState { t, c: self.control.value(t), mu, dist }
    }

    /// Right-hand side on all nodes; the two boundary entries carry c'(t).
    pub fn rhs(&self, mu: &[f64], t: f64) -> Result<Vec<f64>> {
        if mu.len() != self.grid.len() {
            return Err(Error::Domain("state length does not match grid".into()));
        }
        self.rhs_with_slope(mu, &self.grid.derivative(mu), t)
    }

    /// Right-hand side with the slope μ' supplied by the caller.
    pub fn rhs_with_slope(&self, mu: &[f64], d: &[f64], t: f64) -> Result<Vec<f64>> {
        let g = &self.grid;
        let m = g.len();
        if mu.len() != m || d.len() != m {
            return Err(Error::Domain("state length does not match grid".into()));
        }
        let (z, w) = (&g.nodes, &g.weights);
        let fam = self.family;
        let mut out = self.exec.map(m, |k| {
            if k == 0 || k == m - 1 {
                return 0.0;
            }
            let mut s = 0.0;
            for j in 0..m {
                if j == k {
                    continue;
                }
                let sp = z[k] + z[j];
                let sm = z[k] - z[j];
                let yp = mu[k] + mu[j];
                let ym = mu[k] - mu[j];
                let kern = match fam {
                    KernelFamily::EulerLog => ((sp * sp + yp * yp) / (sm * sm + ym * ym)).ln(),
                    f => f.h(sp * sp + yp * yp) - f.h(sm * sm + ym * ym),
                };
                s += w[j] * (d[k] - d[j]) * kern;
            }
            s
        });
        let cs = self.control.slope(t);
        out[0] = cs;
        out[m - 1] = cs;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { t, last_valid: mu.to_vec() });
        }
        Ok(out)
    }

    /// One RK4 step; boundary values are reset to c(t+dt) afterwards.
    pub fn step(&self, s: &DynamicsState, dt: f64) -> Result<DynamicsState> {
        let m = s.mu.len();
        let axpy = |a: &[f64], k: &[f64], h: f64| -> Vec<f64> { a.iter().zip(k).map(|(x, v)| x + h * v).collect() };
        let blow = |e: Error| match e {
            Error::BlowUp { .. } => Error::BlowUp { t: s.t, last_valid: s.mu.clone() },
            e => e,
        };
        let k1 = self.rhs(&s.mu, s.t).map_err(blow)?;
        let k2 = self.rhs(&axpy(&s.mu, &k1, 0.5 * dt), s.t + 0.5 * dt).map_err(blow)?;
        let k3 = self.rhs(&axpy(&s.mu, &k2, 0.5 * dt), s.t + 0.5 * dt).map_err(blow)?;
        let k4 = self.rhs(&axpy(&s.mu, &k3, dt), s.t + dt).map_err(blow)?;
        let mut mu: Vec<f64> = (0..m).map(|i| s.mu[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        let t = s.t + dt;
        let c = self.control.value(t);
        mu[0] = c;
        mu[m - 1] = c;
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { t: s.t, last_valid: s.mu.clone() });
        }
        Ok(DynamicsState { t, dist: self.grid.dist(&mu), mu, c })
    }

    /// Integrate to `t_end` with steps of at most `dt`, sampling 𝔡 every
    /// `sample_every` steps and keeping a snapshot every `snapshot_every`
    /// samples (0 disables snapshots).
    pub fn evolve(&self, s0: &DynamicsState, t_end: f64, dt: f64, sample_every: usize, snapshot_every: usize) -> Result<Trajectory> {
        match self.evolve_partial(s0, t_end, dt, sample_every, snapshot_every)? {
            (tr, None) => Ok(tr),
            (_, Some(e)) => Err(e),
        }
    }

    /// As `evolve`, but a blow-up returns the trajectory up to the last
    /// valid state together with the error.
    pub fn evolve_partial(
        &self,
        s0: &DynamicsState,
        t_end: f64,
        dt: f64,
        sample_every: usize,
        snapshot_every: usize,
    ) -> Result<(Trajectory, Option<Error>)> {
        if !(dt > 0.0) || !(t_end >= s0.t) || !t_end.is_finite() {
            return Err(Error::Domain(format!("need dt > 0 and t_end >= t0, got dt={dt}, t_end={t_end}")));
        }
        let nsteps = ((t_end - s0.t) / dt).ceil() as usize;
        let h = if nsteps > 0 { (t_end - s0.t) / nsteps as f64 } else { 0.0 };
        let sample_every = sample_every.max(1);
        let mut samples = Vec::new();
        let mut snapshots = Vec::new();
        let mut record = |s: &DynamicsState, samples: &mut Vec<Sample>| {
            let snap = if snapshot_every > 0 && samples.len() % snapshot_every == 0 {
                snapshots.push((s.t, s.mu.clone()));
                Some(snapshots.len() - 1)
            } else {
                None
            };
            samples.push(Sample { t: s.t, dist: s.dist, odd_part: self.grid.odd_part(&s.mu), snapshot: snap });
        };
        let mut s = s0.clone();
        record(&s, &mut samples);
        for k in 1..=nsteps {
            match self.step(&s, h) {
                Ok(next) => s = next,
                Err(e) => {
                    if samples.last().map(|p| p.t) != Some(s.t) {
                        record(&s, &mut samples);
                    }
                    return Ok((Trajectory { samples, snapshots, final_state: s, steps: k - 1 }, Some(e)));
                }
            }
            if k == nsteps {
                s.t = t_end;
            }
            if k % sample_every == 0 || k == nsteps {
                record(&s, &mut samples);
            }
        }
        Ok((Trajectory { samples, snapshots, final_state: s, steps: nsteps }, None))
    }

    /// Largest RK4 step that keeps every eigenvalue of the linearized
    /// interior update (central-difference Jacobian of the rhs at `mu`)
    /// inside the stability region, times 0.9. Capped at 0.1 when the
    /// linearization is (numerically) zero.
    pub fn stable_dt(&self, mu: &[f64]) -> f64 {
        const CAP: f64 = 0.1;
        let m = self.grid.len();
        if m < 3 {
            return CAP;
        }
        let free = m - 2;
        let cols = self.exec.map(free, |c| {
            let k = c + 1;
            let h = 1e-6 * mu[k].abs().max(1e-3);
            let (mut up, mut dn) = (mu.to_vec(), mu.to_vec());
            up[k] += h;
            dn[k] -= h;
            match (self.rhs(&up, 0.0), self.rhs(&dn, 0.0)) {
                (Ok(a), Ok(b)) => (1..m - 1).map(|i| (a[i] - b[i]) / (2.0 * h)).collect(),
                _ => vec![f64::NAN; free],
            }
        });
        let jac = nalgebra::DMatrix::from_fn(free, free, |i, j| cols[j][i]);
        if !jac.iter().all(|v| v.is_finite()) {
            return f64::NAN;
        }
        let eig = jac.complex_eigenvalues();
        let scale = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return CAP;
        }
        let mut dt = CAP;
        for z in eig.iter() {
            // eigenvalues with negligible size or positive real part (growth
            // the exact flow also has) do not restrict the step
            if z.norm() < 1e-8 * scale || z.re > 1e-6 * scale {
                continue;
            }
            // difference-noise around the imaginary axis counts as on it
            let z = nalgebra::Complex::new(z.re.min(0.0), z.im);
            let (mut lo, mut hi) = (0.0, dt);
            if rk4_amp(z * hi) <= 1.0 {
                continue;
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if rk4_amp(z * mid) <= 1.0 { lo = mid } else { hi = mid }
            }
            dt = lo;
        }
        0.9 * dt
    }
}

fn rk4_amp(w: nalgebra::Complex<f64>) -> f64 {
    let w2 = w * w;
    (1.0 + w + w2 / 2.0 + w2 * w / 6.0 + w2 * w2 / 24.0).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize, p: f64) -> (Arc<SymGrid>, Dynamics) {
        let g = SymGrid::from_half(&Grid::graded(n, p).unwrap());
        (g.clone(), Dynamics::new(g, Control::Constant(1.0)))
    }

    #[test]
    fn corner_is_stationary() {
        let (g, dy) = setup(32, 2.0);
        let mu = g.sample(f64::abs);
        let r = dy.rhs(&mu, 0.0).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12));
        let s = dy.step(&dy.state(0.0, mu.clone()), 1e-3).unwrap();
        assert!(s.mu.iter().zip(&mu).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(s.dist, 0.0);
    }

    #[test]
    fn constant_is_stationary() {
        let (g, dy) = setup(32, 2.0);
        let r = dy.rhs(&g.sample(|_| 0.7), 0.0).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn even_data_gives_odd_velocity() {
        // even μ, odd μ' and K(−x,−ξ) = K(x,ξ) make the right-hand side odd,
        // so only stationary even data stays even
        let (g, dy) = setup(32, 2.0);
        let mu = g.sample(|z| (0.01 + z * z).sqrt() + 0.1 * z * z);
        let r = dy.rhs(&mu, 0.0).unwrap();
        let m = r.len();
        for k in 1..m - 1 {
            assert!((r[k] + r[m - 1 - k]).abs() < 1e-12 * (1.0 + r[k].abs()));
        }
        assert!(r.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn boundary_follows_control() {
        let g = SymGrid::from_half(&Grid::graded(16, 2.0).unwrap());
        let ctl = Control::Table(vec![(0.0, 1.0), (1.0, 1.2)]);
        let dy = Dynamics::new(g.clone(), ctl.clone());
        let mut mu = g.sample(|z| (0.01 + z * z).sqrt());
        let m = mu.len();
        mu[0] = 1.0;
        mu[m - 1] = 1.0;
        let s = dy.step(&dy.state(0.0, mu), 1e-4).unwrap();
        assert_eq!(s.mu[0], ctl.value(1e-4));
        assert_eq!(s.mu[m - 1], ctl.value(1e-4));
    }

    #[test]
    fn blow_up_is_reported() {
        let (g, dy) = setup(16, 2.0);
        let mut mu = g.sample(|z| z.abs());
        mu[3] = f64::NAN;
        assert!(matches!(dy.step(&dy.state(0.0, mu), 1e-3), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn trajectory_is_monotone_in_time() {
        let (g, dy) = setup(16, 1.5);
        let mu = g.sample(|z| (1e-4 + z * z).sqrt());
        let dt = dy.stable_dt(&mu);
        let tr = dy.evolve(&dy.state(0.0, mu), 20.0 * dt, dt, 2, 3).unwrap();
        assert!(tr.samples.windows(2).all(|p| p[1].t > p[0].t));
        assert_eq!(tr.samples.last().unwrap().t, 20.0 * dt);
        assert!(!tr.snapshots.is_empty());
    }

    #[test]
    fn control_table() {
        let c = Control::Table(vec![(0.0, 1.0), (2.0, 3.0)]);
        assert_eq!(c.value(1.0), 2.0);
        assert_eq!(c.value(5.0), 3.0);
        assert_eq!(c.slope(1.0), 1.0);
        assert_eq!(c.slope(3.0), 0.0);
    }
}
