//! Numerical checks of the quadratic-form argument behind the triviality of
//! ker(I+O₀), positivity of the Hilbert-type kernels, and the
//! difference-quotient stability bound.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::quadrature::{derivative, Grid, GridFn};

/// The four forms for one test function, the second one in both of its
/// representations, and the nonnegative groups they split into.
#[derive(Clone, Debug, Serialize)]
pub struct QuadraticFormReport {
    pub j1: f64,
    /// −∫∫ (u(x)−u(ξ))²/(x+ξ)
    pub j2_double: f64,
    /// −2∫u² log((1+x)/x) + 2∫∫ u(x)u(ξ)/(x+ξ)
    pub j2_single: f64,
    pub j2_gap: f64,
    pub j3: f64,
    pub j4: f64,
    /// first part of 𝔍₂ plus 𝔍₃: 2∫u² log((x+1/x)/(1+x))
    pub log_group: f64,
    /// 2∫∫ u(x)u(ξ)/(x+ξ)
    pub hilbert_group: f64,
    /// 4∫∫ u(x)u(ξ) xξ/((x²+ξ²)(x+ξ))
    pub schur_group: f64,
    pub total: f64,
}

impl QuadraticFormReport {
    /// Smallest of 𝔍₁ and the grouped pieces.
    pub fn min_group(&self) -> f64 {
        [self.j1, self.log_group, self.hilbert_group, self.schur_group].into_iter().fold(f64::INFINITY, f64::min)
    }
}

fn double_sum(w: &[f64], k: impl Fn(usize, usize) -> f64 + Sync, exec: Exec) -> f64 {
    let m = w.len();
    exec.map(m, |i| {
        let mut s = 0.0;
        for j in 0..m {
            s += w[j] * k(i, j);
        }
        w[i] * s
    })
    .iter()
    .sum()
}

/// 0·log∞ is read as 0 wherever u vanishes.
fn safe(a: f64, b: f64) -> f64 {
    if a == 0.0 { 0.0 } else { a * b }
}

pub fn eval_j_forms(u: &GridFn) -> Result<QuadraticFormReport> {
    eval_j_forms_with(u, Exec::default())
}

pub fn eval_j_forms_with(u: &GridFn, exec: Exec) -> Result<QuadraticFormReport> {
    let x = u.grid.nodes();
    let w = u.grid.weights();
    let v = &u.values;
    if v[0] != 0.0 {
        return Err(Error::Domain(format!("test function must vanish at 0, got u(0)={}", v[0])));
    }
    if v.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("test function".into()));
    }
    let m = x.len();
    let u1_end = v[m - 1];
    let single = |g: &dyn Fn(usize) -> f64| (0..m).map(|i| w[i] * g(i)).sum::<f64>();

    let j1 = single(&|i| {
        let d = u1_end - v[i];
        safe(d * d, ((1.0 + x[i]) / (1.0 - x[i])).abs().ln())
    });
    let pair = |i: usize, j: usize| x[i] + x[j];
    let j2_double = -double_sum(
        w,
        |i, j| {
            let d = v[i] - v[j];
            if d == 0.0 { 0.0 } else { d * d / pair(i, j) }
        },
        exec,
    );
    let hilbert = double_sum(w, |i, j| safe(v[i] * v[j], 1.0 / pair(i, j)), exec);
    let log_a = single(&|i| safe(v[i] * v[i], ((1.0 + x[i]) / x[i]).ln()));
    let j2_single = -2.0 * log_a + 2.0 * hilbert;
    let j3 = 2.0 * single(&|i| safe(v[i] * v[i], (1.0 / (x[i] * x[i])).ln_1p()));
    let j4 = 4.0 * double_sum(w, |i, j| safe(v[i] * v[j], x[i] / (x[i] * x[i] + x[j] * x[j])), exec);
    let log_group = 2.0 * single(&|i| safe(v[i] * v[i], ((x[i] + 1.0 / x[i]) / (1.0 + x[i])).ln()));
    let schur = 4.0
        * double_sum(
            w,
            |i, j| {
                let (a, b) = (x[i], x[j]);
                safe(v[i] * v[j], a * b / ((a * a + b * b) * (a + b)))
            },
            exec,
        );
    let r = QuadraticFormReport {
        j1,
        j2_double,
        j2_single,
        j2_gap: (j2_double - j2_single).abs(),
        j3,
        j4,
        log_group,
        hilbert_group: 2.0 * hilbert,
        schur_group: schur,
        total: j1 + j2_double + j3 + j4,
    };
    if [r.j1, r.j2_double, r.j2_single, r.j3, r.j4, r.schur_group].iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("quadratic form".into()));
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PsdKernel {
    /// 1/(x+ξ)
    Hilbert,
    /// 1/(x²+ξ²)
    InverseSquares,
    /// xξ/(x²+ξ²)
    ScaledInverseSquares,
    /// xξ/((x²+ξ²)(x+ξ))
    Hadamard,
    /// xξ
    RankOne,
}

impl PsdKernel {
    pub const ALL: [PsdKernel; 5] =
        [PsdKernel::Hilbert, PsdKernel::InverseSquares, PsdKernel::ScaledInverseSquares, PsdKernel::Hadamard, PsdKernel::RankOne];

    pub fn eval(&self, x: f64, xi: f64) -> f64 {
        match self {
            PsdKernel::Hilbert => 1.0 / (x + xi),
            PsdKernel::InverseSquares => 1.0 / (x * x + xi * xi),
            PsdKernel::ScaledInverseSquares => x * xi / (x * x + xi * xi),
            PsdKernel::Hadamard => x * xi / ((x * x + xi * xi) * (x + xi)),
            PsdKernel::RankOne => x * xi,
        }
    }
}

/// Eigenvalues (ascending) of √W K √W over the nodes with x > 0 and w > 0.
pub fn psd_spectrum(kernel: PsdKernel, grid: &Grid) -> Vec<f64> {
    let idx: Vec<usize> = (0..grid.len()).filter(|&i| grid.nodes()[i] > 0.0 && grid.weights()[i] > 0.0).collect();
    let x = grid.nodes();
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let m = idx.len();
    let g = DMatrix::from_fn(m, m, |a, b| {
        let (i, j) = (idx[a], idx[b]);
        sw[i] * kernel.eval(x[i], x[j]) * sw[j]
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(g).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn psd_probe(kernel: PsdKernel, grid: &Grid) -> f64 {
    psd_spectrum(kernel, grid)[0]
}

/// Υ_f(x,y) = (f(x)−f(y))/(x−y) for the piecewise-linear interpolant of the
/// node values; at x = y the interpolated grid derivative.
pub fn diff_quotient(f: &GridFn, x: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(Error::Domain(format!("points must lie in [0,1], got ({x}, {y})")));
    }
    if x == y {
        let d = match &f.derivative {
            Some(d) => d.clone(),
            None => derivative(f).values,
        };
        return Ok(interp(f.grid.nodes(), &d, x));
    }
    let nodes = f.grid.nodes();
    Ok((interp(nodes, &f.values, x) - interp(nodes, &f.values, y)) / (x - y))
}

fn interp(nodes: &[f64], v: &[f64], x: f64) -> f64 {
    let k = nodes.partition_point(|&t| t <= x).clamp(1, nodes.len() - 1);
    let (a, b) = (nodes[k - 1], nodes[k]);
    let s = (x - a) / (b - a);
    v[k - 1] + s * (v[k] - v[k - 1])
}

/// u(x) = a₀x + Σₖ aₖ sin(kπx)/(kπ), the primitive of a bounded random
/// cosine series, so u(0) = 0 and |u'| ≤ Σ|aₖ|.
#[derive(Clone, Debug)]
pub struct RandomLip {
    pub coeffs: Vec<f64>,
}

impl RandomLip {
    pub fn draw(rng: &mut impl Rng, modes: usize) -> Self {
        RandomLip { coeffs: (0..=modes).map(|k| rng.gen_range(-1.0..1.0) / (1.0 + k as f64)).collect() }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.coeffs[0] * x
            + self.coeffs[1..].iter().enumerate().map(|(k, a)| {
                let kp = (k + 1) as f64 * PI;
                a * (kp * x).sin() / kp
            }).sum::<f64>()
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.coeffs[0] + self.coeffs[1..].iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * PI * x).cos()).sum::<f64>()
    }

    pub fn sample(&self, grid: &Arc<Grid>) -> GridFn {
        grid.sample(|x| self.value(x))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub random_functions: usize,
    pub quotient_pairs: usize,
    pub form_grid: (usize, f64),
    pub psd_sizes: Vec<usize>,
    pub psd_grading: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0x5eed,
            random_functions: 100,
            quotient_pairs: 10_000,
            form_grid: (256, 2.0),
            psd_sizes: vec![64, 128],
            psd_grading: 2.0,
        }
    }
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = Grid::graded(cfg.form_grid.0, cfg.form_grid.1)?;
    let mut checks = Vec::new();
    let mut push = |name: String, value: f64, threshold: f64, passed: bool| {
        checks.push(CheckResult { name, passed, value, threshold });
    };

    let (mut worst_group, mut worst_gap) = (f64::INFINITY, 0.0f64);
    for _ in 0..cfg.random_functions {
        let u = RandomLip::draw(&mut rng, 8);
        let r = eval_j_forms(&u.sample(&grid))?;
        worst_group = worst_group.min(r.min_group());
        worst_gap = worst_gap.max(r.j2_gap);
    }
    push("j_forms_min_group".into(), worst_group, -1e-10, worst_group >= -1e-10);
    push("j2_representation_gap".into(), worst_gap, 1e-6, worst_gap < 1e-6);

    for &n in &cfg.psd_sizes {
        let g = Grid::graded(n, cfg.psd_grading)?;
        for k in PsdKernel::ALL {
            let ev = psd_spectrum(k, &g);
            push(format!("psd_{k:?}_n{n}"), ev[0], -1e-10, ev[0] >= -1e-10);
            if k == PsdKernel::RankOne {
                let big = ev.iter().filter(|&&e| e > 1e-8).count();
                push(format!("rank_one_count_n{n}"), big as f64, 1.0, big == 1);
            }
        }
    }

    // pairs on a finer grid so interpolation sits well inside the bound
    let qgrid = Grid::graded(1024, 1.0)?;
    let dense: Vec<f64> = (0..=20_000).map(|i| i as f64 / 20_000.0).collect();
    let mut worst_excess = f64::NEG_INFINITY;
    let per = (cfg.quotient_pairs / 10).max(1);
    for _ in 0..10 {
        let f = RandomLip::draw(&mut rng, 6);
        let g = RandomLip::draw(&mut rng, 6);
        let bound = dense.iter().map(|&x| (f.slope(x) - g.slope(x)).abs()).fold(0.0, f64::max);
        let (ff, gg) = (f.sample(&qgrid).with_derivative(), g.sample(&qgrid).with_derivative());
        for _ in 0..per {
            let x: f64 = rng.gen();
            let y: f64 = if rng.gen_bool(0.05) { x } else { rng.gen() };
            let d = (diff_quotient(&ff, x, y)? - diff_quotient(&gg, x, y)?).abs();
            worst_excess = worst_excess.max(d - bound);
        }
    }
    push("diff_quotient_excess".into(), worst_excess, 1e-6, worst_excess <= 1e-6);

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(SuiteReport { seed: cfg.seed, checks, all_passed })
}
