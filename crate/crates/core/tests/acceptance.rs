//! Acceptance suite: one PASS/FAIL line per criterion, each with its
//! measured values and runtime. Criteria run one at a time so the runtime
//! budgets are not distorted by each other.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use cutoff_core::analysis_checks::{run_suite, SuiteConfig};
use cutoff_core::dynamics::{Control, Dynamics, SymGrid};
use cutoff_core::kernels::{eval_k1, eval_k2, eval_r1, log_ratio_sq, KernelFamily, KernelPoint};
use cutoff_core::linop::{assemble, coeff_a1, coeff_a2, coeff_b2};
use cutoff_core::model_case::{alpha_comparator, model_xstar, solve_model_case};
use cutoff_core::quadrature::Grid;
use cutoff_core::vstate::{hyperbola_gap, solve_vstate, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

struct Verdict {
    id: u32,
    title: &'static str,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Verdict {
    fn new(id: u32, title: &'static str) -> Self {
        Verdict { id, title, failures: Vec::new(), notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: String) {
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }

    /// Prints the line past the test harness capture, then fails the test
    /// if any check did.
    fn finish(mut self, elapsed: Duration, budget: Duration) {
        self.check(elapsed < budget, format!("runtime {:.2?} < {:.0?}", elapsed, budget));
        let status = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        let mut line = format!("{status} criterion {}: {} [{:.2?}]", self.id, self.title, elapsed);
        for f in &self.failures {
            line.push_str(&format!("\n    failed: {f}"));
        }
        for n in &self.notes {
            line.push_str(&format!("\n    ok: {n}"));
        }
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{line}");
        let _ = out.flush();
        assert!(self.failures.is_empty(), "criterion {} failed: {:?}", self.id, self.failures);
    }
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, a| m.max(a.abs()))
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|a| format!("{a:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|p| p[1] < p[0])
}

#[test]
fn criterion_1_kernel_identities() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let mut v = Verdict::new(1, "kernel identities on the hyperbola family");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut e2, mut e1, mut count) = (0.0f64, 0.0f64, 0);
    while count < 10_000 {
        // half log-uniform to reach the small-scale corner, half uniform
        let (x, xi, lambda) = if count % 2 == 0 {
            (log_uniform(&mut rng, 1e-4, 1.0), log_uniform(&mut rng, 1e-4, 1.0), log_uniform(&mut rng, 1e-4, 1.0))
        } else {
            (rng.gen_range(1e-4..=1.0), rng.gen_range(1e-4..=1.0), rng.gen_range(1e-4..=1.0))
        };
        if (x - xi).abs() <= 1e-6 {
            continue;
        }
        count += 1;
        let p = KernelPoint::on_hyperbola(x, xi, lambda);
        let k2 = eval_k2(&p, KernelFamily::EulerLog).unwrap();
        e2 = e2.max((k2 - log_ratio_sq(x, xi)).abs());
        let k1 = eval_k1(&p, KernelFamily::EulerLog).unwrap();
        let k10 = eval_k1(&KernelPoint::new(x, xi, x, xi), KernelFamily::EulerLog).unwrap();
        let r1 = eval_r1(x / lambda, xi / lambda);
        e1 = e1.max((k1 - k10 + 4.0 * r1.ln()).abs());
    }
    v.check(e2 < 1e-12, format!("max |K2 - log((x+xi)/(x-xi))^2| = {e2:.3e} < 1e-12 over {count} points"));
    v.check(e1 < 1e-12, format!("max |K1(y_l) - K1(y_0) + 4 log r1| = {e1:.3e} < 1e-12"));
    v.finish(t0.elapsed(), Duration::from_secs(1));
}

#[test]
fn criterion_2_model_case_asymptotics() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let mut v = Verdict::new(2, "model case residuals and asymptotic ratios");
    let lambdas = [1e-2, 1e-3, 1e-4];
    let (mut ar, mut xr) = (Vec::new(), Vec::new());
    for &l in &lambdas {
        let s = solve_model_case(l, 1e-12).unwrap();
        let (r1, r2) = s.residuals();
        v.check(r1.abs().max(r2.abs()) < 1e-10, format!("λ={l:e}: residuals ({r1:.2e}, {r2:.2e}) < 1e-10"));
        let (xs, comp) = model_xstar(&s).unwrap();
        let a = s.alpha / alpha_comparator(l);
        let x = xs / comp;
        v.check((0.85..=1.15).contains(&a), format!("λ={l:e}: α-ratio {a:.4} in [0.85, 1.15]"));
        v.check((0.85..=1.15).contains(&x), format!("λ={l:e}: x*-ratio {x:.4} in [0.85, 1.15]"));
        ar.push((a - 1.0).abs());
        xr.push((x - 1.0).abs());
    }
    v.check(strictly_decreasing(&ar), format!("|α-ratio − 1| decreasing: {}", sci(&ar)));
    v.check(strictly_decreasing(&xr), format!("|x*-ratio − 1| decreasing: {}", sci(&xr)));
    v.finish(t0.elapsed(), Duration::from_secs(1));
}

#[test]
fn criterion_3_coefficient_limits() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let mut v = Verdict::new(3, "limits and bounds of the operator coefficients (n=256)");
    let a = coeff_a1(1e-6, 0.0).unwrap();
    v.check((a - 2.0).abs() < 0.1, format!("A1(1e-6, 0) = {a:.5} within 0.1 of 2"));
    let grid = Grid::default_grid();
    let x = &grid.nodes()[1..];
    let a0: Vec<f64> = x.iter().map(|&x| coeff_a1(x, 0.0).unwrap()).collect();
    let dev = |l: f64| sup(x.iter().zip(&a0).map(|(&x, &b)| coeff_a1(x, l).unwrap() - b));
    let (d2, d4) = (dev(1e-2), dev(1e-4));
    v.check(d4 < d2, format!("max|A1(·,λ) − A1(·,0)|: {d4:.3e} at 1e-4 < {d2:.3e} at 1e-2"));
    let mut b2min = f64::INFINITY;
    for &l in &[1e-1, 1e-2, 1e-3] {
        let xa2: Vec<f64> = x.iter().map(|&x| x * coeff_a2(x, l).unwrap()).collect();
        let (lo, hi) = (xa2.iter().cloned().fold(f64::INFINITY, f64::min), xa2.iter().cloned().fold(0.0, f64::max));
        v.check(lo >= 0.2 && hi <= 20.0, format!("λ={l:e}: x·A2 in [{lo:.4}, {hi:.4}] ⊂ [0.2, 20]"));
        for &x in x {
            b2min = b2min.min(coeff_b2(x, l).unwrap());
        }
    }
    v.check(b2min >= -1e-10, format!("min B2 = {b2min:.3e} >= -1e-10"));
    v.finish(t0.elapsed(), Duration::from_secs(30));
}

#[test]
fn criterion_4_linear_operator() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let mut v = Verdict::new(4, "reduced solve vs direct collocation, smallest singular value of I+O0");
    let grid = Grid::default_grid();
    let ustar: Vec<f64> = grid.nodes().iter().map(|&x| x * (1.0 - 0.5 * x) + 0.1 * (3.0 * x).sin() * x).collect();
    for &l in &[0.0, 1e-2] {
        let sys = assemble(l, &grid).unwrap();
        let mut g = vec![0.0];
        g.extend(sys.apply(&ustar));
        let g = grid.func(g);
        let red = sys.solve(&g).unwrap();
        let dir = sys.solve_direct(&g).unwrap();
        let e_rd = sup(red.values.iter().zip(&dir.values).map(|(a, b)| a - b));
        let e_ru = sup(red.values.iter().zip(&ustar).map(|(a, b)| a - b));
        v.check(e_rd < 1e-6, format!("λ={l:e}: |reduced − direct| = {e_rd:.2e} < 1e-6"));
        v.check(e_ru < 1e-6, format!("λ={l:e}: |reduced − u*| = {e_ru:.2e} < 1e-6"));
    }
    let sig: Vec<f64> = [64, 128, 256].iter().map(|&n| assemble(0.0, &Grid::graded(n, 2.0).unwrap()).unwrap().sigma_min_l2()).collect();
    let (lo, hi) = (sig.iter().cloned().fold(f64::INFINITY, f64::min), sig.iter().cloned().fold(0.0, f64::max));
    v.check(hi / lo - 1.0 < 0.05, format!("σmin(I+O0) at n=64,128,256 = {sig:.6?}, spread {:.3}% < 5%", 100.0 * (hi / lo - 1.0)));
    v.check(lo > 0.1, format!("σmin ≥ {lo:.4} > 0.1"));
    v.finish(t0.elapsed(), Duration::from_secs(120));
}

#[test]
fn criterion_5_vstate_solver() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let mut v = Verdict::new(5, "V-state convergence and limits along λ (n=256)");
    let cfg = SolverConfig { tol: 1e-8, max_iter: 200, ..Default::default() };
    let (mut dist, mut gap) = (Vec::new(), Vec::new());
    for &l in &[1e-1, 3e-2, 1e-2, 3e-3] {
        match solve_vstate(l, &cfg) {
            Ok(s) => {
                v.check(s.residual_sup < 1e-8 && s.iterations <= 200, format!("λ={l:e}: ‖F‖ = {:.2e} after {} iterations", s.residual_sup, s.iterations));
                v.check(s.y[0] == l, format!("λ={l:e}: y(0) = {:e}", s.y[0]));
                match s.xstar {
                    Some((xs, (a, b))) => v.check(xs > 0.0 && xs < 1.0 && a <= xs && xs <= b, format!("λ={l:e}: y − x changes sign at x* = {xs:.5} in [{a:.5}, {b:.5}]")),
                    None => v.check(false, format!("λ={l:e}: no sign change of y − x")),
                }
                dist.push(s.dist_to_corner);
                gap.push(hyperbola_gap(&s, 5.0));
            }
            Err(e) => v.check(false, format!("λ={l:e}: {e}")),
        }
    }
    v.check(dist.len() == 4 && strictly_decreasing(&dist), format!("‖y − |x|‖∞ decreasing: {}", sci(&dist)));
    v.check(gap.len() == 4 && strictly_decreasing(&gap), format!("hyperbola gap (C=5) decreasing: {}", sci(&gap)));
    v.finish(t0.elapsed(), Duration::from_secs(600));
}

#[test]
fn criterion_6_dynamics() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let mut v = Verdict::new(6, "cut-off dynamics: stationarity, symmetry, order, V-state drift (n=64, p=1.5)");
    let (n, p) = (64, 1.5);
    let half = Grid::graded(n, p).unwrap();
    let grid = SymGrid::from_half(&half);
    let m = grid.len();

    let corner = grid.sample(f64::abs);
    let dy = Dynamics::new(grid.clone(), Control::Constant(1.0));
    let r = dy.rhs(&corner, 0.0).unwrap();
    let c = grid.center();
    let off = sup((0..m).filter(|&k| k != c).map(|k| r[k]));
    v.check(off < 1e-10, format!("rhs(|x|) = {off:.2e} at nodes |x| ≥ x1 (kink node: {:.2e})", r[c].abs()));
    let tr = dy.evolve(&dy.state(0.0, corner.clone()), 1.0, dy.stable_dt(&corner), 1, 0).unwrap();
    let odd_c = tr.samples.iter().map(|s| s.odd_part).fold(0.0, f64::max);
    let dist_c = tr.samples.iter().map(|s| s.dist).fold(0.0, f64::max);
    v.check(odd_c <= 1e-10 && dist_c == 0.0, format!("|x| over [0,1]: odd part {odd_c:.2e}, 𝔡 ≡ {dist_c:e}"));

    let lambda = 1e-2;
    let cfg = SolverConfig { n, grading: p, tol: 1e-12, max_iter: 200, ..Default::default() };
    let sol = solve_vstate(lambda, &cfg).unwrap();
    let mu0 = grid.even_extension(&sol.y);
    let dv = Dynamics::new(grid.clone(), Control::Constant(mu0[m - 1]));
    let r = dv.rhs(&mu0, 0.0).unwrap();
    v.check(sup(r.iter().copied()) < 1e-11, format!("V-state λ={lambda:e}: ‖rhs‖ = {:.2e} < 10 × tol", sup(r.iter().copied())));
    let tr = dv.evolve(&dv.state(0.0, mu0.clone()), 1.0, dv.stable_dt(&mu0), 1, 0).unwrap();
    let odd = tr.samples.iter().map(|s| s.odd_part).fold(0.0, f64::max);
    let drift = sup(tr.final_state.mu.iter().zip(&mu0).map(|(a, b)| a - b));
    v.check(odd <= 1e-10, format!("V-state over [0,1]: odd part {odd:.2e} ≤ 1e-10"));
    v.check(drift < 1e-4, format!("V-state drift over [0,1]: {drift:.2e} < 1e-4 ({} steps)", tr.steps));

    // smooth non-stationary data: errors at dt and dt/2 against dt/4
    let mu = grid.sample(|z| (0.01 + z * z).sqrt());
    let dh = Dynamics::new(grid.clone(), Control::Constant(mu[m - 1]));
    // fixed step inside the asymptotic range (stable_dt is ~4.7e-3 here)
    let dt = 1e-3;
    assert!(dt < dh.stable_dt(&mu));
    let run = |h: f64| dh.evolve(&dh.state(0.0, mu.clone()), 0.2, h, usize::MAX, 0).unwrap().final_state.mu;
    let (a, b, c4) = (run(dt), run(dt / 2.0), run(dt / 4.0));
    let ea = sup(a.iter().zip(&c4).map(|(p, q)| p - q));
    let eb = sup(b.iter().zip(&c4).map(|(p, q)| p - q));
    let ratio = ea / eb;
    v.check((12.0..=20.0).contains(&ratio), format!("RK4 step-halving error ratio {ratio:.2} in [12, 20] ({ea:.2e} / {eb:.2e})"));
    v.finish(t0.elapsed(), Duration::from_secs(300));
}

#[test]
fn criterion_7_analysis_checks() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let mut v = Verdict::new(7, "quadratic forms, kernel positivity, difference quotients");
    let cfg = SuiteConfig::default();
    let r = run_suite(&cfg).unwrap();
    for c in &r.checks {
        v.check(c.passed, format!("{} = {:.3e} (threshold {:e})", c.name, c.value, c.threshold));
    }
    v.check(cfg.random_functions >= 100 && cfg.quotient_pairs >= 10_000, format!("{} random u, {} quotient pairs", cfg.random_functions, cfg.quotient_pairs));
    v.finish(t0.elapsed(), Duration::from_secs(60));
}
