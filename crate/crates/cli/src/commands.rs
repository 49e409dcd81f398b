use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use cutoff_core::analysis_checks::{run_suite, SuiteConfig};
use cutoff_core::dynamics::{Control, Dynamics, SymGrid};
use cutoff_core::io::{write_profile, write_trajectory};
use cutoff_core::linop::{assemble, coeff_b2};
use cutoff_core::model_case::{alpha_comparator, model_selfsimilarity_gap, model_xstar, solve_model_case};
use cutoff_core::quadrature::Grid;
use cutoff_core::vstate::{hyperbola_gap, solve_vstate, SolverConfig};
use cutoff_core::{Error, Result};
use serde_json::{json, Value};

use crate::manifest::RunManifest;
use crate::{plot, AuditArgs, ChecksArgs, DynamicsArgs, Initial, ModelCaseArgs, VStateArgs};

pub enum Outcome {
    Done,
    Failed,
}

struct Report {
    line: String,
    summary: Value,
    outputs: Vec<String>,
    outcome: Outcome,
}

fn run(sub: &str, out_dir: &Path, params: Value, body: impl FnOnce(&Path) -> Result<Report>) -> Result<Outcome> {
    fs::create_dir_all(out_dir)?;
    let t0 = Instant::now();
    let res = body(out_dir);
    let mut m = RunManifest {
        subcommand: sub.into(),
        parameters: params,
        version: env!("CARGO_PKG_VERSION").into(),
        parallel: cutoff_core::par::PARALLEL,
        wall_time_s: 0.0,
        status: String::new(),
        summary: Value::Null,
        outputs: Vec::new(),
    };
    m.wall_time_s = t0.elapsed().as_secs_f64();
    match res {
        Ok(r) => {
            m.status = match r.outcome {
                Outcome::Done => "ok".into(),
                Outcome::Failed => "failed".into(),
            };
            m.summary = r.summary;
            m.outputs = r.outputs;
            m.write(out_dir)?;
            println!("{}", r.line);
            Ok(r.outcome)
        }
        Err(e) => {
            m.status = "error".into();
            m.summary = json!({ "error": e.to_string() });
            if let Error::BlowUp { t, .. } = &e {
                m.summary["blow_up_t"] = json!(t);
            }
            m.write(out_dir)?;
            Err(e)
        }
    }
}

pub fn model_case(a: ModelCaseArgs) -> Result<Outcome> {
    let params = json!({ "lambda": a.lambda, "tol": a.tol });
    run("model-case", &a.common.out_dir, params, |dir| {
        let s = solve_model_case(a.lambda, a.tol)?;
        let (xstar, comp) = model_xstar(&s)?;
        let (r1, r2) = s.residuals();
        let alpha_ratio = s.alpha / alpha_comparator(s.lambda);
        let xstar_ratio = xstar / comp;
        let gap = model_selfsimilarity_gap(&s);
        let grid = Grid::default_grid();
        let mut csv = format!("# lambda={:.16e}\n# alpha={:.16e}\nx,y\n", s.lambda, s.alpha);
        for &x in grid.nodes() {
            let _ = writeln!(csv, "{x:.16e},{:.16e}", s.profile(x));
        }
        fs::write(dir.join("model_case_profile.csv"), csv)?;
        let script = plot::profile(dir, "model_case_profile.csv", s.lambda)?;
        Ok(Report {
            line: format!(
                "model-case λ={:e} A={:.12e} B={:.12e} α={:.6e} β={:.6e} x*={:.6e} α-ratio={:.4} x*-ratio={:.4}",
                s.lambda, s.a, s.b, s.alpha, s.beta, xstar, alpha_ratio, xstar_ratio
            ),
            summary: json!({
                "a": s.a, "b": s.b, "u": s.u, "v": s.v, "alpha": s.alpha, "beta": s.beta,
                "xstar": xstar, "xstar_comparator": comp, "alpha_comparator": alpha_comparator(s.lambda),
                "alpha_ratio": alpha_ratio, "xstar_ratio": xstar_ratio,
                "residuals": [r1, r2], "selfsimilarity_gap": gap,
            }),
            outputs: vec!["model_case_profile.csv".into(), script],
            outcome: Outcome::Done,
        })
    })
}

pub fn vstate(a: VStateArgs) -> Result<Outcome> {
    let cfg = SolverConfig {
        n: a.grid_n,
        grading: a.grading,
        tol: a.tol,
        max_iter: a.max_iter,
        delta_box: a.delta_box,
        newton: a.newton,
        delta_reg: a.delta_reg,
        ..Default::default()
    };
    let params = json!({ "lambda": a.lambda, "solver": cfg });
    run("vstate", &a.common.out_dir, params, |dir| {
        if let Some(d) = a.delta_reg {
            if !(d > 0.0) {
                return Err(Error::Domain(format!("--delta-reg must be positive, got {d}")));
            }
        }
        let s = solve_vstate(a.lambda, &cfg)?;
        write_profile(&s, &dir.join("vstate_profile.csv"))?;
        let script = plot::profile(dir, "vstate_profile.csv", s.lambda)?;
        let gap = if 5.0 * s.lambda <= 1.0 { Some(hyperbola_gap(&s, 5.0)) } else { None };
        let xstar = s.xstar.map(|v| v.0);
        Ok(Report {
            line: format!(
                "vstate λ={:e} iterations={} residual={:.3e} x*={} dist={:.6e} ψ0-lip={:.4e}",
                s.lambda,
                s.iterations,
                s.residual_sup,
                xstar.map_or("none".into(), |v| format!("{v:.6e}")),
                s.dist_to_corner,
                s.psi0_lip
            ),
            summary: json!({
                "iterations": s.iterations, "residual_sup": s.residual_sup,
                "residual_history": s.residual_history, "xstar": s.xstar,
                "dist_to_corner": s.dist_to_corner, "hyperbola_gap_c5": gap,
                "psi0_lip": s.psi0_lip, "final_lip": s.profile.lip(), "y0": s.y[0],
            }),
            outputs: vec!["vstate_profile.csv".into(), script],
            outcome: Outcome::Done,
        })
    })
}

pub fn dynamics(a: DynamicsArgs) -> Result<Outcome> {
    let params = json!({
        "lambda": a.lambda, "init": a.init, "grid_n": a.grid_n, "grading": a.grading,
        "dt": a.dt, "t_end": a.t_end, "tol": a.tol, "max_iter": a.max_iter,
        "sample_every": a.sample_every, "snapshot_every": a.snapshot_every,
        "control": "constant c(0)",
    });
    run("dynamics", &a.common.out_dir, params, |dir| {
        let half = Grid::graded(a.grid_n, a.grading)?;
        let grid = SymGrid::from_half(&half);
        let mu0 = match a.init {
            Initial::Corner => grid.sample(f64::abs),
            Initial::Hyperbola => {
                if !(a.lambda >= 0.0) {
                    return Err(Error::Domain(format!("λ must be >= 0, got {}", a.lambda)));
                }
                grid.sample(|z| a.lambda.hypot(z))
            }
            Initial::Vstate => {
                let cfg = SolverConfig { n: a.grid_n, grading: a.grading, tol: a.tol, max_iter: a.max_iter, ..Default::default() };
                grid.even_extension(&solve_vstate(a.lambda, &cfg)?.y)
            }
        };
        let m = mu0.len();
        let dy = Dynamics::new(grid.clone(), Control::Constant(mu0[m - 1]));
        let est = dy.stable_dt(&mu0);
        let dt = a.dt.unwrap_or(est);
        let s0 = dy.state(0.0, mu0.clone());
        let rhs0 = dy.rhs(&mu0, 0.0)?;
        let rhs0_sup = rhs0[1..m - 1].iter().fold(0.0f64, |x, v| x.max(v.abs()));
        let (tr, err) = dy.evolve_partial(&s0, a.t_end, dt, a.sample_every, a.snapshot_every)?;
        let names = write_trajectory(&tr, &grid, &dir.join("trajectory.csv"), Some(&dir.join("snapshots")))?;
        let script = plot::trajectory(dir, "trajectory.csv")?;
        let drift = tr.final_state.mu.iter().zip(&mu0).fold(0.0f64, |x, (p, q)| x.max((p - q).abs()));
        let odd = tr.samples.iter().fold(0.0f64, |x, s| x.max(s.odd_part));
        let mut outputs = vec!["trajectory.csv".to_string(), script];
        outputs.extend(names.into_iter().map(|n| format!("snapshots/{n}")));
        let blow = err.as_ref().map(|e| e.to_string());
        Ok(Report {
            line: format!(
                "dynamics init={:?} t={:.4} steps={} dt={:.3e} dist={:.6e} drift={:.3e} odd={:.3e}{}",
                a.init,
                tr.final_state.t,
                tr.steps,
                dt,
                tr.final_state.dist,
                drift,
                odd,
                blow.as_ref().map_or(String::new(), |e| format!(" BLOW-UP: {e}"))
            ),
            summary: json!({
                "steps": tr.steps, "dt": dt, "stable_dt_estimate": est, "t_final": tr.final_state.t,
                "dist_final": tr.final_state.dist, "drift_sup": drift, "odd_part_max": odd,
                "rhs0_sup": rhs0_sup, "blow_up": blow,
            }),
            outputs,
            outcome: if err.is_some() { Outcome::Failed } else { Outcome::Done },
        })
    })
}

pub fn operator_audit(a: AuditArgs) -> Result<Outcome> {
    let params = json!({ "lambda": a.lambda, "grid_n": a.grid_n, "grading": a.grading });
    run("operator-audit", &a.common.out_dir, params, |dir| {
        let grid = Grid::graded(a.grid_n, a.grading)?;
        let sys = assemble(a.lambda, &grid)?;
        let x = grid.nodes();
        let mut csv = String::from("x,a1,a2,x_a2,b2\n");
        let (mut a1r, mut xa2r, mut b2min) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY), f64::INFINITY);
        for i in 1..x.len() {
            let (c1, c2) = (sys.a1[i - 1], sys.a2[i - 1]);
            let b2 = coeff_b2(x[i], a.lambda)?;
            let xa2 = x[i] * c2;
            a1r = (a1r.0.min(c1), a1r.1.max(c1));
            xa2r = (xa2r.0.min(xa2), xa2r.1.max(xa2));
            b2min = b2min.min(b2);
            let _ = writeln!(csv, "{:.16e},{c1:.16e},{c2:.16e},{xa2:.16e},{b2:.16e}", x[i]);
        }
        fs::write(dir.join("operator_coefficients.csv"), csv)?;
        let script = plot::coefficients(dir, "operator_coefficients.csv")?;
        let sigma = sys.sigma_min_l2();
        let window = sys.window_norm(0.05);
        Ok(Report {
            line: format!(
                "operator-audit λ={:e} n={} A1∈[{:.4},{:.4}] x·A2∈[{:.4},{:.4}] min B2={:.3e} σmin(I+O)={:.6}",
                a.lambda, a.grid_n, a1r.0, a1r.1, xa2r.0, xa2r.1, b2min, sigma
            ),
            summary: json!({
                "a1_range": [a1r.0, a1r.1], "x_a2_range": [xa2r.0, xa2r.1], "b2_min": b2min,
                "sigma_min": sigma, "window_norm_0.05": window,
            }),
            outputs: vec!["operator_coefficients.csv".into(), script],
            outcome: if sigma > 0.0 { Outcome::Done } else { Outcome::Failed },
        })
    })
}

pub fn checks(a: ChecksArgs) -> Result<Outcome> {
    let cfg = SuiteConfig { seed: a.seed, ..Default::default() };
    let params = json!({ "suite": cfg });
    run("checks", &a.common.out_dir, params, |dir| {
        let r = run_suite(&cfg)?;
        let text = serde_json::to_string_pretty(&r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        fs::write(dir.join("checks_report.json"), text + "\n")?;
        let passed = r.checks.iter().filter(|c| c.passed).count();
        Ok(Report {
            line: format!("checks {}/{} passed{}", passed, r.checks.len(), if r.all_passed { "" } else { " — FAILURES" }),
            summary: json!({ "passed": passed, "total": r.checks.len(), "all_passed": r.all_passed }),
            outputs: vec!["checks_report.json".into()],
            outcome: if r.all_passed { Outcome::Done } else { Outcome::Failed },
        })
    })
}
