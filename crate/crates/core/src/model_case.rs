//! Quadratic-kernel model case: y(x) = √(λ² + u x²) with the two
//! compatibility equations in (A, B) = (∫y, ∫x y').

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct ModelCaseSolution {
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub u: f64,
    pub v: f64,
    pub alpha: f64,
    pub beta: f64,
    /// λ/√|α| when α < 0, NaN otherwise.
    pub xstar: f64,
}

impl ModelCaseSolution {
    /// Fill in A, B, v, β, x* from λ and α = u − 1 via the first equation.
    pub fn from_alpha(lambda: f64, alpha: f64) -> Self {
        let u = 1.0 + alpha;
        let s = (lambda * lambda + u).sqrt();
        let a = s / (1.0 + u);
        let b = u * a;
        let v = a * b;
        // v − 1/4 = [4uλ² + (3u+1)α]/(4(1+u)²), free of cancellation
        let beta = (4.0 * u * lambda * lambda + (3.0 * u + 1.0) * alpha) / (4.0 * (1.0 + u) * (1.0 + u));
        let xstar = if alpha < 0.0 { lambda / (-alpha).sqrt() } else { f64::NAN };
        ModelCaseSolution { lambda, a, b, u, v, alpha, beta, xstar }
    }

    pub fn profile(&self, x: f64) -> f64 {
        (self.lambda * self.lambda + self.u * x * x).sqrt()
    }

    /// Residuals of B = √(λ²+B/A) − A and A = ∫₀¹ √(λ²+(B/A)x²) dx.
    pub fn residuals(&self) -> (f64, f64) {
        let l2 = self.lambda * self.lambda;
        let u = self.b / self.a;
        let r1 = self.b - ((l2 + u).sqrt() - self.a);
        let r2 = self.a - profile_integral(self.lambda, u);
        (r1, r2)
    }

    /// max over x of |y'y∫y − x∫ξy'| with y' taken analytically.
    pub fn pointwise_residual(&self, xs: &[f64]) -> f64 {
        xs.iter()
            .map(|&x| {
                let y = self.profile(x);
                let dy = self.u * x / y;
                (dy * y * self.a - x * self.b).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// ∫₀¹ √(λ² + u x²) dx = √(λ²+u)/2 + λ² asinh(√u/λ)/(2√u).
pub fn profile_integral(lambda: f64, u: f64) -> f64 {
    let su = u.sqrt();
    0.5 * (lambda * lambda + u).sqrt() + 0.5 * lambda * lambda * (su / lambda).asinh() / su
}

/// Same integral via the rescaled form λ²/√u · ∫₀^T √(1+ξ²) dξ, T = √u/λ.
pub fn profile_integral_scaled(lambda: f64, u: f64) -> f64 {
    let t = u.sqrt() / lambda;
    lambda * lambda / u.sqrt() * 0.5 * (t * (1.0 + t * t).sqrt() + t.asinh())
}

/// The second equation after eliminating A, B through the first, written
/// in α so the root near 0 is resolved in relative precision:
/// α√(λ²+u)/(2+α) + λ² asinh(√u/λ)/√u = 0.
fn compat(lambda: f64, alpha: f64) -> f64 {
    let u = 1.0 + alpha;
    let su = u.sqrt();
    alpha * (lambda * lambda + u).sqrt() / (2.0 + alpha) + lambda * lambda * (su / lambda).asinh() / su
}

pub fn solve_model_case(lambda: f64, tol: f64) -> Result<ModelCaseSolution> {
    if !(lambda > 0.0 && lambda <= 0.2) {
        return Err(Error::Domain(format!("model case needs λ in (0, 0.2], got {lambda}")));
    }
    if !(tol > 1e-14 && tol < 1e-6) {
        return Err(Error::Domain(format!("tol must lie in (1e-14, 1e-6), got {tol}")));
    }
    // u ∈ [0.5, 1.5]
    let (mut lo, mut hi) = (-0.5, 0.5);
    let (flo, fhi) = (compat(lambda, lo), compat(lambda, hi));
    if flo.signum() == fhi.signum() {
        return Err(Error::Convergence(format!("no sign change of the compatibility equation for u in [0.5, 1.5] at λ={lambda}")));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if compat(lambda, mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sol = ModelCaseSolution::from_alpha(lambda, 0.5 * (lo + hi));
    let (r1, r2) = sol.residuals();
    if r1.abs().max(r2.abs()) >= tol {
        return Err(Error::Convergence(format!("model case residuals ({r1:e}, {r2:e}) above tol {tol:e}")));
    }
    Ok(sol)
}

/// x* = λ/√|α| together with the comparator (2 log(1/λ))^{−1/2}.
pub fn model_xstar(sol: &ModelCaseSolution) -> Result<(f64, f64)> {
    if !(sol.alpha < 0.0) {
        return Err(Error::Domain(format!("x* needs α < 0, got {}", sol.alpha)));
    }
    let xs = sol.lambda / (-sol.alpha).sqrt();
    Ok((xs, (2.0 * (1.0 / sol.lambda).ln()).powf(-0.5)))
}

/// −2λ² log(1/λ) + λ², the comparator for α.
pub fn alpha_comparator(lambda: f64) -> f64 {
    -2.0 * lambda * lambda * (1.0 / lambda).ln() + lambda * lambda
}

/// sup over x̂ ∈ [0, 1/λ] of |√(1+(1+α)x̂²) − √(1+x̂²)|, sampled at the
/// default grid nodes mapped to the scaled variable.
pub fn model_selfsimilarity_gap(sol: &ModelCaseSolution) -> f64 {
    let grid = crate::quadrature::Grid::default_grid();
    grid.nodes()
        .iter()
        .map(|&x| {
            let xh = x / sol.lambda;
            // difference written as αx̂²/(sum) to avoid cancellation
            let a = (1.0 + (1.0 + sol.alpha) * xh * xh).sqrt();
            let b = (1.0 + xh * xh).sqrt();
            (sol.alpha * xh * xh / (a + b)).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_agree() {
        for &(l, u) in &[(1e-3, 0.99), (0.1, 1.2), (0.2, 0.6)] {
            let a = profile_integral(l, u);
            let b = profile_integral_scaled(l, u);
            assert!((a - b).abs() < 1e-14);
            // midpoint rule oracle
            let m = 200_000;
            let q: f64 = (0..m)
                .map(|i| {
                    let x = (i as f64 + 0.5) / m as f64;
                    (l * l + u * x * x).sqrt()
                })
                .sum::<f64>()
                / m as f64;
            assert!((a - q).abs() < 1e-9, "{a} {q}");
        }
    }

    #[test]
    fn solution_invariants() {
        for &l in &[0.2, 0.1, 1e-2, 1e-3, 1e-4] {
            let s = solve_model_case(l, 1e-12).unwrap();
            assert_eq!(s.profile(0.0), l);
            let (r1, r2) = s.residuals();
            assert!(r1.abs() < 1e-12 && r2.abs() < 1e-12);
            assert!(s.alpha < 0.0);
            assert!((s.v - 0.25 - s.beta).abs() < 1e-14);
            let xs: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
            assert!(s.pointwise_residual(&xs) < 1e-10);
            // β ≈ α/4 + λ²/4
            let err = (s.beta - s.alpha / 4.0 - l * l / 4.0).abs();
            assert!(err <= 2.0 * (s.alpha * s.alpha + l * l * s.alpha.abs()), "λ={l}: {err}");
        }
    }

    #[test]
    fn xstar_examples() {
        let s = ModelCaseSolution::from_alpha(0.5, -1.0 + 1e-300);
        let fake = ModelCaseSolution { alpha: -1.0, ..s };
        assert_eq!(model_xstar(&fake).unwrap().0, 0.5);
        let pos = ModelCaseSolution { alpha: 0.1, ..s };
        assert!(model_xstar(&pos).is_err());
    }

    #[test]
    fn gap_examples() {
        let s = ModelCaseSolution::from_alpha(1e-2, 0.0);
        assert_eq!(model_selfsimilarity_gap(&s), 0.0);
        let g2 = model_selfsimilarity_gap(&solve_model_case(1e-2, 1e-12).unwrap());
        let s3 = solve_model_case(1e-3, 1e-12).unwrap();
        let g3 = model_selfsimilarity_gap(&s3);
        assert!(g3 < g2);
        // dense sampling over the full scaled interval
        let dense = (0..=100_000)
            .map(|i| {
                let xh = i as f64 / 100_000.0 / s3.lambda;
                ((1.0 + (1.0 + s3.alpha) * xh * xh).sqrt() - (1.0 + xh * xh).sqrt()).abs()
            })
            .fold(0.0, f64::max);
        assert!((g3 - dense).abs() <= 1e-9 * dense.max(1e-300) + 1e-12);
        assert!(g3 <= s3.alpha.abs() / s3.lambda);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_model_case(0.3, 1e-10).is_err());
        assert!(solve_model_case(0.0, 1e-10).is_err());
        assert!(solve_model_case(1e-2, 1e-3).is_err());
    }
}
