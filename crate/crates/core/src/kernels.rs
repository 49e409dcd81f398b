//! Interaction kernels K, K₁, K₂ for the cut-off model and the helpers
//! that make the hyperbola family cancel exactly.

use crate::error::{Error, Result};

/// Interaction law H(r) = d(√r), r being a squared distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelFamily {
    EulerLog,
    /// H(r) = log √(δ² + r²).
    RegularizedLog { delta: f64 },
    /// d(ρ) = ρˢ/s, i.e. H(r) = r^{s/2}/s.
    Power { s: f64 },
    /// d(ρ) = ρ², i.e. H(r) = r.
    QuadraticModel,
}

impl KernelFamily {
    pub fn h(&self, r: f64) -> f64 {
        match *self {
            KernelFamily::EulerLog => r.ln(),
            KernelFamily::RegularizedLog { delta } => 0.5 * (delta * delta + r * r).ln(),
            KernelFamily::Power { s } => r.powf(0.5 * s) / s,
            KernelFamily::QuadraticModel => r,
        }
    }

    pub fn dh(&self, r: f64) -> f64 {
        match *self {
            KernelFamily::EulerLog => 1.0 / r,
            KernelFamily::RegularizedLog { delta } => r / (delta * delta + r * r),
            KernelFamily::Power { s } => 0.5 * r.powf(0.5 * s - 1.0),
            KernelFamily::QuadraticModel => 1.0,
        }
    }

    fn needs_positive(&self) -> bool {
        matches!(self, KernelFamily::EulerLog | KernelFamily::Power { .. })
    }
}

/// Evaluation point (x, ξ, y(x), y(ξ)).
///
/// `dy` is y(x) − y(ξ). Callers that know the profile analytically should
/// supply it without cancellation (see [`KernelPoint::on_hyperbola`]);
/// otherwise it is the plain difference of the heights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelPoint {
    pub x: f64,
    pub xi: f64,
    pub yx: f64,
    pub yxi: f64,
    pub dy: f64,
}

impl KernelPoint {
    pub fn new(x: f64, xi: f64, yx: f64, yxi: f64) -> Self {
        KernelPoint { x, xi, yx, yxi, dy: yx - yxi }
    }

    /// Point on y_λ(x) = √(λ² + x²), with the height difference computed
    /// as (x−ξ)(x+ξ)/(y_x+y_ξ).
    pub fn on_hyperbola(x: f64, xi: f64, lambda: f64) -> Self {
        let yx = lambda.hypot(x);
        let yxi = lambda.hypot(xi);
        let s = yx + yxi;
        let dy = if s > 0.0 { (x - xi) * (x + xi) / s } else { 0.0 };
        KernelPoint { x, xi, yx, yxi, dy }
    }

    /// The four squared distances (P1, Q1, P2, Q2).
    #[inline]
    pub fn args(&self) -> [f64; 4] {
        let sp = self.x + self.xi;
        let sm = self.x - self.xi;
        let yp = self.yx + self.yxi;
        let ym = self.dy;
        [sp * sp + yp * yp, sm * sm + ym * ym, sm * sm + yp * yp, sp * sp + ym * ym]
    }
}

pub fn logplus(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("log+ needs x > 0, got {x}")));
    }
    Ok(x.ln().abs() + 1.0)
}

/// |log x| + 1 without the domain check, for hot loops with x > 0 known.
#[inline]
pub(crate) fn logplus_unchecked(x: f64) -> f64 {
    x.ln().abs() + 1.0
}

fn check(p: &KernelPoint, fam: KernelFamily, args: &[f64]) -> Result<()> {
    if fam.needs_positive() && args.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::SingularKernel { x: p.x, xi: p.xi });
    }
    Ok(())
}

pub fn eval_k(p: &KernelPoint, fam: KernelFamily) -> Result<f64> {
    let [p1, q1, _, _] = p.args();
    check(p, fam, &[p1, q1])?;
    Ok(fam.h(p1) - fam.h(q1))
}

pub fn eval_k1(p: &KernelPoint, fam: KernelFamily) -> Result<f64> {
    let a = p.args();
    check(p, fam, &a)?;
    if fam == KernelFamily::EulerLog {
        return Ok(((a[0] / a[1]) * (a[2] / a[3])).ln());
    }
    Ok(fam.h(a[0]) - fam.h(a[1]) + fam.h(a[2]) - fam.h(a[3]))
}

pub fn eval_k2(p: &KernelPoint, fam: KernelFamily) -> Result<f64> {
    let a = p.args();
    check(p, fam, &a)?;
    if fam == KernelFamily::EulerLog {
        return Ok(((a[0] / a[1]) * (a[3] / a[2])).ln());
    }
    Ok(fam.h(a[0]) - fam.h(a[1]) - fam.h(a[2]) + fam.h(a[3]))
}

/// Both Euler kernels at once; no singularity check.
#[inline]
pub(crate) fn euler_k1_k2(p: &KernelPoint) -> (f64, f64) {
    let [p1, q1, p2, q2] = p.args();
    let a = p1 / q1;
    (((a) * (p2 / q2)).ln(), (a * (q2 / p2)).ln())
}

/// r₁ = (x̂+ξ̂)/(√(x̂²+1)+√(ξ̂²+1)).
pub fn eval_r1(xh: f64, xih: f64) -> f64 {
    (xh + xih) / (xh.hypot(1.0) + xih.hypot(1.0))
}

/// log((x+ξ)/(x−ξ))², which is K₂ on every hyperbola and K₁ on y₀=|x|.
#[inline]
pub fn log_ratio_sq(x: f64, xi: f64) -> f64 {
    2.0 * ((x + xi) / (x - xi)).abs().ln()
}
