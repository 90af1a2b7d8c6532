//! Closed-form reference values for zero vorticity and constant coefficients.
//!
//! Nothing here calls into [`crate::sturm`] or the shared numerics: the
//! root finder is a plain bisection and the quadrature a local Simpson loop,
//! so agreement with the shooting code is an independent check.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::laminar::{LaminarFlow, PhysicalParams};

/// A reference value together with the name of the closed form it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub formula_id: &'static str,
}

/// Bisection to full double precision on a sign-changing bracket.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn irrotational_cond2(params: &PhysicalParams) -> Result<()> {
    params.validate()?;
    let value = params.g * params.d.powi(3) / (params.p0 * params.p0);
    if value < 1.0 {
        Ok(())
    } else {
        Err(Error::ConditionFailed { condition: "COND2", value })
    }
}

/// Positive root of `(g + αC²) tanh(√C d) = (p₀²/d²) √C`.
pub fn irrotational_c0(params: &PhysicalParams) -> Result<OracleResult> {
    irrotational_cond2(params)?;
    let PhysicalParams { g, d, p0, alpha } = *params;
    let rhs = p0 * p0 / (d * d);
    // divided by √C so the small-C end has a finite negative limit g d − p₀²/d²
    let f = |c: f64| {
        let s = c.sqrt();
        (g + alpha * c * c) * (s * d).tanh() / s - rhs
    };
    let lo = 1e-300;
    let mut hi = 1.0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
    }
    Ok(OracleResult { value: bisect(f, lo, hi), formula_id: "irrotational-dispersion-C0" })
}

/// `λ* = 2π/√C₀`, cross-checked against the direct root of
/// `[g + α(2π/λ)⁴] tanh(2πd/λ) = (p₀²/d²)(2π/λ)`.
pub fn irrotational_lambda_star(params: &PhysicalParams) -> Result<OracleResult> {
    let c0 = irrotational_c0(params)?.value;
    let via_c0 = 2.0 * PI / c0.sqrt();
    let direct = dispersion_root(params);
    if (via_c0 - direct).abs() > 1e-10 * via_c0 {
        return Err(Error::numerical(format!("dispersion roots disagree: {via_c0} vs {direct}")));
    }
    Ok(OracleResult { value: via_c0, formula_id: "irrotational-dispersion-lambda" })
}

/// Residual of the dispersion relation in wavelength form, scaled by `λ/2π`.
pub fn dispersion_residual(params: &PhysicalParams, lambda: f64) -> f64 {
    let PhysicalParams { g, d, p0, alpha } = *params;
    let k = 2.0 * PI / lambda;
    (g + alpha * k.powi(4)) * (k * d).tanh() / k - p0 * p0 / (d * d)
}

fn dispersion_root(params: &PhysicalParams) -> f64 {
    // residual > 0 for short waves, < 0 for long waves
    let mut lo = 1.0;
    while dispersion_residual(params, lo) <= 0.0 {
        lo *= 0.5;
    }
    let mut hi = 1.0;
    while dispersion_residual(params, hi) >= 0.0 {
        hi *= 2.0;
    }
    bisect(|l| dispersion_residual(params, l), lo, hi)
}

/// `(f(0), f'(0))` for `λ² a³ f'' = μ a f`, `f(p₀) = 0`, `f'(p₀) = 1` with
/// constant `a`: `f = sinh(κ(p − p₀))/κ`, `κ = √μ/(λa)`.
pub fn constant_a_shoot(params: &PhysicalParams, a_const: f64, lambda: f64, mu: f64) -> Result<(f64, f64)> {
    if !(a_const > 0.0 && lambda > 0.0 && mu >= 0.0) {
        return Err(Error::domain("constant_a_shoot needs a > 0, lambda > 0, mu >= 0"));
    }
    let len = -params.p0;
    if mu == 0.0 {
        return Ok((len, 1.0));
    }
    let kappa = mu.sqrt() / (lambda * a_const);
    Ok(((kappa * len).sinh() / kappa, (kappa * len).cosh()))
}

/// `W(λ, 0) = λ⁴ a³(p₀) (g ∫ a⁻³ − 1)` by composite Simpson on the stored
/// samples of `a` (three-eighths rule on the last panel for an even count).
pub fn wloo_w0(flow: &LaminarFlow, params: &PhysicalParams, lambda: f64) -> OracleResult {
    let y: Vec<f64> = flow.a.iter().map(|a| a.powi(-3)).collect();
    let h = flow.p[1] - flow.p[0];
    let n = y.len();
    let simpson_end = if n % 2 == 1 { n - 1 } else { n - 4 };
    let mut integral = 0.0;
    let mut i = 0;
    while i + 2 <= simpson_end {
        integral += h / 3.0 * (y[i] + 4.0 * y[i + 1] + y[i + 2]);
        i += 2;
    }
    if n.is_multiple_of(2) {
        let j = n - 4;
        integral += 3.0 * h / 8.0 * (y[j] + 3.0 * y[j + 1] + 3.0 * y[j + 2] + y[j + 3]);
    }
    let value = lambda.powi(4) * flow.a[0].powi(3) * (params.g * integral - 1.0);
    OracleResult { value, formula_id: "wronskian-at-mu-zero" }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laminar::build_laminar;
    use crate::vorticity::VorticityProfile;

    fn reference() -> PhysicalParams {
        PhysicalParams::new(1.0, 1.0, -2.0, 0.5).unwrap()
    }

    #[test]
    fn c0_root_in_expected_bracket() {
        let p = reference();
        let c0 = irrotational_c0(&p).unwrap().value;
        assert!(c0 > 3.7 && c0 < 3.9, "{c0}");
        let f = |c: f64| (1.0 + 0.5 * c * c) * c.sqrt().tanh() - 4.0 * c.sqrt();
        assert!(f(3.7) < 0.0 && f(3.9) > 0.0);
        assert!(f(c0).abs() < 1e-12);
    }

    #[test]
    fn lambda_star_satisfies_dispersion() {
        let p = reference();
        let l = irrotational_lambda_star(&p).unwrap().value;
        assert!(dispersion_residual(&p, l).abs() < 1e-10);
        let c0 = irrotational_c0(&p).unwrap().value;
        assert!((l - 2.0 * PI / c0.sqrt()).abs() < 1e-14 * l);
    }

    #[test]
    fn supercritical_depth_fails() {
        let p = PhysicalParams::new(9.81, 1.0, -1.0, 1.0).unwrap();
        assert!(matches!(irrotational_c0(&p), Err(Error::ConditionFailed { condition: "COND2", .. })));
    }

    #[test]
    fn constant_a_examples() {
        let p = reference();
        let (f0, fp0) = constant_a_shoot(&p, 2.0, 1.0, 4.0).unwrap();
        assert!((f0 - 2f64.sinh()).abs() < 1e-14 && (fp0 - 2f64.cosh()).abs() < 1e-14);
        let (g0, gp0) = constant_a_shoot(&p, 2.0, 2.0, 16.0).unwrap();
        assert!((g0 - f0).abs() < 1e-14 && (gp0 - fp0).abs() < 1e-14);
        let (h0, hp0) = constant_a_shoot(&p, 2.0, 1.0, 1e-12).unwrap();
        assert!((h0 - 2.0).abs() < 1e-10 && (hp0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn wloo_examples() {
        let p = reference();
        let zero = build_laminar(&VorticityProfile::zero(-2.0).unwrap(), &p, 257).unwrap();
        assert!((wloo_w0(&zero, &p, 1.0).value + 6.0).abs() < 1e-12);
        let c = build_laminar(&VorticityProfile::constant(-2.0, 1.0).unwrap(), &p, 257).unwrap();
        let w = wloo_w0(&c, &p, 1.0).value;
        assert!((w - 15.625 * (4.0 / 15.0 - 1.0)).abs() < 1e-7, "{w}");
        assert!((wloo_w0(&c, &p, 1.7).value - 1.7f64.powi(4) * w).abs() < 1e-12 * w.abs() * 10.0);
    }
}
