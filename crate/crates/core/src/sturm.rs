//! Sturm–Liouville shooting, the Wronskian `W(λ, μ)` and the bifurcation point.
//!
//! The radial problem is `λ²(a³f')' = μ a f` on `[p₀, 0]`, integrated in the
//! conservative first-order form `f' = v/a³`, `v' = (μ/λ²) a f` with
//! `v = a³ f'`. For large `μ` the solution grows like `exp(√μ |p₀| / λ a)`,
//! so the state is renormalized whenever it exceeds `1e100` and the
//! accumulated factor is carried in [`ShootResult::log_scale`].

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::laminar::{LaminarFlow, PhysicalParams};
use crate::numerics::ode::Dopri5;
use crate::numerics::roots::{brent, RootTolerance};

const RENORMALIZE_ABOVE: f64 = 1e100;
/// Upper end of the bracket search for `μ(λ)`.
pub const MU_MAX: f64 = 1e12;

/// Solution of the shooting problem at `(λ, μ)`.
///
/// All stored values are scaled by `exp(-log_scale)`: the true solution is
/// `f · exp(log_scale)`, and the two energy integrals carry the factor
/// `exp(2 log_scale)`.
#[derive(Clone, Debug)]
pub struct ShootResult {
    pub lambda: f64,
    pub mu: f64,
    pub p: Vec<f64>,
    pub f: Vec<f64>,
    pub fp: Vec<f64>,
    pub f0: f64,
    pub fp0: f64,
    pub log_scale: f64,
    /// `∫ a f²` over `[p₀, 0]`.
    pub int_a_f2: f64,
    /// `∫ a³ f'²` over `[p₀, 0]`.
    pub int_a3_fp2: f64,
}

impl ShootResult {
    /// Scale factor to apply to the stored values.
    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// Integrates `[f, v, ∫a f², ∫v²/a³]` across `nodes` starting from `y0`.
fn integrate(flow: &LaminarFlow, lambda: f64, mu: f64, y0: [f64; 4], nodes: &[f64]) -> Result<(Vec<[f64; 4]>, f64)> {
    let c = mu / (lambda * lambda);
    let rhs = |p: f64, y: &[f64; 4]| {
        let a = flow.a_at(p);
        let a3 = a * a * a;
        [y[1] / a3, c * a * y[0], a * y[0] * y[0], y[1] * y[1] / a3]
    };
    let mut log_scale = 0.0;
    let out = Dopri5::default().integrate(rhs, y0, nodes, |y, stored| {
        let size = y[0].abs().max(y[1].abs());
        if size > RENORMALIZE_ABOVE {
            let s = 1.0 / size;
            let rescale = |v: &mut [f64; 4]| {
                v[0] *= s;
                v[1] *= s;
                v[2] *= s * s;
                v[3] *= s * s;
            };
            rescale(y);
            stored.iter_mut().for_each(rescale);
            log_scale += size.ln();
        }
    })?;
    if out.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::numerical(format!("shooting produced non-finite values at lambda={lambda}, mu={mu}")));
    }
    Ok((out, log_scale))
}

fn assemble(
    flow: &LaminarFlow,
    lambda: f64,
    mu: f64,
    nodes: Vec<f64>,
    states: Vec<[f64; 4]>,
    log_scale: f64,
    forward: bool,
) -> ShootResult {
    let fp: Vec<f64> = nodes.iter().zip(&states).map(|(&p, y)| y[1] / flow.a_at(p).powi(3)).collect();
    let f: Vec<f64> = states.iter().map(|y| y[0]).collect();
    let last = if forward { states.len() - 1 } else { 0 };
    let (i1, i2) = if forward {
        (states[last][2], states[last][3])
    } else {
        let end = states.len() - 1;
        (states[end][2].abs(), states[end][3].abs())
    };
    let (mut p, mut f, mut fp) = (nodes, f, fp);
    if !forward {
        p.reverse();
        f.reverse();
        fp.reverse();
    }
    let n = p.len();
    ShootResult { lambda, mu, f0: f[n - 1], fp0: fp[n - 1], p, f, fp, log_scale, int_a_f2: i1, int_a3_fp2: i2 }
}

/// Shoots from `p₀` with `f(p₀) = 0`, `f'(p₀) = 1`, sampling on the flow grid.
pub fn shoot_f1(flow: &LaminarFlow, lambda: f64, mu: f64) -> Result<ShootResult> {
    shoot_f1_on(flow, lambda, mu, flow.p.clone())
}

/// As [`shoot_f1`] with output at the given increasing nodes spanning `[p₀, 0]`.
pub fn shoot_f1_on(flow: &LaminarFlow, lambda: f64, mu: f64, nodes: Vec<f64>) -> Result<ShootResult> {
    check_lambda(lambda)?;
    if nodes.len() < 2 || nodes[0] != flow.p0() || nodes[nodes.len() - 1] != 0.0 {
        return Err(Error::invalid("shooting nodes must run from p0 to 0"));
    }
    let a3 = flow.a[0].powi(3);
    let (states, log_scale) = integrate(flow, lambda, mu, [0.0, a3, 0.0, 0.0], &nodes)?;
    let mut out = assemble(flow, lambda, mu, nodes, states, log_scale, true);
    // exact initial data, independent of interpolation of a at p0
    out.fp[0] = if log_scale == 0.0 { 1.0 } else { (-log_scale).exp() };
    Ok(out)
}

/// Shoots backwards from `p = 0` with `f(0) = λ⁴a³(0)`, `f'(0) = gλ⁴ + αμ²`.
pub fn shoot_f2(flow: &LaminarFlow, params: &PhysicalParams, lambda: f64, mu: f64) -> Result<ShootResult> {
    check_lambda(lambda)?;
    let a0_3 = flow.a[flow.a.len() - 1].powi(3);
    let l4 = lambda.powi(4);
    let y0 = [l4 * a0_3, a0_3 * (params.g * l4 + params.alpha * mu * mu), 0.0, 0.0];
    let nodes: Vec<f64> = flow.p.iter().rev().copied().collect();
    let (states, log_scale) = integrate(flow, lambda, mu, y0, &nodes)?;
    Ok(assemble(flow, lambda, mu, nodes, states, log_scale, false))
}

/// Endpoint data `(f(0), v(0) = a³(0) f'(0), log_scale)` of the forward shot.
fn shoot_endpoint(flow: &LaminarFlow, lambda: f64, mu: f64) -> Result<(f64, f64, f64)> {
    check_lambda(lambda)?;
    let a3 = flow.a[0].powi(3);
    let (states, log_scale) = integrate(flow, lambda, mu, [0.0, a3, 0.0, 0.0], &[flow.p0(), 0.0])?;
    let y = states[1];
    Ok((y[0], y[1], log_scale))
}

fn unscale(mantissa: f64, log_scale: f64) -> f64 {
    if log_scale == 0.0 {
        return mantissa;
    }
    let v = mantissa * log_scale.min(709.0).exp();
    if log_scale > 709.0 {
        mantissa.signum() * f64::INFINITY
    } else {
        v
    }
}

/// `W(λ, μ) = (gλ⁴ + αμ²) f₁(0) − λ⁴ a³(0) f₁'(0)`. Saturates to `±∞` when
/// the shot overflows double precision.
pub fn wronskian(flow: &LaminarFlow, params: &PhysicalParams, lambda: f64, mu: f64) -> Result<f64> {
    let (f0, v0, log_scale) = shoot_endpoint(flow, lambda, mu)?;
    let l4 = lambda.powi(4);
    Ok(unscale((params.g * l4 + params.alpha * mu * mu) * f0 - l4 * v0, log_scale))
}

/// `W / (λ⁴ a³(p₀))`, the normalization used for root finding; saturates to
/// `±f64::MAX` so that bracketing iterations stay finite.
pub fn scaled_wronskian(flow: &LaminarFlow, params: &PhysicalParams, lambda: f64, mu: f64) -> Result<f64> {
    let (f0, v0, log_scale) = shoot_endpoint(flow, lambda, mu)?;
    let l4 = lambda.powi(4);
    let mantissa = ((params.g + params.alpha * mu * mu / l4) * f0 - v0) / flow.a[0].powi(3);
    Ok(unscale(mantissa, log_scale).clamp(-f64::MAX, f64::MAX))
}

/// The unique positive zero `μ(λ)` of `W(λ, ·)`.
pub fn find_mu(flow: &LaminarFlow, params: &PhysicalParams, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let (value, holds) = flow.cond2();
    if !holds {
        return Err(Error::ConditionFailed { condition: "COND2", value });
    }
    let w = |mu: f64| scaled_wronskian(flow, params, lambda, mu);
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut w_lo = w(0.0)?;
    if w_lo >= 0.0 {
        return Err(Error::numerical(format!("W(lambda, 0) = {w_lo} is not negative")));
    }
    let mut w_hi = w(hi)?;
    if w_hi > 0.0 {
        // shrink towards zero while keeping the sign change
        loop {
            let mid = 0.5 * hi;
            let w_mid = w(mid)?;
            if w_mid < 0.0 {
                lo = mid;
                w_lo = w_mid;
                break;
            }
            hi = mid;
            w_hi = w_mid;
            if hi < 1e-14 {
                break;
            }
        }
    } else {
        while w_hi <= 0.0 {
            lo = hi;
            w_lo = w_hi;
            hi *= 2.0;
            if hi > MU_MAX {
                return Err(Error::numerical(format!("no sign change of W(lambda={lambda}, .) below mu = {MU_MAX:e}")));
            }
            w_hi = w(hi)?;
        }
    }
    let tol = RootTolerance { abs: 1e-300, rel: 1e-14, max_iter: 200 };
    brent(w, lo, hi, w_lo, w_hi, tol)
}

/// `C₀`, `λ* = 2π/√C₀` and the kernel profile `f₁,*` (mode `k = 1`).
#[derive(Clone, Debug)]
pub struct BifurcationPoint {
    pub c0: f64,
    pub lambda_star: f64,
    pub f1_star: ShootResult,
    pub mode_k: u32,
}

impl BifurcationPoint {
    /// `f₁,*(p)` at an arbitrary `p` by cubic Hermite interpolation of the
    /// stored samples and derivatives.
    pub fn f1_at(&self, p: f64) -> f64 {
        let s = &self.f1_star;
        let k = s.p.partition_point(|&x| x <= p).clamp(1, s.p.len() - 1) - 1;
        let (x0, x1) = (s.p[k], s.p[k + 1]);
        let h = x1 - x0;
        let t = (p - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * s.f[k]
            + (t3 - 2.0 * t2 + t) * h * s.fp[k]
            + (-2.0 * t3 + 3.0 * t2) * s.f[k + 1]
            + (t3 - t2) * h * s.fp[k + 1]
    }
}

/// Locates `C₀ = μ(1)`, sets `λ* = 2π/√C₀` and shoots the kernel profile.
pub fn bifurcation_point(flow: &LaminarFlow, params: &PhysicalParams) -> Result<BifurcationPoint> {
    let c0 = find_mu(flow, params, 1.0)?;
    let lambda_star = 2.0 * PI / c0.sqrt();
    let mu = (2.0 * PI).powi(2);
    let f1_star = shoot_f1(flow, lambda_star, mu)?;
    let l4 = lambda_star.powi(4);
    let a0_3 = flow.a[flow.a.len() - 1].powi(3);
    let left = (params.g * l4 + params.alpha * mu * mu) * f1_star.f0;
    let right = l4 * a0_3 * f1_star.fp0;
    let residual = left - right;
    if residual.abs() > 1e-8 * left.abs().max(right.abs()) {
        return Err(Error::numerical(format!("W(lambda*, 4 pi^2) = {residual} is not zero (scale {left})")));
    }
    Ok(BifurcationPoint { c0, lambda_star, f1_star, mode_k: 1 })
}

/// One row of a Wronskian scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRow {
    pub lambda: f64,
    pub mu: f64,
    pub w: f64,
}

/// `W` on the tensor grid `lambdas × mus`.
pub fn wronskian_scan(
    flow: &LaminarFlow,
    params: &PhysicalParams,
    lambdas: &[f64],
    mus: &[f64],
) -> Result<Vec<ScanRow>> {
    let mut rows = Vec::with_capacity(lambdas.len() * mus.len());
    for &lambda in lambdas {
        for &mu in mus {
            rows.push(ScanRow { lambda, mu, w: wronskian(flow, params, lambda, mu)? });
        }
    }
    Ok(rows)
}
