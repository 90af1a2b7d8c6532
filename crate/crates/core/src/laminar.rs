//! Laminar (flat-surface) flows and the two solvability conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::interp::HermiteSpline;
use crate::numerics::quad::{adaptive_simpson, Tolerance};
use crate::numerics::roots::{brent, RootTolerance};
use crate::vorticity::{Extremum, VorticityProfile};

/// Default number of `p` samples stored in a [`LaminarFlow`].
pub const DEFAULT_NP: usize = 257;

/// Tight quadrature used for the depth integral; `ϑ` inherits its accuracy.
const DEPTH_TOL: Tolerance = Tolerance { abs: 1e-14, rel: 1e-13 };

/// Offsets `δ_k = 4^{-k}`, `k = 1..=LIMIT_LEVELS`, used when probing the
/// limit `ϑ ↘ 2 max Γ`. Below `δ ≈ 1e-7` the integrand `ϑ − 2Γ` loses too
/// many digits to cancellation for the quadrature to converge.
const LIMIT_LEVELS: i32 = 12;

/// Quadrature tolerance near the singular limit, matched to that cancellation.
const LIMIT_TOL: Tolerance = Tolerance { abs: 1e-12, rel: 1e-10 };

/// Physical constants: gravity, depth, relative mass flux and plate rigidity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub g: f64,
    #[serde(rename = "depth")]
    pub d: f64,
    pub p0: f64,
    pub alpha: f64,
}

impl PhysicalParams {
    pub fn new(g: f64, d: f64, p0: f64, alpha: f64) -> Result<Self> {
        let params = PhysicalParams { g, d, p0, alpha };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("g", self.g)?;
        positive("depth", self.d)?;
        positive("alpha", self.alpha)?;
        if !(self.p0 < 0.0 && self.p0.is_finite()) {
            return Err(Error::invalid(format!("p0 must be negative and finite, got {}", self.p0)));
        }
        Ok(())
    }

    /// The vorticity profile and the parameters must agree on `p₀`.
    pub fn check_profile(&self, profile: &VorticityProfile) -> Result<()> {
        self.validate()?;
        let scale = self.p0.abs();
        if (profile.p0() - self.p0).abs() > 1e-12 * scale {
            return Err(Error::invalid(format!(
                "vorticity profile is defined on [{}, 0] but p0 = {}",
                profile.p0(),
                self.p0
            )));
        }
        Ok(())
    }
}

/// Outcome of the existence test for laminar flows of a given depth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Existence {
    pub exists: bool,
    /// `lim_{ϑ ↘ 2 max Γ} D(ϑ)`, possibly infinite.
    pub limit: f64,
}

/// `∫ (ϑ − 2Γ)^{-1/2}` over `[p₀, 0]`, split at the maximizer `s*` of `Γ`
/// and computed with `s = s* ± t²` so the endpoint singularity at
/// `ϑ = 2 max Γ` becomes a bounded integrand.
fn singular_aware_integral(profile: &VorticityProfile, theta: f64, top: Extremum, tol: Tolerance) -> f64 {
    let p0 = profile.p0();
    let s = top.at;
    let kernel = |p: f64| {
        let r = theta - 2.0 * profile.gamma_integral_unchecked(p);
        if r > 0.0 {
            r.powf(-0.5)
        } else {
            f64::INFINITY
        }
    };
    let mut total = 0.0;
    if s > p0 {
        let tmax = (s - p0).sqrt();
        total +=
            adaptive_simpson(|t| if t == 0.0 { 0.0 } else { 2.0 * t * kernel((s - t * t).max(p0)) }, 0.0, tmax, tol);
    }
    if s < 0.0 {
        let tmax = (-s).sqrt();
        total +=
            adaptive_simpson(|t| if t == 0.0 { 0.0 } else { 2.0 * t * kernel((s + t * t).min(0.0)) }, 0.0, tmax, tol);
    }
    total
}

/// `D(ϑ) = ∫_{p₀}^0 (ϑ − 2Γ(s))^{-1/2} ds`.
pub fn depth_integral(profile: &VorticityProfile, theta: f64) -> Result<f64> {
    let top = profile.max_gamma_integral();
    depth_integral_with(profile, theta, top)
}

fn depth_integral_with(profile: &VorticityProfile, theta: f64, top: Extremum) -> Result<f64> {
    if !(theta > 2.0 * top.value) || !theta.is_finite() {
        return Err(Error::domain(format!("theta = {theta} must exceed 2 max Gamma = {}", 2.0 * top.value)));
    }
    let value = singular_aware_integral(profile, theta, top, DEPTH_TOL);
    if !value.is_finite() {
        return Err(Error::numerical(format!("depth integral not finite at theta = {theta}")));
    }
    Ok(value)
}

/// Decides whether `D(ϑ) = d` is solvable by estimating `lim D(ϑ)` as
/// `ϑ ↘ 2 max Γ`.
///
/// `D` is sampled at `ϑ_k = 2M(1 + δ_k) + δ_k`, `δ_k = 4^{-k}`. A finite
/// limit is approached like `√δ`, so successive differences shrink by a
/// factor of about 1/2 and one Richardson step gives the limit; a divergent
/// `D` has ratios of 1 (logarithmic) or 2 (power law). The zero profile is
/// handled the same way (`D ∝ ϑ^{-1/2}`).
pub fn check_existence(profile: &VorticityProfile, d: f64) -> Existence {
    let top = profile.max_gamma_integral();
    existence_from(&limit_probe(profile, top), d)
}

/// `(ϑ_k, D(ϑ_k))` for the probe levels, nearest to the singularity last.
fn limit_probe(profile: &VorticityProfile, top: Extremum) -> Vec<(f64, f64)> {
    let m = top.value;
    (1..=LIMIT_LEVELS)
        .map(|k| {
            let delta = 4f64.powi(-k);
            let theta = 2.0 * m * (1.0 + delta) + delta;
            (theta, singular_aware_integral(profile, theta, top, LIMIT_TOL))
        })
        .collect()
}

fn existence_from(probe: &[(f64, f64)], d: f64) -> Existence {
    let n = probe.len();
    let (d2, d1, d0) = (probe[n - 3].1, probe[n - 2].1, probe[n - 1].1);
    let (step_prev, step_last) = (d1 - d2, d0 - d1);
    let limit = if !d0.is_finite() {
        f64::INFINITY
    } else if step_last.abs() <= 1e-14 * d0.abs() {
        d0
    } else if step_last / step_prev < 0.75 {
        2.0 * d0 - d1
    } else {
        f64::INFINITY
    };
    Existence { exists: limit > d, limit }
}

/// The unique `ϑ > 2 max Γ` with `D(ϑ) = d`.
///
/// The lower bracket end is the probe point of [`check_existence`] closest to
/// the singularity at which `D` still exceeds `d`.
pub fn solve_theta(profile: &VorticityProfile, params: &PhysicalParams) -> Result<f64> {
    params.check_profile(profile)?;
    let d = params.d;
    if profile.is_zero() {
        return Ok((params.p0 / d).powi(2));
    }
    let top = profile.max_gamma_integral();
    let probe = limit_probe(profile, top);
    let existence = existence_from(&probe, d);
    if !existence.exists {
        return Err(Error::ConditionFailed { condition: "COND1", value: existence.limit });
    }
    let (lo, _) = *probe.iter().rev().find(|(_, v)| *v > d).ok_or_else(|| {
        Error::numerical(format!("depth {d} is too close to the limiting depth {} to bracket theta", existence.limit))
    })?;
    let f_lo = depth_integral_with(profile, lo, top)? - d;
    if f_lo <= 0.0 {
        return Err(Error::numerical("lower bracket for theta lost under refinement"));
    }
    let mut hi = (2.0 * lo).max(1.0);
    let mut f_hi = depth_integral_with(profile, hi, top)? - d;
    while f_hi > 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::numerical("no upper bracket for theta"));
        }
        f_hi = depth_integral_with(profile, hi, top)? - d;
    }
    let tol = RootTolerance { abs: 0.0, rel: 1e-13, max_iter: 200 };
    brent(|t| Ok(depth_integral_with(profile, t, top)? - d), lo, hi, f_lo, f_hi, tol)
}

/// The laminar solution `H(p)` with `a = 1/H' = (ϑ − 2Γ)^{1/2}`.
#[derive(Clone, Debug)]
pub struct LaminarFlow {
    profile: VorticityProfile,
    pub params: PhysicalParams,
    pub theta: f64,
    /// Uniform grid on `[p₀, 0]`.
    pub p: Vec<f64>,
    pub h: Vec<f64>,
    pub a: Vec<f64>,
    pub a_min: f64,
    pub a_max: f64,
    /// `∫ a⁻³` over `[p₀, 0]`.
    pub int_a_inv3: f64,
    a_spline: HermiteSpline,
    h_spline: HermiteSpline,
}

impl LaminarFlow {
    pub fn profile(&self) -> &VorticityProfile {
        &self.profile
    }

    pub fn p0(&self) -> f64 {
        self.params.p0
    }

    /// `a(p)` from the stored Hermite interpolant (exact nodal slopes `−γ/a`).
    pub fn a_at(&self, p: f64) -> f64 {
        self.a_spline.eval(p)
    }

    /// `a(p)` and `a'(p)` from the interpolant.
    pub fn a_with_derivative(&self, p: f64) -> (f64, f64) {
        self.a_spline.eval_with_derivative(p)
    }

    /// `a(p)` evaluated from `ϑ` and `Γ` directly, without interpolation.
    pub fn a_exact(&self, p: f64) -> f64 {
        (self.theta - 2.0 * self.profile.gamma_integral_unchecked(p)).sqrt()
    }

    pub fn h_at(&self, p: f64) -> f64 {
        self.h_spline.eval(p)
    }

    /// `H'(p) = 1/a(p)`.
    pub fn h_prime_at(&self, p: f64) -> f64 {
        1.0 / self.a_exact(p)
    }

    /// `H''(p) = γ(p) H'(p)³`, read off the laminar equation.
    pub fn h_second_at(&self, p: f64) -> f64 {
        self.profile.gamma_unchecked(p) * self.h_prime_at(p).powi(3)
    }

    pub fn gamma_at(&self, p: f64) -> f64 {
        self.profile.gamma_unchecked(p)
    }

    /// `g ∫ a⁻³` and whether it is strictly below one.
    pub fn cond2(&self) -> (f64, bool) {
        cond2_value(self, &self.params)
    }
}

/// Builds the laminar flow on `n_p` uniform samples of `[p₀, 0]`.
pub fn build_laminar(profile: &VorticityProfile, params: &PhysicalParams, n_p: usize) -> Result<LaminarFlow> {
    if n_p < 3 {
        return Err(Error::invalid(format!("at least 3 p-samples are required, got {n_p}")));
    }
    let theta = solve_theta(profile, params)?;
    let p0 = params.p0;
    let p: Vec<f64> =
        (0..n_p).map(|i| if i == n_p - 1 { 0.0 } else { p0 - p0 * i as f64 / (n_p - 1) as f64 }).collect();
    let a_of = |s: f64| (theta - 2.0 * profile.gamma_integral_unchecked(s)).sqrt();
    let a: Vec<f64> = p.iter().map(|&s| a_of(s)).collect();
    if a.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::numerical("laminar speed a is not positive on the grid"));
    }
    let da: Vec<f64> = p.iter().zip(&a).map(|(&s, &v)| -profile.gamma_unchecked(s) / v).collect();

    // H(p_i) = -∫_{p_i}^0 1/a, accumulated from the surface downwards
    let mut h = vec![0.0; n_p];
    for i in (0..n_p - 1).rev() {
        h[i] = h[i + 1] - adaptive_simpson(|s| 1.0 / a_of(s), p[i], p[i + 1], DEPTH_TOL);
    }
    let dh: Vec<f64> = a.iter().map(|v| 1.0 / v).collect();
    let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
    let a_max = a.iter().copied().fold(0.0, f64::max);
    let int_a_inv3 = adaptive_simpson(|s| a_of(s).powi(-3), p0, 0.0, DEPTH_TOL);

    Ok(LaminarFlow {
        profile: profile.clone(),
        params: *params,
        theta,
        a_spline: HermiteSpline::new(p.clone(), a.clone(), da)?,
        h_spline: HermiteSpline::new(p.clone(), h.clone(), dh)?,
        p,
        h,
        a,
        a_min,
        a_max,
        int_a_inv3,
    })
}

/// `g ∫_{p₀}^0 a⁻³ dp` and the strict inequality `< 1`.
pub fn cond2_value(flow: &LaminarFlow, params: &PhysicalParams) -> (f64, bool) {
    let value = params.g * flow.int_a_inv3;
    (value, value < 1.0)
}
