//! The plate operator and the nonlocal boundary operators `B`, `Φ`, `Ψ`.
//!
//! Everything acts on 1-periodic even functions of `q` sampled on a
//! [`Spectral`] grid. With `ζ = tr₀h/λ` and `ω = (1 + ζ'²)^{1/2}`, the plate
//! condition `H(ζ) = B(λ, h)` is equivalent to the fixed-point relation
//! `tr₀h = Ψ(λ, h)`.

use crate::error::{Error, Result};
use crate::laminar::PhysicalParams;
use crate::spectral::Spectral;

/// Relative size of the spectral tail below which `ζ` counts as resolved.
pub const RESOLVED_TAIL: f64 = 1e-10;

/// Relative coefficient size treated as roundoff before differentiating.
const NOISE_FLOOR: f64 = 1e-14;

/// `(1 + s²)^{1/2}` pointwise.
pub fn omega_of(slope: &[f64]) -> Vec<f64> {
    slope.iter().map(|s| (1.0 + s * s).sqrt()).collect()
}

/// Values of the plate operator together with a resolution flag.
#[derive(Clone, Debug)]
pub struct PlateH {
    pub values: Vec<f64>,
    /// `false` if `ζ` or its curvature has a significant spectral tail, in
    /// which case the fourth derivative is not trustworthy.
    pub resolved: bool,
}

/// `H(ζ) = ω⁻¹[ω⁻¹(ω⁻³ζ'')']' + ½(ω⁻³ζ'')³` with spectral derivatives.
pub fn plate_h(sp: &Spectral, zeta: &[f64]) -> PlateH {
    let clean = sp.filtered(zeta, NOISE_FLOOR);
    let d1 = sp.derivative(&clean, 1);
    let d2 = sp.derivative(&clean, 2);
    let omega = omega_of(&d1);
    let kappa: Vec<f64> = d2.iter().zip(&omega).map(|(z, w)| z / (w * w * w)).collect();
    let resolved = sp.is_resolved(zeta, RESOLVED_TAIL) && sp.is_resolved(&kappa, RESOLVED_TAIL);
    let kappa = sp.filtered(&kappa, NOISE_FLOOR);
    let g: Vec<f64> = sp.derivative(&kappa, 1).iter().zip(&omega).map(|(k, w)| k / w).collect();
    let values = sp
        .derivative(&sp.filtered(&g, NOISE_FLOOR), 1)
        .iter()
        .zip(&omega)
        .zip(&kappa)
        .map(|((dg, w), k)| dg / w + 0.5 * k * k * k)
        .collect();
    PlateH { values, resolved }
}

/// `(1 − ∂²)⁻¹` on zero-mean functions.
pub fn helmholtz_inv(sp: &Spectral, f: &[f64]) -> Result<Vec<f64>> {
    let mean = sp.mean(f);
    let size = f.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if mean.abs() > 1e-12 * size {
        return Err(Error::domain(format!("Helmholtz inverse needs zero mean, got {mean:e}")));
    }
    Ok(sp.helmholtz_inverse(f))
}

/// Surface data entering the boundary operators: `tr₀h`, `tr₀h_q`, `tr₀h_p`.
#[derive(Clone, Debug)]
pub struct SurfaceTraces {
    pub h0: Vec<f64>,
    pub h0_q: Vec<f64>,
    pub hp0: Vec<f64>,
    pub lambda: f64,
}

impl SurfaceTraces {
    /// Validates zero mean of `h0`, positivity of `hp0` and `λ`.
    pub fn new(sp: &Spectral, h0: Vec<f64>, hp0: Vec<f64>, lambda: f64) -> Result<Self> {
        let mean = sp.mean(&h0);
        let size = h0.iter().map(|v| v.abs()).fold(1.0, f64::max);
        if mean.abs() > 1e-12 * size {
            return Err(Error::domain(format!("surface trace must have zero mean, got {mean:e}")));
        }
        Self::build(sp, h0, hp0, lambda)
    }

    /// As [`SurfaceTraces::new`] after removing the mean of `h0`.
    pub fn projected(sp: &Spectral, mut h0: Vec<f64>, hp0: Vec<f64>, lambda: f64) -> Result<Self> {
        let mean = sp.mean(&h0);
        h0.iter_mut().for_each(|v| *v -= mean);
        Self::build(sp, h0, hp0, lambda)
    }

    fn build(sp: &Spectral, h0: Vec<f64>, hp0: Vec<f64>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
        }
        if let Some(v) = hp0.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::domain(format!("h_p must be positive on the surface, found {v}")));
        }
        let h0_q = sp.derivative(&h0, 1);
        Ok(SurfaceTraces { h0, h0_q, hp0, lambda })
    }

    /// `ζ = tr₀h / λ`.
    pub fn zeta(&self) -> Vec<f64> {
        self.h0.iter().map(|v| v / self.lambda).collect()
    }

    /// `(λ² + h_q²)/h_p²` on the surface.
    pub fn kinetic(&self) -> Vec<f64> {
        let l2 = self.lambda * self.lambda;
        self.h0_q.iter().zip(&self.hp0).map(|(q, p)| (l2 + q * q) / (p * p)).collect()
    }
}

/// `B(λ,h) = (λ/2α)[mean X − X − 2gλ²h]` with `X = (λ² + h_q²)/h_p²`.
pub fn op_b(sp: &Spectral, traces: &SurfaceTraces, params: &PhysicalParams) -> Vec<f64> {
    let l = traces.lambda;
    let x = traces.kinetic();
    let mean_x = sp.mean(&x);
    let c = l / (2.0 * params.alpha);
    x.iter().zip(&traces.h0).map(|(xv, h)| c * (mean_x - xv - 2.0 * params.g * l * l * h)).collect()
}

/// `Φ = ∫₀^q∫₀^x B − (5/2)∫₀^q ζ'ζ''²ω⁻⁷` from `B` and `ζ`.
pub fn phi_from_parts(sp: &Spectral, b: &[f64], zeta: &[f64]) -> Vec<f64> {
    let d1 = sp.derivative(zeta, 1);
    let d2 = sp.derivative(zeta, 2);
    let correction: Vec<f64> = d1.iter().zip(&d2).map(|(z1, z2)| z1 * z2 * z2 * (1.0 + z1 * z1).powf(-3.5)).collect();
    let inner = sp.antiderivative(&correction);
    sp.double_antiderivative(b).iter().zip(&inner).map(|(p, c)| p - 2.5 * c).collect()
}

pub fn op_phi(sp: &Spectral, traces: &SurfaceTraces, params: &PhysicalParams) -> Vec<f64> {
    phi_from_parts(sp, &op_b(sp, traces, params), &traces.zeta())
}

/// `Ψ = (1 − ∂²)⁻¹[λω⁵ mean(ω⁵Φ)/mean(ω⁵) + tr₀h − λω⁵Φ]`.
pub fn op_psi(sp: &Spectral, traces: &SurfaceTraces, params: &PhysicalParams) -> Result<Vec<f64>> {
    let l = traces.lambda;
    let phi = op_phi(sp, traces, params);
    let slope = sp.derivative(&traces.zeta(), 1);
    let w5: Vec<f64> = omega_of(&slope).iter().map(|w| w.powi(5)).collect();
    let w5_phi: Vec<f64> = w5.iter().zip(&phi).map(|(w, p)| w * p).collect();
    let ratio = sp.mean(&w5_phi) / sp.mean(&w5);
    let arg: Vec<f64> = w5.iter().zip(&w5_phi).zip(&traces.h0).map(|((w, wp), h)| l * w * ratio + h - l * wp).collect();
    helmholtz_inv(sp, &arg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn params() -> PhysicalParams {
        PhysicalParams::new(1.0, 1.0, -2.0, 0.5).unwrap()
    }

    fn cos_profile(sp: &Spectral, amp: f64) -> Vec<f64> {
        sp.nodes().iter().map(|q| amp * (2.0 * PI * q).cos()).collect()
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega_of(&[0.0, 0.0]), vec![1.0, 1.0]);
        assert!(omega_of(&[1.0]).iter().all(|w| (w - 2f64.sqrt()).abs() < 1e-15));
    }

    #[test]
    fn plate_of_flat_and_small_surfaces() {
        let sp = Spectral::new(128).unwrap();
        let zero = plate_h(&sp, &vec![0.0; 128]);
        assert!(zero.values.iter().all(|v| *v == 0.0) && zero.resolved);
        let eps = 1e-6;
        let h = plate_h(&sp, &cos_profile(&sp, eps));
        let lin = cos_profile(&sp, eps * (2.0 * PI).powi(4));
        let scale = eps * (2.0 * PI).powi(4);
        for (a, b) in h.values.iter().zip(&lin) {
            assert!((a - b).abs() < 1e-8 * scale);
        }
        let noisy: Vec<f64> = (0..128).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(!plate_h(&sp, &noisy).resolved);
    }

    #[test]
    fn plate_matches_finite_difference_oracle() {
        // ζ = A cos(2πq); ζ', ζ'' in closed form, the two outer derivatives by
        // sixth-order central differences on an 8x finer grid
        let a = 0.05;
        let w = 2.0 * PI;
        let kappa = |q: f64| {
            let z1 = -a * w * (w * q).sin();
            let z2 = -a * w * w * (w * q).cos();
            z2 / (1.0 + z1 * z1).powf(1.5)
        };
        let omega = |q: f64| (1.0 + (a * w * (w * q).sin()).powi(2)).sqrt();
        let h = 1.0 / 1024.0;
        let d6 = |f: &dyn Fn(f64) -> f64, q: f64| {
            (-f(q - 3.0 * h) + 9.0 * f(q - 2.0 * h) - 45.0 * f(q - h) + 45.0 * f(q + h) - 9.0 * f(q + 2.0 * h)
                + f(q + 3.0 * h))
                / (60.0 * h)
        };
        let g = |q: f64| d6(&kappa, q) / omega(q);
        let sp = Spectral::new(128).unwrap();
        let values = plate_h(&sp, &cos_profile(&sp, a)).values;
        let sup = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (j, q) in sp.nodes().iter().enumerate() {
            let oracle = d6(&g, *q) / omega(*q) + 0.5 * kappa(*q).powi(3);
            assert!((values[j] - oracle).abs() < 1e-9 * sup, "{j}: {} vs {oracle}", values[j]);
        }
    }

    #[test]
    fn helmholtz_rejects_nonzero_mean() {
        let sp = Spectral::new(16).unwrap();
        assert!(matches!(helmholtz_inv(&sp, &[1.0; 16]), Err(Error::Domain(_))));
        assert_eq!(helmholtz_inv(&sp, &[0.0; 16]).unwrap(), vec![0.0; 16]);
    }

    fn laminar_traces(sp: &Spectral, lambda: f64) -> SurfaceTraces {
        SurfaceTraces::new(sp, vec![0.0; sp.len()], vec![0.5; sp.len()], lambda).unwrap()
    }

    #[test]
    fn laminar_traces_give_zero() {
        let sp = Spectral::new(64).unwrap();
        let t = laminar_traces(&sp, 3.0);
        assert!(op_b(&sp, &t, &params()).iter().all(|v| v.abs() < 1e-14));
        assert!(op_phi(&sp, &t, &params()).iter().all(|v| v.abs() < 1e-14));
        assert!(op_psi(&sp, &t, &params()).unwrap().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn phi_of_pure_cosine() {
        let sp = Spectral::new(64).unwrap();
        let phi = phi_from_parts(&sp, &cos_profile(&sp, 1.0), &vec![0.0; 64]);
        for (j, q) in sp.nodes().iter().enumerate() {
            assert!((phi[j] - (1.0 - (2.0 * PI * q).cos()) / (2.0 * PI).powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn b_linearization() {
        // h = H + ε f(p) cos(2πq), a ≡ 2: δB = (λ³/α)(a³ f'(0) − g f(0)) cos
        let sp = Spectral::new(64).unwrap();
        let pp = params();
        let (lambda, f0, fp0) = (2.5, 0.7, 1.3);
        let b_at = |eps: f64| {
            let h0 = cos_profile(&sp, eps * f0);
            let hp0: Vec<f64> = cos_profile(&sp, eps * fp0).iter().map(|v| 0.5 + v).collect();
            op_b(&sp, &SurfaceTraces::new(&sp, h0, hp0, lambda).unwrap(), &pp)
        };
        let eps = 1e-6;
        let (bp, bm) = (b_at(eps), b_at(-eps));
        let coef = lambda.powi(3) / pp.alpha * (8.0 * fp0 - pp.g * f0);
        let expected = cos_profile(&sp, coef);
        for j in 0..64 {
            let fd = (bp[j] - bm[j]) / (2.0 * eps);
            assert!((fd - expected[j]).abs() < 1e-6 * coef.abs(), "{fd} {}", expected[j]);
        }
    }

    /// Surface data satisfying the plate condition exactly for a chosen `ζ`.
    fn manufactured(sp: &Spectral, lambda: f64, amp: f64) -> SurfaceTraces {
        let pp = params();
        let zeta = cos_profile(sp, amp);
        let h0: Vec<f64> = zeta.iter().map(|z| lambda * z).collect();
        let h0_q = sp.derivative(&h0, 1);
        let plate = plate_h(sp, &zeta).values;
        let q_const = lambda * lambda * 4.0;
        let hp0: Vec<f64> = (0..sp.len())
            .map(|j| {
                let x = q_const - 2.0 * pp.g * lambda * lambda * h0[j] - 2.0 * pp.alpha / lambda * plate[j];
                ((lambda * lambda + h0_q[j] * h0_q[j]) / x).sqrt()
            })
            .collect();
        SurfaceTraces::new(sp, h0, hp0, lambda).unwrap()
    }

    #[test]
    fn manufactured_solution_is_a_fixed_point() {
        let sp = Spectral::new(128).unwrap();
        let pp = params();
        let t = manufactured(&sp, 3.2, 0.01);
        let psi = op_psi(&sp, &t, &pp).unwrap();
        let res = t.h0.iter().zip(&psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(res < 1e-8, "{res}");
        // converse direction: B coincides with H(ζ)
        let b = op_b(&sp, &t, &pp);
        let plate = plate_h(&sp, &t.zeta()).values;
        let diff = b.iter().zip(&plate).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
        // integral of the plate operator over one period vanishes
        assert!(sp.mean(&plate).abs() < 1e-10);
    }

    #[test]
    fn psi_is_resolved_under_refinement() {
        let pp = params();
        let coarse = Spectral::new(128).unwrap();
        let fine = Spectral::new(256).unwrap();
        let (tc, tf) = (manufactured(&coarse, 3.2, 0.03), manufactured(&fine, 3.2, 0.03));
        let (pc, pf) = (op_psi(&coarse, &tc, &pp).unwrap(), op_psi(&fine, &tf, &pp).unwrap());
        let diff = (0..128).map(|j| (pc[j] - pf[2 * j]).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn operators_preserve_parity_and_mean(
            c in proptest::collection::vec(-0.01f64..0.01, 6),
            d in proptest::collection::vec(-0.05f64..0.05, 6),
            lambda in 0.5f64..5.0,
        ) {
            let sp = Spectral::new(64).unwrap();
            let mut hc = vec![0.0; 33];
            let mut pc = vec![0.0; 33];
            hc[1..6].copy_from_slice(&c[1..6]);
            pc[1..6].copy_from_slice(&d[1..6]);
            pc[0] = 0.5;
            let t = SurfaceTraces::new(&sp, sp.from_cosine(&hc), sp.from_cosine(&pc), lambda).unwrap();
            let pp = params();
            let b = op_b(&sp, &t, &pp);
            prop_assert!(sp.mean(&b).abs() < 1e-13 * b.iter().map(|v| v.abs()).fold(1.0, f64::max));
            prop_assert!(sp.even_defect(&b) < 1e-12);
            let phi = op_phi(&sp, &t, &pp);
            prop_assert!(sp.even_defect(&phi) < 1e-12);
            let psi = op_psi(&sp, &t, &pp).unwrap();
            prop_assert!(sp.even_defect(&psi) < 1e-12);
            prop_assert!(sp.mean(&psi).abs() < 1e-13);
            let plate = plate_h(&sp, &t.zeta());
            let size = plate.values.iter().map(|v| v.abs()).fold(1.0, f64::max);
            prop_assert!(sp.even_defect(&plate.values) < 1e-10 * size);
            if plate.resolved {
                prop_assert!(sp.mean(&plate.values).abs() < 1e-10 * size);
            }
            let inv = sp.cosine_coefficients(&sp.helmholtz_inverse(&b));
            let orig = sp.cosine_coefficients(&b);
            for (x, y) in inv.iter().zip(&orig) {
                prop_assert!(x.abs() <= y.abs() + 1e-15);
            }
        }
    }
}
