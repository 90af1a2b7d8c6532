//! Linearization about the laminar flow: `(L, T)`, its per-mode matrices,
//! kernel detection, the discrete bifurcation point and transversality.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use super::grid::{Grid, HeightField};
use crate::error::{Error, Result};
use crate::numerics::quad::simpson_weights;
use crate::numerics::roots::{brent, RootTolerance};
use crate::spectral::Spectral;
use crate::sturm::BifurcationPoint;

/// `σ₁/σ₂` below this marks a mode as a kernel candidate at base resolution.
pub const CANDIDATE_RATIO: f64 = 0.05;
/// A candidate is null if refinement shrinks `σ₁/σ₂` by at least this factor.
pub const REFINEMENT_DROP: f64 = 0.5;

/// `(L h, T h)` at the nodes; `lh` covers every row (one-sided second-order
/// stencils on the bed and surface rows).
#[derive(Clone, Debug)]
pub struct LinearImage {
    pub lh: Vec<f64>,
    pub th: Vec<f64>,
}

/// `L[h] = λ²h_pp + H'²h_qq − 3λ²γH'²h_p` and
/// `T[h] = tr₀h − (1 − ∂²)⁻¹[tr₀h − (λ⁴/α)(S − ∫S)]`.
pub fn apply_lt(grid: &Grid, dir: &HeightField, lambda: f64) -> LinearImage {
    let (n_q, n_p, dp) = (grid.n_q, grid.n_p, grid.dp);
    let l2 = lambda * lambda;
    let sp = &grid.spectral;
    let mut lh = vec![0.0; n_q * n_p];
    for i in 0..n_p {
        let wqq = sp.derivative(dir.row(i), 2);
        for j in 0..n_q {
            let w = |r: usize| dir.w[r * n_q + j];
            let (wp, wpp) = if i == 0 {
                (
                    (-3.0 * w(0) + 4.0 * w(1) - w(2)) / (2.0 * dp),
                    (2.0 * w(0) - 5.0 * w(1) + 4.0 * w(2) - w(3)) / (dp * dp),
                )
            } else if i == n_p - 1 {
                (
                    (3.0 * w(i) - 4.0 * w(i - 1) + w(i - 2)) / (2.0 * dp),
                    (2.0 * w(i) - 5.0 * w(i - 1) + 4.0 * w(i - 2) - w(i - 3)) / (dp * dp),
                )
            } else {
                ((w(i + 1) - w(i - 1)) / (2.0 * dp), (w(i + 1) - 2.0 * w(i) + w(i - 1)) / (dp * dp))
            };
            let hp = grid.h_prime[i];
            lh[i * n_q + j] = l2 * wpp + hp * hp * wqq[j] - 3.0 * l2 * grid.gamma[i] * hp * hp * wp;
        }
    }
    let m = grid.surface();
    let wp0 = super::residual::surface_wp(dir.row(m), dir.row(m - 1), dir.row(m - 2), dp);
    let th = boundary_linearization(sp, grid, dir.row(m), &wp0, lambda);
    LinearImage { lh, th }
}

/// `T` from the surface value and the surface `p`-derivative of a direction.
fn boundary_linearization(sp: &Spectral, grid: &Grid, h0: &[f64], hp0: &[f64], lambda: f64) -> Vec<f64> {
    let (g, alpha) = (grid.params.g, grid.params.alpha);
    let a3 = grid.a0.powi(3);
    let mean_h0 = sp.mean(h0);
    let integrand: Vec<f64> = h0.iter().zip(hp0).map(|(h, p)| a3 * p - g * (h - mean_h0)).collect();
    let s = sp.double_antiderivative(&integrand);
    let mean_s = sp.mean(&s);
    let c = lambda.powi(4) / alpha;
    let arg: Vec<f64> = h0.iter().zip(&s).map(|(h, sv)| h - mean_h0 - c * (sv - mean_s)).collect();
    let inv = sp.helmholtz_inverse(&arg);
    h0.iter().zip(&inv).map(|(h, v)| h - v).collect()
}

/// Matrix of the linearization restricted to `f(p) cos(2πkq)`, unknowns
/// `f_1..f_M`. Interior rows are scaled by `Δp²/λ²`, the surface row by its
/// largest entry, so that every row has entries of order one.
pub fn mode_matrix(grid: &Grid, lambda: f64, k: usize) -> DMatrix<f64> {
    let m = grid.surface();
    let dp = grid.dp;
    let mu = (2.0 * PI * k as f64).powi(2);
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 1..m {
        let hp2 = grid.h_prime[i] * grid.h_prime[i];
        let drift = 1.5 * grid.gamma[i] * hp2 * dp;
        let r = i - 1;
        if i >= 2 {
            a[(r, r - 1)] = 1.0 + drift;
        }
        a[(r, r)] = -2.0 - mu * hp2 * dp * dp / (lambda * lambda);
        a[(r, r + 1)] = 1.0 - drift;
    }
    let (g, alpha) = (grid.params.g, grid.params.alpha);
    let row = m - 1;
    if k == 0 {
        a[(row, row)] = 1.0;
    } else {
        // numerator of T_k: (αμ² + gλ⁴) f(0) − λ⁴ a(0)³ f'(0)
        let l4 = lambda.powi(4);
        let slope = l4 * grid.a0.powi(3) / (2.0 * dp);
        let mut entries = [(row, alpha * mu * mu + g * l4 - 3.0 * slope), (row - 1, 4.0 * slope), (row - 2, -slope)];
        if m < 3 {
            entries[2].1 = 0.0;
        }
        let scale = entries.iter().fold(0.0f64, |s, e| s.max(e.1.abs()));
        for (c, v) in entries {
            a[(row, c)] += v / scale;
        }
    }
    a
}

fn sorted_singular_values(a: DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| x.total_cmp(y));
    s
}

/// `σ₁/σ₂` of the mode-`k` matrix: small when the mode is nearly singular,
/// order one otherwise. Invariant under row and column scaling by scalars.
pub fn mode_sigma_ratio(grid: &Grid, lambda: f64, k: usize) -> f64 {
    let s = sorted_singular_values(mode_matrix(grid, lambda, k));
    s[0] / s[1]
}

/// Per-mode outcome of [`kernel_at`].
#[derive(Clone, Debug, Serialize)]
pub struct ModeSingularity {
    pub k: usize,
    pub ratio: f64,
    /// `σ₁/σ₂` on the refined grid, for candidates only.
    pub refined_ratio: Option<f64>,
    pub near_null: bool,
}

#[derive(Clone, Debug)]
pub struct KernelReport {
    pub dimension: usize,
    pub modes: Vec<ModeSingularity>,
    /// Unit-norm kernel direction when `dimension == 1`, with positive
    /// surface value at the crest `q = 0`.
    pub kernel: Option<HeightField>,
}

/// Counts near-null modes of the discrete linearization at `λ`.
///
/// A mode is a candidate when `σ₁/σ₂ <` [`CANDIDATE_RATIO`]; it is near-null
/// when halving `Δp` shrinks that ratio by at least [`REFINEMENT_DROP`]
/// (a true kernel direction has `σ₁/σ₂ = O(Δp²)`, other modes converge to a
/// positive ratio).
pub fn kernel_at(grid: &Grid, lambda: f64) -> Result<KernelReport> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    let mut fine: Option<Grid> = None;
    let mut modes = Vec::with_capacity(grid.modes());
    for k in 0..grid.modes() {
        let ratio = mode_sigma_ratio(grid, lambda, k);
        let mut entry = ModeSingularity { k, ratio, refined_ratio: None, near_null: false };
        if ratio < CANDIDATE_RATIO {
            if fine.is_none() {
                fine = Some(grid.refined()?);
            }
            let refined = mode_sigma_ratio(fine.as_ref().unwrap(), lambda, k);
            entry.refined_ratio = Some(refined);
            entry.near_null = refined < REFINEMENT_DROP * ratio;
        }
        modes.push(entry);
    }
    let null: Vec<usize> = modes.iter().filter(|m| m.near_null).map(|m| m.k).collect();
    let kernel = if null.len() == 1 { Some(mode_null_vector(grid, lambda, null[0])) } else { None };
    Ok(KernelReport { dimension: null.len(), modes, kernel })
}

/// Right singular vector of the smallest singular value of mode `k`, as a
/// unit-norm field with positive surface value at `q = 0`.
pub fn mode_null_vector(grid: &Grid, lambda: f64, k: usize) -> HeightField {
    let svd = mode_matrix(grid, lambda, k).svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let idx = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap();
    let mut f = vec![0.0; grid.n_p];
    for i in 1..grid.n_p {
        f[i] = v_t[(idx, i - 1)];
    }
    normalized_mode(grid, lambda, &f, k)
}

fn normalized_mode(grid: &Grid, lambda: f64, f: &[f64], k: usize) -> HeightField {
    let sign = if f[grid.n_p - 1] < 0.0 { -1.0 } else { 1.0 };
    let field = HeightField::from_mode(grid, lambda, f, k);
    let norm = field.norm(grid);
    field.scaled(sign / norm)
}

/// Discrete shooting for mode `k`: the interior recurrence from `f₀ = 0`,
/// `f₁ = 1`, returned with the normalized surface-row residual (a discrete
/// Wronskian whose zeros are the discrete bifurcation wavelengths).
pub fn discrete_wronskian(grid: &Grid, lambda: f64, k: usize) -> (f64, Vec<f64>) {
    let a = mode_matrix(grid, lambda, k);
    let m = grid.surface();
    let mut f = vec![0.0; grid.n_p];
    f[1] = 1.0;
    for i in 1..m {
        let r = i - 1;
        let lower = if i >= 2 { a[(r, r - 1)] * f[i - 1] } else { 0.0 };
        f[i + 1] = -(lower + a[(r, r)] * f[i]) / a[(r, r + 1)];
        let size = f[i + 1].abs();
        if size > 1e100 {
            f.iter_mut().for_each(|v| *v /= size);
        }
    }
    let row = m - 1;
    let value: f64 = (0..m).map(|c| a[(row, c)] * f[c + 1]).sum();
    let size: f64 = (0..m).map(|c| (a[(row, c)] * f[c + 1]).abs()).sum();
    (value / size, f)
}

/// Discrete analogue of `λ*` on this grid together with its kernel.
#[derive(Clone, Debug)]
pub struct DiscreteBifurcation {
    pub lambda_h: f64,
    /// Unit-norm kernel `f_h(p) cos(2πq)` with `f_h(0) > 0`.
    pub kernel: HeightField,
}

/// Root of the mode-1 discrete Wronskian near `lambda_guess`.
pub fn discrete_bifurcation(grid: &Grid, lambda_guess: f64) -> Result<DiscreteBifurcation> {
    let w = |l: f64| Ok(discrete_wronskian(grid, l, 1).0);
    let mut width = 0.02;
    for _ in 0..6 {
        let (lo, hi) = (lambda_guess * (1.0 - width), lambda_guess * (1.0 + width));
        let (wl, wh) = (w(lo)?, w(hi)?);
        if wl * wh <= 0.0 {
            let tol = RootTolerance { abs: 0.0, rel: 1e-14, max_iter: 200 };
            let lambda_h = brent(w, lo, hi, wl, wh, tol)?;
            let (_, f) = discrete_wronskian(grid, lambda_h, 1);
            let kernel = normalized_mode(grid, lambda_h, &f, 1);
            return Ok(DiscreteBifurcation { lambda_h, kernel });
        }
        width *= 2.0;
    }
    Err(Error::numerical(format!("no discrete bifurcation wavelength near {lambda_guess}")))
}

/// The functional `∫_Ω a³h*F + αC₀(1 + C₀λ*²)∫₀¹ φ tr₀h*` whose kernel is the
/// range of the linearization at `λ*`, with `h* = f(p)cos(2πq)`.
///
/// `f`, `a` sample the profile and the laminar speed on a uniform odd grid
/// `p`; `big_f` is row-major on that grid times the q-nodes of `sp`.
#[allow(clippy::too_many_arguments)]
pub fn if0_functional(
    sp: &Spectral,
    p: &[f64],
    a: &[f64],
    f: &[f64],
    big_f: &[f64],
    phi: &[f64],
    alpha: f64,
    c0: f64,
    lambda_star: f64,
) -> f64 {
    let n_q = sp.len();
    let dp = p[1] - p[0];
    let weights = simpson_weights(p.len(), dp);
    let cosine: Vec<f64> = sp.nodes().iter().map(|q| (2.0 * PI * q).cos()).collect();
    let project = |row: &[f64]| row.iter().zip(&cosine).map(|(v, c)| v * c).sum::<f64>() / n_q as f64;
    let bulk: f64 =
        (0..p.len()).map(|i| weights[i] * a[i].powi(3) * f[i] * project(&big_f[i * n_q..(i + 1) * n_q])).sum();
    let f0 = f[f.len() - 1];
    bulk + alpha * c0 * (1.0 + c0 * lambda_star * lambda_star) * f0 * project(phi)
}

/// Two independent evaluations of the transversality scalar.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Transversality {
    /// IF0 functional applied to `∂_{λh}F(λ*,0)[h*]` by quadrature.
    pub value: f64,
    /// `λ*((g − αC₀²)f(0)² − ∫a³f'²)`.
    pub closed_form: f64,
}

/// Transversality scalar with `h*` normalized by `f₁,*(0) = 1`.
///
/// The first component of `∂_{λh}F[h*]` is `2λ*a⁻³(a³f')' cos`, with
/// `(a³f')' = C₀ a f` from the kernel equation; the second is
/// `(4λ*³/α)(1 − ∂²)⁻¹[S[h*] − ∫S[h*]]` built with the spectral operators.
pub fn transversality(
    bif: &BifurcationPoint,
    flow: &crate::laminar::LaminarFlow,
    n_q: usize,
) -> Result<Transversality> {
    let params = &flow.params;
    let shot = &bif.f1_star;
    let n = shot.p.len();
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::invalid("transversality needs an odd number of kernel samples"));
    }
    let norm = 1.0 / shot.f0;
    let f: Vec<f64> = shot.f.iter().map(|v| v * norm).collect();
    let fp0 = shot.fp0 * norm;
    let a: Vec<f64> = shot.p.iter().map(|&s| flow.a_exact(s)).collect();
    let (lambda, c0) = (bif.lambda_star, bif.c0);

    let sp = Spectral::new(n_q)?;
    let cosine: Vec<f64> = sp.nodes().iter().map(|q| (2.0 * PI * q).cos()).collect();
    let mut big_f = Vec::with_capacity(n * n_q);
    for i in 0..n {
        let amp = 2.0 * lambda * c0 * f[i] / a[i].powi(2);
        big_f.extend(cosine.iter().map(|c| amp * c));
    }
    let a3 = flow.a_exact(0.0).powi(3);
    let integrand: Vec<f64> = cosine.iter().map(|c| (a3 * fp0 - params.g) * c).collect();
    let s = sp.double_antiderivative(&integrand);
    let mean_s = sp.mean(&s);
    let centered: Vec<f64> = s.iter().map(|v| v - mean_s).collect();
    let factor = 4.0 * lambda.powi(3) / params.alpha;
    let phi: Vec<f64> = sp.helmholtz_inverse(&centered).iter().map(|v| factor * v).collect();
    let value = if0_functional(&sp, &shot.p, &a, &f, &big_f, &phi, params.alpha, c0, lambda);

    let int_a3_fp2 = shot.int_a3_fp2 * norm * norm;
    let closed_form = lambda * ((params.g - params.alpha * c0 * c0) - int_a3_fp2);
    Ok(Transversality { value, closed_form })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuation::residual::residual_f;
    use crate::laminar::{build_laminar, PhysicalParams};
    use crate::sturm::bifurcation_point;
    use crate::vorticity::VorticityProfile;

    fn params() -> PhysicalParams {
        PhysicalParams::new(1.0, 1.0, -2.0, 0.5).unwrap()
    }

    fn setup(profile: VorticityProfile, n_p: usize) -> (Grid, BifurcationPoint) {
        let flow = build_laminar(&profile, &params(), 257).unwrap();
        let bif = bifurcation_point(&flow, &params()).unwrap();
        (Grid::new(&flow, 32, n_p).unwrap(), bif)
    }

    #[test]
    fn linearization_matches_directional_derivative() {
        let (g, _) = setup(VorticityProfile::constant(-2.0, 0.5).unwrap(), 65);
        let f1: Vec<f64> = g.p.iter().map(|p| (p + 2.0) * (1.0 + 0.3 * p)).collect();
        let f2: Vec<f64> = g.p.iter().map(|p| (p + 2.0).powi(2)).collect();
        let mut dir = HeightField::from_mode(&g, 3.0, &f1, 1);
        let two = HeightField::from_mode(&g, 3.0, &f2, 2);
        dir.w.iter_mut().zip(&two.w).for_each(|(a, b)| *a += 0.5 * b);
        let lin = apply_lt(&g, &dir, 3.0);
        let mut errs = Vec::new();
        for eps in [1e-4, 5e-5] {
            let r = residual_f(&g, &dir.scaled(eps)).unwrap();
            let m = g.surface();
            let mut e: f64 = 0.0;
            for i in 1..m {
                for j in 0..g.n_q {
                    e = e.max((r.interior[(i - 1) * g.n_q + j] / eps - lin.lh[i * g.n_q + j]).abs());
                }
            }
            for j in 0..g.n_q {
                e = e.max((r.boundary[j] / eps - lin.th[j]).abs());
            }
            errs.push(e);
        }
        // O(ε): halving ε halves the error
        let scale = lin.lh.iter().chain(&lin.th).fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(errs[0] < 1e-2 * scale && (errs[0] / errs[1] - 2.0).abs() < 0.1, "{errs:?} {scale}");
    }

    #[test]
    fn modes_decouple() {
        let (g, bif) = setup(VorticityProfile::constant(-2.0, 0.5).unwrap(), 65);
        let f: Vec<f64> = g.p.iter().map(|p| (p + 2.0).sin()).collect();
        for k in [0usize, 1, 3] {
            let lin = apply_lt(&g, &HeightField::from_mode(&g, 1.0, &f, k), bif.lambda_star);
            let scale = lin.lh.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..g.n_p {
                let c = g.spectral.cosine_coefficients(&lin.lh[i * g.n_q..(i + 1) * g.n_q]);
                for (kk, v) in c.iter().enumerate() {
                    if kk != k {
                        assert!(v.abs() < 1e-12 * scale, "mode {k} leaks into {kk}");
                    }
                }
            }
            let c = g.spectral.cosine_coefficients(&lin.th);
            for (kk, v) in c.iter().enumerate() {
                if kk != k {
                    assert!(v.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mode_matrix_matches_apply_lt() {
        let (g, bif) = setup(VorticityProfile::constant(-2.0, -0.4).unwrap(), 33);
        let lambda = bif.lambda_star * 1.1;
        let f: Vec<f64> = g.p.iter().map(|p| (p + 2.0) * (p - 3.0).powi(2)).collect();
        for k in [1usize, 2] {
            let a = mode_matrix(&g, lambda, k);
            let lin = apply_lt(&g, &HeightField::from_mode(&g, lambda, &f, k), lambda);
            let m = g.surface();
            for i in 1..m {
                let row: f64 = (0..m).map(|c| a[(i - 1, c)] * f[c + 1]).sum();
                let coef = g.spectral.cosine_coefficients(&lin.lh[i * g.n_q..(i + 1) * g.n_q])[k];
                let scaled = coef * g.dp * g.dp / (lambda * lambda);
                assert!((row - scaled).abs() < 1e-10 * (1.0 + row.abs()), "{row} {scaled}");
            }
            // surface row is proportional to T_k
            let t = g.spectral.cosine_coefficients(&lin.th)[k];
            let row: f64 = (0..m).map(|c| a[(m - 1, c)] * f[c + 1]).sum();
            let mu = (2.0 * PI * k as f64).powi(2);
            let numerator = t * g.params.alpha * mu * (1.0 + mu);
            assert!((row / numerator).is_finite());
            let other = f.iter().map(|v| v * 1.7 + 0.1).collect::<Vec<_>>();
            let lin2 = apply_lt(&g, &HeightField::from_mode(&g, lambda, &other, k), lambda);
            let t2 = g.spectral.cosine_coefficients(&lin2.th)[k];
            let row2: f64 = (0..m).map(|c| a[(m - 1, c)] * other[c + 1]).sum();
            assert!((row / t - row2 / t2).abs() < 1e-9 * (row / t).abs());
        }
    }

    #[test]
    fn kernel_structure() {
        let (g, bif) = setup(VorticityProfile::zero(-2.0).unwrap(), 129);
        let at_star = kernel_at(&g, bif.lambda_star).unwrap();
        assert_eq!(at_star.dimension, 1);
        let kernel = at_star.kernel.unwrap();
        let shot: Vec<f64> = g.p.iter().map(|&p| bif.f1_at(p)).collect();
        let reference = HeightField::from_mode(&g, bif.lambda_star, &shot, 1);
        let cosine = kernel.inner(&reference, &g) / reference.norm(&g);
        assert!(cosine > 0.999, "{cosine}");
        let double = kernel_at(&g, 2.0 * bif.lambda_star).unwrap();
        assert_eq!(double.dimension, 1);
        assert!(double.modes[2].near_null);
        assert_eq!(kernel_at(&g, 1.5 * bif.lambda_star).unwrap().dimension, 0);
    }

    #[test]
    fn discrete_bifurcation_converges() {
        let mut gaps = Vec::new();
        for n_p in [33usize, 65, 129] {
            let (g, bif) = setup(VorticityProfile::constant(-2.0, 0.5).unwrap(), n_p);
            let d = discrete_bifurcation(&g, bif.lambda_star).unwrap();
            gaps.push((d.lambda_h - bif.lambda_star).abs());
            let lin = apply_lt(&g, &d.kernel, d.lambda_h);
            let scale = d.kernel.max_abs() * d.lambda_h.powi(2) / (g.dp * g.dp);
            let m = g.surface();
            let interior = lin.lh[g.n_q..m * g.n_q].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(interior < 1e-10 * scale);
            assert!(lin.th.iter().all(|v| v.abs() < 1e-10));
        }
        assert!(gaps[0] / gaps[1] > 3.5 && gaps[1] / gaps[2] > 3.5, "{gaps:?}");
    }

    #[test]
    fn transversality_agrees_and_is_negative() {
        for profile in [
            VorticityProfile::zero(-2.0).unwrap(),
            VorticityProfile::constant(-2.0, 1.0).unwrap(),
            VorticityProfile::tabulated(&[(-2.0, 0.3), (-1.0, -0.2), (0.0, 0.4)]).unwrap(),
        ] {
            let flow = build_laminar(&profile, &params(), 257).unwrap();
            let bif = bifurcation_point(&flow, &params()).unwrap();
            let t = transversality(&bif, &flow, 64).unwrap();
            assert!(t.value < 0.0);
            assert!((t.value - t.closed_form).abs() < 1e-7 * t.closed_form.abs(), "{t:?}");
        }
    }
}
