//! Bordered Newton solver for `{F(λ, w) = 0, ⟨w, h*⟩ = s}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::blocks::BorderedBlocks;
use super::grid::{Grid, HeightField};
use super::residual::{boundary_residual, node_state, q_derivatives, residual_f};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonOptions {
    /// Max-norm tolerance on both residual components and the amplitude.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Relative step of the centered differences for the surface block.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 30, max_halvings: 8, fd_step: 1e-7 }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.fd_step > 0.0) || self.max_iter == 0 {
            return Err(Error::invalid("newton tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub field: HeightField,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// `cos(2πk q_j)` at `[j][k]`.
fn cosine_table(grid: &Grid) -> Vec<f64> {
    let m = grid.modes();
    let q = grid.q_nodes();
    q.iter().flat_map(|&qj| (0..m).map(move |k| (2.0 * PI * k as f64 * qj).cos())).collect()
}

/// Augmented residual in coefficient space and its max norm over the nodal
/// residuals and the amplitude equation.
fn augmented_residual(grid: &Grid, field: &HeightField, kernel: &HeightField, s: f64) -> Result<(Vec<f64>, f64)> {
    let r = residual_f(grid, field)?;
    let n_q = grid.n_q;
    let mut out = Vec::with_capacity(grid.n_unknowns());
    for row in r.interior.chunks(n_q) {
        out.extend(grid.spectral.cosine_coefficients(row));
    }
    out.extend(grid.spectral.cosine_coefficients(&r.boundary));
    let amp = field.inner(kernel, grid) - s;
    out.push(amp);
    Ok((out, r.max_norm().max(amp.abs())))
}

fn assemble(grid: &Grid, field: &HeightField, kernel: &HeightField, opts: &NewtonOptions) -> Result<BorderedBlocks> {
    let (n_q, modes, m, dp) = (grid.n_q, grid.modes(), grid.surface(), grid.dp);
    let n = grid.n_unknowns();
    let lambda = field.lambda;
    let l2 = lambda * lambda;
    let cos_table = cosine_table(grid);
    let (wq, wqq) = q_derivatives(grid, field);
    let mut mat = BorderedBlocks::new(modes, m - 2, 2 * modes + 1);
    debug_assert_eq!(mat.dim(), n);

    let mut a_coef = vec![0.0; n_q];
    let mut b_coef = vec![0.0; n_q];
    let mut c_coef = vec![0.0; n_q];
    for i in 1..m {
        let mut coeffs = Vec::with_capacity(n_q);
        let mut dlam = vec![0.0; n_q];
        for (j, dl) in dlam.iter_mut().enumerate() {
            let st = node_state(grid, field, &wq, &wqq, i, j);
            let hpp = grid.h_second[i] + st.wpp;
            let gam = grid.gamma[i];
            let c_pp = l2 + st.hq * st.hq;
            let c_p = -2.0 * st.hq * st.hpq + 2.0 * st.hp * st.hqq - 3.0 * l2 * gam * st.hp * st.hp;
            let c_q = 2.0 * st.hq * hpp - 2.0 * st.hp * st.hpq;
            let c_qq = st.hp * st.hp;
            let c_pq = -2.0 * st.hp * st.hq;
            coeffs.push((c_pp, c_p, c_q, c_qq, c_pq));
            *dl = 2.0 * lambda * hpp - 2.0 * lambda * gam * st.hp.powi(3);
        }
        let eq_row = |kp: usize| grid.unknown_index(i, kp);
        for (offset, target) in [(-1i64, i as i64 - 1), (0, i as i64), (1, i as i64 + 1)] {
            if target < 1 {
                continue;
            }
            for (j, &(c_pp, c_p, c_q, c_qq, c_pq)) in coeffs.iter().enumerate() {
                let sgn = offset as f64;
                if offset == 0 {
                    a_coef[j] = -2.0 * c_pp / (dp * dp);
                    b_coef[j] = c_q;
                    c_coef[j] = c_qq;
                } else {
                    a_coef[j] = c_pp / (dp * dp) + sgn * c_p / (2.0 * dp);
                    b_coef[j] = sgn * c_pq / (2.0 * dp);
                    c_coef[j] = 0.0;
                }
            }
            // cosine projection of a(q)cos(2πkq) and friends, by product-to-sum
            let (ca, cb, cc) = (
                grid.spectral.coefficients(&a_coef),
                grid.spectral.coefficients(&b_coef),
                grid.spectral.coefficients(&c_coef),
            );
            let cyc = |m: i64| m.rem_euclid(n_q as i64) as usize;
            let target = target as usize;
            for kp in 0..modes {
                let eps = if kp == 0 || kp == modes - 1 { 1.0 } else { 2.0 };
                for k in 0..modes {
                    let (lo, hi) = (cyc(kp as i64 - k as i64), cyc(kp as i64 + k as i64));
                    let w = 2.0 * PI * k as f64;
                    let cos_part = 0.5 * (ca[lo].re + ca[hi].re);
                    let d2_part = -w * w * 0.5 * (cc[lo].re + cc[hi].re);
                    // Σ b sin(mq)/N = −Im of the normalized coefficient
                    let sin_part = if k == modes - 1 {
                        0.0
                    } else {
                        let (up, down) = (cyc(k as i64 + kp as i64), cyc(k as i64 - kp as i64));
                        w * 0.5 * (cb[up].im + cb[down].im)
                    };
                    let v = eps * (cos_part + sin_part + d2_part);
                    if v != 0.0 {
                        mat.add(eq_row(kp), grid.unknown_index(target, k), v)?;
                    }
                }
            }
        }
        for (kp, v) in grid.spectral.cosine_coefficients(&dlam).into_iter().enumerate() {
            if v != 0.0 {
                mat.add(eq_row(kp), n - 1, v)?;
            }
        }
    }

    // surface block by centered differences in the three top rows and λ
    let rows: Vec<Vec<f64>> = (m - 2..=m).map(|r| field.row(r).to_vec()).collect();
    let eval = |rows: &[Vec<f64>], lam: f64| -> Result<Vec<f64>> {
        let b = boundary_residual(grid, &rows[2], &rows[1], &rows[0], lam)?;
        Ok(grid.spectral.cosine_coefficients(&b))
    };
    let x = field.to_unknowns(grid);
    let first_row = if m - 2 >= 1 { m - 2 } else { m - 1 };
    for r in first_row..=m {
        for k in 0..modes {
            let col = grid.unknown_index(r, k);
            let h = opts.fd_step * x[col].abs().max(1.0);
            let mut plus = rows.clone();
            let mut minus = rows.clone();
            let slot = r + 2 - m;
            for j in 0..n_q {
                plus[slot][j] += h * cos_table[j * modes + k];
                minus[slot][j] -= h * cos_table[j * modes + k];
            }
            let (fp, fm) = (eval(&plus, lambda)?, eval(&minus, lambda)?);
            for kp in 0..modes {
                let v = (fp[kp] - fm[kp]) / (2.0 * h);
                if v != 0.0 {
                    mat.add(grid.unknown_index(m, kp), col, v)?;
                }
            }
        }
    }
    let h = opts.fd_step * lambda;
    let (fp, fm) = (eval(&rows, lambda + h)?, eval(&rows, lambda - h)?);
    for kp in 0..modes {
        let v = (fp[kp] - fm[kp]) / (2.0 * h);
        if v != 0.0 {
            mat.add(grid.unknown_index(m, kp), n - 1, v)?;
        }
    }

    // amplitude row
    let weights = grid.p_weights();
    let d = kernel.to_unknowns(grid);
    for i in 1..grid.n_p {
        for k in 0..modes {
            let col = grid.unknown_index(i, k);
            let v = weights[i] * grid.mode_norm(k) * d[col];
            if v != 0.0 {
                mat.add(n - 1, col, v)?;
            }
        }
    }
    Ok(mat)
}

/// Damped Newton iteration for the augmented system.
pub fn newton_solve(
    grid: &Grid,
    initial: &HeightField,
    s: f64,
    kernel: &HeightField,
    opts: &NewtonOptions,
) -> Result<NewtonOutcome> {
    initial.validate(grid)?;
    let mut field = initial.clone();
    let (mut r, mut norm) = augmented_residual(grid, &field, kernel, s)?;
    for iteration in 0..=opts.max_iter {
        if norm < opts.tol {
            return Ok(NewtonOutcome { field, iterations: iteration, residual_norm: norm });
        }
        if iteration == opts.max_iter {
            break;
        }
        let jac = assemble(grid, &field, kernel, opts)?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = jac.solve(&neg)?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("Newton step is not finite (singular Jacobian)"));
        }
        let x = field.to_unknowns(grid);
        let mut t = 1.0;
        let mut accepted = None;
        let mut last_err = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(v, d)| v + t * d).collect();
            let candidate = HeightField::from_unknowns(grid, &trial);
            match augmented_residual(grid, &candidate, kernel, s) {
                Ok((rt, nt)) if nt < norm => {
                    accepted = Some((candidate, rt, nt));
                    break;
                }
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
            t *= 0.5;
        }
        match accepted {
            Some((f, rt, nt)) => {
                field = f;
                r = rt;
                norm = nt;
            }
            None => {
                return Err(match last_err {
                    Some(Error::Domain(msg)) => Error::Domain(format!("Newton step leaves the admissible set: {msg}")),
                    _ => Error::numerical(format!("Newton damping failed at residual {norm:e}")),
                });
            }
        }
    }
    Err(Error::numerical(format!("Newton did not converge in {} iterations, residual {norm:e}", opts.max_iter)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuation::linear::discrete_bifurcation;
    use crate::laminar::{build_laminar, PhysicalParams};
    use crate::sturm::bifurcation_point;
    use crate::vorticity::VorticityProfile;

    fn setup() -> (Grid, f64, HeightField) {
        let params = PhysicalParams::new(1.0, 1.0, -2.0, 0.5).unwrap();
        let flow = build_laminar(&VorticityProfile::constant(-2.0, 0.5).unwrap(), &params, 257).unwrap();
        let bif = bifurcation_point(&flow, &params).unwrap();
        let grid = Grid::new(&flow, 32, 65).unwrap();
        let d = discrete_bifurcation(&grid, bif.lambda_star).unwrap();
        (grid, d.lambda_h, d.kernel)
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (grid, lambda, kernel) = setup();
        let field = HeightField { lambda, ..kernel.scaled(0.01) };
        let opts = NewtonOptions::default();
        let jac = assemble(&grid, &field, &kernel, &opts).unwrap().to_dense();
        let x = field.to_unknowns(&grid);
        let (r0, _) = augmented_residual(&grid, &field, &kernel, 0.0).unwrap();
        let n = x.len();
        for col in [
            grid.unknown_index(3, 1),
            grid.unknown_index(30, 2),
            grid.unknown_index(63, 0),
            grid.unknown_index(64, 1),
            n - 1,
        ] {
            let h = 1e-6;
            let mut xp = x.clone();
            xp[col] += h;
            let mut xm = x.clone();
            xm[col] -= h;
            let (rp, _) = augmented_residual(&grid, &HeightField::from_unknowns(&grid, &xp), &kernel, 0.0).unwrap();
            let (rm, _) = augmented_residual(&grid, &HeightField::from_unknowns(&grid, &xm), &kernel, 0.0).unwrap();
            let scale = (0..n).map(|i| jac[(i, col)].abs()).fold(1.0, f64::max);
            for i in 0..n {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                assert!((fd - jac[(i, col)]).abs() < 1e-6 * scale, "({i},{col}): {fd} vs {}", jac[(i, col)]);
            }
        }
        assert!(r0.len() == n);
    }

    #[test]
    fn trivial_solution_at_zero_amplitude() {
        let (grid, lambda, kernel) = setup();
        let out =
            newton_solve(&grid, &HeightField::zeros(&grid, lambda), 0.0, &kernel, &NewtonOptions::default()).unwrap();
        assert!(out.iterations <= 1);
        assert_eq!(out.field.lambda, lambda);
        assert!(out.field.max_abs() < 1e-14);
    }

    #[test]
    fn small_amplitude_and_half_period_symmetry() {
        let (grid, lambda, kernel) = setup();
        let opts = NewtonOptions::default();
        let s = 1e-3;
        let plus = newton_solve(&grid, &HeightField { lambda, ..kernel.scaled(s) }, s, &kernel, &opts).unwrap();
        assert!(plus.residual_norm < 1e-10);
        let dev = plus.field.minus(&kernel.scaled(s)).norm(&grid) / s;
        assert!(dev < 0.1, "{dev}");
        let minus = newton_solve(&grid, &HeightField { lambda, ..kernel.scaled(-s) }, -s, &kernel, &opts).unwrap();
        assert!((minus.field.lambda - plus.field.lambda).abs() < 1e-10);
        let n_q = grid.n_q;
        for i in 0..grid.n_p {
            for j in 0..n_q {
                let shifted = plus.field.w[i * n_q + (j + n_q / 2) % n_q];
                assert!((minus.field.w[i * n_q + j] - shifted).abs() < 1e-10);
            }
        }
    }
}
