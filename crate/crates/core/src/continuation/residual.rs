//! Nonlinear residual `F = (F₁, F₂)` of the height-function problem.

use super::grid::{Grid, HeightField};
use crate::error::{Error, Result};
use crate::surface::{op_psi, SurfaceTraces};

/// `F₁` on interior rows and `F₂` on the surface, at the nodes.
#[derive(Clone, Debug)]
pub struct Residual {
    /// Rows `1..M`, row-major with `n_q` columns.
    pub interior: Vec<f64>,
    pub boundary: Vec<f64>,
}

impl Residual {
    pub fn max_norm(&self) -> f64 {
        self.interior.iter().chain(&self.boundary).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Second-order one-sided `w_p` at the surface from the three top rows.
pub(crate) fn surface_wp(top: &[f64], below: &[f64], below2: &[f64], dp: f64) -> Vec<f64> {
    top.iter().zip(below).zip(below2).map(|((a, b), c)| (3.0 * a - 4.0 * b + c) / (2.0 * dp)).collect()
}

/// Surface traces of `h = H + w` built from the three top rows.
pub(crate) fn traces_from_rows(
    grid: &Grid,
    top: &[f64],
    below: &[f64],
    below2: &[f64],
    lambda: f64,
) -> Result<SurfaceTraces> {
    let hp0: Vec<f64> =
        surface_wp(top, below, below2, grid.dp).iter().map(|v| grid.h_prime[grid.n_p - 1] + v).collect();
    SurfaceTraces::projected(&grid.spectral, top.to_vec(), hp0, lambda)
}

/// `F₂ = tr₀w − Ψ(λ, H + w)` at the surface nodes.
pub(crate) fn boundary_residual(
    grid: &Grid,
    top: &[f64],
    below: &[f64],
    below2: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    let traces = traces_from_rows(grid, top, below, below2, lambda)?;
    let psi = op_psi(&grid.spectral, &traces, &grid.params)?;
    Ok(top.iter().zip(&psi).map(|(w, s)| w - s).collect())
}

/// `h_p = H' + w_p` at every node: central differences inside, second-order
/// one-sided stencils on the bed and the surface.
pub fn height_p(grid: &Grid, field: &HeightField) -> Vec<f64> {
    let (n_q, n_p, dp) = (grid.n_q, grid.n_p, grid.dp);
    let mut out = vec![0.0; n_q * n_p];
    for i in 0..n_p {
        for j in 0..n_q {
            let w = |r: usize| field.w[r * n_q + j];
            let wp = if i == 0 {
                (-3.0 * w(0) + 4.0 * w(1) - w(2)) / (2.0 * dp)
            } else if i == n_p - 1 {
                (3.0 * w(i) - 4.0 * w(i - 1) + w(i - 2)) / (2.0 * dp)
            } else {
                (w(i + 1) - w(i - 1)) / (2.0 * dp)
            };
            out[i * n_q + j] = grid.h_prime[i] + wp;
        }
    }
    out
}

/// Errors with a domain error unless `h_p > 0` at every node.
pub fn check_admissible(grid: &Grid, field: &HeightField) -> Result<()> {
    if let Some((idx, v)) = height_p(grid, field).iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        let (i, j) = (idx / grid.n_q, idx % grid.n_q);
        return Err(Error::domain(format!("h_p = {v} is not positive at node (q_{j}, p_{i})")));
    }
    if !(field.lambda > 0.0 && field.lambda.is_finite()) {
        return Err(Error::domain(format!("lambda must be positive, got {}", field.lambda)));
    }
    Ok(())
}

/// q-derivatives of every row: `(w_q, w_qq)`.
pub(crate) fn q_derivatives(grid: &Grid, field: &HeightField) -> (Vec<f64>, Vec<f64>) {
    let mut wq = Vec::with_capacity(field.w.len());
    let mut wqq = Vec::with_capacity(field.w.len());
    for i in 0..grid.n_p {
        wq.extend(grid.spectral.derivative(field.row(i), 1));
        wqq.extend(grid.spectral.derivative(field.row(i), 2));
    }
    (wq, wqq)
}

/// Local quantities entering `F₁` at interior node `(j, i)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct NodeState {
    /// `P = H' + w_p`.
    pub hp: f64,
    pub wpp: f64,
    pub hq: f64,
    pub hqq: f64,
    pub hpq: f64,
}

pub(crate) fn node_state(grid: &Grid, field: &HeightField, wq: &[f64], wqq: &[f64], i: usize, j: usize) -> NodeState {
    let n_q = grid.n_q;
    let (dp, up, mid, down) = (grid.dp, (i + 1) * n_q + j, i * n_q + j, (i - 1) * n_q + j);
    NodeState {
        hp: grid.h_prime[i] + (field.w[up] - field.w[down]) / (2.0 * dp),
        wpp: (field.w[up] - 2.0 * field.w[mid] + field.w[down]) / (dp * dp),
        hq: wq[mid],
        hqq: wqq[mid],
        hpq: (wq[up] - wq[down]) / (2.0 * dp),
    }
}

/// `F₁ = (λ² + h_q²)(H'' + w_pp) − 2P h_q h_pq + P² h_qq − λ²γP³`.
pub(crate) fn f1_at(s: &NodeState, h_second: f64, gamma: f64, lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    (l2 + s.hq * s.hq) * (h_second + s.wpp) - 2.0 * s.hp * s.hq * s.hpq + s.hp * s.hp * s.hqq
        - l2 * gamma * s.hp.powi(3)
}

/// Evaluates `F(λ, w)`; `w` must be admissible (`h_p > 0`).
pub fn residual_f(grid: &Grid, field: &HeightField) -> Result<Residual> {
    check_admissible(grid, field)?;
    let (n_q, m) = (grid.n_q, grid.surface());
    let (wq, wqq) = q_derivatives(grid, field);
    let mut interior = Vec::with_capacity((m - 1) * n_q);
    for i in 1..m {
        for j in 0..n_q {
            let s = node_state(grid, field, &wq, &wqq, i, j);
            interior.push(f1_at(&s, grid.h_second[i], grid.gamma[i], field.lambda));
        }
    }
    let boundary = boundary_residual(grid, field.row(m), field.row(m - 1), field.row(m - 2), field.lambda)?;
    Ok(Residual { interior, boundary })
}
