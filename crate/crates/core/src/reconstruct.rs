//! Physical fields from a height function and residual checks of the Euler,
//! stream-function and height-function formulations.
//!
//! With `q = x/λ` and `p = −ψ`, the surface is `η(x) = h(x/λ, 0)`, the velocity
//! is `u = −1/h_p`, `v = −h_q/(λh_p)`, and the pressure follows from the
//! energy `E = P + |∇ψ|²/2 + gy + Γ(p) − Γ(0) = Q/2`.

use serde::{Deserialize, Serialize};

use crate::continuation::{residual_f, Grid, HeightField};
use crate::error::{Error, Result};
use crate::surface::plate_h;

/// A solution in physical variables on the image of the `(q, p)` grid.
#[derive(Clone, Debug)]
pub struct WaveSolution {
    pub lambda: f64,
    pub n_q: usize,
    pub n_p: usize,
    /// `x_j = λ q_j`.
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// Surface elevation at `x_j`.
    pub eta: Vec<f64>,
    /// Node fields, row-major `[i * n_q + j]` like [`HeightField`].
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pressure: Vec<f64>,
    /// Bernoulli constant.
    pub q_bernoulli: f64,
    /// Energy constant `E = Q/2`.
    pub energy: f64,
    h_p: Vec<f64>,
    h_q: Vec<f64>,
    gamma_shift: Vec<f64>,
}

impl WaveSolution {
    /// `ψ = −p` at row `i`.
    pub fn psi(&self, i: usize) -> f64 {
        -self.p[i]
    }

    pub fn surface_row(&self) -> usize {
        self.n_p - 1
    }
}

/// `Q`: period mean of `|∇ψ|² = (λ² + h_q²)/(λ²h_p²)` on the surface.
pub fn bernoulli_q(h_q0: &[f64], h_p0: &[f64], lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    let n = h_q0.len() as f64;
    h_q0.iter().zip(h_p0).map(|(q, p)| (l2 + q * q) / (l2 * p * p)).sum::<f64>() / n
}

/// Maps `h = H + w` to `(u, v, P, η)`.
pub fn fields_from_height(grid: &Grid, field: &HeightField) -> Result<WaveSolution> {
    field.validate(grid)?;
    let (n_q, n_p) = (grid.n_q, grid.n_p);
    let lambda = field.lambda;
    let h_p = mapped_h_p(grid, field);
    if let Some(v) = h_p.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::domain(format!("h_p = {v} is not positive; the flow has stagnation points")));
    }
    let mut h_q = Vec::with_capacity(n_q * n_p);
    for i in 0..n_p {
        h_q.extend(grid.spectral.derivative(field.row(i), 1));
    }
    let top = (n_p - 1) * n_q;
    let q_bern = bernoulli_q(&h_q[top..], &h_p[top..], lambda);
    let profile = grid.flow().profile();
    let gamma0 = profile.gamma_integral_unchecked(0.0);
    let gamma_shift: Vec<f64> = grid.p.iter().map(|&s| profile.gamma_integral_unchecked(s) - gamma0).collect();
    let g = grid.params.g;
    let mut y = vec![0.0; n_q * n_p];
    let mut u = vec![0.0; n_q * n_p];
    let mut v = vec![0.0; n_q * n_p];
    let mut pressure = vec![0.0; n_q * n_p];
    for i in 0..n_p {
        for j in 0..n_q {
            let idx = i * n_q + j;
            y[idx] = grid.h[i] + field.w[idx];
            u[idx] = -1.0 / h_p[idx];
            v[idx] = -h_q[idx] / (lambda * h_p[idx]);
            let speed2 = u[idx] * u[idx] + v[idx] * v[idx];
            pressure[idx] = 0.5 * q_bern - 0.5 * speed2 - g * y[idx] - gamma_shift[i];
        }
    }
    Ok(WaveSolution {
        lambda,
        n_q,
        n_p,
        x: grid.q_nodes().iter().map(|q| lambda * q).collect(),
        p: grid.p.clone(),
        eta: y[top..].to_vec(),
        y,
        u,
        v,
        pressure,
        q_bernoulli: q_bern,
        energy: 0.5 * q_bern,
        h_p,
        h_q,
        gamma_shift,
    })
}

/// `h_p = H' + w_p` by fourth-order differences on every row (biased
/// five-point stencils near the bed and surface). Mixing stencils of equal
/// order but different error constants leaves an O(Δp²) kink at the end rows
/// that costs one order once `u` and `v` are differentiated again.
fn mapped_h_p(grid: &Grid, field: &HeightField) -> Vec<f64> {
    const EDGE: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
    const NEXT: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
    let (n_q, n_p, dp) = (grid.n_q, grid.n_p, grid.dp);
    let m = n_p - 1;
    let mut out = vec![0.0; n_q * n_p];
    for i in 0..n_p {
        for j in 0..n_q {
            let w = |r: usize| field.w[r * n_q + j];
            let up = |c: &[f64; 5], from: usize| (0..5).map(|t| c[t] * w(from + t)).sum::<f64>();
            let down = |c: &[f64; 5], from: usize| -(0..5).map(|t| c[t] * w(from - t)).sum::<f64>();
            let wp = match i {
                0 => up(&EDGE, 0),
                1 => up(&NEXT, 0),
                _ if i == m => down(&EDGE, m),
                _ if i == m - 1 => down(&NEXT, m),
                _ => -w(i + 2) + 8.0 * w(i + 1) - 8.0 * w(i - 1) + w(i - 2),
            } / (12.0 * dp);
            out[i * n_q + j] = grid.h_prime[i] + wp;
        }
    }
    out
}

/// `∂_p` by central differences, second-order one-sided on the end rows.
fn d_p(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let (n_q, n_p, dp) = (grid.n_q, grid.n_p, grid.dp);
    let mut out = vec![0.0; f.len()];
    for i in 0..n_p {
        for j in 0..n_q {
            let at = |r: usize| f[r * n_q + j];
            out[i * n_q + j] = if i == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * dp)
            } else if i == n_p - 1 {
                (3.0 * at(i) - 4.0 * at(i - 1) + at(i - 2)) / (2.0 * dp)
            } else {
                (at(i + 1) - at(i - 1)) / (2.0 * dp)
            };
        }
    }
    out
}

fn d_q(grid: &Grid, f: &[f64]) -> Vec<f64> {
    f.chunks(grid.n_q).flat_map(|row| grid.spectral.derivative(row, 1)).collect()
}

/// `(∂_x f, ∂_y f)` through the map `(q, p) ↦ (λq, h(q, p))`.
fn mapped_gradient(grid: &Grid, sol: &WaveSolution, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (fq, fp) = (d_q(grid, f), d_p(grid, f));
    let l = sol.lambda;
    let fx = (0..f.len()).map(|k| fq[k] / l - fp[k] * sol.h_q[k] / (l * sol.h_p[k])).collect();
    let fy = (0..f.len()).map(|k| fp[k] / sol.h_p[k]).collect();
    (fx, fy)
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Max-norm residuals of the three formulations.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub n_q: usize,
    pub n_p: usize,
    pub dp: f64,
    pub momentum_x: f64,
    pub momentum_y: f64,
    pub continuity: f64,
    /// `u_y − v_x − γ(p)`.
    pub vorticity: f64,
    /// `Δψ − γ(−ψ)` through the mapped Laplacian.
    pub stream_laplacian: f64,
    /// `P − αH(η)` on the surface. Exact for the solver's own `h_p` stencil,
    /// so with the fourth-order reconstruction it is a grid-level quantity.
    pub dynamic_bc: f64,
    /// `v − uη'` on the surface.
    pub kinematic_bc: f64,
    /// `v` on the bed.
    pub bed: f64,
    /// `h + d` on the bed.
    pub bed_height: f64,
    pub eta_mean: f64,
    /// `∫₀^λ H(η) dx`.
    pub plate_integral: f64,
    /// `|∇ψ|² + 2gη + 2αH(η) − Q` on the surface.
    pub bernoulli: f64,
    /// `2E − Q` at sampled interior nodes.
    pub energy: f64,
    pub height_interior: f64,
    pub height_boundary: f64,
    /// Whether the plate operator was spectrally resolved.
    pub plate_resolved: bool,
}

/// Evaluates every residual of the Euler, stream-function and height-function
/// formulations on the grid.
pub fn euler_residual(grid: &Grid, field: &HeightField, sol: &WaveSolution) -> Result<ResidualReport> {
    let (n_q, n_p) = (grid.n_q, grid.n_p);
    let (g, alpha) = (grid.params.g, grid.params.alpha);
    let (ux, uy) = mapped_gradient(grid, sol, &sol.u);
    let (vx, vy) = mapped_gradient(grid, sol, &sol.v);
    let (px, py) = mapped_gradient(grid, sol, &sol.pressure);
    let n = n_q * n_p;
    let gamma_of = |k: usize| grid.gamma[k / n_q];
    let momentum_x = max_abs((0..n).map(|k| sol.u[k] * ux[k] + sol.v[k] * uy[k] + px[k]));
    let momentum_y = max_abs((0..n).map(|k| sol.u[k] * vx[k] + sol.v[k] * vy[k] + py[k] + g));
    let continuity = max_abs((0..n).map(|k| ux[k] + vy[k]));
    let vorticity = max_abs((0..n).map(|k| uy[k] - vx[k] - gamma_of(k)));

    let psi: Vec<f64> = (0..n).map(|k| sol.psi(k / n_q)).collect();
    let (psi_x, psi_y) = mapped_gradient(grid, sol, &psi);
    let (psi_xx, _) = mapped_gradient(grid, sol, &psi_x);
    let (_, psi_yy) = mapped_gradient(grid, sol, &psi_y);
    let stream_laplacian = max_abs((0..n).map(|k| psi_xx[k] + psi_yy[k] - gamma_of(k)));

    let top = (n_p - 1) * n_q;
    let l = sol.lambda;
    let zeta: Vec<f64> = sol.eta.iter().map(|e| e / l).collect();
    let plate = plate_h(&grid.spectral, &zeta);
    let plate_x: Vec<f64> = plate.values.iter().map(|v| v / l.powi(3)).collect();
    let eta_x: Vec<f64> = grid.spectral.derivative(&sol.eta, 1).iter().map(|d| d / l).collect();
    let dynamic_bc = max_abs((0..n_q).map(|j| sol.pressure[top + j] - alpha * plate_x[j]));
    let kinematic_bc = max_abs((0..n_q).map(|j| sol.v[top + j] - sol.u[top + j] * eta_x[j]));
    let bed = max_abs(sol.v[..n_q].iter().copied());
    let bed_height = max_abs(sol.y[..n_q].iter().map(|y| y + grid.params.d));
    let eta_mean = grid.spectral.mean(&sol.eta);
    let plate_integral = l * grid.spectral.mean(&plate_x);
    let bernoulli = max_abs((0..n_q).map(|j| {
        let k = top + j;
        sol.u[k] * sol.u[k] + sol.v[k] * sol.v[k] + 2.0 * g * sol.eta[j] + 2.0 * alpha * plate_x[j] - sol.q_bernoulli
    }));
    let energy = max_abs(sample_nodes(n_q, n_p).into_iter().map(|k| {
        let e = sol.pressure[k]
            + 0.5 * (sol.u[k] * sol.u[k] + sol.v[k] * sol.v[k])
            + g * sol.y[k]
            + sol.gamma_shift[k / n_q];
        2.0 * e - sol.q_bernoulli
    }));
    let height = residual_f(grid, field)?;
    Ok(ResidualReport {
        n_q,
        n_p,
        dp: grid.dp,
        momentum_x,
        momentum_y,
        continuity,
        vorticity,
        stream_laplacian,
        dynamic_bc,
        kinematic_bc,
        bed,
        bed_height,
        eta_mean,
        plate_integral,
        bernoulli,
        energy,
        height_interior: max_abs(height.interior.iter().copied()),
        height_boundary: max_abs(height.boundary.iter().copied()),
        plate_resolved: plate.resolved,
    })
}

/// Ten interior nodes spread deterministically over the grid.
fn sample_nodes(n_q: usize, n_p: usize) -> Vec<usize> {
    (0..10)
        .map(|t| {
            let i = 1 + (t * 7919 + 3) % (n_p - 2);
            let j = (t * 104729 + 11) % n_q;
            i * n_q + j
        })
        .collect()
}

/// Tolerances of the residual suite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Finite-difference residuals must be below `fd_factor · Δp²`.
    pub fd_factor: f64,
    /// Conditions that hold exactly by construction (kinematic, bed, energy).
    pub surface: f64,
    /// Mean of `η` and `∫H(η)dx`.
    pub integral: f64,
    /// Height-function residual (solver tolerance).
    pub height: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { fd_factor: 10.0, surface: 1e-7, integral: 1e-9, height: 1e-9 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [self.fd_factor, self.surface, self.integral, self.height];
        if all.iter().all(|t| *t > 0.0 && t.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid("verification tolerances must be positive and finite"))
        }
    }
}

/// One named pass/fail line of the suite.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ResidualReport {
    pub fn checks(&self, tol: &Tolerances) -> Vec<Check> {
        let fd = tol.fd_factor * self.dp * self.dp;
        let mk = |name, value: f64, tolerance| Check { name, value, tolerance, pass: value.abs() <= tolerance };
        vec![
            mk("momentum_x", self.momentum_x, fd),
            mk("momentum_y", self.momentum_y, fd),
            mk("continuity", self.continuity, fd),
            mk("vorticity", self.vorticity, fd),
            mk("stream_laplacian", self.stream_laplacian, fd),
            mk("dynamic_bc", self.dynamic_bc, fd),
            mk("kinematic_bc", self.kinematic_bc, tol.surface),
            mk("bed", self.bed, tol.surface),
            mk("bed_height", self.bed_height, tol.surface),
            mk("eta_mean", self.eta_mean, tol.integral),
            mk("plate_integral", self.plate_integral, tol.integral),
            mk("bernoulli", self.bernoulli, fd),
            mk("energy", self.energy, tol.surface),
            mk("height_interior", self.height_interior, tol.height),
            mk("height_boundary", self.height_boundary, tol.height),
        ]
    }
}

/// Shape of one period of a sampled surface.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileDiagnostics {
    pub crest_x: f64,
    pub trough_x: f64,
    /// Strictly decreasing from crest to trough and increasing back.
    pub monotone: bool,
    /// `max |η(x) − η(−x)|`.
    pub symmetry_defect: f64,
    pub mean: f64,
    /// No strict extrema (constant profile).
    pub degenerate: bool,
}

/// Locates the extrema of `eta` sampled at `x_j = λ j/N` and checks shape.
pub fn profile_diagnostics(eta: &[f64], lambda: f64) -> ProfileDiagnostics {
    let n = eta.len();
    let mean = eta.iter().sum::<f64>() / n as f64;
    let symmetry_defect = (1..n).map(|j| (eta[j] - eta[n - j]).abs()).fold(0.0, f64::max);
    let (mut crest, mut trough) = (0, 0);
    for j in 0..n {
        if eta[j] > eta[crest] {
            crest = j;
        }
        if eta[j] < eta[trough] {
            trough = j;
        }
    }
    let degenerate = !(eta[crest] > eta[trough]);
    let strictly = |from: usize, to: usize, down: bool| {
        let mut j = from;
        while j != to {
            let next = (j + 1) % n;
            let ok = if down { eta[next] < eta[j] } else { eta[next] > eta[j] };
            if !ok {
                return false;
            }
            j = next;
        }
        true
    };
    let monotone = !degenerate && strictly(crest, trough, true) && strictly(trough, crest, false);
    let at = |j: usize| lambda * j as f64 / n as f64;
    ProfileDiagnostics { crest_x: at(crest), trough_x: at(trough), monotone, symmetry_defect, mean, degenerate }
}
