//! Tensor grid on `[0,1) × [p₀, 0]`, laminar data sampled on it, and the
//! mapping between nodal fields and the Newton unknowns.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laminar::{LaminarFlow, PhysicalParams};
use crate::numerics::quad::simpson_weights;
use crate::spectral::Spectral;

pub const DEFAULT_NQ: usize = 64;
pub const DEFAULT_NP: usize = 129;

/// Discretization of the strip together with the laminar coefficients.
#[derive(Clone, Debug)]
pub struct Grid {
    pub n_q: usize,
    pub n_p: usize,
    pub dp: f64,
    /// `p_i = p₀ + i Δp`, `i = 0..n_p`; the last entry is exactly 0.
    pub p: Vec<f64>,
    /// Laminar height `H(p_i)`.
    pub h: Vec<f64>,
    /// `H'(p_i)`.
    pub h_prime: Vec<f64>,
    /// `H''(p_i) = γ H'³`.
    pub h_second: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `a(0)`.
    pub a0: f64,
    pub params: PhysicalParams,
    pub spectral: Spectral,
    flow: LaminarFlow,
}

impl Grid {
    /// `n_q` must be a power of two ≥ 8 and `n_p` odd ≥ 5.
    pub fn new(flow: &LaminarFlow, n_q: usize, n_p: usize) -> Result<Self> {
        if n_q < 8 || !n_q.is_power_of_two() {
            return Err(Error::invalid(format!("n_q must be a power of two >= 8, got {n_q}")));
        }
        if n_p < 5 || n_p.is_multiple_of(2) {
            return Err(Error::invalid(format!("n_p must be odd and >= 5, got {n_p}")));
        }
        let p0 = flow.p0();
        let dp = -p0 / (n_p - 1) as f64;
        let p: Vec<f64> = (0..n_p).map(|i| if i == n_p - 1 { 0.0 } else { p0 + i as f64 * dp }).collect();
        let h: Vec<f64> = p.iter().map(|&s| flow.h_at(s)).collect();
        let h_prime: Vec<f64> = p.iter().map(|&s| flow.h_prime_at(s)).collect();
        let gamma: Vec<f64> = p.iter().map(|&s| flow.gamma_at(s)).collect();
        let h_second = h_prime.iter().zip(&gamma).map(|(h, g)| g * h * h * h).collect();
        Ok(Grid {
            n_q,
            n_p,
            dp,
            p,
            h,
            h_prime,
            h_second,
            gamma,
            a0: flow.a_exact(0.0),
            params: flow.params,
            spectral: Spectral::new(n_q)?,
            flow: flow.clone(),
        })
    }

    pub fn flow(&self) -> &LaminarFlow {
        &self.flow
    }

    /// Same flow with `2(n_p − 1) + 1` rows.
    pub fn refined(&self) -> Result<Self> {
        Grid::new(&self.flow, self.n_q, 2 * (self.n_p - 1) + 1)
    }

    /// Number of cosine modes `n_q/2 + 1`.
    pub fn modes(&self) -> usize {
        self.n_q / 2 + 1
    }

    /// Index of the surface row.
    pub fn surface(&self) -> usize {
        self.n_p - 1
    }

    /// Newton unknowns: cosine coefficients of rows `1..=M`, then `λ`.
    pub fn n_unknowns(&self) -> usize {
        (self.n_p - 1) * self.modes() + 1
    }

    pub fn unknown_index(&self, row: usize, mode: usize) -> usize {
        debug_assert!(row >= 1 && row < self.n_p && mode < self.modes());
        (row - 1) * self.modes() + mode
    }

    pub fn q_nodes(&self) -> Vec<f64> {
        self.spectral.nodes()
    }

    /// Trapezoidal weights in `p`.
    pub fn p_weights(&self) -> Vec<f64> {
        let mut w = vec![self.dp; self.n_p];
        w[0] *= 0.5;
        w[self.n_p - 1] *= 0.5;
        w
    }

    /// Simpson weights in `p` (`n_p` is odd).
    pub fn simpson_p_weights(&self) -> Vec<f64> {
        simpson_weights(self.n_p, self.dp)
    }

    /// Discrete mean of `cos(2πkq)²` over the q-nodes.
    pub fn mode_norm(&self, k: usize) -> f64 {
        if k == 0 || k == self.n_q / 2 {
            1.0
        } else {
            0.5
        }
    }
}

/// Height perturbation `w = h − H` at the grid nodes, plus the wavelength.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    pub n_q: usize,
    pub n_p: usize,
    pub lambda: f64,
    /// Row-major: `w[i * n_q + j] = w(q_j, p_i)`.
    pub w: Vec<f64>,
}

impl HeightField {
    pub fn zeros(grid: &Grid, lambda: f64) -> Self {
        HeightField { n_q: grid.n_q, n_p: grid.n_p, lambda, w: vec![0.0; grid.n_q * grid.n_p] }
    }

    /// `f(p_i) cos(2πk q_j)`; `f[0]` is ignored (bottom row is zero).
    pub fn from_mode(grid: &Grid, lambda: f64, f: &[f64], k: usize) -> Self {
        assert_eq!(f.len(), grid.n_p);
        let q = grid.q_nodes();
        let mut out = Self::zeros(grid, lambda);
        for i in 1..grid.n_p {
            for (j, qj) in q.iter().enumerate() {
                out.w[i * grid.n_q + j] = f[i] * (2.0 * PI * k as f64 * qj).cos();
            }
        }
        out
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n_q..(i + 1) * self.n_q]
    }

    pub fn surface(&self) -> &[f64] {
        self.row(self.n_p - 1)
    }

    /// Discrete L² inner product: trapezoid in `p`, node mean in `q`.
    pub fn inner(&self, other: &HeightField, grid: &Grid) -> f64 {
        let wp = grid.p_weights();
        let mut sum = 0.0;
        for (i, weight) in wp.iter().enumerate() {
            let row: f64 = self.row(i).iter().zip(other.row(i)).map(|(a, b)| a * b).sum();
            sum += weight * row / self.n_q as f64;
        }
        sum
    }

    pub fn norm(&self, grid: &Grid) -> f64 {
        self.inner(self, grid).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        HeightField { w: self.w.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    /// `self − other` on the nodes (keeps `self.lambda`).
    pub fn minus(&self, other: &HeightField) -> Self {
        HeightField { w: self.w.iter().zip(&other.w).map(|(a, b)| a - b).collect(), ..self.clone() }
    }

    pub fn max_abs(&self) -> f64 {
        self.w.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|w(q_j) − w(1 − q_j)|` over all rows.
    pub fn even_defect(&self) -> f64 {
        (0..self.n_p)
            .map(|i| {
                let r = self.row(i);
                (1..self.n_q).map(|j| (r[j] - r[self.n_q - j]).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Cosine coefficients of rows `1..=M` followed by `λ`.
    pub fn to_unknowns(&self, grid: &Grid) -> Vec<f64> {
        let mut x = Vec::with_capacity(grid.n_unknowns());
        for i in 1..grid.n_p {
            x.extend(grid.spectral.cosine_coefficients(self.row(i)));
        }
        x.push(self.lambda);
        x
    }

    pub fn from_unknowns(grid: &Grid, x: &[f64]) -> Self {
        assert_eq!(x.len(), grid.n_unknowns());
        let m = grid.modes();
        let mut out = Self::zeros(grid, x[x.len() - 1]);
        for i in 1..grid.n_p {
            let row = grid.spectral.from_cosine(&x[(i - 1) * m..i * m]);
            out.w[i * grid.n_q..(i + 1) * grid.n_q].copy_from_slice(&row);
        }
        out
    }

    /// Checks the grid shape, the bottom row and evenness.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.n_q != grid.n_q || self.n_p != grid.n_p || self.w.len() != grid.n_q * grid.n_p {
            return Err(Error::invalid("height field does not match the grid"));
        }
        if self.row(0).iter().any(|v| *v != 0.0) {
            return Err(Error::domain("height perturbation must vanish on the bed row"));
        }
        let scale = self.max_abs().max(1.0);
        if self.even_defect() > 1e-13 * scale {
            return Err(Error::domain("height perturbation is not even in q"));
        }
        Ok(())
    }
}
