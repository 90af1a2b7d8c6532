//! Local branch by natural-parameter continuation in the amplitude `s`.

use serde::Serialize;

use super::grid::{Grid, HeightField};
use super::linear::discrete_bifurcation;
use super::newton::{newton_solve, NewtonOptions};
use crate::error::{Error, Result};
use crate::sturm::BifurcationPoint;

/// One converged point `(s, λ(s), w(s))`.
#[derive(Clone, Debug)]
pub struct BranchPoint {
    pub s: f64,
    pub lambda: f64,
    pub field: HeightField,
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BranchStatus {
    Complete,
    /// Newton failed at amplitude `s`; the branch stops at the previous point.
    Truncated {
        s: f64,
        reason: String,
    },
}

#[derive(Clone, Debug)]
pub struct Branch {
    /// `λ*` from shooting.
    pub lambda_star: f64,
    /// Discrete bifurcation wavelength on this grid.
    pub lambda_h: f64,
    /// Unit-norm discrete kernel used in the amplitude condition.
    pub kernel: HeightField,
    /// Starts with the trivial point `s = 0`.
    pub points: Vec<BranchPoint>,
    pub status: BranchStatus,
}

/// Marches `s = s_max·n/n_steps`, `n = 0..=n_steps`, warm-starting each solve
/// by linear extrapolation from the previous two points.
pub fn continue_branch(
    grid: &Grid,
    bif: &BifurcationPoint,
    s_max: f64,
    n_steps: usize,
    opts: &NewtonOptions,
) -> Result<Branch> {
    if !s_max.is_finite() {
        return Err(Error::invalid("s_max must be finite"));
    }
    opts.validate()?;
    let disc = discrete_bifurcation(grid, bif.lambda_star)?;
    let kernel = disc.kernel;
    let trivial = BranchPoint {
        s: 0.0,
        lambda: disc.lambda_h,
        field: HeightField::zeros(grid, disc.lambda_h),
        residual_norm: 0.0,
        iterations: 0,
    };
    let mut points = vec![trivial];
    let mut status = BranchStatus::Complete;
    for n in 1..=n_steps {
        let s = s_max * n as f64 / n_steps as f64;
        let guess = extrapolate(&points, &kernel, s);
        match newton_solve(grid, &guess, s, &kernel, opts) {
            Ok(out) => points.push(BranchPoint {
                s,
                lambda: out.field.lambda,
                field: out.field,
                residual_norm: out.residual_norm,
                iterations: out.iterations,
            }),
            Err(e) => {
                status = BranchStatus::Truncated { s, reason: e.to_string() };
                break;
            }
        }
    }
    Ok(Branch { lambda_star: bif.lambda_star, lambda_h: disc.lambda_h, kernel, points, status })
}

fn extrapolate(points: &[BranchPoint], kernel: &HeightField, s: f64) -> HeightField {
    let last = &points[points.len() - 1];
    if points.len() < 2 {
        return HeightField { lambda: last.lambda, ..kernel.scaled(s) };
    }
    let prev = &points[points.len() - 2];
    let t = (s - last.s) / (last.s - prev.s);
    let w = last.field.w.iter().zip(&prev.field.w).map(|(a, b)| a + t * (a - b)).collect();
    HeightField { w, lambda: last.lambda + t * (last.lambda - prev.lambda), ..last.field.clone() }
}
