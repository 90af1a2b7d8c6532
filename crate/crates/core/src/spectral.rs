//! Fourier calculus for 1-periodic functions sampled at `q_j = j/N`.
//!
//! Odd-order operations discard the Nyquist mode (it has no consistent odd
//! counterpart on the grid); even-order ones keep it.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Modes at or above this fraction of `N/2` form the spectral tail.
const TAIL_FRACTION: f64 = 0.75;

/// FFT plans for one grid size.
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl Spectral {
    /// `n` must be a power of two, at least 4.
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::invalid(format!("q-resolution must be a power of two >= 4, got {n}")));
        }
        let mut planner = FftPlanner::new();
        Ok(Spectral { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of cosine modes `N/2 + 1`.
    pub fn modes(&self) -> usize {
        self.n / 2 + 1
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| j as f64 / self.n as f64).collect()
    }

    fn check(&self, x: &[f64]) {
        assert_eq!(x.len(), self.n, "sample count does not match the spectral grid");
    }

    /// Normalized coefficients `X_k / N`, so `x_j = Σ X_k e^{2πi k j/N}`.
    pub fn coefficients(&self, x: &[f64]) -> Vec<Complex<f64>> {
        self.check(x);
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let inv = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= inv);
        buf
    }

    pub fn synthesize(&self, mut coeffs: Vec<Complex<f64>>) -> Vec<f64> {
        self.inverse.process(&mut coeffs);
        coeffs.into_iter().map(|c| c.re).collect()
    }

    /// Signed wavenumber of FFT slot `k`.
    fn wavenumber(&self, k: usize) -> i64 {
        if k <= self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    fn is_nyquist(&self, k: usize) -> bool {
        k == self.n / 2
    }

    /// Applies the Fourier multiplier `m(k)` (signed wavenumber).
    fn multiply<M: Fn(i64, bool) -> Complex<f64>>(&self, x: &[f64], m: M) -> Vec<f64> {
        let mut c = self.coefficients(x);
        for (k, ck) in c.iter_mut().enumerate() {
            *ck *= m(self.wavenumber(k), self.is_nyquist(k));
        }
        self.synthesize(c)
    }

    /// Period mean; the trapezoidal rule is spectrally accurate here.
    pub fn mean(&self, x: &[f64]) -> f64 {
        self.check(x);
        x.iter().sum::<f64>() / self.n as f64
    }

    /// Drops Fourier coefficients smaller than `rel` times the largest one.
    /// Used before high-order differentiation so that roundoff in the upper
    /// modes is not amplified.
    pub fn filtered(&self, x: &[f64], rel: f64) -> Vec<f64> {
        let mut c = self.coefficients(x);
        let top = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for v in c.iter_mut() {
            if v.norm() < rel * top {
                *v = Complex::new(0.0, 0.0);
            }
        }
        self.synthesize(c)
    }

    /// `m`-th derivative.
    pub fn derivative(&self, x: &[f64], m: u32) -> Vec<f64> {
        self.multiply(x, |k, nyquist| {
            if nyquist && m % 2 == 1 {
                return Complex::new(0.0, 0.0);
            }
            Complex::new(0.0, 2.0 * PI * k as f64).powu(m)
        })
    }

    /// Periodic antiderivative of the zero-mean part of `x`, anchored so the
    /// value at `q = 0` is zero.
    pub fn antiderivative(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.multiply(x, |k, nyquist| {
            if k == 0 || nyquist {
                Complex::new(0.0, 0.0)
            } else {
                Complex::new(0.0, -1.0 / (2.0 * PI * k as f64))
            }
        });
        let anchor = out[0];
        out.iter_mut().for_each(|v| *v -= anchor);
        out
    }

    /// `F` with `F'' = x − mean x`, `F'(0) = 0` for even `x` and `F(0) = 0`.
    pub fn double_antiderivative(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.multiply(x, |k, _| {
            if k == 0 {
                Complex::new(0.0, 0.0)
            } else {
                Complex::new(-1.0 / (2.0 * PI * k as f64).powi(2), 0.0)
            }
        });
        let anchor = out[0];
        out.iter_mut().for_each(|v| *v -= anchor);
        out
    }

    /// `(1 − ∂²)⁻¹`, mode `k` divided by `1 + (2πk)²`.
    pub fn helmholtz_inverse(&self, x: &[f64]) -> Vec<f64> {
        self.multiply(x, |k, _| Complex::new(1.0 / (1.0 + (2.0 * PI * k as f64).powi(2)), 0.0))
    }

    /// `(1 − ∂²)` applied spectrally.
    pub fn helmholtz(&self, x: &[f64]) -> Vec<f64> {
        self.multiply(x, |k, _| Complex::new(1.0 + (2.0 * PI * k as f64).powi(2), 0.0))
    }

    /// Cosine coefficients `c_0..c_{N/2}` with `x(q) = Σ c_k cos(2πkq)` for
    /// even `x`.
    pub fn cosine_coefficients(&self, x: &[f64]) -> Vec<f64> {
        let c = self.coefficients(x);
        (0..self.modes()).map(|k| if k == 0 || self.is_nyquist(k) { c[k].re } else { 2.0 * c[k].re }).collect()
    }

    /// Samples of `Σ c_k cos(2πkq)`.
    pub fn from_cosine(&self, c: &[f64]) -> Vec<f64> {
        assert_eq!(c.len(), self.modes());
        let mut coeffs = vec![Complex::new(0.0, 0.0); self.n];
        for (k, &ck) in c.iter().enumerate() {
            if k == 0 || self.is_nyquist(k) {
                coeffs[k] = Complex::new(ck, 0.0);
            } else {
                coeffs[k] = Complex::new(0.5 * ck, 0.0);
                coeffs[self.n - k] = Complex::new(0.5 * ck, 0.0);
            }
        }
        self.synthesize(coeffs)
    }

    /// Even extension of samples at `q_j`, `j = 0..=N/2`.
    pub fn from_half_period(&self, half: &[f64]) -> Vec<f64> {
        assert_eq!(half.len(), self.modes());
        (0..self.n).map(|j| half[j.min(self.n - j)]).collect()
    }

    /// `max_j |x(q_j) − x(1 − q_j)|`.
    pub fn even_defect(&self, x: &[f64]) -> f64 {
        self.check(x);
        (1..self.n).map(|j| (x[j] - x[self.n - j]).abs()).fold(0.0, f64::max)
    }

    /// Whether the upper quarter of the cosine spectrum is below `rel` times
    /// the largest coefficient.
    pub fn is_resolved(&self, x: &[f64], rel: f64) -> bool {
        let c = self.cosine_coefficients(x);
        let top = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let start = ((self.modes() - 1) as f64 * TAIL_FRACTION).ceil() as usize;
        let tail = c[start..].iter().map(|v| v.abs()).fold(0.0, f64::max);
        tail <= rel * top
    }
}
