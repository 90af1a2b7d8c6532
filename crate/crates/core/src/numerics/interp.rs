//! Piecewise cubic Hermite interpolation.

use crate::error::{Error, Result};

/// Cubic Hermite interpolant through `(x_i, y_i)` with prescribed slopes `d_i`.
#[derive(Clone, Debug)]
pub struct HermiteSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
    uniform: bool,
}

impl HermiteSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != y.len() || x.len() != d.len() {
            return Err(Error::invalid("Hermite spline needs matching arrays of length >= 2"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("Hermite spline abscissae must be strictly increasing"));
        }
        let h0 = x[1] - x[0];
        let uniform = x.windows(2).all(|w| ((w[1] - w[0]) - h0).abs() <= 1e-12 * h0.abs().max(1.0));
        Ok(HermiteSpline { x, y, d, uniform })
    }

    /// Monotone (Fritsch–Carlson) interpolant of the data.
    pub fn pchip(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let d = pchip_slopes(&x, &y)?;
        Self::new(x, y, d)
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn slopes(&self) -> &[f64] {
        &self.d
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        if t <= self.x[0] {
            return 0;
        }
        if t >= self.x[n - 1] {
            return n - 2;
        }
        if self.uniform {
            let h = (self.x[n - 1] - self.x[0]) / (n - 1) as f64;
            let k = ((t - self.x[0]) / h).floor() as usize;
            let mut k = k.min(n - 2);
            // guard against rounding at knot boundaries
            while k > 0 && t < self.x[k] {
                k -= 1;
            }
            while k + 2 < n && t > self.x[k + 1] {
                k += 1;
            }
            return k;
        }
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(k) => k.min(n - 2),
            Err(k) => k - 1,
        }
    }

    /// Value and first derivative at `t` (clamped to the knot range).
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let k = self.interval(t);
        let (x0, x1) = (self.x[k], self.x[k + 1]);
        let h = x1 - x0;
        let s = (t - x0) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k], self.d[k + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = 6.0 * s2 - 6.0 * s;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = -6.0 * s2 + 6.0 * s;
        let dh11 = 3.0 * s2 - 2.0 * s;
        let deriv = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
        (value, deriv)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_derivative(t).0
    }

    /// Exact integral of the interpolant from the knot `x_k` of the piece
    /// containing `t` up to `t`; returns `(k, integral)`.
    pub fn integral_within_piece(&self, t: f64) -> (usize, f64) {
        let k = self.interval(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3, s4) = (s * s, s * s * s, s * s * s * s);
        let i00 = 0.5 * s4 - s3 + s;
        let i10 = 0.25 * s4 - 2.0 * s3 / 3.0 + 0.5 * s2;
        let i01 = -0.5 * s4 + s3;
        let i11 = 0.25 * s4 - s3 / 3.0;
        let v = h * (i00 * self.y[k] + i10 * h * self.d[k] + i01 * self.y[k + 1] + i11 * h * self.d[k + 1]);
        (k, v)
    }
}

/// Fritsch–Carlson slopes with the one-sided three-point end condition.
pub fn pchip_slopes(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::invalid("PCHIP needs at least two matching samples"));
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    if h.iter().any(|&v| v <= 0.0) {
        return Err(Error::invalid("PCHIP abscissae must be strictly increasing"));
    }
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return Ok(vec![delta[0]; 2]);
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (dl, dr) = (delta[k - 1], delta[k]);
        if dl == 0.0 || dr == 0.0 || dl.signum() != dr.signum() {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / dl + w2 / dr);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    Ok(d)
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}
