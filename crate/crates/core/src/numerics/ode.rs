//! Dormand–Prince 5(4) integration with output at prescribed nodes.

use crate::error::{Error, Result};

/// Embedded Runge–Kutta 5(4) integrator with standard step-size control.
///
/// Steps never cross an output node, so the state is available at every node
/// with the local error tolerance. A `post_step` hook runs after each accepted
/// step and may rescale the state together with the outputs already stored;
/// this is how exponentially growing linear solutions are kept in range.
#[derive(Clone, Copy, Debug)]
pub struct Dopri5 {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 { atol: 1e-12, rtol: 1e-10, max_steps: 1_000_000 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

impl Dopri5 {
    /// Integrates `y' = rhs(x, y)` from `nodes[0]` through all `nodes`, which
    /// must be strictly monotone (either direction). Returns the state at
    /// every node, the first entry being `y0`.
    pub fn integrate<const N: usize, F, P>(
        &self,
        rhs: F,
        y0: [f64; N],
        nodes: &[f64],
        mut post_step: P,
    ) -> Result<Vec<[f64; N]>>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        P: FnMut(&mut [f64; N], &mut [[f64; N]]),
    {
        if nodes.len() < 2 {
            return Ok(vec![y0]);
        }
        let dir = (nodes[nodes.len() - 1] - nodes[0]).signum();
        if nodes.windows(2).any(|w| (w[1] - w[0]) * dir <= 0.0) {
            return Err(Error::invalid("integration nodes must be strictly monotone"));
        }
        let mut out = Vec::with_capacity(nodes.len());
        out.push(y0);
        let mut x = nodes[0];
        let mut y = y0;
        let mut k1 = rhs(x, &y);
        let mut h = (nodes[1] - nodes[0]).abs();
        let mut steps = 0usize;
        for &target in &nodes[1..] {
            loop {
                let remaining = (target - x) * dir;
                if remaining <= 1e-15 * target.abs().max(1.0) {
                    x = target;
                    break;
                }
                let last = h >= remaining;
                let step = if last { remaining } else { h } * dir;
                let k2 = rhs(x + C2 * step, &axpy(&y, step, &[(A21, &k1)]));
                let k3 = rhs(x + C3 * step, &axpy(&y, step, &[(A31, &k1), (A32, &k2)]));
                let k4 = rhs(x + C4 * step, &axpy(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
                let k5 = rhs(x + C5 * step, &axpy(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
                let k6 = rhs(x + step, &axpy(&y, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
                let y_new = axpy(&y, step, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
                let x_new = if last { target } else { x + step };
                let k7 = rhs(x_new, &y_new);
                let mut err = 0.0;
                for i in 0..N {
                    let e = step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                    let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                    err += (e / sc) * (e / sc);
                }
                let err = (err / N as f64).sqrt();
                if !err.is_finite() {
                    return Err(Error::numerical(format!("non-finite ODE error estimate at x={x}")));
                }
                steps += 1;
                if steps > self.max_steps {
                    return Err(Error::numerical(format!(
                        "ODE integration exceeded {} steps near x={x}",
                        self.max_steps
                    )));
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if err <= 1.0 {
                    x = x_new;
                    y = y_new;
                    post_step(&mut y, &mut out);
                    k1 = rhs(x, &y);
                    if !last {
                        h *= factor;
                    }
                    if last {
                        break;
                    }
                } else {
                    h *= factor.min(1.0);
                    if h < 1e-14 * x.abs().max(1.0) {
                        return Err(Error::numerical(format!("ODE step size underflow at x={x}")));
                    }
                }
            }
            out.push(y);
        }
        Ok(out)
    }
}
