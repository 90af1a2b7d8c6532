//! The vorticity function `γ` on `[p₀, 0]` and its antiderivative `Γ`.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::interp::HermiteSpline;
use crate::numerics::quad::{adaptive_simpson, Tolerance};

/// Uniform samples used to seed the search for `max Γ`.
pub const MAX_SEARCH_SAMPLES: usize = 2048;

#[derive(Clone, Debug)]
pub enum VorticityKind {
    Zero,
    Constant {
        gamma0: f64,
    },
    /// Monotone cubic interpolant of `(p, γ(p))` samples.
    Tabulated(Table),
}

/// Interpolated vorticity samples with `Γ` cached at the knots.
#[derive(Clone, Debug)]
pub struct Table {
    spline: HermiteSpline,
    cumulative: Vec<f64>,
}

impl Table {
    fn new(spline: HermiteSpline) -> Self {
        let knots = spline.knots();
        let mut cumulative = Vec::with_capacity(knots.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in knots.windows(2) {
            acc += adaptive_simpson(|t| spline.eval(t), w[0], w[1], Tolerance::DEFAULT);
            cumulative.push(acc);
        }
        Table { spline, cumulative }
    }

    pub fn spline(&self) -> &HermiteSpline {
        &self.spline
    }

    fn integral(&self, p: f64) -> f64 {
        // within one cubic piece the quadrature is exact, so it is done in closed form
        let (k, partial) = self.spline.integral_within_piece(p);
        self.cumulative[k] + partial
    }
}

/// Vorticity as a function of the streamline label `p ∈ [p₀, 0]`.
#[derive(Clone, Debug)]
pub struct VorticityProfile {
    kind: VorticityKind,
    p0: f64,
}

/// Location and value of a maximum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremum {
    pub value: f64,
    pub at: f64,
}

fn check_p0(p0: f64) -> Result<()> {
    if !(p0 < 0.0 && p0.is_finite()) {
        return Err(Error::invalid(format!("p0 must be negative and finite, got {p0}")));
    }
    Ok(())
}

impl VorticityProfile {
    pub fn zero(p0: f64) -> Result<Self> {
        check_p0(p0)?;
        Ok(VorticityProfile { kind: VorticityKind::Zero, p0 })
    }

    pub fn constant(p0: f64, gamma0: f64) -> Result<Self> {
        check_p0(p0)?;
        if !gamma0.is_finite() {
            return Err(Error::invalid("constant vorticity must be finite"));
        }
        Ok(VorticityProfile { kind: VorticityKind::Constant { gamma0 }, p0 })
    }

    /// Builds a tabulated profile. Samples must be strictly increasing in `p`,
    /// start at `p₀ < 0` and end at `p = 0`.
    pub fn tabulated(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("tabulated vorticity needs at least two samples"));
        }
        let (p, g): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
        let p0 = p[0];
        check_p0(p0)?;
        if p[p.len() - 1] != 0.0 {
            return Err(Error::invalid(format!(
                "tabulated vorticity must end at p = 0, last sample is at {}",
                p[p.len() - 1]
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("tabulated vorticity contains non-finite values"));
        }
        let spline = HermiteSpline::pchip(p, g)?;
        Ok(VorticityProfile { kind: VorticityKind::Tabulated(Table::new(spline)), p0 })
    }

    /// Reads a two-column CSV with header `p,gamma`, `p` ascending.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "p" || &headers[1] != "gamma" {
            return Err(Error::invalid(format!(
                "vorticity table header must be `p,gamma`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut samples = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let parse = |k: usize| -> Result<f64> {
                record[k].parse::<f64>().map_err(|e| Error::invalid(format!("vorticity table row {}: {e}", line + 2)))
            };
            samples.push((parse(0)?, parse(1)?));
        }
        Self::tabulated(&samples)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file =
            std::fs::File::open(path).map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn kind(&self) -> &VorticityKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, VorticityKind::Zero)
    }

    fn checked(&self, p: f64) -> Result<f64> {
        let slack = 1e-12 * self.p0.abs().max(1.0);
        if !(p >= self.p0 - slack && p <= slack) {
            return Err(Error::domain(format!("p = {p} lies outside [{}, 0]", self.p0)));
        }
        Ok(p.clamp(self.p0, 0.0))
    }

    /// `γ(p)`.
    pub fn gamma(&self, p: f64) -> Result<f64> {
        let p = self.checked(p)?;
        Ok(self.gamma_unchecked(p))
    }

    /// `γ(p)` for `p` already known to be in the domain (clamped otherwise).
    pub(crate) fn gamma_unchecked(&self, p: f64) -> f64 {
        match &self.kind {
            VorticityKind::Zero => 0.0,
            VorticityKind::Constant { gamma0 } => *gamma0,
            VorticityKind::Tabulated(t) => t.spline.eval(p.clamp(self.p0, 0.0)),
        }
    }

    /// `Γ(p) = ∫_{p₀}^p γ(s) ds`, with `Γ(p₀) = 0` exactly.
    pub fn gamma_integral(&self, p: f64) -> Result<f64> {
        let p = self.checked(p)?;
        Ok(self.gamma_integral_unchecked(p))
    }

    pub(crate) fn gamma_integral_unchecked(&self, p: f64) -> f64 {
        let p = p.clamp(self.p0, 0.0);
        if p == self.p0 {
            return 0.0;
        }
        match &self.kind {
            VorticityKind::Zero => 0.0,
            VorticityKind::Constant { gamma0 } => gamma0 * (p - self.p0),
            VorticityKind::Tabulated(t) => t.integral(p),
        }
    }

    /// `max_{[p₀,0]} Γ` and its location: dense sampling, then golden-section
    /// refinement around the best sample.
    pub fn max_gamma_integral(&self) -> Extremum {
        match self.kind {
            VorticityKind::Zero => return Extremum { value: 0.0, at: self.p0 },
            VorticityKind::Constant { gamma0 } => {
                let at = if gamma0 > 0.0 { 0.0 } else { self.p0 };
                return Extremum { value: self.gamma_integral_unchecked(at), at };
            }
            VorticityKind::Tabulated(_) => {}
        }
        let n = MAX_SEARCH_SAMPLES;
        let h = -self.p0 / (n - 1) as f64;
        let mut best = Extremum { value: 0.0, at: self.p0 };
        for k in 1..n {
            let p = if k == n - 1 { 0.0 } else { self.p0 + k as f64 * h };
            let value = self.gamma_integral_unchecked(p);
            if value > best.value {
                best = Extremum { value, at: p };
            }
        }
        let lo = (best.at - h).max(self.p0);
        let hi = (best.at + h).min(0.0);
        let refined = golden_max(|t| self.gamma_integral_unchecked(t), lo, hi, 1e-13);
        if refined.value > best.value {
            refined
        } else {
            best
        }
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Extremum {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs().max(b.abs())) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let at = 0.5 * (a + b);
    Extremum { value: f(at), at }
}
