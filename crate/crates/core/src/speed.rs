//! Wave speed `c(u)` and the scalar maps derived from it.
//!
//! Every model satisfies `c1 <= c(u) <= c2` and `0 <= c'(u) <= c3`.

use std::fs;
use std::path::Path;

use crate::error::{Result, SvwError};

const INVERSE_TOL: f64 = 1e-12;
const INVERSE_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum SpeedKind {
    /// `c(u) = base + amp * tanh(u)`.
    Tanh { base: f64, amp: f64 },
    Constant { c: f64 },
    /// Monotone piecewise-cubic interpolant of tabulated samples, extended
    /// by constants outside the sampled range.
    Table(SpeedTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedModel {
    kind: SpeedKind,
    c1: f64,
    c2: f64,
    c3: f64,
}

impl SpeedModel {
    /// The default law `c(u) = 2 + tanh(u)`.
    pub fn tanh_default() -> Self {
        Self::tanh(2.0, 1.0).expect("default speed law is admissible")
    }

    pub fn tanh(base: f64, amp: f64) -> Result<Self> {
        if !(amp >= 0.0) || !(base - amp > 0.0) || !base.is_finite() || !amp.is_finite() {
            return Err(SvwError::InvalidParameter(format!(
                "tanh speed needs amp >= 0 and base - amp > 0 (base = {base}, amp = {amp})"
            )));
        }
        Ok(Self {
            kind: SpeedKind::Tanh { base, amp },
            c1: base - amp,
            c2: base + amp,
            c3: amp,
        })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(SvwError::InvalidParameter(format!("constant speed must be positive, got {c}")));
        }
        Ok(Self { kind: SpeedKind::Constant { c }, c1: c, c2: c, c3: 0.0 })
    }

    pub fn table(table: SpeedTable) -> Self {
        let c1 = table.c[0];
        let c2 = *table.c.last().unwrap();
        let c3 = table.max_slope();
        Self { kind: SpeedKind::Table(table), c1, c2, c3 }
    }

    pub fn kind(&self) -> &SpeedKind {
        &self.kind
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn c3(&self) -> f64 {
        self.c3
    }

    #[inline]
    pub fn c(&self, u: f64) -> f64 {
        match &self.kind {
            SpeedKind::Tanh { base, amp } => base + amp * u.tanh(),
            SpeedKind::Constant { c } => *c,
            SpeedKind::Table(t) => t.value(u),
        }
    }

    #[inline]
    pub fn c_prime(&self, u: f64) -> f64 {
        match &self.kind {
            SpeedKind::Tanh { amp, .. } => {
                let ch = u.cosh();
                if ch.is_finite() {
                    amp / (ch * ch)
                } else {
                    0.0
                }
            }
            SpeedKind::Constant { .. } => 0.0,
            SpeedKind::Table(t) => t.slope(u),
        }
    }

    /// `c'(u) / (4 c(u))`, the derivative of `ln(c)/4`.
    #[inline]
    pub fn ctilde_prime(&self, u: f64) -> f64 {
        match &self.kind {
            SpeedKind::Tanh { base, amp } => {
                if *amp == 0.0 {
                    return 0.0;
                }
                let ch = u.cosh();
                if !ch.is_finite() {
                    return 0.0;
                }
                amp / (ch * ch) / (4.0 * (base + amp * u.tanh()))
            }
            SpeedKind::Constant { .. } => 0.0,
            SpeedKind::Table(t) => t.slope(u) / (4.0 * t.value(u)),
        }
    }

    /// Primitive `C(r) = int_0^r c`.
    #[inline]
    pub fn primitive_c(&self, r: f64) -> f64 {
        match &self.kind {
            SpeedKind::Tanh { base, amp } => base * r + amp * ln_cosh(r),
            SpeedKind::Constant { c } => c * r,
            SpeedKind::Table(t) => t.antiderivative(r) - t.antiderivative(0.0),
        }
    }

    /// Solves `C(r) = y` by Newton iteration safeguarded with bisection.
    pub fn inverse_c(&self, y: f64) -> Result<f64> {
        self.inverse_c_from(y, y / self.c(0.0))
    }

    /// Same as [`SpeedModel::inverse_c`] with a caller-supplied first guess,
    /// used to warm-start from the previous time level.
    pub fn inverse_c_from(&self, y: f64, guess: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(SvwError::IterationFailure { y, iterations: 0 });
        }
        if let SpeedKind::Constant { c } = self.kind {
            return Ok(y / c);
        }
        let tol = INVERSE_TOL * y.abs().max(1.0);
        // C is increasing with slope in [c1, c2], so the root lies between y/c2 and y/c1.
        let (mut lo, mut hi) = if y >= 0.0 { (y / self.c2, y / self.c1) } else { (y / self.c1, y / self.c2) };
        let mut r = if guess.is_finite() && guess >= lo && guess <= hi { guess } else { 0.5 * (lo + hi) };
        for _ in 0..INVERSE_MAX_ITER {
            let g = self.primitive_c(r) - y;
            if g.abs() <= tol {
                return Ok(r);
            }
            if g > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let newton = r - g / self.c(r);
            r = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= f64::EPSILON * r.abs().max(1e-300) {
                let g = self.primitive_c(r) - y;
                if g.abs() <= tol {
                    return Ok(r);
                }
                break;
            }
        }
        Err(SvwError::IterationFailure { y, iterations: INVERSE_MAX_ITER })
    }
}

impl Default for SpeedModel {
    fn default() -> Self {
        Self::tanh_default()
    }
}

/// `ln cosh r` without overflow for large `|r|`.
#[inline]
pub fn ln_cosh(r: f64) -> f64 {
    let a = r.abs();
    if a < 20.0 {
        a.cosh().ln()
    } else {
        a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
    }
}

/// Quadratic cut-off `(xi - 1/eps)^2` above the threshold `1/eps`, zero below.
#[inline]
pub fn chi_eps(xi: f64, eps: f64) -> f64 {
    let excess = xi - 1.0 / eps;
    if excess >= 0.0 {
        excess * excess
    } else {
        0.0
    }
}

/// Tabulated speed law: strictly increasing abscissae, nondecreasing
/// positive speeds, monotone cubic Hermite in between.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedTable {
    u: Vec<f64>,
    c: Vec<f64>,
    slopes: Vec<f64>,
    /// Antiderivative at the nodes, relative to the first node.
    cumulative: Vec<f64>,
}

impl SpeedTable {
    pub fn new(u: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if u.len() != c.len() || u.len() < 2 {
            return Err(SvwError::InvalidParameter(
                "speed table needs at least two (u, c) samples".into(),
            ));
        }
        if u.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SvwError::InvalidParameter("speed table abscissae must increase strictly".into()));
        }
        if c.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(SvwError::InvalidParameter("speed table values must be positive".into()));
        }
        if c.windows(2).any(|w| w[1] < w[0]) {
            return Err(SvwError::InvalidParameter(
                "speed table must be nondecreasing (c' >= 0 is required)".into(),
            ));
        }
        let m = u.len();
        let secant: Vec<f64> = (0..m - 1).map(|j| (c[j + 1] - c[j]) / (u[j + 1] - u[j])).collect();
        let mut slopes = vec![0.0; m];
        for j in 1..m - 1 {
            let (a, b) = (secant[j - 1], secant[j]);
            if a > 0.0 && b > 0.0 {
                slopes[j] = (0.5 * (a + b)).min(3.0 * a.min(b));
            }
        }
        let mut cumulative = vec![0.0; m];
        for j in 0..m - 1 {
            let h = u[j + 1] - u[j];
            cumulative[j + 1] =
                cumulative[j] + 0.5 * h * (c[j] + c[j + 1]) + h * h * (slopes[j] - slopes[j + 1]) / 12.0;
        }
        Ok(Self { u, c, slopes, cumulative })
    }

    /// Reads a two-column `u,c` CSV file (a header line is allowed).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut us = Vec::new();
        let mut cs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let (a, b) = match (parts.next(), parts.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(SvwError::ConfigInvalid(format!(
                        "{}:{}: expected two columns",
                        path.display(),
                        lineno + 1
                    )))
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    us.push(x);
                    cs.push(y);
                }
                _ if lineno == 0 => continue,
                _ => {
                    return Err(SvwError::ConfigInvalid(format!(
                        "{}:{}: unparsable row",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(us, cs)
    }

    fn locate(&self, x: f64) -> Option<(usize, f64, f64)> {
        let m = self.u.len();
        if x <= self.u[0] || x >= self.u[m - 1] {
            return None;
        }
        let j = self.u.partition_point(|&v| v <= x) - 1;
        let h = self.u[j + 1] - self.u[j];
        Some((j, h, (x - self.u[j]) / h))
    }

    fn value(&self, x: f64) -> f64 {
        match self.locate(x) {
            None if x <= self.u[0] => self.c[0],
            None => *self.c.last().unwrap(),
            Some((j, h, s)) => hermite(self.c[j], self.c[j + 1], h * self.slopes[j], h * self.slopes[j + 1], s),
        }
    }

    fn slope(&self, x: f64) -> f64 {
        match self.locate(x) {
            None => 0.0,
            Some((j, h, s)) => {
                let (f0, f1, d0, d1) = (self.c[j], self.c[j + 1], h * self.slopes[j], h * self.slopes[j + 1]);
                let ds = (6.0 * s * s - 6.0 * s) * f0
                    + (3.0 * s * s - 4.0 * s + 1.0) * d0
                    + (-6.0 * s * s + 6.0 * s) * f1
                    + (3.0 * s * s - 2.0 * s) * d1;
                (ds / h).max(0.0)
            }
        }
    }

    fn antiderivative(&self, x: f64) -> f64 {
        let m = self.u.len();
        if x <= self.u[0] {
            return (x - self.u[0]) * self.c[0];
        }
        if x >= self.u[m - 1] {
            return self.cumulative[m - 1] + (x - self.u[m - 1]) * self.c[m - 1];
        }
        let (j, h, s) = self.locate(x).unwrap();
        let (f0, f1, d0, d1) = (self.c[j], self.c[j + 1], h * self.slopes[j], h * self.slopes[j + 1]);
        // Integrated Hermite basis functions on [0, s].
        let (s2, s3, s4) = (s * s, s * s * s, s * s * s * s);
        let i00 = 0.5 * s4 - s3 + s;
        let i10 = 0.25 * s4 - 2.0 * s3 / 3.0 + 0.5 * s2;
        let i01 = -0.5 * s4 + s3;
        let i11 = 0.25 * s4 - s3 / 3.0;
        self.cumulative[j] + h * (i00 * f0 + i10 * d0 + i01 * f1 + i11 * d1)
    }

    fn max_slope(&self) -> f64 {
        // The monotone Hermite slope peaks inside an interval; sample densely.
        let mut best = 0.0f64;
        for j in 0..self.u.len() - 1 {
            for k in 0..=32 {
                let x = self.u[j] + (self.u[j + 1] - self.u[j]) * k as f64 / 32.0;
                best = best.max(self.slope(x));
            }
        }
        best
    }
}

#[inline]
fn hermite(f0: f64, f1: f64, d0: f64, d1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * f0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * f1 + (s3 - s2) * d1
}
