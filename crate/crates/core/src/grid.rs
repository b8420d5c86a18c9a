//! Periodic grid on the torus `[0, 1)` and the primitives the solver is
//! built from: mollification, quadrature, antiderivatives and monotone
//! interpolation.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SvwError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    dx: f64,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(SvwError::InvalidParameter(format!(
                "grid needs an even number of cells >= 8, got {n}"
            )));
        }
        Ok(Self { n, dx: 1.0 / n as f64 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }
}

/// Samples of a scalar function at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(SvwError::GridMismatch { expected: grid.n(), actual: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.n()] }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Self {
        Self { grid, values: grid.nodes().map(f).collect() }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Field, f: F) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn integral(&self) -> f64 {
        periodic_integral(self)
    }

    /// Discrete L2 norm `(sum f_i^2 dx)^(1/2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.dx()).sqrt()
    }
}

impl Index<usize> for Field {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl IndexMut<usize> for Field {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

/// Rectangle rule `sum f(x_i) dx`; exact for trigonometric polynomials of
/// degree below `n`.
pub fn periodic_integral(f: &Field) -> f64 {
    f.values.iter().sum::<f64>() * f.grid.dx()
}

/// Cumulative integral from node 0 with `F(x_0) = 0`.
///
/// Increments use the trapezoid average of neighbouring nodes, so that the
/// centered difference of `F` recovers `f` to second order. Summed over a
/// full period the increments reduce to the rectangle rule, hence a field
/// with zero periodic integral has a periodic antiderivative.
pub fn antiderivative_from_zero(f: &Field) -> Field {
    let n = f.len();
    let dx = f.grid.dx();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for i in 1..n {
        acc += 0.5 * (f.values[i - 1] + f.values[i]) * dx;
        out[i] = acc;
    }
    Field { grid: f.grid, values: out }
}

/// Value the antiderivative reaches after one full period (should vanish
/// for zero-mean integrands).
pub fn antiderivative_wrap(f: &Field, antiderivative: &Field) -> f64 {
    let n = f.len();
    antiderivative.values[n - 1] + 0.5 * (f.values[n - 1] + f.values[0]) * f.grid.dx()
}

/// Discrete Friedrichs mollifier `J_eps`: periodic convolution with the
/// bump `exp(-1/(1-y^2))` rescaled to width `eps`, normalised so the
/// discrete weights sum to one.
#[derive(Debug, Clone)]
pub struct Mollifier {
    eps: f64,
    /// Weights for offsets `-half..=half`.
    weights: Vec<f64>,
    half: usize,
}

impl Mollifier {
    pub fn new(grid: Grid, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(SvwError::InvalidParameter(format!("mollifier width must be positive, got {eps}")));
        }
        let dx = grid.dx();
        let half = (eps / dx).ceil() as usize;
        let mut weights = Vec::with_capacity(2 * half + 1);
        for j in 0..=2 * half {
            let y = (j as f64 - half as f64) * dx / eps;
            weights.push(bump(y));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            // Width below one cell: the kernel degenerates to the identity.
            weights.iter_mut().for_each(|w| *w = 0.0);
            weights[half] = 1.0;
        } else {
            weights.iter_mut().for_each(|w| *w /= total);
        }
        Ok(Self { eps, weights, half })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn apply(&self, f: &Field) -> Field {
        let n = f.len() as isize;
        let half = self.half as isize;
        let mut out = vec![0.0; f.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, w) in self.weights.iter().enumerate() {
                if *w == 0.0 {
                    continue;
                }
                let idx = (i as isize + j as isize - half).rem_euclid(n) as usize;
                acc += w * f.values[idx];
            }
            *o = acc;
        }
        Field { grid: f.grid, values: out }
    }
}

pub fn mollify(f: &Field, eps: f64) -> Result<Field> {
    Ok(Mollifier::new(f.grid(), eps)?.apply(f))
}

/// Unnormalised bump `exp(-1/(1-y^2))` on `(-1, 1)`.
#[inline]
pub fn bump(y: f64) -> f64 {
    if y.abs() < 1.0 {
        (-1.0 / (1.0 - y * y)).exp()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Cubic,
    Linear,
}

/// Periodic interpolant over a field with node slopes precomputed once.
///
/// The cubic variant is a Hermite cubic whose slopes are limited to
/// `|d_i| <= 3 min(|delta_{i-1}|, |delta_i|)` and zeroed at discrete
/// extrema (Fritsch–Carlson), so every cell is monotone and the result
/// stays inside the hull of the two bracketing nodes.
#[derive(Debug, Clone)]
pub struct Interpolant<'a> {
    values: &'a [f64],
    slopes: Vec<f64>,
    kind: Interpolation,
}

impl<'a> Interpolant<'a> {
    pub fn new(f: &'a Field, kind: Interpolation) -> Self {
        Self::from_slice(f.values(), kind)
    }

    pub fn from_slice(values: &'a [f64], kind: Interpolation) -> Self {
        let n = values.len();
        let slopes = match kind {
            Interpolation::Linear => Vec::new(),
            Interpolation::Cubic => (0..n)
                .map(|i| limited_slope(values[(i + n - 1) % n], values[i], values[(i + 1) % n]))
                .collect(),
        };
        Self { values, slopes, kind }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let (i, s) = locate(x, n);
        let j = if i + 1 == n { 0 } else { i + 1 };
        match self.kind {
            Interpolation::Linear => self.values[i] + s * (self.values[j] - self.values[i]),
            Interpolation::Cubic => cubic_cell(self.values[i], self.values[j], self.slopes[i], self.slopes[j], s),
        }
    }
}

/// One-off monotone cubic evaluation from the 4-node stencil around `x`.
pub fn interpolate(f: &Field, x: f64) -> f64 {
    let n = f.len();
    let v = f.values();
    let (i, s) = locate(x, n);
    let im = (i + n - 1) % n;
    let ip = (i + 1) % n;
    let ipp = (i + 2) % n;
    let di = limited_slope(v[im], v[i], v[ip]);
    let dj = limited_slope(v[i], v[ip], v[ipp]);
    cubic_cell(v[i], v[ip], di, dj, s)
}

/// Cell index and local coordinate in `[0, 1)` of a point on the torus.
#[inline]
fn locate(x: f64, n: usize) -> (usize, f64) {
    let w = x - x.floor();
    let pos = w * n as f64;
    let mut i = pos.floor() as usize;
    let mut s = pos - i as f64;
    if i >= n {
        i = 0;
        s = 0.0;
    }
    (i, s)
}

/// Node slope in units of one cell.
#[inline]
fn limited_slope(left: f64, mid: f64, right: f64) -> f64 {
    let dl = mid - left;
    let dr = right - mid;
    if dl * dr <= 0.0 {
        return 0.0;
    }
    let avg = 0.5 * (dl + dr);
    let cap = 3.0 * dl.abs().min(dr.abs());
    if avg.abs() > cap {
        cap.copysign(avg)
    } else {
        avg
    }
}

#[inline]
fn cubic_cell(f0: f64, f1: f64, d0: f64, d1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let v = (2.0 * s3 - 3.0 * s2 + 1.0) * f0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * f1 + (s3 - s2) * d1;
    // Rounding can push the value a few ulps outside the cell hull.
    let (lo, hi) = if f0 <= f1 { (f0, f1) } else { (f1, f0) };
    v.clamp(lo, hi)
}

/// Second-order centered difference `(f_{i+1} - f_{i-1}) / (2 dx)`.
pub fn centered_difference(f: &Field) -> Field {
    let n = f.len();
    let inv = 0.5 / f.grid.dx();
    let v = f.values();
    let values = (0..n).map(|i| (v[(i + 1) % n] - v[(i + n - 1) % n]) * inv).collect();
    Field { grid: f.grid, values }
}

/// Conservative remap of cell averages: piecewise-parabolic reconstruction
/// (equivalently, a piecewise-cubic cumulative mass) with the
/// Colella–Woodward monotonicity limiter.
///
/// Cell `i` is centred on node `x_i` and spans `[x_i - dx/2, x_i + dx/2]`.
/// [`Interpolation::Linear`] degrades to piecewise-constant cells.
#[derive(Debug, Clone)]
pub struct CellRemap {
    dx: f64,
    /// Cumulative mass at left cell edges, `edge_mass[n]` is the total.
    edge_mass: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    mean: Vec<f64>,
}

impl CellRemap {
    pub fn new(f: &Field, kind: Interpolation) -> Self {
        let n = f.len();
        let dx = f.grid.dx();
        let a = &f.values;
        let mut edge_mass = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        edge_mass.push(0.0);
        for v in a {
            acc += v * dx;
            edge_mass.push(acc);
        }
        let (left, right) = match kind {
            Interpolation::Linear => (a.clone(), a.clone()),
            Interpolation::Cubic => {
                // Fourth-order edge values, kept between the adjacent means.
                let edge: Vec<f64> = (0..n)
                    .map(|k| {
                        let (am, a0, a1, a2) = (a[(k + n - 1) % n], a[k], a[(k + 1) % n], a[(k + 2) % n]);
                        let v = (7.0 * (a0 + a1) - (am + a2)) / 12.0;
                        v.clamp(a0.min(a1), a0.max(a1))
                    })
                    .collect();
                let mut left = Vec::with_capacity(n);
                let mut right = Vec::with_capacity(n);
                for i in 0..n {
                    let (mut al, mut ar) = (edge[(i + n - 1) % n], edge[i]);
                    let m = a[i];
                    if (ar - m) * (m - al) <= 0.0 {
                        al = m;
                        ar = m;
                    } else {
                        let da = ar - al;
                        let a6 = 6.0 * (m - 0.5 * (al + ar));
                        if da * a6 > da * da {
                            al = 3.0 * m - 2.0 * ar;
                        } else if -da * da > da * a6 {
                            ar = 3.0 * m - 2.0 * al;
                        }
                    }
                    left.push(al);
                    right.push(ar);
                }
                (left, right)
            }
        };
        Self { dx, edge_mass, left, right, mean: a.clone() }
    }

    pub fn total(&self) -> f64 {
        self.edge_mass[self.mean.len()]
    }

    /// Mass between the left edge of cell 0 and the lifted point `x`.
    #[inline]
    pub fn mass_to(&self, x: f64) -> f64 {
        let n = self.mean.len();
        let y = (x + 0.5 * self.dx) / self.dx;
        let cell = y.floor();
        let xi = y - cell;
        let turns = (cell / n as f64).floor();
        let mut j = (cell - turns * n as f64) as usize;
        if j >= n {
            j = n - 1;
        }
        let (al, ar, m) = (self.left[j], self.right[j], self.mean[j]);
        let da = ar - al;
        let a6 = 6.0 * (m - 0.5 * (al + ar));
        let partial = al * xi + 0.5 * (da + a6) * xi * xi - a6 * xi * xi * xi / 3.0;
        turns * self.total() + self.edge_mass[j] + partial * self.dx
    }

    /// Average over the lifted interval `[a, b]`, `a < b`.
    #[inline]
    pub fn average(&self, a: f64, b: f64) -> f64 {
        (self.mass_to(b) - self.mass_to(a)) / (b - a)
    }
}
