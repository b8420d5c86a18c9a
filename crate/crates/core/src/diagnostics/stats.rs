use serde::{Deserialize, Serialize};

use crate::dynamics::State;
use crate::error::{Result, SvwError};
use crate::grid::Field;
use crate::speed::SpeedModel;

/// Sup of the negative parts, `(max(0, -min R), max(0, -min S))`.
pub fn oleinik_stats(state: &State) -> (f64, f64) {
    ((-state.r.min()).max(0.0), (-state.s.min()).max(0.0))
}

/// `int c'(u) (|R|^(2+alpha) + |S|^(2+alpha)) dx` at the current time.
pub fn lp_weighted(state: &State, model: &SpeedModel, alpha: f64) -> Result<f64> {
    let weight = state.u().map(|u| model.c_prime(u));
    lp_weighted_with(&state.r, &state.s, &weight, alpha)
}

/// Same integral with an explicit nodal weight in place of `c'(u)`.
pub fn lp_weighted_with(r: &Field, s: &Field, weight: &Field, alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(SvwError::InvalidParameter(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    let p = 2.0 + alpha;
    let sum: f64 = r
        .values()
        .iter()
        .zip(s.values())
        .zip(weight.values())
        .map(|((a, b), w)| w * (a.abs().powf(p) + b.abs().powf(p)))
        .sum();
    Ok(sum * r.grid().dx())
}

/// Least-squares fit `y ~ a + b/t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OleinikFit {
    pub a: f64,
    pub b: f64,
    /// `||y - fit||_2 / ||y||_2`.
    pub relative_residual: f64,
}

pub fn oleinik_fit(t: &[f64], y: &[f64]) -> Result<OleinikFit> {
    if t.len() != y.len() || t.len() < 2 {
        return Err(SvwError::InvalidParameter("fit needs at least two matching samples".into()));
    }
    if t.iter().any(|&v| !(v > 0.0)) {
        return Err(SvwError::InvalidParameter("fit times must be positive".into()));
    }
    let k = t.len() as f64;
    let (mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let x = 1.0 / ti;
        sx += x;
        sxx += x * x;
        sy += yi;
        sxy += x * yi;
    }
    let det = k * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return Err(SvwError::InvalidParameter("fit times must not all coincide".into()));
    }
    let b = (k * sxy - sx * sy) / det;
    let a = (sy - b * sx) / k;
    let (mut res, mut norm) = (0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        res += (yi - a - b / ti).powi(2);
        norm += yi * yi;
    }
    let relative_residual = if norm > 0.0 { (res / norm).sqrt() } else { 0.0 };
    Ok(OleinikFit { a, b, relative_residual })
}
