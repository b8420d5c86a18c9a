use crate::error::{Result, SvwError};
use crate::grid::{antiderivative_from_zero, periodic_integral, Field, Grid, Mollifier};
use crate::speed::{chi_eps, SpeedModel};

use super::step::{Cutoff, StepMode};

/// Riemann invariants `(R, S)` with everything needed to recover `u`.
///
/// `accum` is the value of `u` at `x = 0`, advanced by `(R + S)/2` at that
/// node; `u` caches the reconstruction and doubles as the warm start for
/// the next inverse of `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub r: Field,
    pub s: Field,
    pub t: f64,
    pub accum: f64,
    pub exploded: bool,
    pub blowup_time: Option<f64>,
    pub steps: u64,
    u: Field,
}

impl State {
    /// Builds a state directly from invariants; `accum` is `u(0)`.
    pub fn from_invariants(r: Field, s: Field, accum: f64, model: &SpeedModel) -> Result<Self> {
        if r.grid() != s.grid() {
            return Err(SvwError::GridMismatch { expected: r.len(), actual: s.len() });
        }
        let u = reconstruct_with_guess(&r, &s, accum, model, None)?;
        Ok(Self { r, s, t: 0.0, accum, exploded: false, blowup_time: None, steps: 0, u })
    }

    pub fn grid(&self) -> Grid {
        self.r.grid()
    }

    /// Reconstructed `u` for the current invariants.
    pub fn u(&self) -> &Field {
        &self.u
    }

    pub fn theta(&self) -> f64 {
        theta(self)
    }

    pub fn energy(&self) -> f64 {
        self.r.values().iter().chain(self.s.values()).map(|v| v * v).sum::<f64>() * self.grid().dx()
    }

    pub fn sup_norm(&self) -> f64 {
        self.r.sup_norm().max(self.s.sup_norm())
    }

    pub(super) fn refresh_u(&mut self, model: &SpeedModel) -> Result<()> {
        self.u = reconstruct_with_guess(&self.r, &self.s, self.accum, model, Some(&self.u))?;
        Ok(())
    }
}

/// `R0 = v0 - c(u0) u0_x`, `S0 = v0 + c(u0) u0_x`, mollified in the
/// regularized mode.
///
/// `c(u0) u0_x` is taken as the centered difference of `C(u0)`, which
/// agrees with the product to second order and telescopes, so the initial
/// correction `Theta` vanishes to rounding.
pub fn init_state(u0: &Field, v0: &Field, model: &SpeedModel, mode: StepMode) -> Result<State> {
    if u0.grid() != v0.grid() {
        return Err(SvwError::GridMismatch { expected: u0.len(), actual: v0.len() });
    }
    let grid = u0.grid();
    let n = grid.n();
    let big_c: Vec<f64> = u0.values().iter().map(|&u| model.primitive_c(u)).collect();
    let inv = 0.5 / grid.dx();
    let grad: Vec<f64> = (0..n).map(|i| (big_c[(i + 1) % n] - big_c[(i + n - 1) % n]) * inv).collect();
    let mut r = Field::new(grid, v0.values().iter().zip(&grad).map(|(v, g)| v - g).collect())?;
    let mut s = Field::new(grid, v0.values().iter().zip(&grad).map(|(v, g)| v + g).collect())?;
    if let Cutoff::Regularized(eps) = mode.cutoff {
        let j = Mollifier::new(grid, eps)?;
        r = j.apply(&r);
        s = j.apply(&s);
    }
    State::from_invariants(r, s, u0[0], model)
}

/// Correction term `Theta = int (S - R)/2 dx`.
pub fn theta(state: &State) -> f64 {
    theta_of(&state.r, &state.s)
}

pub(super) fn theta_of(r: &Field, s: &Field) -> f64 {
    let sum: f64 = r.values().iter().zip(s.values()).map(|(a, b)| b - a).sum();
    0.5 * sum * r.grid().dx()
}

/// `u(x) = C^{-1}( C(accum) + int_0^x [(S - R)/2 - Theta] )`.
pub fn reconstruct_u(state: &State, model: &SpeedModel) -> Result<Field> {
    reconstruct_with_guess(&state.r, &state.s, state.accum, model, None)
}

fn reconstruct_with_guess(r: &Field, s: &Field, accum: f64, model: &SpeedModel, guess: Option<&Field>) -> Result<Field> {
    let th = theta_of(r, s);
    let integrand = r.zip_map(s, |a, b| 0.5 * (b - a) - th);
    let primitive = antiderivative_from_zero(&integrand);
    let base = model.primitive_c(accum);
    let mut out = Vec::with_capacity(r.len());
    for (i, &p) in primitive.values().iter().enumerate() {
        let y = base + p;
        let u = match guess {
            Some(g) if g[i].is_finite() => model.inverse_c_from(y, g[i])?,
            _ => model.inverse_c(y)?,
        };
        out.push(u);
    }
    Field::new(r.grid(), out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedFields {
    pub u: Field,
    pub u_x: Field,
    pub u_t: Field,
    /// Non-local part of `u_t`, `(1/c) int_0^x (zeta - mean zeta)`.
    pub xi: Field,
}

/// `u`, `u_x = ((S - R)/2 - Theta)/c(u)` and `u_t = (R + S)/2 + Xi`.
pub fn derived_fields(state: &State, model: &SpeedModel, mode: StepMode) -> Result<DerivedFields> {
    let u = reconstruct_u(state, model)?;
    let th = theta(state);
    let grid = state.grid();
    let n = grid.n();
    let (r, s) = (state.r.values(), state.s.values());
    let chi = |v: f64| match mode.cutoff {
        Cutoff::Regularized(eps) => chi_eps(v, eps),
        Cutoff::Off => 0.0,
    };
    let mut u_x = Vec::with_capacity(n);
    let mut zeta = Vec::with_capacity(n);
    for i in 0..n {
        let ui = u[i];
        u_x.push((0.5 * (s[i] - r[i]) - th) / model.c(ui));
        zeta.push(model.ctilde_prime(ui) * (0.5 * (chi(r[i]) - chi(s[i])) + (r[i] + s[i]) * th));
    }
    let zeta = Field::new(grid, zeta)?;
    let zbar = periodic_integral(&zeta);
    let big_xi = antiderivative_from_zero(&zeta.map(|z| z - zbar));
    let xi = Field::new(grid, (0..n).map(|i| big_xi[i] / model.c(u[i])).collect())?;
    let u_t = Field::new(grid, (0..n).map(|i| 0.5 * (r[i] + s[i]) + xi[i]).collect())?;
    Ok(DerivedFields { u, u_x: Field::new(grid, u_x)?, u_t, xi })
}
