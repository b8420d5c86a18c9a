use serde::{Deserialize, Serialize};

use crate::error::{Result, SvwError};
use crate::grid::{CellRemap, Field, Interpolant, Interpolation};
use crate::noise::{ModeIncrements, NoiseModel, PathStream};
use crate::speed::{chi_eps, SpeedModel};

use super::state::State;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cutoff {
    /// Cut-off `chi_eps`, mollified data and mollified noise at width `eps`.
    Regularized(f64),
    Off,
}

/// Which system the stepper integrates.
///
/// The regularized system always carries the correction `Theta`; the
/// regular system may drop it (it vanishes for the exact dynamics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMode {
    pub cutoff: Cutoff,
    pub correction: bool,
}

impl StepMode {
    pub fn new(cutoff: Cutoff, correction: bool) -> Result<Self> {
        match cutoff {
            Cutoff::Regularized(eps) => {
                if !(eps > 0.0) || !eps.is_finite() {
                    return Err(SvwError::InvalidParameter(format!("epsilon must be positive, got {eps}")));
                }
                if !correction {
                    return Err(SvwError::InvalidParameter(
                        "the regularized system requires the correction term".into(),
                    ));
                }
            }
            Cutoff::Off => {}
        }
        Ok(Self { cutoff, correction })
    }

    pub fn regular() -> Self {
        Self { cutoff: Cutoff::Off, correction: true }
    }

    pub fn regularized(eps: f64) -> Result<Self> {
        Self::new(Cutoff::Regularized(eps), true)
    }

    pub fn eps(&self) -> Option<f64> {
        match self.cutoff {
            Cutoff::Regularized(eps) => Some(eps),
            Cutoff::Off => None,
        }
    }

    pub fn is_regularized(&self) -> bool {
        matches!(self.cutoff, Cutoff::Regularized(_))
    }

    #[inline]
    fn chi(&self, v: f64) -> f64 {
        match self.cutoff {
            Cutoff::Regularized(eps) => chi_eps(v, eps),
            Cutoff::Off => 0.0,
        }
    }
}

/// What one step consumed and produced, for the energy ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub increments: ModeIncrements,
    /// `dt * 2 int c~'(u) [R chi(R) + S chi(S)]`.
    pub dissipation: f64,
    /// `2 int (R + S) Phi dW`, with the pre-noise invariants.
    pub martingale: f64,
    /// `2 (int (Phi dW)^2 - dt int q)`: the sampled quadratic variation
    /// minus its mean, a zero-mean increment of the discrete energy.
    pub qv_excess: f64,
    /// Nodal noise increment added this step, when the noise is active.
    pub forcing: Option<Field>,
    /// False when the state had already exploded and was left untouched.
    pub advanced: bool,
}

/// Default explosion level `1e3 (1 + ||(R0, S0)||_inf)`.
pub fn default_threshold(initial: &State) -> f64 {
    1e3 * (1.0 + initial.sup_norm())
}

/// Current time if the state is non-finite or above `threshold`.
pub fn detect_explosion(state: &State, threshold: f64) -> Option<f64> {
    if let Some(t) = state.blowup_time {
        return Some(t);
    }
    let bad = state
        .r
        .values()
        .iter()
        .chain(state.s.values())
        .any(|v| !v.is_finite() || v.abs() > threshold);
    bad.then_some(state.t)
}

/// Flux-form semi-Lagrangian Euler–Maruyama integrator.
///
/// Invariants are cell averages. Each step remaps them between the feet of
/// the cell edges traced back along `+-c(u)` (midpoint rule), which is the
/// conservative transport `R_t + (c R)_x`, `S_t - (c S)_x`. In that form the
/// sources read
/// `-c~'(u) [(R - S)^2 + chi(R) + 2 R Theta]` and
/// `-c~'(u) [(S - R)^2 + chi(S) - 2 S Theta]`;
/// the quadratic terms cancel in `int (S - R)`, so the correction obeys its
/// exact evolution law up to rounding. Noise is added cellwise afterwards.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    pub model: &'a SpeedModel,
    pub noise: &'a NoiseModel,
    pub mode: StepMode,
    pub dt: f64,
    pub threshold: f64,
    pub interpolation: Interpolation,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a SpeedModel, noise: &'a NoiseModel, mode: StepMode, dt: f64, threshold: f64) -> Result<Self> {
        let bound = 0.5 * noise.grid().dx() / model.c2();
        if !(dt > 0.0) || dt > bound * (1.0 + 1e-9) {
            return Err(SvwError::CflViolation { dt, bound });
        }
        if !(threshold > 0.0) {
            return Err(SvwError::InvalidParameter(format!("explosion threshold must be positive, got {threshold}")));
        }
        Ok(Self { model, noise, mode, dt, threshold, interpolation: Interpolation::Cubic })
    }

    pub fn with_interpolation(mut self, kind: Interpolation) -> Self {
        self.interpolation = kind;
        self
    }

    /// Advances `state` by one step; an exploded state is left unchanged.
    pub fn step(&self, state: &mut State, stream: &PathStream) -> Result<StepReport> {
        let modes = self.noise.mode_count();
        if state.exploded {
            return Ok(StepReport {
                increments: ModeIncrements::zero(modes, self.dt),
                dissipation: 0.0,
                martingale: 0.0,
                qv_excess: 0.0,
                forcing: None,
                advanced: false,
            });
        }
        let grid = state.grid();
        if grid != self.noise.grid() {
            return Err(SvwError::GridMismatch { expected: self.noise.grid().n(), actual: grid.n() });
        }
        let n = grid.n();
        let dx = grid.dx();
        let dt = self.dt;
        let model = self.model;
        let th = if self.mode.correction { state.theta() } else { 0.0 };

        let u = state.u().values();
        let speed: Vec<f64> = u.iter().map(|&v| model.c(v)).collect();
        let kind = self.interpolation;
        let ic = Interpolant::from_slice(&speed, kind);
        let remap_r = CellRemap::new(&state.r, kind);
        let remap_s = CellRemap::new(&state.s, kind);

        // Feet of the left cell edges along both families, by the midpoint rule.
        let mut foot_r = Vec::with_capacity(n + 1);
        let mut foot_s = Vec::with_capacity(n + 1);
        for k in 0..n {
            let e = grid.x(k) - 0.5 * dx;
            let half = 0.5 * dt * ic.eval(e);
            foot_r.push(e - dt * ic.eval(e - half));
            foot_s.push(e + dt * ic.eval(e + half));
        }
        foot_r.push(foot_r[0] + 1.0);
        foot_s.push(foot_s[0] + 1.0);

        let mut r_new = vec![0.0; n];
        let mut s_new = vec![0.0; n];
        let mut sink = 0.0;
        for i in 0..n {
            let rt = (remap_r.mass_to(foot_r[i + 1]) - remap_r.mass_to(foot_r[i])) / dx;
            let st = (remap_s.mass_to(foot_s[i + 1]) - remap_s.mass_to(foot_s[i])) / dx;
            let k = model.ctilde_prime(u[i]);
            let (chi_r, chi_s) = (self.mode.chi(rt), self.mode.chi(st));
            let gap = (rt - st) * (rt - st);
            r_new[i] = rt - dt * k * (gap + chi_r + 2.0 * rt * th);
            s_new[i] = st - dt * k * (gap + chi_s - 2.0 * st * th);
            sink += k * (rt * chi_r + st * chi_s);
        }
        let dissipation = 2.0 * dt * sink * dx;

        let mut martingale = 0.0;
        let mut qv_excess = 0.0;
        let mut applied = None;
        let increments = if self.noise.is_silent() {
            ModeIncrements::zero(modes, dt)
        } else {
            let (inc, forcing) = self.noise.sample_increment(dt, stream, state.steps, self.mode.is_regularized())?;
            let mut acc = 0.0;
            let mut sq = 0.0;
            for ((r, s), f) in r_new.iter_mut().zip(s_new.iter_mut()).zip(forcing.values()) {
                acc += (*r + *s) * f;
                sq += f * f;
                *r += f;
                *s += f;
            }
            martingale = 2.0 * acc * dx;
            qv_excess = 2.0 * (sq * dx - dt * self.noise.q_integral(self.mode.is_regularized()));
            applied = Some(forcing);
            inc
        };

        state.accum += dt * 0.5 * (state.r[0] + state.s[0]);
        state.r = Field::new(grid, r_new)?;
        state.s = Field::new(grid, s_new)?;
        state.t += dt;
        state.steps += 1;
        if let Some(t) = detect_explosion(state, self.threshold) {
            state.exploded = true;
            state.blowup_time = Some(t);
        } else {
            state.refresh_u(model)?;
        }
        Ok(StepReport { increments, dissipation, martingale, qv_excess, forcing: applied, advanced: true })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::init_state;
    use crate::grid::Grid;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn silent(g: Grid) -> NoiseModel {
        NoiseModel::zero(g)
    }

    #[test]
    fn mode_validation() {
        assert!(StepMode::new(Cutoff::Regularized(0.1), false).is_err());
        assert!(StepMode::new(Cutoff::Regularized(-0.1), true).is_err());
        assert!(StepMode::new(Cutoff::Off, false).is_ok());
        assert_eq!(StepMode::regularized(0.3).unwrap().eps(), Some(0.3));
    }

    #[test]
    fn rejects_large_steps() {
        let g = Grid::new(64).unwrap();
        let m = SpeedModel::tanh_default();
        let noise = silent(g);
        let bound = 0.5 * g.dx() / 3.0;
        assert!(Stepper::new(&m, &noise, StepMode::regular(), bound, 1e3).is_ok());
        let err = Stepper::new(&m, &noise, StepMode::regular(), bound * 1.01, 1e3).unwrap_err();
        assert!(matches!(err, SvwError::CflViolation { .. }));
    }

    #[test]
    fn constant_state_only_moves_accumulator() {
        let g = Grid::new(32).unwrap();
        let m = SpeedModel::tanh_default();
        let noise = silent(g);
        for mode in [StepMode::regular(), StepMode::regularized(0.1).unwrap()] {
            let mut st = init_state(&Field::constant(g, 0.3), &Field::constant(g, 1.5), &m, mode).unwrap();
            let dt = 0.5 * g.dx() / 3.0;
            let stepper = Stepper::new(&m, &noise, mode, dt, 1e3).unwrap();
            let stream = PathStream::new(0, 0);
            for _ in 0..50 {
                stepper.step(&mut st, &stream).unwrap();
            }
            for i in 0..32 {
                assert_abs_diff_eq!(st.r[i], 1.5, epsilon = 1e-12);
                assert_abs_diff_eq!(st.s[i], 1.5, epsilon = 1e-12);
                assert_abs_diff_eq!(st.u()[i], 0.3 + 1.5 * st.t, epsilon = 1e-11);
            }
            assert_abs_diff_eq!(st.accum, 0.3 + 1.5 * 50.0 * dt, epsilon = 1e-12);
        }
    }

    fn transport_error(n: usize, t_end: f64) -> f64 {
        let g = Grid::new(n).unwrap();
        let m = SpeedModel::constant(2.0).unwrap();
        let noise = silent(g);
        let u0 = Field::from_fn(g, |x| 0.05 * (2.0 * PI * x).sin());
        let v0 = Field::from_fn(g, |x| 0.3 * (2.0 * PI * x).cos() + 0.1 * (4.0 * PI * x).sin());
        let mut st = init_state(&u0, &v0, &m, StepMode::regular()).unwrap();
        let dt0 = 0.5 * g.dx() / 2.0;
        let steps = (t_end / dt0).ceil() as usize;
        let dt = t_end / steps as f64;
        let stepper = Stepper::new(&m, &noise, StepMode::regular(), dt, 1e6).unwrap();
        let stream = PathStream::new(0, 0);
        for _ in 0..steps {
            stepper.step(&mut st, &stream).unwrap();
        }
        // Exact translation of the continuous datum.
        let r_exact = |x: f64| {
            let y = x - 2.0 * t_end;
            let v = 0.3 * (2.0 * PI * y).cos() + 0.1 * (4.0 * PI * y).sin();
            v - 2.0 * 0.05 * 2.0 * PI * (2.0 * PI * y).cos()
        };
        let diff = Field::from_fn(g, r_exact).zip_map(&st.r, |a, b| a - b);
        diff.l2_norm() / Field::from_fn(g, r_exact).l2_norm()
    }

    #[test]
    fn constant_speed_transport_is_a_translation() {
        let e1 = transport_error(128, 0.37);
        let e2 = transport_error(256, 0.37);
        assert!(e1 < 2e-2, "{e1}");
        assert!(e2 < e1 / 2.0, "{e1} {e2}");
    }

    #[test]
    fn exploded_state_latches() {
        let g = Grid::new(32).unwrap();
        let m = SpeedModel::tanh_default();
        let noise = NoiseModel::build(g, 2, 0.3, 3.0, None).unwrap();
        let mut st = init_state(&Field::zeros(g), &Field::constant(g, 2.0), &m, StepMode::regular()).unwrap();
        let stepper = Stepper::new(&m, &noise, StepMode::regular(), 0.5 * g.dx() / 3.0, 1.0).unwrap();
        let stream = PathStream::new(5, 0);
        let first = stepper.step(&mut st, &stream).unwrap();
        assert!(first.advanced && st.exploded);
        let t = st.blowup_time.unwrap();
        let frozen = st.clone();
        for _ in 0..3 {
            let rep = stepper.step(&mut st, &stream).unwrap();
            assert!(!rep.advanced);
        }
        assert_eq!(st, frozen);
        assert_eq!(detect_explosion(&st, 1e9), Some(t));
    }

    #[test]
    fn non_finite_values_explode() {
        let g = Grid::new(16).unwrap();
        let m = SpeedModel::tanh_default();
        let mut st = init_state(&Field::zeros(g), &Field::zeros(g), &m, StepMode::regular()).unwrap();
        assert_eq!(detect_explosion(&st, 1.0), None);
        st.r[3] = f64::NAN;
        assert_eq!(detect_explosion(&st, 1.0), Some(0.0));
    }

    #[test]
    fn additive_noise_variance_under_transport() {
        let g = Grid::new(32).unwrap();
        let m = SpeedModel::constant(2.0).unwrap();
        let noise = NoiseModel::build(g, 1, 0.25, 3.0, None).unwrap();
        let q = noise.q()[0];
        let t_end = 0.25;
        let dt0 = 0.5 * g.dx() / 2.0;
        let steps = (t_end / dt0).ceil() as usize;
        let dt = t_end / steps as f64;
        let stepper = Stepper::new(&m, &noise, StepMode::regular(), dt, 1e6).unwrap();
        let u0 = Field::from_fn(g, |x| 0.1 * (2.0 * PI * x).sin());
        let init = init_state(&u0, &Field::zeros(g), &m, StepMode::regular()).unwrap();
        let paths = 800;
        let mut sum = vec![0.0; 32];
        let mut sum2 = vec![0.0; 32];
        for p in 0..paths {
            let mut st = init.clone();
            let stream = PathStream::new(77, p);
            for _ in 0..steps {
                stepper.step(&mut st, &stream).unwrap();
            }
            for i in 0..32 {
                sum[i] += st.r[i];
                sum2[i] += st.r[i] * st.r[i];
            }
        }
        let pf = paths as f64;
        let var: f64 =
            (0..32).map(|i| (sum2[i] - sum[i] * sum[i] / pf) / (pf - 1.0)).sum::<f64>() / 32.0;
        // Deterministic data: the whole variance is injected by the forcing.
        let expected = q * t_end;
        assert!((var / expected - 1.0).abs() < 0.1, "variance {var} vs {expected}");
    }
}
