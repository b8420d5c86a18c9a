use serde::{Deserialize, Serialize};

use crate::error::{Result, SvwError};
use crate::grid::interpolate;
use crate::speed::SpeedModel;

use super::state::State;
use super::step::{StepMode, StepReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    /// Characteristics of `R`, speed `+c(u)`.
    Plus,
    /// Characteristics of `S`, speed `-c(u)`.
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracerSample {
    pub t: f64,
    pub x: f64,
    pub r: f64,
    pub s: f64,
    pub u: f64,
}

/// A point moving along `dX/dt = +-c(u(t, X))`.
///
/// The position is kept unwrapped so the total displacement survives
/// crossings of the periodic boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharTracer {
    pub sign: Sign,
    lifted: f64,
    pub samples: Vec<TracerSample>,
}

impl CharTracer {
    pub fn new(sign: Sign, x0: f64, state: &State) -> Self {
        let mut tracer = Self { sign, lifted: x0, samples: Vec::new() };
        tracer.record(state);
        tracer
    }

    /// Position on the torus, in `[0, 1)`.
    pub fn x(&self) -> f64 {
        self.lifted - self.lifted.floor()
    }

    /// Position without periodic wrapping.
    pub fn lifted(&self) -> f64 {
        self.lifted
    }

    fn record(&mut self, state: &State) {
        let x = self.x();
        self.samples.push(TracerSample {
            t: state.t,
            x,
            r: interpolate(&state.r, x),
            s: interpolate(&state.s, x),
            u: interpolate(state.u(), x),
        });
    }

    /// Midpoint step over `[before.t, after.t]` using the speed of `before`.
    pub fn advance(&mut self, before: &State, after: &State, model: &SpeedModel) -> Result<()> {
        let dt = after.t - before.t;
        if !(dt >= 0.0) {
            return Err(SvwError::InvalidParameter(format!("tracer states out of order (dt = {dt})")));
        }
        if after.exploded {
            return Ok(());
        }
        let f = self.sign.factor();
        let u = before.u();
        let mid = self.lifted + 0.5 * f * dt * model.c(interpolate(u, self.lifted));
        self.lifted += f * dt * model.c(interpolate(u, mid));
        self.record(after);
        Ok(())
    }
}

/// Lifted image of `x0` under the discrete flow through `history`.
pub fn flow_map(history: &[State], x0: f64, sign: Sign, model: &SpeedModel) -> Result<f64> {
    let Some(first) = history.first() else {
        return Ok(x0);
    };
    let mut tracer = CharTracer::new(sign, x0, first);
    for pair in history.windows(2) {
        tracer.advance(&pair[0], &pair[1], model)?;
    }
    Ok(tracer.lifted())
}

/// Point whose image under [`flow_map`] is `y` (mod 1), found by bisection
/// on the monotone lifted map.
pub fn flow_inverse(history: &[State], y: f64, sign: Sign, model: &SpeedModel) -> Result<f64> {
    let g = |x: f64| -> Result<f64> { Ok(flow_map(history, x, sign, model)? - y) };
    let guess = y - g(y)?;
    let mut lo = guess - 0.5;
    let mut hi = guess + 0.5;
    while g(lo)? > 0.0 {
        lo -= 1.0;
    }
    while g(hi)? < 0.0 {
        hi += 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok(x - x.floor())
}

/// A point on a `+c` characteristic carrying its own value of `R`.
///
/// Along `X+` the invariant obeys
/// `dR = c~'(u) (R^2 - S^2 - chi(R) + 2 R Theta) dt + Phi dW`; the probe
/// integrates that ODE with `u`, `S` and the forcing read off the grid, so
/// a collapse narrower than the mesh is still seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiProbe {
    lifted: f64,
    pub r: f64,
    pub blowup_time: Option<f64>,
}

impl RiccatiProbe {
    pub fn new(x0: f64, r0: f64) -> Self {
        Self { lifted: x0, r: r0, blowup_time: None }
    }

    /// Starts at `x0` with the grid value of `R` there.
    pub fn on_state(x0: f64, state: &State) -> Self {
        Self::new(x0, interpolate(&state.r, x0))
    }

    pub fn x(&self) -> f64 {
        self.lifted - self.lifted.floor()
    }

    pub fn advance(
        &mut self,
        before: &State,
        report: &StepReport,
        after: &State,
        model: &SpeedModel,
        mode: StepMode,
        threshold: f64,
    ) {
        if self.blowup_time.is_some() || !report.advanced {
            return;
        }
        let dt = after.t - before.t;
        let u = before.u();
        let x = self.lifted;
        let mid = x + 0.5 * dt * model.c(interpolate(u, x));
        let k = model.ctilde_prime(interpolate(u, mid));
        let sm = interpolate(&before.s, mid);
        let th = if mode.correction { before.theta() } else { 0.0 };
        let rhs = |r: f64| k * (r * r - sm * sm - mode_chi(mode, r) + 2.0 * r * th);

        // RK4 with substeps fine enough for the quadratic growth.
        let subs = ((dt * k.abs() * self.r.abs() / 0.05).ceil() as usize).clamp(1, 10_000);
        let h = dt / subs as f64;
        let mut r = self.r;
        for _ in 0..subs {
            let k1 = rhs(r);
            let k2 = rhs(r + 0.5 * h * k1);
            let k3 = rhs(r + 0.5 * h * k2);
            let k4 = rhs(r + h * k3);
            r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !r.is_finite() || r.abs() > threshold {
                break;
            }
        }
        self.lifted += dt * model.c(interpolate(u, mid));
        if let Some(f) = &report.forcing {
            r += interpolate(f, self.lifted);
        }
        self.r = r;
        if !r.is_finite() || r.abs() > threshold {
            self.blowup_time = Some(after.t);
        }
    }
}

fn mode_chi(mode: StepMode, v: f64) -> f64 {
    match mode.eps() {
        Some(eps) => crate::speed::chi_eps(v, eps),
        None => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{init_state, StepMode, Stepper};
    use crate::grid::{Field, Grid};
    use crate::noise::{NoiseModel, PathStream};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn run(model: &SpeedModel, n: usize, t_end: f64, u0: impl Fn(f64) -> f64) -> Vec<State> {
        let g = Grid::new(n).unwrap();
        let noise = NoiseModel::zero(g);
        let mut st = init_state(&Field::from_fn(g, u0), &Field::zeros(g), model, StepMode::regular()).unwrap();
        let dt0 = 0.5 * g.dx() / model.c2();
        let steps = (t_end / dt0).ceil() as usize;
        let stepper = Stepper::new(model, &noise, StepMode::regular(), t_end / steps as f64, 1e6).unwrap();
        let stream = PathStream::new(0, 0);
        let mut history = vec![st.clone()];
        for _ in 0..steps {
            stepper.step(&mut st, &stream).unwrap();
            history.push(st.clone());
        }
        history
    }

    #[test]
    fn constant_speed_tracer() {
        let m = SpeedModel::constant(2.0).unwrap();
        let history = run(&m, 64, 0.2, |_| 0.0);
        let mut tracer = CharTracer::new(Sign::Plus, 0.1, &history[0]);
        for pair in history.windows(2) {
            tracer.advance(&pair[0], &pair[1], &m).unwrap();
        }
        assert_abs_diff_eq!(tracer.x(), 0.5, epsilon = 1e-12);
        assert_eq!(tracer.samples.len(), history.len());
    }

    #[test]
    fn tracer_wraps() {
        let m = SpeedModel::constant(2.0).unwrap();
        let history = run(&m, 64, 0.1, |_| 0.0);
        let end = flow_map(&history, 0.9, Sign::Plus, &m).unwrap();
        assert_abs_diff_eq!(end, 1.1, epsilon = 1e-12);
        let mut tracer = CharTracer::new(Sign::Plus, 0.9, &history[0]);
        for pair in history.windows(2) {
            tracer.advance(&pair[0], &pair[1], &m).unwrap();
        }
        assert_abs_diff_eq!(tracer.x(), 0.1, epsilon = 1e-12);
        let back = flow_map(&history, 0.3, Sign::Minus, &m).unwrap();
        assert_abs_diff_eq!(back - back.floor(), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn inverse_flow_recovers_start() {
        let m = SpeedModel::tanh_default();
        let u0 = |x: f64| 0.4 * (2.0 * PI * x).sin();
        let history = run(&m, 128, 0.3, u0);
        for (sign, x0) in [(Sign::Plus, 0.13), (Sign::Minus, 0.77), (Sign::Plus, 0.95)] {
            let y = flow_map(&history, x0, sign, &m).unwrap();
            let back = flow_inverse(&history, y - y.floor(), sign, &m).unwrap();
            let d = (back - x0 + 0.5).rem_euclid(1.0) - 0.5;
            assert!(d.abs() < 1e-10, "{sign:?} {x0}: {back}");
            // A variable speed actually moved the point.
            assert!((y - x0).abs() > 0.3);
        }
    }

    #[test]
    fn tracer_sees_transported_invariant() {
        // Along X+ the regular system has dR/dt = c~'(u)(R^2 - S^2); for
        // constant speed R is constant on the characteristic.
        let m = SpeedModel::constant(1.5).unwrap();
        let history = run(&m, 256, 0.4, |x| 0.05 * (2.0 * PI * x).sin());
        let mut tracer = CharTracer::new(Sign::Plus, 0.31, &history[0]);
        for pair in history.windows(2) {
            tracer.advance(&pair[0], &pair[1], &m).unwrap();
        }
        let first = tracer.samples.first().unwrap().r;
        for s in &tracer.samples {
            assert_abs_diff_eq!(s.r, first, epsilon = 1e-4);
        }
    }

    #[test]
    fn probe_follows_riccati_growth() {
        // Constant S = 0 and u frozen near 0 give r' = k r^2 exactly.
        let m = SpeedModel::tanh_default();
        let g = Grid::new(64).unwrap();
        let noise = NoiseModel::zero(g);
        let mode = StepMode::regular();
        let mut st = State::from_invariants(Field::zeros(g), Field::zeros(g), 0.0, &m).unwrap();
        let dt = 0.5 * g.dx() / m.c2();
        let stepper = Stepper::new(&m, &noise, mode, dt, 1e9).unwrap();
        let k = m.ctilde_prime(0.0);
        let r0 = 10.0;
        let mut probe = RiccatiProbe::new(0.2, r0);
        let stream = PathStream::new(0, 0);
        let tau = 1.0 / (k * r0);
        while st.t < tau * 1.2 && probe.blowup_time.is_none() {
            let before = st.clone();
            let rep = stepper.step(&mut st, &stream).unwrap();
            probe.advance(&before, &rep, &st, &m, mode, 1e6);
        }
        let t = probe.blowup_time.expect("probe must blow up");
        assert!((t - tau).abs() < 2.0 * dt, "{t} vs {tau}");
        // It moved with the characteristic speed c(0) = 2.
        assert!(probe.x() != 0.2);
    }
}
