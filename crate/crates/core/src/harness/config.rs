use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{default_threshold, init_state, State, StepMode};
use crate::error::{Result, SvwError};
use crate::grid::{bump, Field, Grid, Interpolation, Mollifier};
use crate::noise::NoiseModel;
use crate::speed::{SpeedModel, SpeedTable};

fn invalid(msg: impl Into<String>) -> SvwError {
    SvwError::ConfigInvalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tanh,
    Constant,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "default_c_base")]
    pub c_base: f64,
    #[serde(default = "default_c_amp")]
    pub c_amp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_path: Option<PathBuf>,
}

fn default_c_base() -> f64 {
    2.0
}

fn default_c_amp() -> f64 {
    1.0
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { kind: ModelKind::Tanh, c_base: 2.0, c_amp: 1.0, table_path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub pairs: usize,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default)]
    pub seed: u64,
    /// Mollifier width for the noise modes; defaults to `run.epsilon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

fn default_decay() -> f64 {
    3.0
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { pairs: 0, amplitude: 0.0, decay: 3.0, seed: 0, epsilon: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Regularized,
    Regular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    pub mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explosion_threshold: Option<f64>,
}

/// One Fourier term `cos * cos(2 pi k x) + sin * sin(2 pi k x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierMode {
    pub k: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

fn fourier_sum(modes: &[FourierMode], mean: f64, x: f64) -> f64 {
    modes.iter().fold(mean, |acc, m| {
        let a = 2.0 * PI * m.k as f64 * x;
        acc + m.cos * a.cos() + m.sin * a.sin()
    })
}

/// Initial data. `fourier` takes either `u`/`v` or the invariants `r`/`s`
/// directly (with `anchor` the value of `u` at `x = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitConfig {
    Constant {
        #[serde(default)]
        u: f64,
        #[serde(default)]
        v: f64,
    },
    Fourier {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        u: Vec<FourierMode>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        v: Vec<FourierMode>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        r: Vec<FourierMode>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        s: Vec<FourierMode>,
        #[serde(default)]
        u_mean: f64,
        #[serde(default)]
        v_mean: f64,
        #[serde(default)]
        anchor: f64,
    },
    Bump(BumpData),
    File {
        path: PathBuf,
    },
}

/// `u0(x) = u* + eps^alpha phi(x / eps^(alpha + nu + gamma))`, `v0 = 0`,
/// with `phi(y) = exp(-1/(1 - (4y - 2)^2))` on `(1/4, 3/4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpData {
    pub eps: f64,
    pub alpha: f64,
    pub nu: f64,
    pub gamma: f64,
    #[serde(default)]
    pub u_star: f64,
}

impl BumpData {
    pub fn validate(&self, model: &SpeedModel) -> Result<()> {
        let BumpData { eps, alpha, nu, gamma, u_star } = *self;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(SvwError::InvalidParameter(format!("bump eps must lie in (0, 1), got {eps}")));
        }
        if !(alpha > 1.0) {
            return Err(SvwError::InvalidParameter(format!("alpha must exceed 1, got {alpha}")));
        }
        if !(nu > 0.0 && nu < alpha - 1.0) {
            return Err(SvwError::InvalidParameter(format!("nu must lie in (0, alpha - 1), got {nu}")));
        }
        if !(gamma > 1.0 / 3.0) {
            return Err(SvwError::InvalidParameter(format!("gamma must exceed 1/3, got {gamma}")));
        }
        if !(model.c_prime(u_star) > 0.0) {
            return Err(SvwError::InvalidParameter(format!("c'(u*) must be positive at u* = {u_star}")));
        }
        Ok(())
    }

    /// Horizontal scale `eps^(alpha + nu + gamma)`.
    pub fn scale(&self) -> f64 {
        self.eps.powf(self.alpha + self.nu + self.gamma)
    }

    pub fn horizon(&self) -> f64 {
        self.eps.powf(self.gamma)
    }

    pub fn u0(&self, x: f64) -> f64 {
        self.u_star + self.eps.powf(self.alpha) * phi(x / self.scale())
    }

    /// `R0(x_eps) = -c(u0(x_eps)) eps^(-nu-gamma) phi'(x0)` at `x_eps = scale * x0`.
    pub fn r0_at(&self, model: &SpeedModel, x0: f64) -> f64 {
        -model.c(self.u0(self.scale() * x0)) * self.eps.powf(-self.nu - self.gamma) * phi_prime(x0)
    }

    /// Riccati blow-up time `1 / (c~'(u*) R0(x_eps))`.
    pub fn riccati_time(&self, model: &SpeedModel, x0: f64) -> f64 {
        1.0 / (model.ctilde_prime(self.u_star) * self.r0_at(model, x0))
    }
}

pub fn phi(y: f64) -> f64 {
    bump(4.0 * y - 2.0)
}

pub fn phi_prime(y: f64) -> f64 {
    let z = 4.0 * y - 2.0;
    if z.abs() >= 1.0 {
        return 0.0;
    }
    let d = 1.0 - z * z;
    // d/dy exp(-1/d) = exp(-1/d) * (-2z/d^2) * 4
    -8.0 * z / (d * d) * bump(z)
}

/// Point of steepest descent of `phi`, where `R0` peaks.
pub fn steepest_point() -> f64 {
    // phi' is unimodal on (1/2, 3/4); golden-section search for its minimum.
    let (mut a, mut b) = (0.5, 0.75);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if phi_prime(c) < phi_prime(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default)]
    pub interpolation: Interpolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub run: RunSection,
    pub init: InitConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default = "one")]
    pub paths: usize,
    #[serde(default = "one")]
    pub output_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        // Relative data paths are resolved against the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &cfg.model.table_path {
            if p.is_relative() {
                cfg.model.table_path = Some(base.join(p));
            }
        }
        if let InitConfig::File { path: p } = &mut cfg.init {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form, output directory excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        let text = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn mode(&self) -> Result<StepMode> {
        match self.run.mode {
            ModeName::Regular => Ok(StepMode::regular()),
            ModeName::Regularized => {
                let eps = self.run.epsilon.ok_or_else(|| invalid("run.epsilon is required in regularized mode"))?;
                StepMode::regularized(eps).map_err(|e| invalid(e.to_string()))
            }
        }
    }

    pub fn model(&self) -> Result<SpeedModel> {
        let m = &self.model;
        let built = match m.kind {
            ModelKind::Tanh => SpeedModel::tanh(m.c_base, m.c_amp),
            ModelKind::Constant => SpeedModel::constant(m.c_base),
            ModelKind::Table => {
                let path = m.table_path.as_ref().ok_or_else(|| invalid("model.table_path is required for kind table"))?;
                SpeedTable::from_csv(path).map(SpeedModel::table)
            }
        };
        built.map_err(|e| match e {
            SvwError::Io(err) => invalid(format!("speed table: {err}")),
            other => invalid(other.to_string()),
        })
    }

    /// Checks every cross-field precondition and builds the run objects.
    pub fn setup(&self) -> Result<Setup> {
        let n = self.grid.n;
        if n < 8 || n % 2 != 0 {
            return Err(invalid(format!("grid.n must be even and at least 8, got {n}")));
        }
        let grid = Grid::new(n).map_err(|e| invalid(e.to_string()))?;
        let model = self.model()?;
        let mode = self.mode()?;
        let t_end = self.run.t_end;
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(invalid(format!("run.t_end must be positive, got {t_end}")));
        }
        if self.paths == 0 {
            return Err(invalid("paths must be at least 1"));
        }
        if self.output_stride == 0 {
            return Err(invalid("output_stride must be at least 1"));
        }
        let bound = 0.5 * grid.dx() / model.c2();
        let dt_max = match (self.run.dt, self.run.cfl) {
            (Some(_), Some(_)) => return Err(invalid("give either run.dt or run.cfl, not both")),
            (Some(dt), None) => dt,
            (None, Some(cfl)) => {
                if !(cfl > 0.0) {
                    return Err(invalid(format!("run.cfl must be positive, got {cfl}")));
                }
                cfl * grid.dx() / model.c2()
            }
            (None, None) => bound,
        };
        if !(dt_max > 0.0) || dt_max > bound * (1.0 + 1e-9) {
            return Err(invalid(format!("time step {dt_max} exceeds the accuracy bound dx/(2 c2) = {bound}")));
        }
        // The step is shrunk so an integer number of steps lands on t_end.
        let steps = (t_end / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as u64;
        let dt = t_end / steps as f64;

        let noise_eps = self.noise.epsilon.or(mode.eps());
        if self.noise.pairs > 0 && !(self.noise.decay >= 3.0) {
            return Err(invalid(format!("noise.decay must be at least 3, got {}", self.noise.decay)));
        }
        let noise = NoiseModel::build(grid, self.noise.pairs, self.noise.amplitude, self.noise.decay, noise_eps)
            .map_err(|e| invalid(e.to_string()))?;

        let initial = self.initial_state(grid, &model, mode)?;
        if !initial.r.all_finite() || !initial.s.all_finite() {
            return Err(invalid("initial data is not finite"));
        }
        let threshold = match self.run.explosion_threshold {
            Some(l) if l > 0.0 => l,
            Some(l) => return Err(invalid(format!("run.explosion_threshold must be positive, got {l}"))),
            None => default_threshold(&initial),
        };
        Ok(Setup {
            grid,
            model,
            noise,
            mode,
            dt,
            steps,
            t_end,
            threshold,
            initial,
            interpolation: self.scheme.interpolation,
            stride: self.output_stride,
            seed: self.noise.seed,
        })
    }

    fn initial_state(&self, grid: Grid, model: &SpeedModel, mode: StepMode) -> Result<State> {
        let wrap = |e: SvwError| invalid(format!("initial data: {e}"));
        match &self.init {
            InitConfig::Constant { u, v } => {
                init_state(&Field::constant(grid, *u), &Field::constant(grid, *v), model, mode).map_err(wrap)
            }
            InitConfig::Fourier { u, v, r, s, u_mean, v_mean, anchor } => {
                let uv = !u.is_empty() || !v.is_empty() || *u_mean != 0.0 || *v_mean != 0.0;
                let rs = !r.is_empty() || !s.is_empty();
                if uv && rs {
                    return Err(invalid("fourier init takes either u/v or r/s, not both"));
                }
                if rs {
                    let mut rf = Field::from_fn(grid, |x| fourier_sum(r, 0.0, x));
                    let mut sf = Field::from_fn(grid, |x| fourier_sum(s, 0.0, x));
                    if let Some(eps) = mode.eps() {
                        let j = Mollifier::new(grid, eps).map_err(wrap)?;
                        rf = j.apply(&rf);
                        sf = j.apply(&sf);
                    }
                    State::from_invariants(rf, sf, *anchor, model).map_err(wrap)
                } else {
                    let uf = Field::from_fn(grid, |x| fourier_sum(u, *u_mean, x));
                    let vf = Field::from_fn(grid, |x| fourier_sum(v, *v_mean, x));
                    init_state(&uf, &vf, model, mode).map_err(wrap)
                }
            }
            InitConfig::Bump(b) => {
                b.validate(model).map_err(|e| invalid(e.to_string()))?;
                let uf = Field::from_fn(grid, |x| b.u0(x));
                init_state(&uf, &Field::zeros(grid), model, mode).map_err(wrap)
            }
            InitConfig::File { path } => {
                let (u, v) = read_uv(path, grid.n())?;
                init_state(&Field::new(grid, u).map_err(wrap)?, &Field::new(grid, v).map_err(wrap)?, model, mode)
                    .map_err(wrap)
            }
        }
    }
}

/// Reads `u,v` columns (one row per node, optional header).
fn read_uv(path: &Path, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let mut u = Vec::new();
    let mut v = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
        match parsed {
            Some(vals) if vals.len() == 2 => {
                u.push(vals[0]);
                v.push(vals[1]);
            }
            None if lineno == 0 => continue,
            _ => return Err(invalid(format!("{}:{}: expected two numeric columns u,v", path.display(), lineno + 1))),
        }
    }
    if u.len() != n {
        return Err(invalid(format!("{}: {} rows for a grid of {n} nodes", path.display(), u.len())));
    }
    Ok((u, v))
}

/// Validated, ready-to-run objects shared by every path.
#[derive(Debug, Clone)]
pub struct Setup {
    pub grid: Grid,
    pub model: SpeedModel,
    pub noise: NoiseModel,
    pub mode: StepMode,
    pub dt: f64,
    pub steps: u64,
    pub t_end: f64,
    pub threshold: f64,
    pub initial: State,
    pub interpolation: Interpolation,
    pub stride: usize,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "grid": {"n": 64},
            "model": {"kind": "tanh", "c_base": 2.0, "c_amp": 1.0},
            "noise": {"pairs": 2, "amplitude": 0.1, "decay": 3.0, "seed": 5},
            "run": {"t_end": 0.1, "cfl": 0.5, "mode": "regularized", "epsilon": 0.1},
            "init": {"kind": "fourier", "u": [{"k": 1, "sin": 0.1}]}
        })
    }

    fn parse(v: serde_json::Value) -> Result<RunConfig> {
        RunConfig::from_json(&v.to_string())
    }

    #[test]
    fn parses_and_sets_up() {
        let cfg = parse(base()).unwrap();
        let setup = cfg.setup().unwrap();
        assert_eq!(setup.grid.n(), 64);
        assert!(setup.dt <= 0.5 / 64.0 / 3.0 * (1.0 + 1e-12));
        assert!((setup.dt * setup.steps as f64 - 0.1).abs() < 1e-12);
        assert_eq!(setup.seed, 5);
        assert_eq!(cfg.hash().len(), 64);
        assert_eq!(cfg.hash(), parse(base()).unwrap().hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = base();
        v["run"]["t_ned"] = 1.0.into();
        assert!(matches!(parse(v), Err(SvwError::ConfigInvalid(_))));
        let mut v = base();
        v["init"]["amplitude"] = 1.0.into();
        assert!(parse(v).is_err());
        let mut v = base();
        v["extra"] = 1.into();
        assert!(parse(v).is_err());
    }

    #[test]
    fn cross_field_checks() {
        let mut v = base();
        v["grid"]["n"] = 63.into();
        assert!(matches!(parse(v).unwrap().setup(), Err(SvwError::ConfigInvalid(_))));
        let mut v = base();
        v["run"]["cfl"] = 0.6.into();
        assert!(parse(v).unwrap().setup().is_err());
        let mut v = base();
        v["noise"]["decay"] = 2.5.into();
        assert!(parse(v).unwrap().setup().is_err());
        let mut v = base();
        v["run"].as_object_mut().unwrap().remove("epsilon");
        assert!(parse(v).unwrap().setup().is_err());
        let mut v = base();
        v["init"] = serde_json::json!({"kind": "fourier", "u": [{"k": 1}], "r": [{"k": 1}]});
        assert!(parse(v).unwrap().setup().is_err());
        let mut v = base();
        v["init"] = serde_json::json!({"kind": "bump", "eps": 0.2, "alpha": 1.5, "nu": 0.6, "gamma": 0.4});
        assert!(parse(v).unwrap().setup().is_err());
    }

    #[test]
    fn bump_profile() {
        assert_eq!(phi(0.25), 0.0);
        assert!((phi(0.5) - (-1f64).exp()).abs() < 1e-15);
        let h = 1e-6;
        for y in [0.3, 0.45, 0.6, 0.7] {
            let fd = (phi(y + h) - phi(y - h)) / (2.0 * h);
            assert!((phi_prime(y) - fd).abs() < 1e-6, "{y}");
        }
        let x0 = steepest_point();
        assert!(phi_prime(x0) < phi_prime(0.625));
        assert!(x0 > 0.5 && x0 < 0.75);
    }
}
