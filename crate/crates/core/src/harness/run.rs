use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{lp_weighted_with, oleinik_fit, oleinik_stats, EnergyLedger, OleinikFit};
use crate::dynamics::{RiccatiProbe, State, Stepper};
use crate::error::{Result, SvwError};
use crate::grid::Field;
use crate::noise::{NoiseModel, PathStream};

use super::config::{RunConfig, Setup};

/// Exponent used for the accumulated `L^{2+alpha}` diagnostic.
pub const LP_ALPHA: f64 = 0.5;

/// One row of `timeseries.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub path: u64,
    pub t: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "D")]
    pub dissipation: f64,
    #[serde(rename = "M")]
    pub martingale: f64,
    pub residual: f64,
    #[serde(rename = "maxR")]
    pub max_r: f64,
    #[serde(rename = "minR")]
    pub min_r: f64,
    #[serde(rename = "maxS")]
    pub max_s: f64,
    #[serde(rename = "minS")]
    pub min_s: f64,
    #[serde(rename = "supNegR")]
    pub sup_neg_r: f64,
    #[serde(rename = "supNegS")]
    pub sup_neg_s: f64,
    pub theta: f64,
    pub lip_u: f64,
}

pub const CSV_HEADER: &str = "path,t,E,D,M,residual,maxR,minR,maxS,minS,supNegR,supNegS,theta,lip_u";

impl Row {
    fn of(path: u64, state: &State, ledger: &EnergyLedger, setup: &Setup) -> Self {
        let (sup_neg_r, sup_neg_s) = oleinik_stats(state);
        let th = state.theta();
        let lip_u = state
            .r
            .values()
            .iter()
            .zip(state.s.values())
            .zip(state.u().values())
            .map(|((r, s), u)| ((0.5 * (s - r) - th) / setup.model.c(*u)).abs())
            .fold(0.0, f64::max);
        Self {
            path,
            t: state.t,
            energy: state.energy(),
            dissipation: ledger.dissipation,
            martingale: ledger.martingale,
            residual: ledger.residual,
            max_r: state.r.max(),
            min_r: state.r.min(),
            max_s: state.s.max(),
            min_s: state.s.min(),
            sup_neg_r,
            sup_neg_s,
            theta: th,
            lip_u,
        }
    }

    fn csv(&self, out: &mut String) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.path,
            self.t,
            self.energy,
            self.dissipation,
            self.martingale,
            self.residual,
            self.max_r,
            self.min_r,
            self.max_s,
            self.min_s,
            self.sup_neg_r,
            self.sup_neg_s,
            self.theta,
            self.lip_u
        );
    }
}

/// Per-path outcome; everything the ensemble statistics are built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub path: u64,
    pub t_final: f64,
    pub steps: u64,
    pub blowup_time: Option<f64>,
    /// Blow-up seen by a Lagrangian probe before the grid caught it.
    pub probe_blowup_time: Option<f64>,
    pub e0: f64,
    pub terminal_energy: f64,
    pub dissipation: f64,
    pub martingale: f64,
    pub residual: f64,
    pub max_abs_residual: f64,
    /// Balance with `M` taken as the stochastic integral alone.
    pub max_abs_residual_integral_only: f64,
    pub theta_sup: f64,
    /// `int_0^T int c'(u)(|R|^(2+alpha) + |S|^(2+alpha)) dx dt` at `alpha = 1/2`.
    pub lp_integral: f64,
}

impl PathRecord {
    /// Earliest blow-up seen by either the grid or a probe.
    pub fn detected(&self) -> Option<f64> {
        match (self.blowup_time, self.probe_blowup_time) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

pub struct PathOutput {
    pub record: PathRecord,
    pub rows: Vec<Row>,
    pub ledger: EnergyLedger,
    pub terminal: State,
}

/// Integrates one path. Probes, when given, start at their positions and
/// stop the path as soon as one of them crosses the threshold.
pub fn simulate_path(setup: &Setup, path: u64, probes: &[RiccatiProbe]) -> Result<PathOutput> {
    simulate_path_with(setup, &setup.noise, path, probes)
}

pub fn simulate_path_with(setup: &Setup, noise: &NoiseModel, path: u64, probes: &[RiccatiProbe]) -> Result<PathOutput> {
    let stepper =
        Stepper::new(&setup.model, noise, setup.mode, setup.dt, setup.threshold)?.with_interpolation(setup.interpolation);
    let stream = PathStream::new(setup.seed, path);
    let mut state = setup.initial.clone();
    let mut ledger = EnergyLedger::new(&state, noise.q_integral(setup.mode.is_regularized()));
    let mut probes = probes.to_vec();
    let mut probe_time = None;
    let mut rows = vec![Row::of(path, &state, &ledger, setup)];
    let mut theta_sup = state.theta().abs();
    let mut lp_integral = 0.0;
    let weight = |st: &State| st.u().map(|u| setup.model.c_prime(u));

    for k in 1..=setup.steps {
        let before = (!probes.is_empty()).then(|| state.clone());
        let report = stepper.step(&mut state, &stream)?;
        ledger.update(&report, &state);
        if let Some(before) = &before {
            for p in &mut probes {
                p.advance(before, &report, &state, &setup.model, setup.mode, setup.threshold);
                if let Some(t) = p.blowup_time {
                    probe_time = Some(probe_time.map_or(t, |q: f64| q.min(t)));
                }
            }
        }
        let done = state.exploded || probe_time.is_some();
        if !state.exploded {
            theta_sup = theta_sup.max(state.theta().abs());
            lp_integral += setup.dt * lp_weighted_with(&state.r, &state.s, &weight(&state), LP_ALPHA)?;
        }
        if done || k % setup.stride as u64 == 0 || k == setup.steps {
            rows.push(Row::of(path, &state, &ledger, setup));
        }
        if done {
            break;
        }
    }
    // Only a probe crossing strictly before the grid counts as probe-detected.
    let probe_blowup_time = match (state.blowup_time, probe_time) {
        (Some(g), Some(p)) if g <= p => None,
        (_, p) => p,
    };
    let record = PathRecord {
        path,
        t_final: state.t,
        steps: state.steps,
        blowup_time: state.blowup_time,
        probe_blowup_time,
        e0: ledger.e0,
        terminal_energy: state.energy(),
        dissipation: ledger.dissipation,
        martingale: ledger.martingale,
        residual: ledger.residual,
        max_abs_residual: ledger.max_abs_residual,
        max_abs_residual_integral_only: ledger.max_abs_residual_integral_only,
        theta_sup,
        lp_integral,
    };
    Ok(PathOutput { record, rows, ledger, terminal: state })
}

/// Mean, variance and quantiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
    pub min: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let variance = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            count: v.len(),
            mean,
            variance,
            se: (variance / n).sqrt(),
            min: sorted[0],
            q05: quantile(&sorted, 0.05),
            q50: quantile(&sorted, 0.5),
            q95: quantile(&sorted, 0.95),
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `E(0) + 2 T int q` against the sample mean of `E(T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCheck {
    pub expected: f64,
    pub mean: f64,
    pub se: f64,
    /// `|mean - expected| / se`.
    pub z: f64,
    /// Mean cut-off dissipation; the expectation drops by this much when
    /// the cut-off fires.
    pub dissipation_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupNegFit {
    pub t: Vec<f64>,
    pub mean_r: Vec<f64>,
    pub mean_s: Vec<f64>,
    pub fit_r: OleinikFit,
    pub fit_s: OleinikFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub paths: usize,
    pub t_end: f64,
    pub q_integral: f64,
    pub records: Vec<PathRecord>,
    pub exploded: usize,
    pub terminal_energy: Option<Stats>,
    pub max_abs_residual: Option<Stats>,
    pub blowup_time: Option<Stats>,
    pub theta_sup: Option<Stats>,
    pub lp_integral: Option<Stats>,
    /// Only over paths that reached `t_end`.
    pub energy_check: Option<EnergyCheck>,
    /// `a + b/t` fits of the ensemble-mean negative parts on `[0.05, T]`.
    pub oleinik: Option<SupNegFit>,
}

/// Start of the window the negative-part fit is taken over.
pub const OLEINIK_T_MIN: f64 = 0.05;

impl EnsembleSummary {
    pub fn from_paths(setup: &Setup, outputs: &[PathOutput]) -> Self {
        let records: Vec<PathRecord> = outputs.iter().map(|o| o.record.clone()).collect();
        let pick = |f: &dyn Fn(&PathRecord) -> f64| Stats::of(&records.iter().map(f).collect::<Vec<_>>());
        let finished: Vec<&PathRecord> = records.iter().filter(|r| r.detected().is_none()).collect();
        let q_integral = setup.noise.q_integral(setup.mode.is_regularized());
        let energy_check = Stats::of(&finished.iter().map(|r| r.terminal_energy).collect::<Vec<_>>()).map(|s| {
            let expected = finished[0].e0 + 2.0 * q_integral * setup.t_end;
            let z = if s.se > 0.0 { (s.mean - expected).abs() / s.se } else { f64::INFINITY };
            let dissipation_mean = finished.iter().map(|r| r.dissipation).sum::<f64>() / finished.len() as f64;
            EnergyCheck { expected, mean: s.mean, se: s.se, z, dissipation_mean }
        });
        let blowups: Vec<f64> = records.iter().filter_map(PathRecord::detected).collect();
        Self {
            paths: records.len(),
            t_end: setup.t_end,
            q_integral,
            exploded: blowups.len(),
            terminal_energy: pick(&|r| r.terminal_energy),
            max_abs_residual: pick(&|r| r.max_abs_residual),
            blowup_time: Stats::of(&blowups),
            theta_sup: pick(&|r| r.theta_sup),
            lp_integral: pick(&|r| r.lp_integral),
            energy_check,
            oleinik: sup_neg_fit(outputs),
            records,
        }
    }
}

/// Averages the negative parts over the paths alive at each output time.
fn sup_neg_fit(outputs: &[PathOutput]) -> Option<SupNegFit> {
    let longest = outputs.iter().max_by_key(|o| o.rows.len())?;
    let mut t = Vec::new();
    let mut mean_r = Vec::new();
    let mut mean_s = Vec::new();
    for (i, row) in longest.rows.iter().enumerate() {
        if row.t < OLEINIK_T_MIN {
            continue;
        }
        let alive: Vec<&Row> = outputs
            .iter()
            .filter(|o| o.record.detected().is_none())
            .filter_map(|o| o.rows.get(i))
            .collect();
        if alive.is_empty() {
            continue;
        }
        let k = alive.len() as f64;
        t.push(row.t);
        mean_r.push(alive.iter().map(|r| r.sup_neg_r).sum::<f64>() / k);
        mean_s.push(alive.iter().map(|r| r.sup_neg_s).sum::<f64>() / k);
    }
    let fit_r = oleinik_fit(&t, &mean_r).ok()?;
    let fit_s = oleinik_fit(&t, &mean_s).ok()?;
    Some(SupNegFit { t, mean_r, mean_s, fit_r, fit_s })
}

/// Runs `paths` independent paths on a pool of `workers` threads; results
/// are collected in path order, so the summary does not depend on it.
pub fn run_paths(setup: &Setup, paths: usize, workers: Option<usize>) -> Result<Vec<PathOutput>> {
    run_jobs(paths, workers, |p| simulate_path(setup, p, &[]))
}

pub fn run_jobs<F>(paths: usize, workers: Option<usize>, job: F) -> Result<Vec<PathOutput>>
where
    F: Fn(u64) -> Result<PathOutput> + Sync,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| SvwError::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| (0..paths as u64).into_par_iter().map(&job).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub paths: usize,
    pub version: String,
    pub config: RunConfig,
}

impl Meta {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            config_hash: config.hash(),
            seed: config.noise.seed,
            paths: config.paths,
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
        }
    }
}

pub(super) fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

pub(super) fn write_rows(dir: &Path, outputs: &[PathOutput]) -> Result<()> {
    let mut csv = String::with_capacity(CSV_HEADER.len() + 1);
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for o in outputs {
        for row in &o.rows {
            row.csv(&mut csv);
        }
    }
    fs::write(dir.join("timeseries.csv"), csv)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |t| format!("{t:.6}"))
}

pub(super) fn header(title: &str, meta: &Meta) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{title}");
    let _ = writeln!(s, "config hash  {}", meta.config_hash);
    let _ = writeln!(s, "seed         {}", meta.seed);
    let _ = writeln!(s, "paths        {}", meta.paths);
    s
}

/// Result of [`run_single`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub record: PathRecord,
    pub ledger: EnergyLedger,
    pub budget: f64,
    pub relative_residual: f64,
    pub sup_norm: f64,
    pub terminal_theta: f64,
    #[serde(skip)]
    pub terminal_r: Option<Field>,
    #[serde(skip)]
    pub terminal_s: Option<Field>,
}

/// One path (path index 0), with its full time series.
pub fn run_single(config: &RunConfig, out: &Path) -> Result<RunOutput> {
    let setup = config.setup()?;
    let o = simulate_path(&setup, 0, &[])?;
    let budget = o.ledger.budget(setup.t_end);
    let output = RunOutput {
        record: o.record.clone(),
        ledger: o.ledger.clone(),
        budget,
        relative_residual: o.ledger.max_abs_residual / budget,
        sup_norm: o.terminal.sup_norm(),
        terminal_theta: o.terminal.theta(),
        terminal_r: Some(o.terminal.r.clone()),
        terminal_s: Some(o.terminal.s.clone()),
    };
    fs::create_dir_all(out)?;
    let meta = Meta::new("run", config);
    write_rows(out, std::slice::from_ref(&o))?;
    write_json(out, "summary.json", &output)?;
    write_json(out, "meta.json", &meta)?;
    let mut report = header("single run", &meta);
    let r = &output.record;
    let _ = writeln!(report, "grid n       {}", setup.grid.n());
    let _ = writeln!(report, "dt           {:.6e} ({} steps)", setup.dt, setup.steps);
    let _ = writeln!(report, "t reached    {:.6}", r.t_final);
    let _ = writeln!(report, "blow-up      {}", fmt_opt(r.blowup_time));
    let _ = writeln!(report, "E(0)         {:.6e}", r.e0);
    let _ = writeln!(report, "E(T)         {:.6e}", r.terminal_energy);
    let _ = writeln!(report, "D(T)         {:.6e}", r.dissipation);
    let _ = writeln!(report, "M(T)         {:.6e}", r.martingale);
    let _ = writeln!(report, "max|resid|   {:.6e} ({:.3e} of budget)", r.max_abs_residual, output.relative_residual);
    let _ = writeln!(report, "sup|Theta|   {:.6e}", r.theta_sup);
    let _ = writeln!(report, "int lp dt    {:.6e}", r.lp_integral);
    fs::write(out.join("report.txt"), report)?;
    Ok(output)
}

/// `config.paths` independent paths; writes every path's time series.
pub fn run_ensemble(config: &RunConfig, out: &Path, workers: Option<usize>) -> Result<EnsembleSummary> {
    let setup = config.setup()?;
    let outputs = run_paths(&setup, config.paths, workers)?;
    let summary = EnsembleSummary::from_paths(&setup, &outputs);
    fs::create_dir_all(out)?;
    let meta = Meta::new("ensemble", config);
    write_rows(out, &outputs)?;
    write_json(out, "summary.json", &summary)?;
    write_json(out, "meta.json", &meta)?;
    let mut report = header("ensemble", &meta);
    let _ = writeln!(report, "grid n       {}", setup.grid.n());
    let _ = writeln!(report, "dt           {:.6e} ({} steps)", setup.dt, setup.steps);
    let _ = writeln!(report, "exploded     {} of {}", summary.exploded, summary.paths);
    if let Some(s) = &summary.terminal_energy {
        let _ = writeln!(report, "E(T)         mean {:.6e}  se {:.3e}  q05 {:.4e}  q95 {:.4e}", s.mean, s.se, s.q05, s.q95);
    }
    if let Some(c) = &summary.energy_check {
        let _ = writeln!(report, "E(0)+2Tq     {:.6e}  (|diff|/se = {:.2}, mean D = {:.4e})", c.expected, c.z, c.dissipation_mean);
    }
    if let Some(s) = &summary.max_abs_residual {
        let _ = writeln!(report, "max|resid|   mean {:.4e}  max {:.4e}", s.mean, s.max);
    }
    if let Some(s) = &summary.theta_sup {
        let _ = writeln!(report, "sup|Theta|   mean {:.4e}", s.mean);
    }
    if let Some(f) = &summary.oleinik {
        let _ = writeln!(
            report,
            "supNeg fit   R: a={:.4} b={:.4} rel={:.3}   S: a={:.4} b={:.4} rel={:.3}",
            f.fit_r.a, f.fit_r.b, f.fit_r.relative_residual, f.fit_s.a, f.fit_s.b, f.fit_s.relative_residual
        );
    }
    fs::write(out.join("report.txt"), report)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn config(v: serde_json::Value) -> RunConfig {
        RunConfig::from_json(&v.to_string()).unwrap()
    }

    fn small() -> serde_json::Value {
        json!({
            "grid": {"n": 64},
            "noise": {"pairs": 4, "amplitude": 0.2, "decay": 3.0, "seed": 9},
            "run": {"t_end": 0.2, "cfl": 0.5, "mode": "regularized", "epsilon": 0.1},
            "init": {"kind": "fourier", "u": [{"k": 1, "sin": 0.1}], "v": [{"k": 2, "cos": 0.1}]},
            "paths": 6,
            "output_stride": 8
        })
    }

    #[test]
    fn constant_state_has_flat_energy() {
        let mut v = small();
        v["noise"]["pairs"] = 0.into();
        v["init"] = json!({"kind": "constant", "u": 0.3, "v": 0.5});
        let dir = tempfile::tempdir().unwrap();
        let out = run_single(&config(v), dir.path()).unwrap();
        assert!(out.ledger.max_abs_residual < 1e-12);
        let csv = std::fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        for line in lines {
            let e: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
            assert!((e - 0.5).abs() < 1e-12, "{line}");
        }
        for name in ["summary.json", "meta.json", "report.txt"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
    }

    #[test]
    fn single_run_is_byte_reproducible() {
        let cfg = config(small());
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_single(&cfg, a.path()).unwrap();
        run_single(&cfg, b.path()).unwrap();
        for name in ["timeseries.csv", "summary.json", "meta.json", "report.txt"] {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name}");
        }
        let meta: Meta = serde_json::from_slice(&std::fs::read(a.path().join("meta.json")).unwrap()).unwrap();
        assert_eq!(meta.config_hash, cfg.hash());
        assert_eq!(meta.seed, 9);
    }

    #[test]
    fn ensemble_ignores_worker_count() {
        let cfg = config(small());
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let s1 = run_ensemble(&cfg, a.path(), Some(1)).unwrap();
        let s8 = run_ensemble(&cfg, b.path(), Some(8)).unwrap();
        assert_eq!(s1, s8);
        assert_eq!(s1.paths, 6);
        for name in ["timeseries.csv", "summary.json"] {
            assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
        }
        // Paths really differ from one another.
        assert_ne!(s1.records[0].terminal_energy, s1.records[1].terminal_energy);
    }

    #[test]
    fn one_path_ensemble_matches_single_run() {
        let mut v = small();
        v["paths"] = 1.into();
        let cfg = config(v);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let single = run_single(&cfg, a.path()).unwrap();
        let ens = run_ensemble(&cfg, b.path(), None).unwrap();
        assert_eq!(ens.records, vec![single.record.clone()]);
        assert_eq!(ens.terminal_energy.unwrap().mean, single.record.terminal_energy);
        assert_eq!(
            std::fs::read(a.path().join("timeseries.csv")).unwrap(),
            std::fs::read(b.path().join("timeseries.csv")).unwrap()
        );
    }

    #[test]
    fn transport_config_translates_data() {
        let v = json!({
            "grid": {"n": 256},
            "model": {"kind": "constant", "c_base": 2.0, "c_amp": 0.0},
            "run": {"t_end": 0.25, "cfl": 0.5, "mode": "regular"},
            "init": {"kind": "fourier", "r": [{"k": 1, "sin": 0.3}], "s": [{"k": 2, "cos": 0.2}]}
        });
        let dir = tempfile::tempdir().unwrap();
        let out = run_single(&config(v), dir.path()).unwrap();
        let r = out.terminal_r.unwrap();
        let g = r.grid();
        let exact = Field::from_fn(g, |x| 0.3 * (2.0 * std::f64::consts::PI * (x - 0.5)).sin());
        let err = r.zip_map(&exact, |a, b| a - b).l2_norm() / exact.l2_norm();
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn stats_quantiles() {
        let s = Stats::of(&[3.0, 1.0, 2.0, f64::NAN]).unwrap();
        assert_eq!(s.count, 3);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.q50, 2.0);
        assert_eq!(s.variance, 1.0);
        assert!((s.q05 - 1.1).abs() < 1e-12);
        assert!(Stats::of(&[]).is_none());
    }
}
