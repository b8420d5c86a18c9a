use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{pointwise_defect, window_moments, DefectProfile, Snapshot, WindowSpec};
use crate::dynamics::RiccatiProbe;
use crate::error::{Result, SvwError};
use crate::noise::NoiseModel;

use super::config::{steepest_point, BumpData, InitConfig, ModeName, RunConfig};
use super::run::{header, run_jobs, simulate_path, simulate_path_with, write_json, Meta, Stats};

/// Two-sided 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054;
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Number of extra probes spread over the descending flank of the bump.
const PROBE_FAN: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupRow {
    pub eps: f64,
    /// `eps^gamma`; paths are run up to this time.
    pub horizon: f64,
    pub paths: usize,
    pub blown: usize,
    pub fraction: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    /// Paths whose blow-up the grid detected on its own.
    pub grid_blown: usize,
    /// Paths only a Lagrangian probe saw blowing up before the horizon.
    pub probe_only: usize,
    pub x0: f64,
    pub x_eps: f64,
    pub r0_at_x_eps: f64,
    pub riccati_time: f64,
    pub zero_noise_time: Option<f64>,
    pub zero_noise_grid_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupTable {
    pub alpha: f64,
    pub nu: f64,
    pub gamma: f64,
    pub u_star: f64,
    pub threshold_rule: String,
    pub rows: Vec<BlowupRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupParams {
    pub alpha: f64,
    pub nu: f64,
    pub gamma: f64,
    pub u_star: f64,
    /// Bump coordinate of the designated tracer; defaults to the point of
    /// steepest descent of the profile.
    pub x0: Option<f64>,
}

/// Blow-up sweep over `eps_list` with the steep bump data, regular mode.
pub fn preset_blowup(
    config: &RunConfig,
    eps_list: &[f64],
    params: BlowupParams,
    out: &Path,
    workers: Option<usize>,
) -> Result<BlowupTable> {
    if eps_list.is_empty() {
        return Err(SvwError::InvalidParameter("eps list is empty".into()));
    }
    let model = config.model()?;
    let x0 = params.x0.unwrap_or_else(steepest_point);
    if !(super::config::phi_prime(x0) < 0.0) {
        return Err(SvwError::InvalidParameter(format!("the profile must decrease at x0 = {x0}")));
    }
    let mut rows = Vec::new();
    for &eps in eps_list {
        let data = BumpData { eps, alpha: params.alpha, nu: params.nu, gamma: params.gamma, u_star: params.u_star };
        data.validate(&model)?;
        let mut cfg = config.clone();
        cfg.init = InitConfig::Bump(data);
        cfg.run.mode = ModeName::Regular;
        cfg.run.t_end = data.horizon();
        let setup = cfg.setup()?;

        let scale = data.scale();
        let mut probes = vec![RiccatiProbe::new(scale * x0, data.r0_at(&model, x0))];
        for j in 0..PROBE_FAN {
            let y = 0.5 + 0.25 * (j as f64 + 0.5) / PROBE_FAN as f64;
            probes.push(RiccatiProbe::new(scale * y, data.r0_at(&model, y)));
        }

        let quiet = NoiseModel::zero(setup.grid);
        let zero = simulate_path_with(&setup, &quiet, 0, &probes)?;
        let outputs = run_jobs(config.paths, workers, |p| simulate_path(&setup, p, &probes))?;
        let blown = outputs.iter().filter(|o| o.record.detected().is_some()).count();
        let grid_blown = outputs.iter().filter(|o| o.record.blowup_time.is_some()).count();
        let probe_only = outputs.iter().filter(|o| o.record.probe_blowup_time.is_some()).count();
        let (wilson_lo, wilson_hi) = wilson_interval(blown, outputs.len());
        rows.push(BlowupRow {
            eps,
            horizon: data.horizon(),
            paths: outputs.len(),
            blown,
            fraction: blown as f64 / outputs.len() as f64,
            wilson_lo,
            wilson_hi,
            grid_blown,
            probe_only,
            x0,
            x_eps: scale * x0,
            r0_at_x_eps: data.r0_at(&model, x0),
            riccati_time: data.riccati_time(&model, x0),
            zero_noise_time: zero.record.detected(),
            zero_noise_grid_time: zero.record.blowup_time,
        });
    }
    let table = BlowupTable {
        alpha: params.alpha,
        nu: params.nu,
        gamma: params.gamma,
        u_star: params.u_star,
        threshold_rule: match config.run.explosion_threshold {
            Some(l) => format!("fixed {l}"),
            None => "1e3 (1 + ||(R0, S0)||_inf)".into(),
        },
        rows,
    };

    fs::create_dir_all(out)?;
    let meta = Meta::new("blowup", config);
    write_json(out, "blowup.json", &table)?;
    write_json(out, "meta.json", &meta)?;
    let mut csv = String::from(
        "eps,horizon,paths,blown,fraction,wilson_lo,wilson_hi,grid_blown,probe_only,riccati_time,zero_noise_time\n",
    );
    for r in &table.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.eps,
            r.horizon,
            r.paths,
            r.blown,
            r.fraction,
            r.wilson_lo,
            r.wilson_hi,
            r.grid_blown,
            r.probe_only,
            r.riccati_time,
            r.zero_noise_time.map_or(String::new(), |t| t.to_string())
        );
    }
    fs::write(out.join("blowup.csv"), csv)?;
    let mut report = header("blow-up sweep", &meta);
    let _ = writeln!(
        report,
        "alpha {}  nu {}  gamma {}  u* {}  x0 {:.6}  threshold {}",
        table.alpha, table.nu, table.gamma, table.u_star, x0, table.threshold_rule
    );
    let _ = writeln!(report, "{:>8} {:>9} {:>9} {:>19} {:>6} {:>6} {:>9} {:>9}", "eps", "eps^g", "fraction", "wilson 95%", "grid", "probe", "riccati", "0-noise");
    for r in &table.rows {
        let _ = writeln!(
            report,
            "{:>8.4} {:>9.5} {:>9.4} [{:>7.4}, {:>7.4}] {:>6} {:>6} {:>9.5} {:>9}",
            r.eps,
            r.horizon,
            r.fraction,
            r.wilson_lo,
            r.wilson_hi,
            r.grid_blown,
            r.probe_only,
            r.riccati_time,
            r.zero_noise_time.map_or("none".into(), |t| format!("{t:.5}"))
        );
    }
    fs::write(out.join("report.txt"), report)?;
    Ok(table)
}

/// Truncation levels at which the defect chain is evaluated.
pub const DEFECT_KAPPAS: [f64; 4] = [-1.0, 0.0, 1.0, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub theta_sup: Stats,
    pub dissipation: Stats,
    pub lp_integral: Stats,
    /// `||(R, S)^eps(T) - (R, S)^ref(T)||_L2`, path by path on shared noise.
    pub l2_to_reference: Stats,
    /// Noise-free runs at `eps` and `eps/2` from the same data.
    pub defect: DefectProfile,
    /// Ensemble window at `T`; `chain_holds` of every evaluation.
    pub window_chain_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub reference_eps: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln E[sup_t |Theta|]` against `ln eps`.
    pub theta_slope: f64,
    /// Monte Carlo error of the slope, propagated from the per-point errors.
    pub theta_slope_se: f64,
}

/// Slope of `ln y` against `ln x` with propagated error from `se`.
pub fn loglog_slope(x: &[f64], y: &[f64], se: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx;
    let var: f64 = lx.iter().zip(y.iter().zip(se)).map(|(a, (v, s))| ((a - mx) / sxx).powi(2) * (s / v).powi(2)).sum();
    (slope, var.sqrt())
}

pub fn preset_convergence(config: &RunConfig, eps_list: &[f64], out: &Path, workers: Option<usize>) -> Result<ConvergenceTable> {
    if eps_list.len() < 2 {
        return Err(SvwError::InvalidParameter("eps list needs at least two values".into()));
    }
    if eps_list.iter().any(|e| !(*e > 0.0)) || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(SvwError::InvalidParameter("eps list must be positive and strictly decreasing".into()));
    }
    let at = |eps: f64| {
        let mut cfg = config.clone();
        cfg.run.mode = ModeName::Regularized;
        cfg.run.epsilon = Some(eps);
        cfg
    };

    struct Level {
        eps: f64,
        terminal: Vec<Option<(crate::grid::Field, crate::grid::Field)>>,
        row: ConvergenceRow,
    }
    let mut levels = Vec::new();
    for &eps in eps_list {
        let setup = at(eps).setup()?;
        let outputs = run_jobs(config.paths, workers, |p| simulate_path(&setup, p, &[]))?;
        let stat = |f: &dyn Fn(&super::run::PathRecord) -> f64| {
            Stats::of(&outputs.iter().map(|o| f(&o.record)).collect::<Vec<_>>())
                .ok_or_else(|| SvwError::InvalidParameter(format!("no finite samples at eps = {eps}")))
        };
        let snapshots: Vec<Snapshot> = outputs
            .iter()
            .filter(|o| !o.terminal.exploded)
            .map(|o| Snapshot { path: o.record.path as usize, t: o.terminal.t, r: o.terminal.r.clone(), s: o.terminal.s.clone() })
            .collect();
        let window_chain_holds = match window_moments(&snapshots, WindowSpec::whole(0.0, f64::INFINITY), &DEFECT_KAPPAS) {
            Ok(w) => w.chain_holds(),
            Err(SvwError::EmptyWindow) => true,
            Err(e) => return Err(e),
        };

        let quiet = NoiseModel::zero(setup.grid);
        let coarse = simulate_path_with(&setup, &quiet, 0, &[])?;
        let half = at(0.5 * eps).setup()?;
        let fine = simulate_path_with(&half, &NoiseModel::zero(half.grid), 0, &[])?;
        let defect = pointwise_defect(
            &[(&coarse.terminal.r, &coarse.terminal.s), (&fine.terminal.r, &fine.terminal.s)],
            &DEFECT_KAPPAS,
        )?;

        let row = ConvergenceRow {
            eps,
            theta_sup: stat(&|r| r.theta_sup)?,
            dissipation: stat(&|r| r.dissipation)?,
            lp_integral: stat(&|r| r.lp_integral)?,
            l2_to_reference: Stats::of(&[0.0]).unwrap(),
            defect,
            window_chain_holds,
        };
        let terminal = outputs
            .into_iter()
            .map(|o| (!o.terminal.exploded).then(|| (o.terminal.r, o.terminal.s)))
            .collect();
        levels.push(Level { eps, terminal, row });
    }

    let reference = levels.last().map(|l| l.terminal.clone()).unwrap_or_default();
    for level in &mut levels {
        let d: Vec<f64> = level
            .terminal
            .iter()
            .zip(&reference)
            .filter_map(|(a, b)| match (a, b) {
                (Some((r, s)), Some((rr, sr))) => {
                    let dr = r.zip_map(rr, |x, y| x - y);
                    let ds = s.zip_map(sr, |x, y| x - y);
                    Some((dr.l2_norm().powi(2) + ds.l2_norm().powi(2)).sqrt())
                }
                _ => None,
            })
            .collect();
        if let Some(s) = Stats::of(&d) {
            level.row.l2_to_reference = s;
        }
    }

    let xs: Vec<f64> = levels.iter().map(|l| l.eps).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.row.theta_sup.mean).collect();
    let ses: Vec<f64> = levels.iter().map(|l| l.row.theta_sup.se).collect();
    let (theta_slope, theta_slope_se) = if ys.iter().all(|y| *y > 0.0) {
        loglog_slope(&xs, &ys, &ses)
    } else {
        (f64::NAN, f64::NAN)
    };
    let table = ConvergenceTable {
        reference_eps: *eps_list.last().unwrap(),
        rows: levels.into_iter().map(|l| l.row).collect(),
        theta_slope,
        theta_slope_se,
    };

    fs::create_dir_all(out)?;
    let meta = Meta::new("converge", config);
    write_json(out, "convergence.json", &table)?;
    write_json(out, "meta.json", &meta)?;
    let mut csv = String::from(
        "eps,theta_sup_mean,theta_sup_se,dissipation_mean,dissipation_se,lp_integral_mean,l2_to_reference_mean,delta,delta_check,chain_holds\n",
    );
    for r in &table.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            r.eps,
            r.theta_sup.mean,
            r.theta_sup.se,
            r.dissipation.mean,
            r.dissipation.se,
            r.lp_integral.mean,
            r.l2_to_reference.mean,
            r.defect.delta,
            r.defect.delta_check,
            r.defect.chain_holds && r.window_chain_holds
        );
    }
    fs::write(out.join("convergence.csv"), csv)?;
    let mut report = header("eps convergence", &meta);
    let _ = writeln!(report, "reference eps {}", table.reference_eps);
    let _ = writeln!(
        report,
        "{:>8} {:>12} {:>10} {:>12} {:>12} {:>12} {:>12} {:>6}",
        "eps", "E sup|Th|", "se", "D(T)", "int lp", "L2 to ref", "Delta", "chain"
    );
    for r in &table.rows {
        let _ = writeln!(
            report,
            "{:>8.4} {:>12.4e} {:>10.2e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>6}",
            r.eps,
            r.theta_sup.mean,
            r.theta_sup.se,
            r.dissipation.mean,
            r.lp_integral.mean,
            r.l2_to_reference.mean,
            r.defect.delta,
            r.defect.chain_holds && r.window_chain_holds
        );
    }
    let _ = writeln!(report, "log-log slope of E sup|Theta|: {:.3} +- {:.3}", table.theta_slope, table.theta_slope_se);
    fs::write(out.join("report.txt"), report)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 10);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.2775).abs() < 1e-3);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        let (lo, hi) = wilson_interval(200, 200);
        assert!(lo > 0.98 && hi == 1.0);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.2, 0.1, 0.05];
        let y: Vec<f64> = x.iter().map(|e: &f64| 3.0 * e.powf(0.5)).collect();
        let (s, se) = loglog_slope(&x, &y, &[0.0; 3]);
        assert!((s - 0.5).abs() < 1e-12);
        assert_eq!(se, 0.0);
    }
}
