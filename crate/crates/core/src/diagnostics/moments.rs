//! Empirical second moments of `(R, S)` over space-time-ensemble windows.
//!
//! Averages are taken in centred (Bregman) form: for a convex `Q` with
//! `0 <= Q'' <= 1`,
//! `<Q(R)> - Q(<R>) = < Q(R) - Q(m) - Q'(m)(R - m) >` with `m = <R>`,
//! and every summand lies between `(Q'(R) - Q'(m))^2 / 2` and
//! `(R - m)^2 / 2`. Clamping each summand into that interval removes
//! rounding artefacts, so `0 <= Delta_kappa <= Delta` holds bit-for-bit.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SvwError};
use crate::grid::Field;

/// `Q_kappa(xi) = xi^2/2 - ((xi - kappa)^+)^2 / 2`.
#[inline]
pub fn q_kappa(xi: f64, kappa: f64) -> f64 {
    let over = (xi - kappa).max(0.0);
    0.5 * xi * xi - 0.5 * over * over
}

/// `Q_kappa'(xi) = min(xi, kappa)`.
#[inline]
pub fn q_kappa_prime(xi: f64, kappa: f64) -> f64 {
    xi.min(kappa)
}

/// Bregman divergence of `Q_kappa` between a sample and the mean, clamped
/// into its analytic bounds.
#[inline]
fn bregman(xi: f64, m: f64, kappa: f64) -> f64 {
    let d = xi - m;
    let upper = 0.5 * d * d;
    let raw = if xi <= kappa && m <= kappa {
        upper
    } else if xi >= kappa && m >= kappa {
        0.0
    } else if m < kappa {
        upper - 0.5 * (xi - kappa).powi(2)
    } else {
        0.5 * (xi - kappa).powi(2)
    };
    let g = q_kappa_prime(xi, kappa) - q_kappa_prime(m, kappa);
    let lower = (0.5 * g * g).min(upper);
    raw.clamp(lower, upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// Half-open range of path indices; `None` takes every path.
    pub paths: Option<(usize, usize)>,
}

impl WindowSpec {
    pub fn whole(t_min: f64, t_max: f64) -> Self {
        Self { t_min, t_max, x_min: 0.0, x_max: 1.0, paths: None }
    }

    fn holds_path(&self, path: usize) -> bool {
        self.paths.map_or(true, |(lo, hi)| (lo..hi).contains(&path))
    }
}

/// Fields of one path at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub path: usize,
    pub t: f64,
    pub r: Field,
    pub s: Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaDefect {
    pub kappa: f64,
    pub delta_kappa: f64,
    pub delta_kappa_check: f64,
    /// `(<Q'(R)> - Q'(<R>))^2 / 2`, bounded by `delta_kappa`.
    pub ts_bound: f64,
    pub ts_bound_check: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMoments {
    pub window: WindowSpec,
    pub samples: usize,
    pub mean_r: f64,
    pub mean_r2: f64,
    pub mean_s: f64,
    pub mean_s2: f64,
    pub mean_rs: f64,
    /// `(<R^2> - <R>^2) / 2`.
    pub delta: f64,
    /// `(<S^2> - <S>^2) / 2`.
    pub delta_check: f64,
    pub kappa: Vec<KappaDefect>,
}

impl WindowMoments {
    /// Whether `0 <= Delta_kappa <= Delta` and the truncated-derivative
    /// bound hold for every kappa, for both invariants.
    pub fn chain_holds(&self) -> bool {
        let ts = |lhs: f64, rhs: f64| lhs <= rhs * (1.0 + 1e-12) + f64::MIN_POSITIVE;
        self.delta >= 0.0
            && self.delta_check >= 0.0
            && self.kappa.iter().all(|k| {
                0.0 <= k.delta_kappa
                    && k.delta_kappa <= self.delta
                    && 0.0 <= k.delta_kappa_check
                    && k.delta_kappa_check <= self.delta_check
                    && ts(k.ts_bound, k.delta_kappa)
                    && ts(k.ts_bound_check, k.delta_kappa_check)
            })
    }
}

struct Sample {
    r: f64,
    s: f64,
}

fn moments_of(samples: &[Sample], kappas: &[f64]) -> (f64, f64, f64, f64, f64, f64, f64, Vec<KappaDefect>) {
    let k = samples.len() as f64;
    // Shifted by the first sample so identical samples give their value back exactly.
    let (r0, s0) = (samples[0].r, samples[0].s);
    let mean_r = r0 + samples.iter().map(|p| p.r - r0).sum::<f64>() / k;
    let mean_s = s0 + samples.iter().map(|p| p.s - s0).sum::<f64>() / k;
    let mean_r2 = samples.iter().map(|p| p.r * p.r).sum::<f64>() / k;
    let mean_s2 = samples.iter().map(|p| p.s * p.s).sum::<f64>() / k;
    let mean_rs = samples.iter().map(|p| p.r * p.s).sum::<f64>() / k;
    let delta = samples.iter().map(|p| 0.5 * (p.r - mean_r).powi(2)).sum::<f64>() / k;
    let delta_check = samples.iter().map(|p| 0.5 * (p.s - mean_s).powi(2)).sum::<f64>() / k;
    let kappa = kappas
        .iter()
        .map(|&kappa| {
            let dk = samples.iter().map(|p| bregman(p.r, mean_r, kappa)).sum::<f64>() / k;
            let dk_check = samples.iter().map(|p| bregman(p.s, mean_s, kappa)).sum::<f64>() / k;
            let gr = samples.iter().map(|p| q_kappa_prime(p.r, kappa) - q_kappa_prime(mean_r, kappa)).sum::<f64>() / k;
            let gs = samples.iter().map(|p| q_kappa_prime(p.s, kappa) - q_kappa_prime(mean_s, kappa)).sum::<f64>() / k;
            KappaDefect {
                kappa,
                delta_kappa: dk,
                delta_kappa_check: dk_check,
                ts_bound: 0.5 * gr * gr,
                ts_bound_check: 0.5 * gs * gs,
            }
        })
        .collect();
    (mean_r, mean_r2, mean_s, mean_s2, mean_rs, delta, delta_check, kappa)
}

/// Pools every `(path, t, x)` sample inside `window`.
pub fn window_moments(snapshots: &[Snapshot], window: WindowSpec, kappas: &[f64]) -> Result<WindowMoments> {
    let mut samples = Vec::new();
    for snap in snapshots {
        if !window.holds_path(snap.path) || snap.t < window.t_min || snap.t > window.t_max {
            continue;
        }
        let grid = snap.r.grid();
        for i in 0..grid.n() {
            let x = grid.x(i);
            if x >= window.x_min && x <= window.x_max {
                samples.push(Sample { r: snap.r[i], s: snap.s[i] });
            }
        }
    }
    if samples.is_empty() {
        return Err(SvwError::EmptyWindow);
    }
    let (mean_r, mean_r2, mean_s, mean_s2, mean_rs, delta, delta_check, kappa) = moments_of(&samples, kappas);
    Ok(WindowMoments {
        window,
        samples: samples.len(),
        mean_r,
        mean_r2,
        mean_s,
        mean_s2,
        mean_rs,
        delta,
        delta_check,
        kappa,
    })
}

/// Space average of the per-node defects of the empirical measure formed by
/// several runs (e.g. neighbouring resolutions) sampled at the same time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectProfile {
    pub delta: f64,
    pub delta_check: f64,
    pub kappa: Vec<KappaDefect>,
    /// Every per-node window satisfied the Jensen chain.
    pub chain_holds: bool,
}

pub fn pointwise_defect(runs: &[(&Field, &Field)], kappas: &[f64]) -> Result<DefectProfile> {
    let Some((r0, _)) = runs.first() else {
        return Err(SvwError::EmptyWindow);
    };
    let grid = r0.grid();
    for (r, s) in runs {
        if r.grid() != grid || s.grid() != grid {
            return Err(SvwError::GridMismatch { expected: grid.n(), actual: r.len() });
        }
    }
    let n = grid.n();
    let mut delta = 0.0;
    let mut delta_check = 0.0;
    let mut acc: Vec<KappaDefect> = kappas
        .iter()
        .map(|&kappa| KappaDefect { kappa, delta_kappa: 0.0, delta_kappa_check: 0.0, ts_bound: 0.0, ts_bound_check: 0.0 })
        .collect();
    let mut chain = true;
    for i in 0..n {
        let samples: Vec<Sample> = runs.iter().map(|(r, s)| Sample { r: r[i], s: s[i] }).collect();
        let (mr, mr2, ms, ms2, mrs, d, dc, ks) = moments_of(&samples, kappas);
        let local = WindowMoments {
            window: WindowSpec::whole(0.0, 0.0),
            samples: samples.len(),
            mean_r: mr,
            mean_r2: mr2,
            mean_s: ms,
            mean_s2: ms2,
            mean_rs: mrs,
            delta: d,
            delta_check: dc,
            kappa: ks.clone(),
        };
        chain &= local.chain_holds();
        delta += d;
        delta_check += dc;
        for (a, k) in acc.iter_mut().zip(&ks) {
            a.delta_kappa += k.delta_kappa;
            a.delta_kappa_check += k.delta_kappa_check;
            a.ts_bound += k.ts_bound;
            a.ts_bound_check += k.ts_bound_check;
        }
    }
    let nf = n as f64;
    for a in &mut acc {
        a.delta_kappa /= nf;
        a.delta_kappa_check /= nf;
        a.ts_bound /= nf;
        a.ts_bound_check /= nf;
    }
    Ok(DefectProfile { delta: delta / nf, delta_check: delta_check / nf, kappa: acc, chain_holds: chain })
}
