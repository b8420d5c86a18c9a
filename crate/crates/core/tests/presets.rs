use serde_json::json;
use svw::harness::{preset_blowup, preset_convergence, wilson_interval, BlowupParams, RunConfig};

fn cfg(v: serde_json::Value) -> RunConfig {
    RunConfig::from_json(&v.to_string()).unwrap()
}

const PARAMS: BlowupParams = BlowupParams { alpha: 1.5, nu: 0.25, gamma: 0.4, u_star: 0.0, x0: None };

#[test]
fn moderate_data_never_triggers_the_cutoff() {
    let c = cfg(json!({
        "grid": {"n": 128},
        "noise": {"pairs": 4, "amplitude": 0.1, "decay": 3.0, "seed": 4},
        "run": {"t_end": 0.3, "cfl": 0.5, "mode": "regularized", "epsilon": 0.1},
        "init": {"kind": "fourier", "u": [{"k": 1, "sin": 0.05}], "v": [{"k": 1, "cos": 0.3}]},
        "paths": 4
    }));
    let dir = tempfile::tempdir().unwrap();
    let t = preset_convergence(&c, &[0.2, 0.1, 0.05], dir.path(), None).unwrap();
    for r in &t.rows {
        assert_eq!(r.dissipation.max, 0.0, "eps {}", r.eps);
        assert!(r.defect.chain_holds && r.window_chain_holds);
    }
    assert_eq!(t.rows.last().unwrap().l2_to_reference.max, 0.0);
    assert!(preset_convergence(&c, &[0.1, 0.2], dir.path(), None).is_err());
}

#[test]
fn gentle_bump_does_not_blow_up() {
    let c = cfg(json!({
        "grid": {"n": 128},
        "noise": {"pairs": 4, "amplitude": 0.05, "decay": 3.0, "seed": 4},
        "run": {"t_end": 1.0, "cfl": 0.5, "mode": "regular"},
        "init": {"kind": "constant"},
        "paths": 8
    }));
    let dir = tempfile::tempdir().unwrap();
    let t = preset_blowup(&c, &[0.95], PARAMS, dir.path(), None).unwrap();
    let row = &t.rows[0];
    assert!(row.riccati_time > row.horizon, "{row:?}");
    assert_eq!(row.blown, 0);
    assert_eq!(row.zero_noise_time, None);
}

#[test]
fn blowup_fraction_grows_as_eps_shrinks() {
    let c = cfg(json!({
        "grid": {"n": 128},
        "noise": {"pairs": 8, "amplitude": 0.25, "decay": 3.0, "seed": 12},
        "run": {"t_end": 1.0, "cfl": 0.5, "mode": "regular"},
        "init": {"kind": "constant"},
        "paths": 24
    }));
    let dir = tempfile::tempdir().unwrap();
    let t = preset_blowup(&c, &[0.8, 0.4, 0.1], PARAMS, dir.path(), None).unwrap();
    let fr: Vec<f64> = t.rows.iter().map(|r| r.fraction).collect();
    let inversions = fr.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(inversions <= 1, "{fr:?}");
    assert!(fr[2] >= fr[0]);
    for r in &t.rows {
        assert_eq!((r.wilson_lo, r.wilson_hi), wilson_interval(r.blown, r.paths));
        assert_eq!(r.blown, r.grid_blown + r.probe_only);
    }
    // Zero-noise member against the Riccati time of the steepest point.
    let r = &t.rows[2];
    let zero = r.zero_noise_time.unwrap();
    assert!((zero - r.riccati_time).abs() <= 0.3 * r.riccati_time, "{zero} vs {}", r.riccati_time);
}
