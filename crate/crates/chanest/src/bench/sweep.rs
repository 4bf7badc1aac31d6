//! Experiment execution: realizations, method evaluation, aggregation.

use std::collections::BTreeMap;
use std::time::Instant;

use super::{
    bussgang_ls_baseline, ls_unquantized_baseline, nmse_db_from_linear, nmse_linear,
    ExperimentConfig, Method, NmseReport, ReportRow,
};
use crate::airlink::{sample_channel, transmit, PilotBook, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::derive_rng;
use crate::stage1::run_stage1;
use crate::stage2::run_stage2;

/// Per-method linear NMSE and attributed compute seconds for one
/// realization, averaged over the evaluated users.
struct RealizationScores {
    linear: BTreeMap<Method, f64>,
    seconds: BTreeMap<Method, f64>,
}

/// Simulates one coherence interval and scores the requested methods.
///
/// The channel, pilot book, and noise streams are tagged with the SNR
/// index and realization index, so every (SNR point, realization) pair is
/// an independent but reproducible draw, shared by all methods. The ideal
/// least-squares reference sees the same noise through an unquantized
/// chain.
fn evaluate_realization(
    cfg: &ExperimentConfig,
    snr_index: usize,
    snr_db: f64,
    realization: usize,
) -> Result<RealizationScores> {
    let mut system = cfg.system.clone();
    system.snr_db = snr_db;
    let tag = |kind: &str| format!("{kind}/snr{snr_index}/real{realization}");

    let chan = sample_channel(&system, &mut derive_rng(system.seed, &tag("channel")))?;
    let book = PilotBook::generate(&system, &mut derive_rng(system.seed, &tag("pilots")))?;
    let rx = transmit(&system, &chan, &book, &mut derive_rng(system.seed, &tag("noise")))?;

    let methods = &cfg.sweep.methods;
    let mut linear: BTreeMap<Method, f64> = methods.iter().map(|&m| (m, 0.0)).collect();
    let mut seconds: BTreeMap<Method, f64> = methods.iter().map(|&m| (m, 0.0)).collect();

    // The ideal-chain interval reuses the same noise stream so the bound
    // is computed on the identical draw.
    let rx_ideal = if methods.contains(&Method::LsUnquantized) {
        let mut ideal = system.clone();
        ideal.quantize = false;
        Some(transmit(&ideal, &chan, &book, &mut derive_rng(system.seed, &tag("noise")))?)
    } else {
        None
    };

    let users: Vec<usize> =
        if cfg.sweep.eval_all_users { (0..system.users).collect() } else { vec![0] };
    let user_weight = 1.0 / users.len() as f64;
    let clock = cfg.sweep.timing;

    for &user in &users {
        let truth = chan.response(user);

        let mut stage1_est = None;
        let mut stage1_secs = 0.0;
        if methods.iter().any(|m| m.needs_stage1()) {
            let t0 = clock.then(Instant::now);
            stage1_est = Some(run_stage1(&rx, &book, user, &system, &cfg.stage1)?);
            stage1_secs = t0.map_or(0.0, |t| t.elapsed().as_secs_f64());
        }

        for &method in methods {
            let t0 = clock.then(Instant::now);
            let estimate = match method {
                Method::Stage1Only => {
                    stage1_est.as_ref().expect("trained above").lambda_hat.clone()
                }
                Method::Pipeline => {
                    let est = stage1_est.as_ref().expect("trained above");
                    run_stage2(est, &cfg.dip, system.seed)?.lambda_hat
                }
                Method::LsUnquantized => {
                    ls_unquantized_baseline(rx_ideal.as_ref().expect("simulated above"), &book, user)?
                }
                Method::BussgangLs => bussgang_ls_baseline(&rx, &book, user, &system)?,
            };
            let own_secs = t0.map_or(0.0, |t| t.elapsed().as_secs_f64());
            let attributed =
                if method.needs_stage1() { own_secs + stage1_secs } else { own_secs };
            *seconds.get_mut(&method).expect("prefilled") += attributed;
            *linear.get_mut(&method).expect("prefilled") +=
                user_weight * nmse_linear(&estimate, truth)?;
        }
    }
    Ok(RealizationScores { linear, seconds })
}

/// Runs the full sweep: every SNR point, every realization, every method.
///
/// Per-cell NMSE is the linear-domain mean over realizations (and users),
/// mapped to dB at the end. Failures are annotated with the SNR point and
/// realization where they occurred. The result is a pure function of the
/// configuration unless timing is enabled.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<NmseReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (snr_index, &snr_db) in cfg.sweep.snr_db.iter().enumerate() {
        let mut linear_acc: BTreeMap<Method, f64> =
            cfg.sweep.methods.iter().map(|&m| (m, 0.0)).collect();
        let mut secs_acc: BTreeMap<Method, f64> =
            cfg.sweep.methods.iter().map(|&m| (m, 0.0)).collect();
        for realization in 0..cfg.sweep.realizations {
            let scores = evaluate_realization(cfg, snr_index, snr_db, realization)
                .map_err(|source| Error::Sweep {
                    snr_db,
                    realization,
                    source: Box::new(source),
                })?;
            for (&method, &lin) in &scores.linear {
                *linear_acc.get_mut(&method).expect("prefilled") += lin;
                *secs_acc.get_mut(&method).expect("prefilled") += scores.seconds[&method];
            }
        }
        let n = cfg.sweep.realizations as f64;
        for (&method, &lin) in &linear_acc {
            rows.push(ReportRow {
                snr_db,
                method,
                nmse_db: nmse_db_from_linear(lin / n),
                realizations: cfg.sweep.realizations,
                seed: cfg.system.seed,
                wall_time_s: secs_acc[&method],
            });
        }
    }
    Ok(NmseReport::new(rows))
}

/// Per-stage NMSE of a single realization, for the demo command.
#[derive(Debug, Clone)]
pub struct DemoReport {
    pub snr_db: f64,
    pub stage1_nmse_db: f64,
    pub pipeline_nmse_db: f64,
    pub bussgang_ls_nmse_db: f64,
}

/// One realization at one SNR with the three headline estimators.
pub fn run_demo(cfg: &ExperimentConfig, snr_db: f64) -> Result<DemoReport> {
    let mut demo_cfg = cfg.clone();
    demo_cfg.sweep.snr_db = vec![snr_db];
    demo_cfg.sweep.realizations = 1;
    demo_cfg.sweep.methods =
        vec![Method::Pipeline, Method::Stage1Only, Method::BussgangLs];
    demo_cfg.validate()?;
    let scores = evaluate_realization(&demo_cfg, 0, snr_db, 0)
        .map_err(|source| Error::Sweep { snr_db, realization: 0, source: Box::new(source) })?;
    Ok(DemoReport {
        snr_db,
        stage1_nmse_db: nmse_db_from_linear(scores.linear[&Method::Stage1Only]),
        pipeline_nmse_db: nmse_db_from_linear(scores.linear[&Method::Pipeline]),
        bussgang_ls_nmse_db: nmse_db_from_linear(scores.linear[&Method::BussgangLs]),
    })
}

/// A small, fast experiment for smoke tests and the demo default: two
/// antennas, eight subcarriers, light training.
pub fn smoke_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.system = SystemConfig {
        users: 2,
        antennas: 2,
        subcarriers: 8,
        symbols_per_interval: 16,
        pilots_per_user: 8,
        snr_db: 5.0,
        seed: 1,
        // three taps that fit the eight-sample symbol
        tap_profile: crate::airlink::TapProfileSpec::Explicit {
            delays_ns: vec![0.0, 97.7, 195.3],
            powers_db: vec![0.0, -3.0, -6.0],
        },
        ..SystemConfig::default()
    };
    cfg.stage1.epochs = 200;
    cfg.stage1.probes = 16;
    cfg.dip = crate::stage2::DipConfig {
        z0_channels: 8,
        hidden_widths: vec![16, 16],
        time_size: 8,
        iterations: 400,
        lr: 0.01,
        seed: 0,
    };
    cfg.sweep.snr_db = vec![0.0, 10.0];
    cfg.sweep.realizations = 2;
    cfg
}
