//! Fast invariant checks bundled behind the `selftest` CLI command.
//!
//! Each check is independent, takes well under a second, and returns a
//! diagnostic error on failure. The gradient checks are exposed with their
//! measured error so harness tests can assert the same bound the command
//! line reports.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::airlink::{
    pilot::random_qpsk, quantize_one_bit, sample_channel, transmit, PilotBook, SystemConfig,
    TapProfileSpec,
};
use crate::bench::{run_sweep, Method};
use crate::error::{Error, Result};
use crate::numerics::{
    derive_rng, finite_diff_grad, max_relative_error, Cx, DftPlan, Tape, Tensor,
};
use crate::airlink::CxMat;
use crate::stage1::{make_label, MlpModel, Stage1Estimate, TrainingSet};
use crate::stage2::{build_tensor, DipConfig, DipModel};

/// Bound asserted by both gradient checks.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;

/// Runs every check, returning (name, outcome) pairs in a fixed order.
pub fn run_all() -> Vec<(&'static str, Result<()>)> {
    vec![
        ("quantizer-alphabet", quantizer_invariants()),
        ("dft-unitarity", dft_unitarity()),
        ("network-weight-count", weight_count()),
        ("label-oracle", label_oracle(25)),
        ("stage1-gradients", stage1_gradient_check().map(|_| ())),
        ("denoiser-gradients", dip_gradient_check().map(|_| ())),
        ("tape-replay", tape_replay()),
        ("sweep-determinism", sweep_determinism()),
    ]
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(msg()))
    }
}

/// Output alphabet, positive-scale invariance, idempotence.
pub fn quantizer_invariants() -> Result<()> {
    let mut rng = derive_rng(0xC0FFEE, "selftest/quantizer");
    let level = std::f64::consts::FRAC_1_SQRT_2;
    for _ in 0..500 {
        let z = Cx::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
        let alpha: f64 = rng.random_range(1e-6..1e4);
        let q = quantize_one_bit(&[z]);
        check((q[0].re.abs() - level).abs() < 1e-15 && (q[0].im.abs() - level).abs() < 1e-15, || {
            format!("quantizer output {} off the alphabet", q[0])
        })?;
        check(quantize_one_bit(&[z * alpha]) == q, || {
            format!("scaling {z} by {alpha} changed the quantizer output")
        })?;
        check(quantize_one_bit(&q) == q, || format!("quantizer not idempotent at {z}"))?;
    }
    Ok(())
}

/// Transform round trip and energy preservation.
pub fn dft_unitarity() -> Result<()> {
    let mut rng = derive_rng(0xC0FFEE, "selftest/dft");
    for &n in &[4usize, 16, 64] {
        let plan = DftPlan::new(n);
        let v: Vec<Cx> = (0..n)
            .map(|_| Cx::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let spectrum = plan.dft(&v)?;
        let back = plan.idft(&spectrum)?;
        let drift = v.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        check(drift < 1e-10, || format!("{n}-point round trip drifted by {drift}"))?;
        let e_in: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let e_out: f64 = spectrum.iter().map(|z| z.norm_sqr()).sum();
        check((e_in - e_out).abs() < 1e-9 * e_in, || {
            format!("{n}-point transform changed energy {e_in} -> {e_out}")
        })?;
    }
    Ok(())
}

/// `32 N_f^2` weight elements for the sizes the complexity claim covers.
pub fn weight_count() -> Result<()> {
    for n in [16usize, 32, 64] {
        let model = MlpModel::zeroed(n)?;
        check(model.weight_count() == 32 * n * n, || {
            format!("{n}-subcarrier network has {} weights, wanted {}", model.weight_count(), 32 * n * n)
        })?;
    }
    Ok(())
}

/// Bypass-mode labels must equal the frequency response to 1e-9.
pub fn label_oracle(cases: usize) -> Result<()> {
    let mut worst = 0.0f64;
    for case in 0..cases {
        let cfg = SystemConfig {
            users: 1,
            antennas: 2,
            subcarriers: 16,
            symbols_per_interval: 2,
            pilots_per_user: 2,
            snr_db: f64::INFINITY,
            seed: 7000 + case as u64,
            tap_profile: TapProfileSpec::default(),
            quantize: false,
        };
        let chan = sample_channel(&cfg, &mut derive_rng(cfg.seed, "selftest/labels/c"))?;
        let book = PilotBook::generate(&cfg, &mut derive_rng(cfg.seed, "selftest/labels/p"))?;
        let rx = transmit(&cfg, &chan, &book, &mut derive_rng(cfg.seed, "selftest/labels/n"))?;
        let plan = DftPlan::new(cfg.subcarriers);
        for slot in rx.slots() {
            let x = book.symbol(slot.user, slot.pilot);
            for m in 0..cfg.antennas {
                let label = make_label(&plan, slot.samples.col(m), x)?;
                for (l, t) in label.iter().zip(chan.response(slot.user).col(m)) {
                    worst = worst.max((l - t).norm());
                }
            }
        }
    }
    check(worst < 1e-9, || format!("label deviated from the response by {worst:.3e}"))
}

/// Reverse-mode gradient of the supervised training loss against central
/// finite differences on a tiny network. Returns the worst per-coordinate
/// relative error.
pub fn stage1_gradient_check() -> Result<f64> {
    let n = 2;
    let pairs = 3;
    let mut rng = derive_rng(0xC0FFEE, "selftest/grad/stage1");
    let mut inputs = Tensor::zeros(2 * n, pairs);
    let mut labels = Tensor::zeros(2 * n, pairs);
    for p in 0..pairs {
        for sc in 0..n {
            let z = random_qpsk(&mut rng);
            inputs.data_mut()[sc * pairs + p] = z.re;
            inputs.data_mut()[(n + sc) * pairs + p] = z.im;
        }
        for r in 0..2 * n {
            labels.data_mut()[r * pairs + p] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let ts = TrainingSet::new(0, 0, inputs, labels)?;
    let model = MlpModel::new_random(n, &mut rng)?;

    let mut tape = Tape::new();
    let input_node = tape.constant(ts.inputs().clone());
    let (out, param_nodes) = model.forward_on_tape(&mut tape, input_node)?;
    let target = tape.constant(ts.labels().clone());
    let sse = tape.sum_squared_diff(out, target)?;
    let loss = tape.scale(sse, 1.0 / pairs as f64);
    let grads = tape.backward(loss)?;
    let mut ad = Vec::with_capacity(model.params().len());
    for node in &param_nodes {
        ad.extend_from_slice(grads.wrt(*node).data());
    }

    let mut params = model.params().to_vec();
    let loss_of = |p: &[f64]| {
        let mut m = model.clone();
        m.params_mut().copy_from_slice(p);
        let out = m.forward(ts.inputs()).expect("shapes fixed");
        out.data()
            .iter()
            .zip(ts.labels().data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / pairs as f64
    };
    let fd = finite_diff_grad(&mut params, loss_of, 1e-4);

    let err = max_relative_error(&ad, &fd, 1e-6);
    check(err < GRADIENT_TOLERANCE, || {
        format!("supervised-loss gradient error {err:.3e} exceeds {GRADIENT_TOLERANCE:.0e}")
    })?;
    Ok(err)
}

/// Reverse-mode gradient of the denoiser fit loss against central finite
/// differences on a tiny geometry. Returns the worst relative error.
pub fn dip_gradient_check() -> Result<f64> {
    let cfg = DipConfig {
        z0_channels: 3,
        hidden_widths: vec![4, 4],
        time_size: 4,
        iterations: 1,
        lr: 0.01,
        seed: 0,
    };
    let subcarriers = 4;
    let antennas = 2;
    let mut rng = derive_rng(0xC0FFEE, "selftest/grad/dip");
    let model = DipModel::new(&cfg, subcarriers, antennas, &mut rng)?;

    let mut lambda_hat = CxMat::zeros(subcarriers, antennas);
    for m in 0..antennas {
        for z in lambda_hat.col_mut(m) {
            *z = Cx::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
        }
    }
    let est = Stage1Estimate { user: 0, lambda_hat, loss_traces: vec![] };
    let target = build_tensor(&est, cfg.time_size)?;

    let mut tape = Tape::new();
    let (out, param_nodes) = model.forward_on_tape(&mut tape)?;
    let target_node = tape.constant(target.grid().clone());
    let loss = tape.sum_squared_diff(out, target_node)?;
    let grads = tape.backward(loss)?;
    let mut ad = Vec::with_capacity(model.params().len());
    for node in &param_nodes {
        ad.extend_from_slice(grads.wrt(*node).data());
    }

    let mut params = model.params().to_vec();
    let loss_of = |p: &[f64]| {
        let mut m = model.clone();
        m.params_mut().copy_from_slice(p);
        let out = m.forward().expect("geometry fixed");
        out.grid()
            .data()
            .iter()
            .zip(target.grid().data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    };
    // The loss is stiff along directions that shrink a channel's variance
    // (the normalization denominators blow up), so the probe step must be
    // finer than for the supervised loss.
    let fd = finite_diff_grad(&mut params, loss_of, 1e-5);

    let err = max_relative_error(&ad, &fd, 1e-6);
    check(err < GRADIENT_TOLERANCE, || {
        format!("denoiser-loss gradient error {err:.3e} exceeds {GRADIENT_TOLERANCE:.0e}")
    })?;
    Ok(err)
}

/// Re-running a recorded computation must reproduce it bit for bit.
pub fn tape_replay() -> Result<()> {
    let mut rng = derive_rng(0xC0FFEE, "selftest/replay");
    let mut tape = Tape::new();
    let w = tape.param(
        "w",
        Tensor::new(4, 6, (0..24).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())?,
    );
    let x = tape.constant(Tensor::new(
        6,
        8,
        (0..48).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
    )?);
    let y = tape.matmul(w, x)?;
    let r = tape.relu(y);
    let up = tape.upsample2x(r, 2, 4)?;
    let t = tape.constant(Tensor::zeros(4, 32));
    let _ = tape.sum_squared_diff(up, t)?;
    check(tape.replay_is_bit_identical()?, || "tape replay drifted".into())
}

/// A small baseline-only sweep must serialize identically twice.
pub fn sweep_determinism() -> Result<()> {
    let mut cfg = crate::bench::sweep::smoke_config();
    cfg.sweep.methods = vec![Method::LsUnquantized, Method::BussgangLs];
    cfg.sweep.snr_db = vec![0.0, 10.0];
    cfg.sweep.realizations = 2;
    let a = run_sweep(&cfg)?.to_csv();
    let b = run_sweep(&cfg)?.to_csv();
    check(a == b, || "identical sweeps serialized differently".into())
}
