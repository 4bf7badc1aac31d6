//! Scratch: paired probe-count scan at full scale, SNR 20.

use chanest::airlink::SystemConfig;
use chanest::bench::{run_sweep, ExperimentConfig, Method};
use chanest::numerics::derive_rng;
use chanest::stage1::{generate_estimate, MlpModel, Stage1Config};
use chanest::stage2::DipConfig;

fn init_bias() {
    for n in [32usize, 64] {
        let mut init = derive_rng(1, "stage1/init/h0/u0");
        let model = MlpModel::new_random(n, &mut init).unwrap();
        let mut probe = derive_rng(1, "stage1/probe/h0/u0");
        let b = generate_estimate(&model, 4096, &mut probe).unwrap();
        let norm_sq: f64 = b.iter().map(|z| z.norm_sqr()).sum();
        println!("n {n}: ||E f_init||^2 = {norm_sq:.4}  overhead if it survives = {:.4}", norm_sq / n as f64);
    }
}

fn main() {
    if std::env::args().nth(1).as_deref() == Some("bias") {
        return init_bias();
    }
    let probes: usize = std::env::args().nth(1).unwrap().parse().unwrap();
    let reals: usize = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(6);
    let snr: f64 = std::env::args().nth(3).map(|s| s.parse().unwrap()).unwrap_or(20.0);
    let mut cfg = ExperimentConfig::default();
    cfg.system = SystemConfig {
        users: 4,
        antennas: 16,
        subcarriers: 64,
        symbols_per_interval: 80,
        pilots_per_user: 20,
        snr_db: 5.0,
        seed: 1,
        tap_profile: Default::default(),
        quantize: true,
    };
    cfg.stage1 = Stage1Config { epochs: 300, lr: 1e-3, probes, seed: 0 };
    cfg.dip = DipConfig {
        z0_channels: 64,
        hidden_widths: vec![64; 5],
        time_size: 16,
        iterations: 150,
        lr: 0.01,
        seed: 0,
    };
    cfg.sweep.snr_db = vec![snr];
    cfg.sweep.realizations = reals;
    cfg.sweep.methods = vec![Method::Stage1Only, Method::BussgangLs];
    cfg.sweep.eval_all_users = false;
    let t0 = std::time::Instant::now();
    let report = run_sweep(&cfg).unwrap();
    let s1 = report.lookup(snr, Method::Stage1Only).unwrap();
    let bls = report.lookup(snr, Method::BussgangLs).unwrap();
    println!(
        "snr {snr} probes {probes}: stage1 {s1:.3}  baseline {bls:.3}  gap {:.3}  ({:.0} s)",
        s1 - bls,
        t0.elapsed().as_secs_f64()
    );
}
