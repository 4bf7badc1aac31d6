//! Classical least-squares reference estimators.
//!
//! Both baselines use the same derotate-and-average rule: per antenna and
//! subcarrier, multiply the received spectrum by the conjugate pilot and
//! average over the user's pilot slots. Applied to the ideal (unquantized)
//! chain this is the plain LS estimate and a lower bound on achievable
//! error; applied to the one-bit chain after dividing out the quantizer's
//! linear-equivalent gain it is the standard linearized estimator that the
//! learned pipeline is measured against.

use crate::airlink::{bussgang_gain, CxMat, PilotBook, RxInterval, SystemConfig};
use crate::error::Result;
use crate::numerics::DftPlan;
use crate::stage1::make_label;

/// Derotate-and-average over user `k`'s slots with an optional output scale.
fn ls_average(
    rx: &RxInterval,
    book: &PilotBook,
    user: usize,
    scale: f64,
) -> Result<CxMat> {
    let slots = rx.user_slots(user, book.pilots_per_user())?;
    let n = book.subcarriers();
    let antennas = slots[0].samples.cols();
    let plan = DftPlan::new(n);
    let mut est = CxMat::zeros(n, antennas);
    let weight = scale / slots.len() as f64;
    for slot in &slots {
        let x = book.symbol(user, slot.pilot);
        for m in 0..antennas {
            let label = make_label(&plan, slot.samples.col(m), x)?;
            for (acc, l) in est.col_mut(m).iter_mut().zip(&label) {
                *acc += l * weight;
            }
        }
    }
    Ok(est)
}

/// Least squares on the ideal receive chain (quantizer bypassed).
pub fn ls_unquantized_baseline(
    rx: &RxInterval,
    book: &PilotBook,
    user: usize,
) -> Result<CxMat> {
    ls_average(rx, book, user, 1.0)
}

/// Least squares on the one-bit chain, rescaled by the inverse of the
/// quantizer's linear-equivalent gain so the estimate is unbiased.
pub fn bussgang_ls_baseline(
    rx: &RxInterval,
    book: &PilotBook,
    user: usize,
    cfg: &SystemConfig,
) -> Result<CxMat> {
    ls_average(rx, book, user, 1.0 / bussgang_gain(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airlink::{sample_channel, transmit, PilotBook, TapProfileSpec};
    use crate::bench::{nmse, nmse_linear, NMSE_FLOOR_DB};
    use crate::numerics::{derive_rng, Cx};

    fn config(snr_db: f64, quantize: bool, pilots: usize) -> SystemConfig {
        SystemConfig {
            users: 1,
            antennas: 2,
            subcarriers: 8,
            symbols_per_interval: pilots,
            pilots_per_user: pilots,
            snr_db,
            seed: 31,
            // two taps that fit the eight-sample symbol
            tap_profile: TapProfileSpec::Explicit {
                delays_ns: vec![0.0, 65.1],
                powers_db: vec![0.0, -3.0],
            },
            quantize,
        }
    }

    fn one_shot(cfg: &SystemConfig, tag: u64) -> (CxMat, RxInterval, PilotBook) {
        let chan = sample_channel(cfg, &mut derive_rng(tag, "c")).unwrap();
        let book = PilotBook::generate(cfg, &mut derive_rng(tag, "p")).unwrap();
        let rx = transmit(cfg, &chan, &book, &mut derive_rng(tag, "n")).unwrap();
        (chan.response(0).clone(), rx, book)
    }

    #[test]
    fn noiseless_unquantized_ls_is_exact() {
        let cfg = config(f64::INFINITY, false, 3);
        let (truth, rx, book) = one_shot(&cfg, 1);
        let est = ls_unquantized_baseline(&rx, &book, 0).unwrap();
        assert_eq!(nmse(&est, &truth).unwrap(), NMSE_FLOOR_DB);
    }

    #[test]
    fn single_pilot_error_matches_noise_power() {
        // One pilot, noise variance sigma^2: each subcarrier estimate is
        // truth + derotated noise of variance sigma^2. NMSE normalizes by
        // the realized channel energy, whose inverse has mean L/(L-1) for
        // L equal-power taps (and no finite mean at all for L=1), so the
        // channel needs enough taps: with L=11, E[NMSE] = 1.1 * sigma^2.
        let taps = 11usize;
        let period_ns = 1e9 / crate::airlink::REFERENCE_SAMPLE_RATE_HZ;
        let cfg = SystemConfig {
            subcarriers: 32,
            tap_profile: TapProfileSpec::Explicit {
                delays_ns: (0..taps).map(|k| k as f64 * period_ns).collect(),
                powers_db: vec![0.0; taps],
            },
            ..config(7.0, false, 1)
        };
        let sigma2 = cfg.noise_var();
        let expected = sigma2 * taps as f64 / (taps - 1) as f64;
        let mut acc = 0.0;
        let trials = 500;
        for t in 0..trials {
            let (truth, rx, book) = one_shot(&cfg, 1000 + t);
            let est = ls_unquantized_baseline(&rx, &book, 0).unwrap();
            acc += nmse_linear(&est, &truth).unwrap();
        }
        let mean = acc / trials as f64;
        assert!(
            (mean - expected).abs() < 0.2 * expected,
            "mean linear NMSE {mean} vs expected {expected}"
        );
    }

    #[test]
    fn pilot_averaging_buys_ten_log_n() {
        let single = config(5.0, false, 1);
        let averaged = config(5.0, false, 16);
        let trials = 200;
        let mut lin_single = 0.0;
        let mut lin_avg = 0.0;
        for t in 0..trials {
            let (truth, rx, book) = one_shot(&single, 5000 + t);
            lin_single += nmse_linear(&ls_unquantized_baseline(&rx, &book, 0).unwrap(), &truth)
                .unwrap();
            let (truth, rx, book) = one_shot(&averaged, 9000 + t);
            lin_avg +=
                nmse_linear(&ls_unquantized_baseline(&rx, &book, 0).unwrap(), &truth).unwrap();
        }
        let gain_db = 10.0 * (lin_single / lin_avg).log10();
        let expected = 10.0 * 16f64.log10(); // 12.04 dB
        assert!(
            (gain_db - expected).abs() < 1.5,
            "averaging gain {gain_db:.2} dB vs expected {expected:.2} dB"
        );
    }

    #[test]
    fn quantized_estimate_correlates_with_truth() {
        let cfg = config(10.0, true, 32);
        let mut acc = 0.0;
        let trials = 100;
        for t in 0..trials {
            let (truth, rx, book) = one_shot(&cfg, 20_000 + t);
            let est = bussgang_ls_baseline(&rx, &book, 0, &cfg).unwrap();
            let inner: crate::numerics::Cx = est
                .data()
                .iter()
                .zip(truth.data())
                .map(|(e, t)| e * t.conj())
                .sum();
            acc += inner.norm() / (est.norm_sq().sqrt() * truth.norm_sq().sqrt());
        }
        let mean = acc / trials as f64;
        assert!(mean > 0.8, "mean correlation {mean}");
    }

    #[test]
    fn quantized_chain_ignores_input_scaling() {
        // Scaling the analog signal before the one-bit ADC cannot change
        // anything downstream. Scale the channel instead of the receive
        // path: the quantized slots, hence the estimate, stay identical.
        let cfg = config(f64::INFINITY, true, 4);
        let chan = sample_channel(&cfg, &mut derive_rng(77, "c")).unwrap();
        let book = PilotBook::generate(&cfg, &mut derive_rng(77, "p")).unwrap();
        let rx_a = transmit(&cfg, &chan, &book, &mut derive_rng(77, "n")).unwrap();

        let mut scaled = chan.clone();
        let mut resp = scaled.response(0).clone();
        for z in resp.data_mut() {
            *z *= 3.7;
        }
        scaled.set_response(0, resp);
        let rx_b = transmit(&cfg, &scaled, &book, &mut derive_rng(77, "n")).unwrap();

        let est_a = bussgang_ls_baseline(&rx_a, &book, 0, &cfg).unwrap();
        let est_b = bussgang_ls_baseline(&rx_b, &book, 0, &cfg).unwrap();
        assert_eq!(est_a.data(), est_b.data());
    }

    #[test]
    fn pure_noise_estimate_has_zero_mean() {
        // Zero channel: the quantizer sees only noise, so the averaged
        // estimate must be zero-mean within Monte-Carlo error.
        let cfg = config(0.0, true, 2);
        let trials = 300;
        let mut mean = Cx::new(0.0, 0.0);
        let mut count = 0usize;
        for t in 0..trials {
            let book = PilotBook::generate(&cfg, &mut derive_rng(40_000 + t, "p")).unwrap();
            let zero_chan = zero_channel(&cfg, 40_000 + t);
            let rx = transmit(&cfg, &zero_chan, &book, &mut derive_rng(40_000 + t, "n"))
                .unwrap();
            let est = bussgang_ls_baseline(&rx, &book, 0, &cfg).unwrap();
            for z in est.data() {
                mean += z;
                count += 1;
            }
        }
        let mean = mean / count as f64;
        // each averaged entry has variance ~1/(G^2 N_t) per trial; the
        // grand mean over `count` entries should sit within 3 standard
        // errors of zero
        let per_entry_var = 1.0 / (crate::airlink::bussgang_gain(&cfg).powi(2)
            * cfg.pilots_per_user as f64);
        let se = (per_entry_var / count as f64).sqrt();
        assert!(
            mean.norm() < 3.0 * se,
            "grand mean magnitude {} vs 3 SE {}",
            mean.norm(),
            3.0 * se
        );
    }

    fn zero_channel(cfg: &SystemConfig, tag: u64) -> crate::airlink::ChannelRealization {
        let mut chan = sample_channel(cfg, &mut derive_rng(tag, "c")).unwrap();
        let zero = CxMat::zeros(cfg.subcarriers, cfg.antennas);
        chan.set_response(0, zero);
        chan
    }
}
