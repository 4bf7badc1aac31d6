//! Multipath channel sampling in the frequency domain.
//!
//! Each user-antenna pair carries an independent tapped-delay-line channel.
//! Tap amplitudes are circularly symmetric complex Gaussians with the
//! profile's per-tap power; because every delay sits on the sample grid the
//! time-domain convolution is circulant and diagonalizes over the DFT, so
//! only the per-subcarrier frequency response is materialized.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{CxMat, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::Cx;

/// Extended Pedestrian A power-delay profile.
pub const EPA_DELAYS_NS: [f64; 7] = [0.0, 30.0, 70.0, 90.0, 110.0, 190.0, 410.0];
pub const EPA_POWERS_DB: [f64; 7] = [0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8];

/// One resolvable path: delay in samples, average power (linear).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay: usize,
    pub power: f64,
}

/// Frequency response of every user's channel for one coherence interval.
///
/// `response(k)` is a subcarriers-by-antennas matrix; column `m` holds the
/// per-subcarrier complex gain between user `k` and antenna `m`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    users: Vec<CxMat>,
}

impl ChannelRealization {
    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn response(&self, user: usize) -> &CxMat {
        &self.users[user]
    }

    /// Replaces one user's response (for experiments with hand-built
    /// channels such as zero or rescaled links).
    pub fn set_response(&mut self, user: usize, response: CxMat) {
        self.users[user] = response;
    }
}

/// Draws one channel realization for every user-antenna pair.
///
/// Taps are sampled in a fixed order (user, antenna, tap) so a given stream
/// position always maps to the same coefficient.
pub fn sample_channel(cfg: &SystemConfig, rng: &mut impl Rng) -> Result<ChannelRealization> {
    let taps = cfg.resolve_taps()?;
    let n = cfg.subcarriers;
    let mut users = Vec::with_capacity(cfg.users);

    // Per-tap DFT phasors: exp(-2*pi*i * n * delay / N) for each subcarrier.
    let phasors: Vec<Vec<Cx>> = taps
        .iter()
        .map(|t| {
            (0..n)
                .map(|sc| {
                    let angle = -2.0 * std::f64::consts::PI * (sc * t.delay % n) as f64 / n as f64;
                    Cx::new(angle.cos(), angle.sin())
                })
                .collect()
        })
        .collect();

    for _ in 0..cfg.users {
        let mut freq = CxMat::zeros(n, cfg.antennas);
        for m in 0..cfg.antennas {
            let col = freq.col_mut(m);
            for (tap, phasor) in taps.iter().zip(&phasors) {
                let sigma = (tap.power / 2.0).sqrt();
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                let amp = Cx::new(sigma * re, sigma * im);
                for (sc, p) in phasor.iter().enumerate() {
                    col[sc] += amp * p;
                }
            }
        }
        users.push(freq);
    }
    Ok(ChannelRealization { users })
}

/// Frequency response of a deterministic tap vector (test oracle).
pub fn taps_to_response(taps: &[(usize, Cx)], subcarriers: usize) -> Result<Vec<Cx>> {
    for &(delay, _) in taps {
        if delay >= subcarriers {
            return Err(Error::IndexOutOfRange(format!(
                "tap delay {delay} outside {subcarriers}-sample symbol"
            )));
        }
    }
    Ok((0..subcarriers)
        .map(|sc| {
            taps.iter()
                .map(|&(delay, amp)| {
                    let angle =
                        -2.0 * std::f64::consts::PI * (sc * delay % subcarriers) as f64
                            / subcarriers as f64;
                    amp * Cx::new(angle.cos(), angle.sin())
                })
                .sum()
        })
        .collect())
}
