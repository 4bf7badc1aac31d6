//! OFDM transmission and the one-bit receive chain.
//!
//! During a pilot slot only the owning user transmits. With every tap on
//! the sample grid the channel acts per subcarrier, so the received symbol
//! at antenna `m` is the inverse DFT of the element-wise product of the
//! user's frequency response and the pilot, plus white Gaussian noise in
//! time. Each receive chain then passes its in-phase and quadrature
//! components through a one-bit quantizer (unless bypassed), which is where
//! all amplitude information is lost.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{ChannelRealization, CxMat, PilotBook, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::{Cx, DftPlan};

const HALF_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// One-bit quantization of both quadratures: `(sign(re) + i sign(im)) / sqrt(2)`.
///
/// Zero maps to the positive level, so the output alphabet is exactly the
/// four points `(+-1 +- i) / sqrt(2)` and every output sample has unit power.
pub fn quantize_one_bit(samples: &[Cx]) -> Vec<Cx> {
    samples
        .iter()
        .map(|z| {
            let re = if z.re >= 0.0 { HALF_SQRT_2 } else { -HALF_SQRT_2 };
            let im = if z.im >= 0.0 { HALF_SQRT_2 } else { -HALF_SQRT_2 };
            Cx::new(re, im)
        })
        .collect()
}

/// Linear-equivalent gain of the one-bit quantizer for a circularly
/// symmetric Gaussian input of power `1 + noise_var`.
///
/// Decomposing `Q(y) = g * y + d` with `d` uncorrelated from `y` gives
/// `g = sqrt(2 / pi) / sigma_y`. When the quantizer is bypassed the chain
/// is linear and the gain is one.
pub fn bussgang_gain(cfg: &SystemConfig) -> f64 {
    if !cfg.quantize {
        return 1.0;
    }
    let sigma_y = (1.0 + cfg.noise_var()).sqrt();
    (2.0 / std::f64::consts::PI).sqrt() / sigma_y
}

/// Received time-domain block for one pilot slot: subcarriers-by-antennas,
/// one column per receive chain.
#[derive(Debug, Clone)]
pub struct RxSlot {
    pub user: usize,
    pub pilot: usize,
    pub samples: CxMat,
}

/// All pilot slots of one coherence interval, in transmission order.
#[derive(Debug, Clone)]
pub struct RxInterval {
    slots: Vec<RxSlot>,
}

impl RxInterval {
    pub fn slots(&self) -> &[RxSlot] {
        &self.slots
    }

    /// Mutable access for experiments that perturb received data (e.g.
    /// checking that an estimator ignores other antennas' columns).
    pub fn slots_mut(&mut self) -> &mut [RxSlot] {
        &mut self.slots
    }

    /// The pilot slots owned by `user`, verified against the expected count.
    pub fn user_slots(&self, user: usize, expected: usize) -> Result<Vec<&RxSlot>> {
        let found: Vec<&RxSlot> = self.slots.iter().filter(|s| s.user == user).collect();
        if found.is_empty() {
            return Err(Error::NoSlots { user });
        }
        if found.len() != expected {
            return Err(Error::MissingSlots { user, expected, found: found.len() });
        }
        Ok(found)
    }
}

/// Runs every pilot slot through the channel and receive chain.
///
/// Noise is drawn in a fixed order (slot, antenna, sample, re before im) so
/// the interval is a pure function of the supplied stream.
pub fn transmit(
    cfg: &SystemConfig,
    chan: &ChannelRealization,
    book: &PilotBook,
    rng: &mut impl Rng,
) -> Result<RxInterval> {
    if book.subcarriers() != cfg.subcarriers || book.user_count() != cfg.users {
        return Err(Error::DimMismatch(format!(
            "pilot book is {} users x {} subcarriers, scenario wants {} x {}",
            book.user_count(),
            book.subcarriers(),
            cfg.users,
            cfg.subcarriers
        )));
    }
    let plan = DftPlan::new(cfg.subcarriers);
    let noise_sigma = (cfg.noise_var() / 2.0).sqrt();
    let mut slots = Vec::with_capacity(cfg.users * cfg.pilots_per_user);

    for user in 0..cfg.users {
        let response = chan.response(user);
        for pilot in 0..book.pilots_per_user() {
            let x = book.symbol(user, pilot);
            let mut samples = CxMat::zeros(cfg.subcarriers, cfg.antennas);
            for m in 0..cfg.antennas {
                let lambda = response.col(m);
                let faded: Vec<Cx> = lambda.iter().zip(x).map(|(l, s)| l * s).collect();
                let mut y = plan.idft(&faded)?;
                for sample in y.iter_mut() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *sample += Cx::new(noise_sigma * re, noise_sigma * im);
                }
                let received = if cfg.quantize { quantize_one_bit(&y) } else { y };
                samples.col_mut(m).copy_from_slice(&received);
            }
            slots.push(RxSlot { user, pilot, samples });
        }
    }
    Ok(RxInterval { slots })
}
