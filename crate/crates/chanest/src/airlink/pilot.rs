//! Pilot schedule and symbol generation.
//!
//! Users train in disjoint time slots: the first `users * pilots_per_user`
//! symbols of the interval are pilots, with user `k` owning the contiguous
//! block starting at `k * pilots_per_user`. Pilot symbols are QPSK, one
//! independent point per subcarrier, so every entry has unit modulus and
//! its conjugate equals its inverse — which is what lets the receiver strip
//! a pilot by element-wise conjugate multiplication.

use rand::Rng;

use super::SystemConfig;
use crate::error::{Error, Result};
use crate::numerics::Cx;

const QPSK: [Cx; 4] = [
    Cx::new(std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
    Cx::new(std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
    Cx::new(-std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
    Cx::new(-std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
];

/// Uniform draw from the unit-modulus QPSK alphabet.
pub fn random_qpsk(rng: &mut impl Rng) -> Cx {
    QPSK[rng.random_range(0..4)]
}

/// Frequency-domain pilot symbols for every user and pilot slot.
#[derive(Debug, Clone)]
pub struct PilotBook {
    pilots_per_user: usize,
    subcarriers: usize,
    /// `symbols[user][pilot]` is one frequency-domain symbol.
    symbols: Vec<Vec<Vec<Cx>>>,
}

impl PilotBook {
    /// Draws a full QPSK pilot book for the configured scenario.
    pub fn generate(cfg: &SystemConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let symbols = (0..cfg.users)
            .map(|_| {
                (0..cfg.pilots_per_user)
                    .map(|_| (0..cfg.subcarriers).map(|_| random_qpsk(rng)).collect())
                    .collect()
            })
            .collect();
        Ok(Self {
            pilots_per_user: cfg.pilots_per_user,
            subcarriers: cfg.subcarriers,
            symbols,
        })
    }

    /// Wraps externally supplied symbols, enforcing unit modulus.
    pub fn from_symbols(symbols: Vec<Vec<Vec<Cx>>>) -> Result<Self> {
        let pilots_per_user = symbols.first().map_or(0, Vec::len);
        let subcarriers = symbols
            .first()
            .and_then(|u| u.first())
            .map_or(0, Vec::len);
        if pilots_per_user == 0 || subcarriers == 0 {
            return Err(Error::InvalidConfig("empty pilot book".into()));
        }
        let mut flat = 0usize;
        for user in &symbols {
            if user.len() != pilots_per_user {
                return Err(Error::InvalidConfig("ragged pilot book".into()));
            }
            for sym in user {
                if sym.len() != subcarriers {
                    return Err(Error::InvalidConfig("ragged pilot symbol".into()));
                }
                for z in sym {
                    let modulus = z.norm();
                    if (modulus - 1.0).abs() > 1e-9 {
                        return Err(Error::NonUnitPilot { index: flat, modulus });
                    }
                    flat += 1;
                }
            }
        }
        Ok(Self { pilots_per_user, subcarriers, symbols })
    }

    pub fn user_count(&self) -> usize {
        self.symbols.len()
    }

    pub fn pilots_per_user(&self) -> usize {
        self.pilots_per_user
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    /// Frequency-domain symbol sent by `user` in their `pilot`-th slot.
    pub fn symbol(&self, user: usize, pilot: usize) -> &[Cx] {
        &self.symbols[user][pilot]
    }

    /// Interval slot carrying the given pilot.
    pub fn slot_index(&self, user: usize, pilot: usize) -> usize {
        user * self.pilots_per_user + pilot
    }

    /// Which (user, pilot) owns an interval slot, if any.
    pub fn slot_owner(&self, slot: usize) -> Option<(usize, usize)> {
        if slot >= self.symbols.len() * self.pilots_per_user {
            return None;
        }
        Some((slot / self.pilots_per_user, slot % self.pilots_per_user))
    }
}
