//! Simulated uplink: multipath channel, orthogonal pilot schedule, OFDM
//! transmission, and the one-bit receive chain.

pub mod channel;
pub mod pilot;
pub mod txrx;

pub use channel::{sample_channel, ChannelRealization, Tap};
pub use pilot::PilotBook;
pub use txrx::{bussgang_gain, quantize_one_bit, transmit, RxInterval, RxSlot};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::numerics::Cx;

/// Dense complex matrix in column-major order.
///
/// Used for per-user frequency responses and received blocks, always with
/// subcarriers (or time samples) down the rows and antennas across the
/// columns, so one antenna's signal is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct CxMat {
    rows: usize,
    cols: usize,
    data: Vec<Cx>,
}

impl CxMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Cx::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_data(rows: usize, cols: usize, data: Vec<Cx>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Cx] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Cx] {
        &mut self.data
    }

    /// Contiguous column `c` (one antenna's samples).
    pub fn col(&self, c: usize) -> &[Cx] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn col_mut(&mut self, c: usize) -> &mut [Cx] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    /// Squared Frobenius norm.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Squared Frobenius norm of `self - other`.
    pub fn dist_sq(&self, other: &CxMat) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimMismatch(format!(
                "distance between {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum())
    }
}

/// Sample rate of the tap grid: the 30.72 Msps LTE reference rate, the
/// native rate of the standard delay profiles.
pub const REFERENCE_SAMPLE_RATE_HZ: f64 = 30.72e6;

/// Multipath power-delay profile, either a named preset or explicit taps.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum TapProfileSpec {
    /// Preset name; only `"epa"` is recognized.
    Named(String),
    /// Delays in nanoseconds with matching per-tap powers in dB.
    Explicit { delays_ns: Vec<f64>, powers_db: Vec<f64> },
}

impl Default for TapProfileSpec {
    fn default() -> Self {
        TapProfileSpec::Named("epa".into())
    }
}

/// Physical-layer scenario for one experiment.
///
/// Defaults describe the reference scenario: four users, sixteen antennas,
/// sixty-four subcarriers, twenty pilots per user over an eighty-symbol
/// interval, one-bit quantization on.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Number of single-antenna users K.
    pub users: usize,
    /// Number of base-station antennas M.
    pub antennas: usize,
    /// OFDM subcarriers per symbol.
    pub subcarriers: usize,
    /// Symbols in one coherence interval; pilots occupy the head.
    pub symbols_per_interval: usize,
    /// Dedicated pilot symbols per user.
    pub pilots_per_user: usize,
    /// Per-sample SNR in dB (signal power is one).
    pub snr_db: f64,
    /// Master seed; every random stream derives from it.
    pub seed: u64,
    /// Multipath profile.
    pub tap_profile: TapProfileSpec,
    /// When false the one-bit quantizer is bypassed (ideal receiver).
    pub quantize: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            users: 4,
            antennas: 16,
            subcarriers: 64,
            symbols_per_interval: 80,
            pilots_per_user: 20,
            snr_db: 5.0,
            seed: 1,
            tap_profile: TapProfileSpec::default(),
            quantize: true,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.antennas == 0 || self.pilots_per_user == 0 {
            return Err(Error::InvalidConfig(
                "users, antennas, and pilots_per_user must be positive".into(),
            ));
        }
        if self.subcarriers == 0 || !self.subcarriers.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "subcarriers must be a positive power of two, got {}",
                self.subcarriers
            )));
        }
        let required = self.users * self.pilots_per_user;
        if required > self.symbols_per_interval {
            return Err(Error::IntervalTooShort {
                required,
                available: self.symbols_per_interval,
            });
        }
        self.resolve_taps().map(|_| ())
    }

    /// Noise variance per complex sample implied by `snr_db`.
    pub fn noise_var(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    /// Maps the delay profile onto the sample grid.
    ///
    /// Delays are laid on the LTE reference sample grid (30.72 Msps), so a
    /// profile resolves to the same tap structure at every subcarrier
    /// count and the standard pedestrian profile stays frequency-selective
    /// even at desk-scale grids. Each delay rounds to the nearest sample;
    /// taps landing on the same sample pool their power, and the total is
    /// renormalized to one so the average channel gain stays unity
    /// regardless of profile. A delay at or beyond the symbol length is
    /// rejected.
    pub fn resolve_taps(&self) -> Result<Vec<Tap>> {
        let (delays_ns, powers_db): (Vec<f64>, Vec<f64>) = match &self.tap_profile {
            TapProfileSpec::Named(name) => {
                if name != "epa" {
                    return Err(Error::InvalidConfig(format!(
                        "unknown tap profile preset {name:?}"
                    )));
                }
                (
                    channel::EPA_DELAYS_NS.to_vec(),
                    channel::EPA_POWERS_DB.to_vec(),
                )
            }
            TapProfileSpec::Explicit { delays_ns, powers_db } => {
                if delays_ns.len() != powers_db.len() || delays_ns.is_empty() {
                    return Err(Error::InvalidConfig(format!(
                        "tap profile needs matching non-empty delay/power lists, got {}/{}",
                        delays_ns.len(),
                        powers_db.len()
                    )));
                }
                (delays_ns.clone(), powers_db.clone())
            }
        };

        let sample_period_ns = 1e9 / REFERENCE_SAMPLE_RATE_HZ;
        let mut pooled: Vec<(usize, f64)> = Vec::new();
        for (&d_ns, &p_db) in delays_ns.iter().zip(&powers_db) {
            if d_ns < 0.0 {
                return Err(Error::InvalidConfig(format!("negative tap delay {d_ns} ns")));
            }
            let sample = (d_ns / sample_period_ns).round() as usize;
            if sample >= self.subcarriers {
                return Err(Error::InvalidConfig(format!(
                    "tap delay {d_ns} ns lands on sample {sample}, beyond the {}-sample symbol",
                    self.subcarriers
                )));
            }
            let power = 10f64.powf(p_db / 10.0);
            match pooled.iter_mut().find(|(s, _)| *s == sample) {
                Some((_, acc)) => *acc += power,
                None => pooled.push((sample, power)),
            }
        }
        pooled.sort_by_key(|&(s, _)| s);
        let total: f64 = pooled.iter().map(|&(_, p)| p).sum();
        Ok(pooled
            .into_iter()
            .map(|(delay, power)| Tap { delay, power: power / total })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> SystemConfig {
        SystemConfig {
            users: 4,
            antennas: 16,
            subcarriers: 64,
            symbols_per_interval: 80,
            pilots_per_user: 20,
            snr_db: 5.0,
            seed: 1,
            tap_profile: TapProfileSpec::default(),
            quantize: true,
        }
    }

    #[test]
    fn pedestrian_preset_pools_onto_six_samples() {
        // On the 32.55 ns reference grid the seven profile delays round to
        // samples {0, 1, 2, 3, 3, 6, 13}; the two sample-3 taps pool.
        let taps = base_config().resolve_taps().unwrap();
        assert_eq!(taps.iter().map(|t| t.delay).collect::<Vec<_>>(), vec![0, 1, 2, 3, 6, 13]);
        let total: f64 = taps.iter().map(|t| t.power).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // pooled sample-3 power: 10^-0.3 + 10^-0.8, then normalized
        let lin: Vec<f64> =
            [0.0f64, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8].iter().map(|d| 10f64.powf(d / 10.0)).collect();
        let sum: f64 = lin.iter().sum();
        assert!((taps[3].power - (lin[3] + lin[4]) / sum).abs() < 1e-12);
        assert!((taps[5].power - lin[6] / sum).abs() < 1e-12);
    }

    #[test]
    fn pedestrian_preset_is_identical_across_grid_sizes() {
        let mut cfg = base_config();
        let at64 = cfg.resolve_taps().unwrap();
        cfg.subcarriers = 16;
        let at16 = cfg.resolve_taps().unwrap();
        assert_eq!(at64.len(), at16.len());
        for (a, b) in at64.iter().zip(&at16) {
            assert_eq!(a.delay, b.delay);
            assert!((a.power - b.power).abs() < 1e-15);
        }
        // an 8-sample symbol cannot hold the 13-sample delay spread
        cfg.subcarriers = 8;
        assert!(cfg.resolve_taps().is_err());
    }

    #[test]
    fn explicit_profile_resolves_and_normalizes() {
        let mut cfg = base_config();
        cfg.subcarriers = 64;
        cfg.tap_profile = TapProfileSpec::Explicit {
            delays_ns: vec![0.0, 65.1, 130.2],
            powers_db: vec![0.0, -3.0, -3.0],
        };
        let taps = cfg.resolve_taps().unwrap();
        assert_eq!(taps.iter().map(|t| t.delay).collect::<Vec<_>>(), vec![0, 2, 4]);
        let total: f64 = taps.iter().map(|t| t.power).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(taps[0].power > taps[1].power);
        assert!((taps[1].power - taps[2].power).abs() < 1e-9);
    }

    #[test]
    fn tap_beyond_symbol_rejected() {
        let mut cfg = base_config();
        cfg.tap_profile = TapProfileSpec::Explicit {
            delays_ns: vec![1e9],
            powers_db: vec![0.0],
        };
        assert!(matches!(cfg.resolve_taps(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn pilot_overflow_rejected() {
        let mut cfg = base_config();
        cfg.pilots_per_user = 21; // 4 * 21 = 84 > 80
        assert!(matches!(
            cfg.validate(),
            Err(Error::IntervalTooShort { required: 84, available: 80 })
        ));
    }

    #[test]
    fn non_power_of_two_subcarriers_rejected() {
        let mut cfg = base_config();
        cfg.subcarriers = 48;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_preset_rejected() {
        let mut cfg = base_config();
        cfg.tap_profile = TapProfileSpec::Named("etu".into());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn cxmat_column_is_contiguous() {
        let mut m = CxMat::zeros(3, 2);
        m.col_mut(1)[2] = Cx::new(1.0, -1.0);
        assert_eq!(m.data()[5], Cx::new(1.0, -1.0));
        assert_eq!(m.col(1)[2], Cx::new(1.0, -1.0));
    }

    #[test]
    fn cxmat_distance_checks_shape() {
        let a = CxMat::zeros(2, 2);
        let b = CxMat::zeros(2, 3);
        assert!(a.dist_sq(&b).is_err());
        assert_eq!(a.dist_sq(&a).unwrap(), 0.0);
    }
}
