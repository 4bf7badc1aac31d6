//! Stage two: unsupervised denoising of the stage-one estimate.
//!
//! The per-antenna estimates are replicated along a synthetic time axis and
//! stacked across antennas into a three-dimensional grid. A small
//! generative network with a fixed random input is then fit to that grid by
//! plain squared-error regression for a fixed iteration budget. Because the
//! network builds its output by repeatedly upsampling a coarse grid, it can
//! only express smooth structure over the frequency-time plane — it soaks
//! up the correlated channel component quickly while the white estimation
//! error is fit last, so stopping after the budget leaves a cleaner
//! estimate at the first time slice.

pub mod dip;

pub use dip::{dip_fit, DipModel};

use serde::Deserialize;

use crate::airlink::CxMat;
use crate::error::{Error, Result};
use crate::numerics::{derive_rng, Cx, Tensor};
use crate::stage1::Stage1Estimate;

/// Geometry and fit schedule of the denoiser network.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipConfig {
    /// Channels of the fixed random input grid.
    #[serde(default = "default_z0_channels")]
    pub z0_channels: usize,
    /// Output channels of each hidden layer; the list length is the hidden
    /// layer count, and all but the last hidden layer upsample by two.
    #[serde(default = "default_hidden_widths")]
    pub hidden_widths: Vec<usize>,
    /// Length of the synthetic time axis the estimate is replicated along.
    #[serde(default = "default_time_size")]
    pub time_size: usize,
    /// Gradient steps of the fit (the implicit regularizer: fewer steps,
    /// stronger smoothing).
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Adaptive-moment learning rate.
    #[serde(default = "default_dip_lr")]
    pub lr: f64,
    /// Extra seed component for the network's random draw.
    #[serde(default)]
    pub seed: u64,
}

fn default_z0_channels() -> usize {
    128
}

fn default_hidden_widths() -> Vec<usize> {
    vec![128; 5]
}

fn default_time_size() -> usize {
    64
}

fn default_iterations() -> usize {
    3000
}

fn default_dip_lr() -> f64 {
    0.01
}

impl Default for DipConfig {
    fn default() -> Self {
        Self {
            z0_channels: default_z0_channels(),
            hidden_widths: default_hidden_widths(),
            time_size: default_time_size(),
            iterations: default_iterations(),
            lr: default_dip_lr(),
            seed: 0,
        }
    }
}

impl DipConfig {
    /// Hidden layer count.
    pub fn depth(&self) -> usize {
        self.hidden_widths.len()
    }

    /// Spatial dims of the coarse input grid for a given output size.
    ///
    /// With `l` hidden layers, layers `0..l-1` each double the frequency
    /// and time axes, so the input grid is the output divided by
    /// `2^(l-1)` on both axes; both divisions must be exact.
    pub fn z0_dims(&self, subcarriers: usize) -> Result<(usize, usize)> {
        let l = self.depth();
        if l == 0 {
            return Err(Error::InvalidConfig("denoiser needs at least one hidden layer".into()));
        }
        let factor = 1usize << (l - 1);
        if subcarriers % factor != 0 || subcarriers / factor == 0 {
            return Err(Error::InvalidConfig(format!(
                "{subcarriers} subcarriers cannot be built from {l} layers ({} doublings)",
                l - 1
            )));
        }
        if self.time_size % factor != 0 || self.time_size / factor == 0 {
            return Err(Error::InvalidConfig(format!(
                "time axis {} cannot be built from {l} layers ({} doublings)",
                self.time_size,
                l - 1
            )));
        }
        Ok((subcarriers / factor, self.time_size / factor))
    }

    pub fn validate(&self, subcarriers: usize, antennas: usize) -> Result<()> {
        if self.z0_channels == 0 || self.hidden_widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidConfig("denoiser widths must be positive".into()));
        }
        if antennas == 0 {
            return Err(Error::InvalidConfig("denoiser needs at least one antenna".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("denoiser needs at least one iteration".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate {} not positive", self.lr)));
        }
        self.z0_dims(subcarriers).map(|_| ())
    }
}

/// Where a grid came from, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSource {
    /// Replicated stage-one estimate (regression target).
    Target,
    /// Denoiser network output.
    Fitted,
}

/// Complex frequency-time-antenna grid, stored as the real-packed matrix
/// the network operates on: rows are `2 * antennas` channels (re parts
/// first, im parts after), columns flatten (frequency, time) with column
/// index `f * time + t`.
#[derive(Debug, Clone)]
pub struct ChannelTensor {
    subcarriers: usize,
    time: usize,
    antennas: usize,
    grid: Tensor,
    pub source: GridSource,
}

impl ChannelTensor {
    pub fn from_grid(
        grid: Tensor,
        subcarriers: usize,
        time: usize,
        antennas: usize,
        source: GridSource,
    ) -> Result<Self> {
        if grid.rows() != 2 * antennas || grid.cols() != subcarriers * time {
            return Err(Error::DimMismatch(format!(
                "grid {}x{} does not hold a {}x{}x{} tensor",
                grid.rows(),
                grid.cols(),
                subcarriers,
                time,
                antennas
            )));
        }
        Ok(Self { subcarriers, time, antennas, grid, source })
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn grid(&self) -> &Tensor {
        &self.grid
    }

    /// Complex value at (frequency, time, antenna).
    pub fn at(&self, f: usize, t: usize, m: usize) -> Cx {
        let col = f * self.time + t;
        Cx::new(self.grid.at(m, col), self.grid.at(self.antennas + m, col))
    }

    /// The subcarriers-by-antennas slice at one time index.
    pub fn time_slice(&self, t: usize) -> Result<CxMat> {
        if t >= self.time {
            return Err(Error::IndexOutOfRange(format!(
                "time index {t} in a {}-slot grid",
                self.time
            )));
        }
        let mut out = CxMat::zeros(self.subcarriers, self.antennas);
        for m in 0..self.antennas {
            let col = out.col_mut(m);
            for (f, slot) in col.iter_mut().enumerate() {
                *slot = self.at(f, t, m);
            }
        }
        Ok(out)
    }
}

/// Replicates a stage-one estimate `time` copies along the time axis.
pub fn build_tensor(est: &Stage1Estimate, time: usize) -> Result<ChannelTensor> {
    if time == 0 {
        return Err(Error::InvalidConfig("tensor needs at least one time slot".into()));
    }
    let n = est.lambda_hat.rows();
    let antennas = est.lambda_hat.cols();
    let mut grid = Tensor::zeros(2 * antennas, n * time);
    for m in 0..antennas {
        let col = est.lambda_hat.col(m);
        for f in 0..n {
            for t in 0..time {
                let pos = f * time + t;
                grid.data_mut()[m * n * time + pos] = col[f].re;
                grid.data_mut()[(antennas + m) * n * time + pos] = col[f].im;
            }
        }
    }
    ChannelTensor::from_grid(grid, n, time, antennas, GridSource::Target)
}

/// First-time-slice readout of a fitted grid.
pub fn extract_estimate(tensor: &ChannelTensor) -> Result<CxMat> {
    tensor.time_slice(0)
}

/// Denoised stage-two result for one user.
#[derive(Debug, Clone)]
pub struct Stage2Estimate {
    pub user: usize,
    pub lambda_hat: CxMat,
    pub loss_trace: Vec<f64>,
}

/// Full stage-two pass: replicate the estimate, fit a fresh network to the
/// grid, and read out the denoised first time slice.
pub fn run_stage2(
    est: &Stage1Estimate,
    cfg: &DipConfig,
    master_seed: u64,
) -> Result<Stage2Estimate> {
    let subcarriers = est.lambda_hat.rows();
    let antennas = est.lambda_hat.cols();
    cfg.validate(subcarriers, antennas)?;
    let target = build_tensor(est, cfg.time_size)?;
    let mut rng = derive_rng(master_seed, &format!("dip/h{}/u{}", cfg.seed, est.user));
    let model = DipModel::new(cfg, subcarriers, antennas, &mut rng)?;
    let (fitted, loss_trace) = dip_fit(model, &target, cfg)?;
    let output = fitted.forward()?;
    let lambda_hat = extract_estimate(&output)?;
    Ok(Stage2Estimate { user: est.user, lambda_hat, loss_trace })
}
