//! Stage one: supervised per-antenna estimation from one-bit pilot captures.
//!
//! For each antenna, the received pilot slots are turned into training
//! pairs: the input is the transmitted frequency-domain pilot and the label
//! is the received block's spectrum derotated by the pilot's conjugate.
//! After the quantizer's known linear-equivalent gain is divided out, each
//! label is an unbiased (if heavily distorted) view of the per-subcarrier
//! channel, so a small network trained on the pairs and then averaged over
//! random probe inputs converges toward the channel itself.

pub mod model;
pub mod train;

pub use model::MlpModel;
pub use train::{generate_estimate, train_antenna_net};

use std::io::Write;

use serde::Deserialize;

use crate::airlink::{bussgang_gain, CxMat, PilotBook, RxInterval, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::{derive_rng, Cx, DftPlan, Tensor};

/// Training hyperparameters for the per-antenna networks.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage1Config {
    /// Full-batch epochs per antenna network.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Adaptive-moment learning rate.
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// Probe inputs averaged into each estimate.
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Extra seed component so hyperparameter sets get disjoint streams.
    #[serde(default)]
    pub seed: u64,
}

fn default_epochs() -> usize {
    500
}

fn default_lr() -> f64 {
    1e-3
}

fn default_probes() -> usize {
    64
}

impl Default for Stage1Config {
    fn default() -> Self {
        Self { epochs: default_epochs(), lr: default_lr(), probes: default_probes(), seed: 0 }
    }
}

impl Stage1Config {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.probes == 0 {
            return Err(Error::InvalidConfig("epochs and probes must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate {} not positive", self.lr)));
        }
        Ok(())
    }
}

/// Training label for one pilot slot and antenna: the spectrum of the
/// received block, derotated subcarrier-by-subcarrier by the conjugate
/// pilot. With unit-modulus pilots the conjugate is the inverse, so in an
/// ideal linear chain the label equals the frequency response exactly.
pub fn make_label(plan: &DftPlan, r_m: &[Cx], x: &[Cx]) -> Result<Vec<Cx>> {
    if x.len() != plan.size() || r_m.len() != plan.size() {
        return Err(Error::DimMismatch(format!(
            "label inputs of length {} / {} against {}-point transform",
            r_m.len(),
            x.len(),
            plan.size()
        )));
    }
    for (index, xn) in x.iter().enumerate() {
        let modulus = xn.norm();
        if (modulus - 1.0).abs() > 1e-9 {
            return Err(Error::NonUnitPilot { index, modulus });
        }
    }
    let spectrum = plan.dft(r_m)?;
    Ok(spectrum.iter().zip(x).map(|(s, xn)| s * xn.conj()).collect())
}

/// Input/label pairs for one (user, antenna) network, columns as pairs.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub user: usize,
    pub antenna: usize,
    inputs: Tensor,
    labels: Tensor,
}

impl TrainingSet {
    pub fn new(user: usize, antenna: usize, inputs: Tensor, labels: Tensor) -> Result<Self> {
        if inputs.rows() != labels.rows() || inputs.cols() != labels.cols() {
            return Err(Error::DimMismatch(format!(
                "inputs {}x{} against labels {}x{}",
                inputs.rows(),
                inputs.cols(),
                labels.rows(),
                labels.cols()
            )));
        }
        if inputs.cols() == 0 || inputs.rows() == 0 || inputs.rows() % 2 != 0 {
            return Err(Error::InvalidConfig(
                "training set needs at least one pair of even-height columns".into(),
            ));
        }
        Ok(Self { user, antenna, inputs, labels })
    }

    /// Builds the pair set for one antenna from a received interval.
    ///
    /// Labels are divided by `gain`, the receive chain's linear-equivalent
    /// gain: the one-bit front end shrinks amplitudes by that known factor,
    /// and dividing it out lets the network regress the channel itself
    /// rather than its compressed image. A bypassed quantizer has gain one,
    /// leaving labels untouched.
    pub fn from_interval(
        rx: &RxInterval,
        book: &PilotBook,
        user: usize,
        antenna: usize,
        gain: f64,
    ) -> Result<Self> {
        let slots = rx.user_slots(user, book.pilots_per_user())?;
        let n = book.subcarriers();
        let plan = DftPlan::new(n);
        let pairs = slots.len();
        let mut inputs = Tensor::zeros(2 * n, pairs);
        let mut labels = Tensor::zeros(2 * n, pairs);
        for (p, slot) in slots.iter().enumerate() {
            let x = book.symbol(user, slot.pilot);
            let label = make_label(&plan, slot.samples.col(antenna), x)?;
            for sc in 0..n {
                inputs.data_mut()[sc * pairs + p] = x[sc].re;
                inputs.data_mut()[(n + sc) * pairs + p] = x[sc].im;
                labels.data_mut()[sc * pairs + p] = label[sc].re / gain;
                labels.data_mut()[(n + sc) * pairs + p] = label[sc].im / gain;
            }
        }
        Self::new(user, antenna, inputs, labels)
    }

    /// Squared norm of the per-subcarrier mean label — the linearized
    /// least-squares estimate implied by this antenna's pairs.
    pub fn label_mean_norm_sq(&self) -> f64 {
        let pairs = self.pair_count() as f64;
        (0..self.labels.rows())
            .map(|r| {
                let s: f64 = self.labels.row(r).iter().sum();
                (s / pairs).powi(2)
            })
            .sum()
    }

    pub fn pair_count(&self) -> usize {
        self.inputs.cols()
    }

    pub fn subcarriers(&self) -> usize {
        self.inputs.rows() / 2
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    pub fn labels(&self) -> &Tensor {
        &self.labels
    }
}

/// Per-user output of stage one: the stacked per-antenna estimates and the
/// training-loss trace of every antenna network.
#[derive(Debug, Clone)]
pub struct Stage1Estimate {
    pub user: usize,
    /// Subcarriers-by-antennas estimate of the frequency response.
    pub lambda_hat: CxMat,
    /// `loss_traces[m][epoch]` is antenna `m`'s training loss.
    pub loss_traces: Vec<Vec<f64>>,
}

impl Stage1Estimate {
    /// Writes the loss traces as CSV with columns `antenna,epoch,loss`.
    pub fn write_loss_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "antenna,epoch,loss")?;
        for (antenna, trace) in self.loss_traces.iter().enumerate() {
            for (epoch, loss) in trace.iter().enumerate() {
                writeln!(w, "{antenna},{epoch},{loss:.6e}")?;
            }
        }
        Ok(())
    }
}

/// Per-subcarrier noise variance of a single training label.
///
/// A label is the derotated, gain-corrected receive block, so it carries the
/// thermal noise plus — when the front end quantizes — the quantizer's
/// distortion power referred through the inverse gain.
pub fn label_noise_var(cfg: &SystemConfig) -> f64 {
    let thermal = cfg.noise_var();
    if cfg.quantize {
        (std::f64::consts::PI / 2.0 - 1.0) * (1.0 + thermal) + thermal
    } else {
        thermal
    }
}

/// Trains one network per antenna on user `k`'s pilot slots and stacks the
/// per-antenna estimates into a subcarriers-by-antennas matrix.
///
/// Every antenna starts from the same initial weights and is read out with
/// the same probe inputs (both derived from the experiment seed), so the
/// result for antenna `m` depends only on column `m` of the received
/// blocks and permuting antennas permutes the estimate columns.
///
/// Averaging a trained network over random probes systematically shrinks the
/// readout toward zero, so the stacked estimate is rescaled to the energy of
/// the per-antenna label means (the least-squares estimate the same slots
/// imply) with the expected label-noise inflation subtracted.  The rescale is
/// a single global factor: it uses nothing beyond the training labels and
/// preserves both per-antenna directions and cross-antenna structure.
pub fn run_stage1(
    rx: &RxInterval,
    book: &PilotBook,
    user: usize,
    cfg: &SystemConfig,
    hp: &Stage1Config,
) -> Result<Stage1Estimate> {
    hp.validate()?;
    let gain = bussgang_gain(cfg);
    let n = book.subcarriers();
    let init_rng = derive_rng(cfg.seed, &format!("stage1/init/h{}/u{}", hp.seed, user));
    let probe_rng = derive_rng(cfg.seed, &format!("stage1/probe/h{}/u{}", hp.seed, user));

    let mut lambda_hat = CxMat::zeros(n, cfg.antennas);
    let mut loss_traces = Vec::with_capacity(cfg.antennas);
    let mut label_mean_sq = 0.0;
    for m in 0..cfg.antennas {
        let ts = TrainingSet::from_interval(rx, book, user, m, gain)?;
        label_mean_sq += ts.label_mean_norm_sq();
        let (net, trace) = train_antenna_net(&ts, hp, &mut init_rng.clone())?;
        let estimate = generate_estimate(&net, hp.probes, &mut probe_rng.clone())?;
        lambda_hat.col_mut(m).copy_from_slice(&estimate);
        loss_traces.push(trace);
    }
    if lambda_hat.data().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::TrainingDiverged { epoch: hp.epochs });
    }

    let inflation =
        (cfg.antennas * n) as f64 * label_noise_var(cfg) / cfg.pilots_per_user as f64;
    let reference_sq = (label_mean_sq - inflation).max(0.0);
    let readout_sq = lambda_hat.norm_sq();
    if readout_sq > 0.0 {
        let scale = (reference_sq / readout_sq).sqrt();
        for z in lambda_hat.data_mut() {
            *z *= scale;
        }
    }
    Ok(Stage1Estimate { user, lambda_hat, loss_traces })
}
