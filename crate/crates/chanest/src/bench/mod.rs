//! Benchmark harness: accuracy metric, classical baselines, experiment
//! configuration, SNR sweeps, and CSV reporting.

pub mod baselines;
pub mod sweep;

pub use baselines::{bussgang_ls_baseline, ls_unquantized_baseline};
pub use sweep::{run_demo, run_sweep, DemoReport};

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use crate::airlink::{CxMat, SystemConfig};
use crate::error::{Error, Result};
use crate::stage1::Stage1Config;
use crate::stage2::DipConfig;

/// Lowest reportable error: exact recoveries clamp here instead of −∞ dB.
pub const NMSE_FLOOR_DB: f64 = -100.0;

/// Normalized squared error in dB: `10 log10(‖est − truth‖² / ‖truth‖²)`,
/// floored at −100 dB. A zero-energy truth is rejected.
pub fn nmse(est: &CxMat, truth: &CxMat) -> Result<f64> {
    Ok(nmse_db_from_linear(nmse_linear(est, truth)?))
}

/// The same ratio before the dB map, for averaging across realizations.
pub fn nmse_linear(est: &CxMat, truth: &CxMat) -> Result<f64> {
    let denom = truth.norm_sq();
    if denom == 0.0 {
        return Err(Error::ZeroTruth);
    }
    Ok(est.dist_sq(truth)? / denom)
}

/// Maps a linear error ratio to floored dB.
pub fn nmse_db_from_linear(linear: f64) -> f64 {
    let db = 10.0 * linear.log10();
    if db.is_nan() {
        return NMSE_FLOOR_DB;
    }
    db.max(NMSE_FLOOR_DB)
}

/// The estimators a sweep can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Stage one followed by the stage-two denoiser.
    Pipeline,
    /// Stage one alone.
    Stage1Only,
    /// Least squares on the ideal (unquantized) receive chain.
    LsUnquantized,
    /// Least squares on the one-bit chain after dividing out its
    /// linear-equivalent gain.
    BussgangLs,
}

impl Method {
    pub const ALL: [Method; 4] =
        [Method::Pipeline, Method::Stage1Only, Method::LsUnquantized, Method::BussgangLs];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pipeline => "pipeline",
            Method::Stage1Only => "stage1-only",
            Method::LsUnquantized => "ls-unquantized",
            Method::BussgangLs => "bussgang-ls",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown method {s:?}; expected one of pipeline, stage1-only, ls-unquantized, bussgang-ls"
                ))
            })
    }

    /// True when the method needs the stage-one networks.
    pub fn needs_stage1(self) -> bool {
        matches!(self, Method::Pipeline | Method::Stage1Only)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sweep schedule: which SNR points, how many realizations, which methods.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_snr_points")]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// When true, every user is estimated and the NMSE is averaged over
    /// users; default evaluates user 0 only (users are statistically
    /// identical and this divides the runtime by the user count).
    #[serde(default)]
    pub eval_all_users: bool,
    /// When true, the report's wall_time_s column carries measured
    /// seconds; default writes zeros so repeated runs are byte-identical.
    #[serde(default)]
    pub timing: bool,
}

fn default_snr_points() -> Vec<f64> {
    (-2..=6).map(|i| (i * 5) as f64).collect()
}

fn default_realizations() -> usize {
    20
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            snr_db: default_snr_points(),
            realizations: default_realizations(),
            methods: default_methods(),
            eval_all_users: false,
            timing: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one SNR point".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one method".into()));
        }
        if self.realizations == 0 {
            return Err(Error::InvalidConfig("sweep needs at least one realization".into()));
        }
        Ok(())
    }
}

/// Complete experiment description, usually loaded from a TOML file with
/// sections `[system]`, `[stage1]`, `[dip]`, `[sweep]`. Every field has a
/// default, so an empty file is a valid experiment.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub stage1: Stage1Config,
    pub dip: DipConfig,
    pub sweep: SweepConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.stage1.validate()?;
        self.sweep.validate()?;
        let needs_dip = self.sweep.methods.contains(&Method::Pipeline);
        if needs_dip {
            self.dip.validate(self.system.subcarriers, self.system.antennas)?;
        }
        Ok(())
    }
}

/// One report line: the mean NMSE of one method at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub snr_db: f64,
    pub method: Method,
    pub nmse_db: f64,
    pub realizations: usize,
    pub seed: u64,
    pub wall_time_s: f64,
}

/// Sweep results, sorted by (SNR, method) for stable output.
#[derive(Debug, Clone, Default)]
pub struct NmseReport {
    rows: Vec<ReportRow>,
}

impl NmseReport {
    pub fn new(mut rows: Vec<ReportRow>) -> Self {
        rows.sort_by(|a, b| {
            a.snr_db
                .total_cmp(&b.snr_db)
                .then_with(|| a.method.name().cmp(b.method.name()))
        });
        Self { rows }
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    /// The mean NMSE for one (SNR, method) cell, if present.
    pub fn lookup(&self, snr_db: f64, method: Method) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.snr_db == snr_db && r.method == method)
            .map(|r| r.nmse_db)
    }

    /// Serializes as CSV: fixed header, six-decimal floats, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("snr_db,method,nmse_db,realizations,seed,wall_time_s\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.6},{},{:.6},{},{},{:.6}\n",
                r.snr_db, r.method, r.nmse_db, r.realizations, r.seed, r.wall_time_s
            ));
        }
        out
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn write_to_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
