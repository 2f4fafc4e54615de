//! Experiment configuration and its `key = value` text format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which iteration to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    /// State evolution only; no simulated trials.
    Se,
    OampSvd,
    OampSvdOptimized,
    OampW,
    OampWOptimized,
    Amp,
    Vamp,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Se => "se",
            Algorithm::OampSvd => "oamp-svd",
            Algorithm::OampSvdOptimized => "oamp-svd-optimized",
            Algorithm::OampW => "oamp-w",
            Algorithm::OampWOptimized => "oamp-w-optimized",
            Algorithm::Amp => "amp",
            Algorithm::Vamp => "vamp",
        }
    }

    pub fn optimized_le(&self) -> bool {
        matches!(self, Algorithm::OampSvdOptimized | Algorithm::OampWOptimized)
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "se" => Algorithm::Se,
            "oamp-svd" => Algorithm::OampSvd,
            "oamp-svd-optimized" => Algorithm::OampSvdOptimized,
            "oamp-w" | "oamp" => Algorithm::OampW,
            "oamp-w-optimized" | "oamp-optimized" => Algorithm::OampWOptimized,
            "amp" => Algorithm::Amp,
            "vamp" => Algorithm::Vamp,
            _ => return Err(Error::Config(format!("unknown algorithm '{s}'"))),
        })
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the orthogonalization coefficient B is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BStrategy {
    Integral,
    Derivative,
    MonteCarlo { samples: usize },
    Ep,
    /// B = 0 and C = 1: the prototype is used as is.
    Zero,
}

pub const MIN_MC_SAMPLES: usize = 1000;

impl FromStr for BStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let b = match head {
            "integral" => BStrategy::Integral,
            "derivative" => BStrategy::Derivative,
            "ep" => BStrategy::Ep,
            "zero" | "none" => BStrategy::Zero,
            "monte-carlo" | "montecarlo" => {
                let samples = match arg {
                    Some(a) => a
                        .parse()
                        .map_err(|_| Error::Config(format!("bad sample count '{a}'")))?,
                    None => 100_000,
                };
                if samples < MIN_MC_SAMPLES {
                    return Err(Error::Config(format!(
                        "monte-carlo needs at least {MIN_MC_SAMPLES} samples, got {samples}"
                    )));
                }
                return Ok(BStrategy::MonteCarlo { samples });
            }
            _ => return Err(Error::Config(format!("unknown b_strategy '{s}'"))),
        };
        if arg.is_some() {
            return Err(Error::Config(format!("b_strategy '{head}' takes no argument")));
        }
        Ok(b)
    }
}

impl fmt::Display for BStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BStrategy::Integral => f.write_str("integral"),
            BStrategy::Derivative => f.write_str("derivative"),
            BStrategy::MonteCarlo { samples } => write!(f, "monte-carlo:{samples}"),
            BStrategy::Ep => f.write_str("ep"),
            BStrategy::Zero => f.write_str("zero"),
        }
    }
}

/// Soft-threshold level as a function of the input error variance v.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdRule {
    /// theta = v
    Variance,
    /// theta = c * sqrt(v)
    ScaledStd(f64),
}

impl ThresholdRule {
    pub fn theta(&self, v: f64) -> f64 {
        match self {
            ThresholdRule::Variance => v,
            ThresholdRule::ScaledStd(c) => c * v.max(0.0).sqrt(),
        }
    }
}

impl FromStr for ThresholdRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if matches!(s, "variance" | "v_r" | "literal") {
            return Ok(ThresholdRule::Variance);
        }
        if let Some(c) = s.strip_prefix("scaled-std:") {
            let c: f64 = c
                .parse()
                .map_err(|_| Error::Config(format!("bad threshold scale '{c}'")))?;
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::Config(format!("threshold scale must be >= 0, got {c}")));
            }
            return Ok(ThresholdRule::ScaledStd(c));
        }
        Err(Error::Config(format!("unknown threshold_rule '{s}'")))
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdRule::Variance => f.write_str("variance"),
            ThresholdRule::ScaledStd(c) => write!(f, "scaled-std:{c}"),
        }
    }
}

/// Prototype denoiser used by the non-linear step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DenoiserChoice {
    SoftThreshold,
    BgMmse,
    Identity,
}

impl FromStr for DenoiserChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft-threshold" | "soft" => Ok(DenoiserChoice::SoftThreshold),
            "bg-mmse" | "mmse" => Ok(DenoiserChoice::BgMmse),
            "identity" => Ok(DenoiserChoice::Identity),
            _ => Err(Error::Config(format!("unknown denoiser '{s}'"))),
        }
    }
}

impl fmt::Display for DenoiserChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DenoiserChoice::SoftThreshold => "soft-threshold",
            DenoiserChoice::BgMmse => "bg-mmse",
            DenoiserChoice::Identity => "identity",
        })
    }
}

/// How the sensing matrix is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumKind {
    /// Haar U, V with a geometric singular-value profile.
    Geometric,
    /// Dense A with IID N(0, 1/m) entries.
    IidgSample,
}

impl FromStr for SpectrumKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(SpectrumKind::Geometric),
            "iidg-sample" | "iidg" => Ok(SpectrumKind::IidgSample),
            _ => Err(Error::Config(format!("unknown spectrum '{s}'"))),
        }
    }
}

/// Where the per-iteration (alpha, v) fed to the local estimators come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceSource {
    /// State evolution run in lockstep.
    Se,
    /// Measured against the true signal. Diagnostics only.
    Oracle,
}

impl FromStr for VarianceSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "se" => Ok(VarianceSource::Se),
            "oracle" => Ok(VarianceSource::Oracle),
            _ => Err(Error::Config(format!("unknown variance_source '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub n: usize,
    pub m_over_n: f64,
    pub kappa: f64,
    pub lambda: f64,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    pub iterations: usize,
    pub trials: usize,
    pub algorithm: Algorithm,
    pub b_strategy: BStrategy,
    pub threshold_rule: ThresholdRule,
    pub denoiser: DenoiserChoice,
    pub spectrum: SpectrumKind,
    pub variance_source: VarianceSource,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    /// The desk-scale compressed-sensing setup.
    fn default() -> Self {
        ExperimentConfig {
            experiment: "desk".into(),
            n: 1024,
            m_over_n: 0.65,
            kappa: 10.0,
            lambda: 0.25,
            snr_db: Some(45.0),
            iterations: 30,
            trials: 100,
            algorithm: Algorithm::OampW,
            b_strategy: BStrategy::Integral,
            threshold_rule: ThresholdRule::Variance,
            denoiser: DenoiserChoice::SoftThreshold,
            spectrum: SpectrumKind::Geometric,
            variance_source: VarianceSource::Se,
            seed: 20240101,
        }
    }
}

impl ExperimentConfig {
    pub fn m(&self) -> usize {
        ((self.m_over_n * self.n as f64).round() as usize).max(1)
    }

    pub fn sigma2(&self) -> f64 {
        match self.snr_db {
            Some(db) => 10f64.powf(-db / 10.0),
            None => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::Config(format!("n must be >= 8, got {}", self.n)));
        }
        if !(self.m_over_n > 0.0 && self.m_over_n <= 1.0) {
            return Err(Error::Config(format!("m_over_n must be in (0, 1], got {}", self.m_over_n)));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if !(self.kappa.is_finite() && self.kappa >= 1.0) {
            return Err(Error::Config(format!("kappa must be >= 1, got {}", self.kappa)));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Config(format!("lambda must be in (0, 1], got {}", self.lambda)));
        }
        if let Some(db) = self.snr_db {
            if db.is_nan() {
                return Err(Error::Config("snr_db is NaN".into()));
            }
        }
        if self.spectrum == SpectrumKind::IidgSample && self.algorithm != Algorithm::Amp {
            return Err(Error::Config("spectrum = iidg-sample is only supported with algorithm = amp".into()));
        }
        Ok(())
    }

    /// Parses the `key = value` format. Blank lines and `#` comments are
    /// ignored; values may be double-quoted. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, strip(e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
        }
        match key {
            "experiment" => self.experiment = value.to_string(),
            "n" => self.n = num(key, value)?,
            "m_over_n" => self.m_over_n = num(key, value)?,
            "kappa" => self.kappa = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "snr_db" => {
                self.snr_db = match value {
                    "inf" | "+inf" | "none" | "" => None,
                    _ => Some(num(key, value)?),
                }
            }
            "iterations" => self.iterations = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "algorithm" => self.algorithm = value.parse()?,
            "b_strategy" => self.b_strategy = value.parse()?,
            "threshold_rule" => self.threshold_rule = value.parse()?,
            "denoiser" => self.denoiser = value.parse()?,
            "spectrum" => self.spectrum = value.parse()?,
            "variance_source" => self.variance_source = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Renders the config in the format accepted by [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let snr = match self.snr_db {
            Some(db) => db.to_string(),
            None => "inf".to_string(),
        };
        let spectrum = match self.spectrum {
            SpectrumKind::Geometric => "geometric",
            SpectrumKind::IidgSample => "iidg-sample",
        };
        let source = match self.variance_source {
            VarianceSource::Se => "se",
            VarianceSource::Oracle => "oracle",
        };
        format!(
            "experiment = {}\nn = {}\nm_over_n = {}\nkappa = {}\nlambda = {}\nsnr_db = {}\n\
             iterations = {}\ntrials = {}\nalgorithm = {}\nb_strategy = {}\nthreshold_rule = {}\n\
             denoiser = {}\nspectrum = {}\nvariance_source = {}\nseed = {}\n",
            self.experiment,
            self.n,
            self.m_over_n,
            self.kappa,
            self.lambda,
            snr,
            self.iterations,
            self.trials,
            self.algorithm,
            self.b_strategy,
            self.threshold_rule,
            self.denoiser,
            spectrum,
            source,
            self.seed
        )
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(s) => s,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_desk_file() {
        let text = "# desk scale\nn = 1024\nm_over_n = 0.65\nkappa = 10\nlambda = 0.25\n\
                    snr_db = 45 # dB\niterations = 30\ntrials = 100\nalgorithm = \"oamp-w\"\n\
                    b_strategy = integral\nthreshold_rule = variance\nseed = 7\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.n, 1024);
        assert_eq!(cfg.m(), 666);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.algorithm, Algorithm::OampW);
        assert!((cfg.sigma2() - 10f64.powf(-4.5)).abs() < 1e-15);
    }

    #[test]
    fn round_trips_through_text() {
        let cfg = ExperimentConfig {
            b_strategy: BStrategy::MonteCarlo { samples: 5000 },
            threshold_rule: ThresholdRule::ScaledStd(1.5),
            snr_db: None,
            ..ExperimentConfig::default()
        };
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::parse("n = 4").is_err());
        assert!(ExperimentConfig::parse("m_over_n = 1.5").is_err());
        assert!(ExperimentConfig::parse("trials = 0").is_err());
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
        assert!(ExperimentConfig::parse("n = 10\nn = 12").is_err());
        assert!(ExperimentConfig::parse("b_strategy = monte-carlo:10").is_err());
        assert!(ExperimentConfig::parse("just words").is_err());
    }

    #[test]
    fn infinite_snr_is_noiseless() {
        let cfg = ExperimentConfig::parse("snr_db = inf").unwrap();
        assert_eq!(cfg.sigma2(), 0.0);
    }
}
