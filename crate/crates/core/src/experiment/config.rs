//! Experiment description, loadable from a TOML file.
//!
//! Every key has a matching command-line flag (`eta_floor` ↔ `--eta-floor`).
//! `eta0` and `eta_floor` default per optimizer: 0.8 / 0.02 for the SGD
//! family and 0.01 / 0.001 for Adam.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Activation, Architecture, LossKind};
use crate::optim::{
    AdamParams, LearningRateSchedule, MomentumPolicy, OptimizerKind, ReinforcementSchedule,
};

use super::Metric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerName {
    Backprop,
    Rsgd,
    Sgdm,
    Nag,
    Adam,
}

impl FromStr for OptimizerName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backprop" | "sgd" => Ok(OptimizerName::Backprop),
            "rsgd" => Ok(OptimizerName::Rsgd),
            "sgdm" => Ok(OptimizerName::Sgdm),
            "nag" => Ok(OptimizerName::Nag),
            "adam" => Ok(OptimizerName::Adam),
            other => Err(Error::Config(format!("unknown optimizer '{other}'"))),
        }
    }
}

impl fmt::Display for OptimizerName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerName::Backprop => "backprop",
            OptimizerName::Rsgd => "rsgd",
            OptimizerName::Sgdm => "sgdm",
            OptimizerName::Nag => "nag",
            OptimizerName::Adam => "adam",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleName {
    ExpGamma,
    PowerLaw,
}

impl FromStr for ScheduleName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp_gamma" | "exp-gamma" => Ok(ScheduleName::ExpGamma),
            "power_law" | "power-law" => Ok(ScheduleName::PowerLaw),
            other => Err(Error::Config(format!("unknown schedule '{other}'"))),
        }
    }
}

/// Momentum coefficient: a number, or `"adaptive"` for `ρ_t = Γ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoSetting {
    Fixed(f64),
    Named(RhoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoKeyword {
    Adaptive,
}

impl FromStr for RhoSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "adaptive" {
            return Ok(RhoSetting::Named(RhoKeyword::Adaptive));
        }
        s.parse::<f64>()
            .map(RhoSetting::Fixed)
            .map_err(|_| Error::Config(format!("rho must be a number or 'adaptive', got '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// Fresh synthetic teacher data drawn from the run seed.
    Teacher,
    /// Random subsets of the MNIST training pool.
    Mnist,
    /// A dataset file written by `gen-data`.
    File,
}

impl FromStr for DatasetSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "teacher" => Ok(DatasetSource::Teacher),
            "mnist" => Ok(DatasetSource::Mnist),
            "file" => Ok(DatasetSource::File),
            other => Err(Error::Config(format!("unknown dataset source '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub arch: String,
    pub activation: Activation,
    pub loss: LossKind,
    pub bias: bool,
    pub optimizer: OptimizerName,
    pub schedule: ScheduleName,
    pub gamma0: f64,
    pub lambda: f64,
    pub a0: f64,
    pub b0: f64,
    pub rho: RhoSetting,
    pub eta0: Option<f64>,
    pub beta: f64,
    pub eta_floor: Option<f64>,
    pub batch: usize,
    pub epochs: u64,
    pub dataset: DatasetSource,
    pub train_count: usize,
    pub test_count: usize,
    pub mnist_dir: PathBuf,
    pub data_file: Option<PathBuf>,
    pub metric: Metric,
    pub checkpoint_epochs: Vec<u64>,
    pub runs: usize,
    pub jobs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            arch: "100-400-200-10".into(),
            activation: Activation::Sigmoid,
            loss: LossKind::Quadratic,
            bias: true,
            optimizer: OptimizerName::Rsgd,
            schedule: ScheduleName::ExpGamma,
            gamma0: 0.9995,
            lambda: 0.0001,
            a0: 1.0,
            b0: 0.5,
            rho: RhoSetting::Named(RhoKeyword::Adaptive),
            eta0: None,
            beta: 0.999,
            eta_floor: None,
            batch: 100,
            epochs: 100,
            dataset: DatasetSource::Teacher,
            train_count: 1000,
            test_count: 1000,
            mnist_dir: PathBuf::from("data/mnist"),
            data_file: None,
            metric: Metric::Mse,
            checkpoint_epochs: vec![0, 30, 60, 80],
            runs: 1,
            jobs: 1,
        }
    }
}

impl TrainConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Copy with optimizer-dependent defaults filled in.
    pub fn resolved(&self) -> TrainConfig {
        let mut c = self.clone();
        let adam = c.optimizer == OptimizerName::Adam;
        c.eta0.get_or_insert(if adam { 0.01 } else { 0.8 });
        c.eta_floor.get_or_insert(if adam { 0.001 } else { 0.02 });
        c
    }

    pub fn widths(&self) -> Result<Vec<usize>> {
        Architecture::parse_widths(&self.arch)
    }

    pub fn architecture(&self) -> Result<Architecture> {
        Architecture::with_loss(self.widths()?, self.activation, self.loss, self.bias)
    }

    pub fn reinforcement_schedule(&self) -> Result<ReinforcementSchedule> {
        match self.schedule {
            ScheduleName::ExpGamma => ReinforcementSchedule::exp_gamma(self.gamma0, self.lambda),
            ScheduleName::PowerLaw => ReinforcementSchedule::power_law(self.a0, self.b0),
        }
    }

    fn momentum_policy(&self) -> Result<MomentumPolicy> {
        match self.rho {
            RhoSetting::Fixed(rho) if (0.0..=1.0).contains(&rho) => Ok(MomentumPolicy::Fixed(rho)),
            RhoSetting::Fixed(rho) => {
                Err(Error::Config(format!("rho must lie in [0, 1], got {rho}")))
            }
            RhoSetting::Named(RhoKeyword::Adaptive) => {
                Ok(MomentumPolicy::Adaptive(self.reinforcement_schedule()?))
            }
        }
    }

    pub fn optimizer_kind(&self) -> Result<OptimizerKind> {
        Ok(match self.optimizer {
            OptimizerName::Backprop => OptimizerKind::Backprop,
            OptimizerName::Rsgd => OptimizerKind::Rsgd(self.reinforcement_schedule()?),
            OptimizerName::Sgdm => OptimizerKind::Sgdm(self.momentum_policy()?),
            OptimizerName::Nag => OptimizerKind::Nag(self.momentum_policy()?),
            OptimizerName::Adam => OptimizerKind::Adam(AdamParams::default()),
        })
    }

    pub fn learning_rate(&self) -> Result<LearningRateSchedule> {
        let r = self.resolved();
        LearningRateSchedule::new(r.eta0.unwrap(), r.beta, r.eta_floor.unwrap())
    }

    /// Checks everything that can be checked without touching data files.
    pub fn validate(&self) -> Result<()> {
        let arch = self.architecture()?;
        self.optimizer_kind()?;
        self.learning_rate()?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch == 0 || self.train_count == 0 {
            return Err(Error::Config("batch and train_count must be >= 1".into()));
        }
        if !self.train_count.is_multiple_of(self.batch) {
            return Err(Error::Config(format!(
                "batch size {} does not divide train_count {}",
                self.batch, self.train_count
            )));
        }
        if self.test_count == 0 {
            return Err(Error::Config("test_count must be >= 1".into()));
        }
        if self.runs == 0 || self.jobs == 0 {
            return Err(Error::Config("runs and jobs must be >= 1".into()));
        }
        match self.dataset {
            DatasetSource::Mnist => {
                if arch.input_width() != 784 || arch.output_width() != 10 {
                    return Err(Error::Config(format!(
                        "MNIST needs a 784-...-10 network, got {}",
                        arch.widths_string()
                    )));
                }
            }
            DatasetSource::File if self.data_file.is_none() => {
                return Err(Error::Config("dataset = \"file\" needs data_file".into()));
            }
            _ => {}
        }
        if self.metric == Metric::Classification && self.dataset != DatasetSource::Mnist {
            return Err(Error::Config(
                "classification error needs a labelled (MNIST) dataset".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_resolve() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        let r = c.resolved();
        assert_eq!((r.eta0, r.eta_floor), (Some(0.8), Some(0.02)));
        let adam = TrainConfig {
            optimizer: OptimizerName::Adam,
            ..TrainConfig::default()
        }
        .resolved();
        assert_eq!((adam.eta0, adam.eta_floor), (Some(0.01), Some(0.001)));
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let c = TrainConfig {
            rho: RhoSetting::Fixed(0.9),
            optimizer: OptimizerName::Sgdm,
            ..TrainConfig::default()
        }
        .resolved();
        let back = TrainConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
        assert!(TrainConfig::from_toml_str("bogus = 1").is_err());
        let partial =
            TrainConfig::from_toml_str("optimizer = \"nag\"\nrho = \"adaptive\"\nbatch = 50")
                .unwrap();
        assert_eq!(partial.batch, 50);
        assert_eq!(partial.optimizer, OptimizerName::Nag);
    }

    #[test]
    fn rejects_bad_batch() {
        let c = TrainConfig {
            batch: 300,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn rho_parsing() {
        assert_eq!(
            "adaptive".parse::<RhoSetting>().unwrap(),
            RhoSetting::Named(RhoKeyword::Adaptive)
        );
        assert_eq!("0.9".parse::<RhoSetting>().unwrap(), RhoSetting::Fixed(0.9));
        assert!("fast".parse::<RhoSetting>().is_err());
    }
}
