//! Training runs, evaluation, multi-seed suites and CSV output.

mod config;
mod suite;

pub use config::{DatasetSource, OptimizerName, RhoKeyword, RhoSetting, ScheduleName, TrainConfig};
pub use suite::{aggregate_csv, run_suite, AggregateRow, DataCache, RunSummary, SuiteReport};

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::BatchPlan;
use crate::data::{generate_teacher, read_dataset, subsample, LabeledDataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::{batch_gradient, predict, NetworkParams};
use crate::optim::OptimizerState;
use crate::rng::{RngStream, StreamId};

/// Error measure reported per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Mean over examples of `½|y − y*|²`.
    Mse,
    /// Fraction of examples whose argmax output differs from the target's.
    #[serde(alias = "classification_error")]
    Classification,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Metric::Mse),
            "classification" | "classification_error" | "classification-error" => {
                Ok(Metric::Classification)
            }
            other => Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: u64,
    pub train_error: f64,
    pub test_error: f64,
    pub eta: f64,
    /// Reinforcement probability at the last update of the epoch, when the
    /// optimizer has one.
    pub gamma: Option<f64>,
    pub wall_time_s: f64,
}

impl MetricsRecord {
    /// Equal in everything except timing.
    pub fn same_values(&self, other: &MetricsRecord) -> bool {
        self.epoch == other.epoch
            && self.train_error.to_bits() == other.train_error.to_bits()
            && self.test_error.to_bits() == other.test_error.to_bits()
            && self.eta.to_bits() == other.eta.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    Diverged {
        epoch: u64,
        step: u64,
        reason: String,
    },
}

impl RunStatus {
    pub fn is_diverged(&self) -> bool {
        matches!(self, RunStatus::Diverged { .. })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<MetricsRecord>,
    pub params: NetworkParams,
    /// `(epoch, weights)` pairs; epoch 0 is the initialization.
    pub checkpoints: Vec<(u64, NetworkParams)>,
    pub status: RunStatus,
    pub steps: u64,
    pub lookahead_evaluations: u64,
    pub buffer_count: usize,
}

impl TrainOutcome {
    pub fn final_test_error(&self) -> Option<f64> {
        self.history.last().map(|r| r.test_error)
    }

    pub fn metrics_csv(&self) -> String {
        metrics_csv(&self.history)
    }
}

/// Row chunk used when evaluating large datasets.
const EVAL_CHUNK: usize = 1000;

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Scores outputs against targets. NaN outputs make the MSE NaN.
pub fn score(outputs: &Matrix, targets: &Matrix, metric: Metric) -> Result<f64> {
    if outputs.shape() != targets.shape() {
        return Err(Error::Shape(format!(
            "outputs {:?} vs targets {:?}",
            outputs.shape(),
            targets.shape()
        )));
    }
    let n = outputs.rows();
    if n == 0 {
        return Err(Error::InsufficientData(
            "cannot evaluate an empty dataset".into(),
        ));
    }
    Ok(score_sum(outputs, targets, metric) / n as f64)
}

fn score_sum(outputs: &Matrix, targets: &Matrix, metric: Metric) -> f64 {
    let mut total = 0.0;
    for r in 0..outputs.rows() {
        let (y, t) = (outputs.row(r), targets.row(r));
        total += match metric {
            Metric::Mse => 0.5 * y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            Metric::Classification => f64::from(u8::from(argmax(y) != argmax(t))),
        };
    }
    total
}

/// Error of `params` on `dataset`.
pub fn evaluate(params: &NetworkParams, dataset: &LabeledDataset, metric: Metric) -> Result<f64> {
    let n = dataset.len();
    if n == 0 {
        return Err(Error::InsufficientData(
            "cannot evaluate an empty dataset".into(),
        ));
    }
    let mut total = 0.0;
    let mut start = 0;
    while start < n {
        let end = (start + EVAL_CHUNK).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let out = predict(params, &dataset.inputs().select_rows(&idx))?;
        total += score_sum(&out, &dataset.targets().select_rows(&idx), metric);
        start = end;
    }
    Ok(total / n as f64)
}

/// Builds the train and test sets for `config`. `pool` supplies MNIST
/// examples when the config asks for them.
pub fn prepare_data(
    config: &TrainConfig,
    pool: Option<&LabeledDataset>,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let widths = config.widths()?;
    let (n_in, n_out) = (widths[0], *widths.last().unwrap());
    let (train, test) = match config.dataset {
        DatasetSource::Teacher => generate_teacher(
            n_in,
            n_out,
            config.train_count,
            config.test_count,
            &mut RngStream::new(config.seed, StreamId::DataGen),
        )?,
        DatasetSource::Mnist => {
            let pool = pool.ok_or_else(|| Error::Config("MNIST pool not loaded".into()))?;
            subsample(
                pool,
                config.train_count,
                config.test_count,
                &mut RngStream::new(config.seed, StreamId::Subsample),
            )?
        }
        DatasetSource::File => {
            let path = config
                .data_file
                .as_ref()
                .ok_or_else(|| Error::Config("data_file not set".into()))?;
            let all = read_dataset(path)?;
            let need = config.train_count + config.test_count;
            if all.len() < need {
                return Err(Error::InsufficientData(format!(
                    "{} holds {} examples, {need} requested",
                    path.display(),
                    all.len()
                )));
            }
            (
                all.slice(0, config.train_count),
                all.slice(config.train_count, need),
            )
        }
    };
    if train.input_width() != n_in || train.target_width() != n_out {
        return Err(Error::Shape(format!(
            "dataset is {}->{} but the network is {}",
            train.input_width(),
            train.target_width(),
            config.arch
        )));
    }
    Ok((train, test))
}

/// Loads data as `config` describes and trains.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let pool = match config.dataset {
        DatasetSource::Mnist => Some(DataCache::default().mnist(&config.mnist_dir)?),
        _ => None,
    };
    let (train_set, test_set) = prepare_data(config, pool.as_deref())?;
    train_on(config, &train_set, &test_set)
}

/// Runs the training loop on prepared data.
pub fn train_on(
    config: &TrainConfig,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.len() != config.train_count {
        return Err(Error::Config(format!(
            "training set has {} examples, config says {}",
            train_set.len(),
            config.train_count
        )));
    }
    let arch = config.architecture()?;
    let lr = config.learning_rate()?;
    let params = NetworkParams::init(arch, &mut RngStream::new(config.seed, StreamId::WeightInit));
    let mut state = OptimizerState::for_params(config.optimizer_kind()?, &params);
    let mut coins = RngStream::new(config.seed, StreamId::Reinforcement);
    let mut plan = BatchPlan::new(
        train_set.len(),
        config.batch,
        RngStream::new(config.seed, StreamId::Shuffle),
    )?;

    let mut params = params;
    let mut history = Vec::with_capacity(config.epochs as usize);
    let mut checkpoints = Vec::new();
    if config.checkpoint_epochs.contains(&0) {
        checkpoints.push((0, params.clone()));
    }
    let mut status = RunStatus::Completed;

    'epochs: for epoch in 1..=config.epochs {
        let started = Instant::now();
        let eta = lr.eta_at(epoch);
        let mut gamma = None;
        for _ in 0..plan.batches_per_epoch() {
            gamma = state.next_gamma();
            let (x, y) = plan.next_batch(train_set);
            state.step(&mut params, eta, &mut coins, |p| {
                Ok(batch_gradient(p, &x, &y)?.0)
            })?;
            if !params.is_finite() {
                status = RunStatus::Diverged {
                    epoch,
                    step: state.step_count(),
                    reason: "non-finite weight".into(),
                };
                break 'epochs;
            }
        }
        state.end_epoch();
        let train_error = evaluate(&params, train_set, config.metric)?;
        let test_error = evaluate(&params, test_set, config.metric)?;
        history.push(MetricsRecord {
            epoch,
            train_error,
            test_error,
            eta,
            gamma,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        if !train_error.is_finite() || !test_error.is_finite() {
            status = RunStatus::Diverged {
                epoch,
                step: state.step_count(),
                reason: "non-finite loss".into(),
            };
            break;
        }
        if config.checkpoint_epochs.contains(&epoch) {
            checkpoints.push((epoch, params.clone()));
        }
    }

    Ok(TrainOutcome {
        history,
        params,
        checkpoints,
        status,
        steps: state.step_count(),
        lookahead_evaluations: state.lookahead_evaluations(),
        buffer_count: state.kind().buffer_count(),
    })
}

pub const METRICS_HEADER: &str = "epoch,train_error,test_error,eta,gamma,wall_time_s";

pub fn metrics_csv(history: &[MetricsRecord]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in history {
        let gamma = r.gamma.map(|g| g.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch, r.train_error, r.test_error, r.eta, gamma, r.wall_time_s
        )
        .unwrap();
    }
    out
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Architecture, LossKind};
    use crate::optim::ReinforcementSchedule;

    fn toy(optimizer: OptimizerName) -> TrainConfig {
        TrainConfig {
            arch: "6-5-3".into(),
            optimizer,
            train_count: 40,
            test_count: 20,
            batch: 10,
            epochs: 5,
            checkpoint_epochs: vec![0, 2],
            ..TrainConfig::default()
        }
    }

    #[test]
    fn perfect_predictions_score_zero() {
        let t = Matrix::from_rows(&[vec![0.1, 0.9], vec![0.7, 0.2]]);
        assert_eq!(score(&t, &t, Metric::Mse).unwrap(), 0.0);
        assert_eq!(score(&t, &t, Metric::Classification).unwrap(), 0.0);
    }

    #[test]
    fn constant_classifier_on_balanced_data() {
        let mut targets = Matrix::zeros(100, 10);
        for r in 0..100 {
            targets[(r, r % 10)] = 1.0;
        }
        let mut outputs = Matrix::zeros(100, 10);
        for r in 0..100 {
            outputs[(r, 4)] = 1.0;
        }
        assert!((score(&outputs, &targets, Metric::Classification).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn misclassification_hand_count() {
        let outputs = Matrix::from_rows(&[
            vec![0.2, 0.5, 0.3],
            vec![0.4, 0.4, 0.2], // tie, lowest index wins -> 0
            vec![0.1, 0.1, 0.8],
            vec![0.6, 0.3, 0.1],
        ]);
        let targets = Matrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ]);
        assert_eq!(
            score(&outputs, &targets, Metric::Classification).unwrap(),
            0.5
        );
        let mse = score(&outputs, &targets, Metric::Mse).unwrap();
        let hand = [
            0.04 + 0.25 + 0.09,
            0.16 + 0.36 + 0.04,
            0.81 + 0.01 + 0.64,
            0.16 + 0.09 + 0.01,
        ];
        assert!((mse - hand.iter().sum::<f64>() / 8.0).abs() < 1e-15);
    }

    #[test]
    fn chunked_evaluation_matches_direct() {
        let arch = Architecture::with_loss(
            vec![3, 4, 2],
            Activation::Sigmoid,
            LossKind::Quadratic,
            true,
        )
        .unwrap();
        let p = NetworkParams::init(arch, &mut RngStream::new(1, StreamId::WeightInit));
        let (d, _) =
            generate_teacher(3, 2, 2500, 1, &mut RngStream::new(1, StreamId::DataGen)).unwrap();
        let direct = score(&predict(&p, d.inputs()).unwrap(), d.targets(), Metric::Mse).unwrap();
        let chunked = evaluate(&p, &d, Metric::Mse).unwrap();
        assert!((direct - chunked).abs() < 1e-12);
    }

    #[test]
    fn single_update_run() {
        let cfg = TrainConfig {
            train_count: 10,
            batch: 10,
            epochs: 1,
            checkpoint_epochs: vec![],
            ..toy(OptimizerName::Backprop)
        };
        let out = train(&cfg).unwrap();
        assert_eq!(out.steps, 1);
        assert_eq!(out.history.len(), 1);
    }

    #[test]
    fn eta_below_floor_is_clamped() {
        let cfg = TrainConfig {
            eta0: Some(0.01),
            ..toy(OptimizerName::Backprop)
        };
        let out = train(&cfg).unwrap();
        assert!(out.history.iter().all(|r| r.eta == 0.02));
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = toy(OptimizerName::Rsgd);
        let (a, b) = (train(&cfg).unwrap(), train(&cfg).unwrap());
        assert!(a
            .history
            .iter()
            .zip(&b.history)
            .all(|(x, y)| x.same_values(y)));
        assert_eq!(a.params, b.params);
        assert_eq!(
            a.checkpoints.iter().map(|c| c.0).collect::<Vec<_>>(),
            vec![0, 2]
        );
    }

    #[test]
    fn logged_schedules_match_closed_forms() {
        let cfg = toy(OptimizerName::Rsgd);
        let out = train(&cfg).unwrap();
        let lr = cfg.learning_rate().unwrap();
        let sched = ReinforcementSchedule::exp_gamma(0.9995, 0.0001).unwrap();
        for r in &out.history {
            assert_eq!(r.eta, lr.eta_at(r.epoch));
            let last_step = r.epoch * 4 - 1;
            assert_eq!(r.gamma, Some(sched.gamma_at(last_step, r.epoch - 1)));
        }
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = TrainConfig {
            activation: Activation::Relu,
            eta0: Some(1e200),
            eta_floor: Some(1e199),
            beta: 1.0,
            ..toy(OptimizerName::Backprop)
        };
        let out = train(&cfg).unwrap();
        assert!(out.status.is_diverged(), "{:?}", out.status);
    }

    #[test]
    fn csv_shape() {
        let out = train(&toy(OptimizerName::Adam)).unwrap();
        let csv = out.metrics_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines.len(), 6);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));
    }
}
