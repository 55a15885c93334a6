use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::data::{load_mnist_idx, LabeledDataset};
use crate::error::{Error, Result};

use super::{prepare_data, train_on, DatasetSource, MetricsRecord, TrainConfig};

pub const TRAIN_IMAGES: [&str; 2] = ["train-images-idx3-ubyte", "train-images.idx3-ubyte"];
pub const TRAIN_LABELS: [&str; 2] = ["train-labels-idx1-ubyte", "train-labels.idx1-ubyte"];

/// First of `names` present in `dir`, or the first name if none is.
fn find_file(dir: &Path, names: &[&str]) -> PathBuf {
    names
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.exists())
        .unwrap_or_else(|| dir.join(names[0]))
}

/// Shares loaded MNIST pools between runs.
#[derive(Debug, Default)]
pub struct DataCache {
    mnist: Mutex<HashMap<PathBuf, Arc<LabeledDataset>>>,
}

impl DataCache {
    /// The 60000-image training pool under `dir`.
    pub fn mnist(&self, dir: &Path) -> Result<Arc<LabeledDataset>> {
        let mut map = self.mnist.lock().unwrap();
        if let Some(pool) = map.get(dir) {
            return Ok(pool.clone());
        }
        let pool = Arc::new(load_mnist_idx(
            find_file(dir, &TRAIN_IMAGES),
            find_file(dir, &TRAIN_LABELS),
        )?);
        map.insert(dir.to_path_buf(), pool.clone());
        Ok(pool)
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub config_id: String,
    pub run_index: usize,
    pub seed: u64,
    pub final_test_error: Option<f64>,
    pub diverged: bool,
    pub lookahead_evaluations: u64,
    pub history: Vec<MetricsRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub config_id: String,
    pub mean: f64,
    pub std: f64,
    pub n_runs: usize,
    pub n_diverged: usize,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub rows: Vec<AggregateRow>,
    pub runs: Vec<RunSummary>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trains every config `n_runs` times with seeds `config.seed + run_index`,
/// using up to `jobs` threads. Diverged runs are left out of the means.
pub fn run_suite(
    configs: &[(String, TrainConfig)],
    n_runs: usize,
    jobs: usize,
) -> Result<SuiteReport> {
    if n_runs == 0 {
        return Err(Error::Config("n_runs must be >= 1".into()));
    }
    for (id, c) in configs {
        c.validate()
            .map_err(|e| Error::Config(format!("{id}: {e}")))?;
    }
    let tasks: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..n_runs).map(move |r| (c, r)))
        .collect();
    let cache = DataCache::default();
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<RunSummary>>>> =
        tasks.iter().map(|_| Mutex::new(None)).collect();

    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(tasks.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(c, r)) = tasks.get(i) else { break };
                let (id, base) = &configs[c];
                let out = run_one(id, base, r, &cache);
                *results[i].lock().unwrap() = Some(out);
            });
        }
    });

    let mut runs = Vec::with_capacity(tasks.len());
    for slot in results {
        runs.push(slot.into_inner().unwrap().expect("every task ran")?);
    }
    let rows = configs
        .iter()
        .map(|(id, _)| {
            let mine: Vec<&RunSummary> = runs.iter().filter(|r| &r.config_id == id).collect();
            let ok: Vec<f64> = mine
                .iter()
                .filter(|r| !r.diverged)
                .filter_map(|r| r.final_test_error)
                .collect();
            let (mean, std) = mean_std(&ok);
            AggregateRow {
                config_id: id.clone(),
                mean,
                std,
                n_runs: mine.len(),
                n_diverged: mine.iter().filter(|r| r.diverged).count(),
            }
        })
        .collect();
    Ok(SuiteReport { rows, runs })
}

fn run_one(
    id: &str,
    base: &TrainConfig,
    run_index: usize,
    cache: &DataCache,
) -> Result<RunSummary> {
    let config = TrainConfig {
        seed: base.seed.wrapping_add(run_index as u64),
        ..base.clone()
    };
    let pool = match config.dataset {
        DatasetSource::Mnist => Some(cache.mnist(&config.mnist_dir)?),
        _ => None,
    };
    let (train, test) = prepare_data(&config, pool.as_deref())?;
    let out = train_on(&config, &train, &test)?;
    Ok(RunSummary {
        config_id: id.to_string(),
        run_index,
        seed: config.seed,
        final_test_error: out.final_test_error(),
        diverged: out.status.is_diverged(),
        lookahead_evaluations: out.lookahead_evaluations,
        history: out.history,
    })
}

pub const AGGREGATE_HEADER: &str = "config_id,metric_mean,metric_std,n_runs,n_diverged";

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.config_id, r.mean, r.std, r.n_runs, r.n_diverged
        )
        .unwrap();
    }
    out
}
