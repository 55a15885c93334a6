//! Python module `rsgd`: networks, optimizers, training runs and surface scans
//! from `rsgd-core`, exchanging data as nested lists of floats.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};

use rsgd_core::data::{generate_teacher, load_mnist_idx, LabeledDataset};
use rsgd_core::experiment::{self, Metric, MetricsRecord, RunStatus, TrainConfig};
use rsgd_core::network::{
    batch_gradient, predict, read_checkpoint, write_checkpoint, Activation, Architecture, LossKind,
    NetworkParams,
};
use rsgd_core::optim::{self, OptimizerKind, OptimizerState, ReinforcementSchedule};
use rsgd_core::rng::{RngStream, StreamId};
use rsgd_core::{surface, Error, Matrix};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Config(_) | Error::Shape(_) | Error::InsufficientData(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(Matrix::from_rows(&rows))
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn dataset(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> PyResult<LabeledDataset> {
    LabeledDataset::regression(matrix(inputs)?, matrix(targets)?).map_err(py_err)
}

fn toml_value(v: &Bound<'_, PyAny>) -> PyResult<toml::Value> {
    if v.is_instance_of::<PyBool>() {
        return Ok(toml::Value::Boolean(v.extract()?));
    }
    if let Ok(i) = v.extract::<i64>() {
        return Ok(toml::Value::Integer(i));
    }
    if let Ok(f) = v.extract::<f64>() {
        return Ok(toml::Value::Float(f));
    }
    if let Ok(s) = v.extract::<String>() {
        return Ok(toml::Value::String(s));
    }
    if let Ok(list) = v.cast::<PyList>() {
        return list
            .iter()
            .map(|x| toml_value(&x))
            .collect::<PyResult<Vec<_>>>()
            .map(toml::Value::Array);
    }
    Err(PyValueError::new_err(format!(
        "unsupported config value {v}"
    )))
}

/// Config from optional TOML text with keyword overrides applied on top.
fn build_config(
    text: Option<&str>,
    overrides: Option<&Bound<'_, PyDict>>,
) -> PyResult<TrainConfig> {
    let base = match text {
        Some(t) => TrainConfig::from_toml_str(t).map_err(py_err)?,
        None => TrainConfig::default(),
    };
    let mut table: toml::Table =
        toml::from_str(&base.to_toml_string()).expect("config round-trips");
    if let Some(kw) = overrides {
        for (k, v) in kw.iter() {
            table.insert(k.extract::<String>()?, toml_value(&v)?);
        }
    }
    let cfg: TrainConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| PyValueError::new_err(e.to_string()))?;
    Ok(cfg.resolved())
}

fn history_list<'py>(py: Python<'py>, history: &[MetricsRecord]) -> PyResult<Bound<'py, PyList>> {
    let out = PyList::empty(py);
    for r in history {
        let d = PyDict::new(py);
        d.set_item("epoch", r.epoch)?;
        d.set_item("train_error", r.train_error)?;
        d.set_item("test_error", r.test_error)?;
        d.set_item("eta", r.eta)?;
        d.set_item("gamma", r.gamma)?;
        d.set_item("wall_time_s", r.wall_time_s)?;
        out.append(d)?;
    }
    Ok(out)
}

/// Feedforward network weights with their architecture.
#[pyclass(name = "Network", module = "rsgd", from_py_object)]
#[derive(Clone)]
pub struct PyNetwork {
    inner: NetworkParams,
}

#[pymethods]
impl PyNetwork {
    /// Random initialization from `seed`.
    #[new]
    #[pyo3(signature = (arch, seed=1, activation="sigmoid", loss="quadratic", bias=true))]
    fn new(arch: &str, seed: u64, activation: &str, loss: &str, bias: bool) -> PyResult<Self> {
        let widths = Architecture::parse_widths(arch).map_err(py_err)?;
        let arch = Architecture::with_loss(
            widths,
            parse::<Activation>(activation)?,
            parse::<LossKind>(loss)?,
            bias,
        )
        .map_err(py_err)?;
        Ok(Self {
            inner: NetworkParams::init(arch, &mut RngStream::new(seed, StreamId::WeightInit)),
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: read_checkpoint(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        write_checkpoint(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn arch(&self) -> String {
        self.inner.architecture().widths_string()
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.inner.num_params()
    }

    /// Weight matrices; the last column holds biases when enabled.
    fn weights(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.weights().iter().map(rows).collect()
    }

    fn predict(&self, inputs: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(
            &predict(&self.inner, &matrix(inputs)?).map_err(py_err)?,
        ))
    }

    /// Mean gradient over the batch and the mean loss.
    fn gradient(
        &self,
        inputs: Vec<Vec<f64>>,
        targets: Vec<Vec<f64>>,
    ) -> PyResult<(Vec<Vec<Vec<f64>>>, f64)> {
        let (g, loss) =
            batch_gradient(&self.inner, &matrix(inputs)?, &matrix(targets)?).map_err(py_err)?;
        Ok((g.matrices().iter().map(rows).collect(), loss))
    }

    #[pyo3(signature = (inputs, targets, metric="mse"))]
    fn evaluate(
        &self,
        inputs: Vec<Vec<f64>>,
        targets: Vec<Vec<f64>>,
        metric: &str,
    ) -> PyResult<f64> {
        let d = dataset(inputs, targets)?;
        experiment::evaluate(&self.inner, &d, parse::<Metric>(metric)?).map_err(py_err)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Network('{}', params={})", self.arch(), self.num_params())
    }
}

/// One optimizer bound to a network's shapes.
#[pyclass(name = "Optimizer", module = "rsgd")]
pub struct PyOptimizer {
    state: OptimizerState,
    coins: RngStream,
}

fn schedule(
    kind: &str,
    gamma0: f64,
    lambda: f64,
    a0: f64,
    b0: f64,
) -> PyResult<ReinforcementSchedule> {
    match kind {
        "exp_gamma" => ReinforcementSchedule::exp_gamma(gamma0, lambda),
        "power_law" => ReinforcementSchedule::power_law(a0, b0),
        other => return Err(PyValueError::new_err(format!("unknown schedule '{other}'"))),
    }
    .map_err(py_err)
}

#[pymethods]
impl PyOptimizer {
    /// `rho` is a number or `"adaptive"`.
    #[new]
    #[pyo3(signature = (name, network, seed=1, schedule="exp_gamma", gamma0=0.9995, lambda_=0.0001, a0=1.0, b0=0.5, rho=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        name: &str,
        network: &PyNetwork,
        seed: u64,
        schedule: &str,
        gamma0: f64,
        lambda_: f64,
        a0: f64,
        b0: f64,
        rho: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Self> {
        let s = self::schedule(schedule, gamma0, lambda_, a0, b0)?;
        let policy = match rho {
            None => optim::MomentumPolicy::Adaptive(s),
            Some(v) if v.extract::<String>().is_ok_and(|x| x == "adaptive") => {
                optim::MomentumPolicy::Adaptive(s)
            }
            Some(v) => optim::MomentumPolicy::Fixed(v.extract()?),
        };
        let kind = match name {
            "backprop" | "sgd" => OptimizerKind::Backprop,
            "rsgd" => OptimizerKind::Rsgd(s),
            "sgdm" => OptimizerKind::Sgdm(policy),
            "nag" => OptimizerKind::Nag(policy),
            "adam" => OptimizerKind::Adam(optim::AdamParams::default()),
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown optimizer '{other}'"
                )))
            }
        };
        Ok(Self {
            state: OptimizerState::for_params(kind, &network.inner),
            coins: RngStream::new(seed, StreamId::Reinforcement),
        })
    }

    /// One update of `network` on a mini-batch, in place.
    fn step(
        &mut self,
        network: &mut PyNetwork,
        inputs: Vec<Vec<f64>>,
        targets: Vec<Vec<f64>>,
        eta: f64,
    ) -> PyResult<()> {
        let (x, y) = (matrix(inputs)?, matrix(targets)?);
        self.state
            .step(&mut network.inner, eta, &mut self.coins, |p| {
                Ok(batch_gradient(p, &x, &y)?.0)
            })
            .map_err(py_err)
    }

    fn end_epoch(&mut self) {
        self.state.end_epoch();
    }

    #[getter]
    fn step_count(&self) -> u64 {
        self.state.step_count()
    }

    #[getter]
    fn lookahead_evaluations(&self) -> u64 {
        self.state.lookahead_evaluations()
    }

    /// Reinforcement probability for the next step, if the optimizer has one.
    #[getter]
    fn next_gamma(&self) -> Option<f64> {
        self.state.next_gamma()
    }
}

/// Trains per a TOML config and/or keyword overrides named like config keys.
#[pyfunction]
#[pyo3(signature = (config=None, **overrides))]
fn train<'py>(
    py: Python<'py>,
    config: Option<&str>,
    overrides: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = build_config(config, overrides)?;
    let out = py.detach(|| experiment::train(&cfg)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("config", cfg.to_toml_string())?;
    d.set_item("history", history_list(py, &out.history)?)?;
    d.set_item("network", PyNetwork { inner: out.params })?;
    let ckpts = PyList::empty(py);
    for (e, p) in out.checkpoints {
        ckpts.append((e, PyNetwork { inner: p }))?;
    }
    d.set_item("checkpoints", ckpts)?;
    d.set_item("steps", out.steps)?;
    d.set_item("lookahead_evaluations", out.lookahead_evaluations)?;
    d.set_item(
        "diverged",
        match out.status {
            RunStatus::Completed => None,
            RunStatus::Diverged { reason, .. } => Some(reason),
        },
    )?;
    Ok(d)
}

/// Config with defaults expanded, as TOML text.
#[pyfunction]
#[pyo3(signature = (config=None, **overrides))]
fn resolve_config(config: Option<&str>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<String> {
    let cfg = build_config(config, overrides)?;
    cfg.validate().map_err(py_err)?;
    Ok(cfg.to_toml_string())
}

/// Aggregates final test errors; `configs` maps ids to override dicts.
#[pyfunction]
#[pyo3(signature = (configs, runs=1, jobs=1))]
fn run_suite<'py>(
    py: Python<'py>,
    configs: &Bound<'py, PyDict>,
    runs: usize,
    jobs: usize,
) -> PyResult<Bound<'py, PyList>> {
    let mut list = Vec::new();
    for (id, kw) in configs.iter() {
        list.push((
            id.extract::<String>()?,
            build_config(None, Some(kw.cast::<PyDict>()?))?,
        ));
    }
    let report = py
        .detach(|| experiment::run_suite(&list, runs, jobs))
        .map_err(py_err)?;
    let out = PyList::empty(py);
    for r in report.rows {
        let d = PyDict::new(py);
        d.set_item("config_id", r.config_id)?;
        d.set_item("metric_mean", r.mean)?;
        d.set_item("metric_std", r.std)?;
        d.set_item("n_runs", r.n_runs)?;
        d.set_item("n_diverged", r.n_diverged)?;
        out.append(d)?;
    }
    Ok(out)
}

/// `((train_inputs, train_targets), (test_inputs, test_targets))`.
#[pyfunction]
#[pyo3(signature = (n_in, n_out, train_count, test_count, seed=1))]
#[allow(clippy::type_complexity)]
fn teacher_dataset(
    n_in: usize,
    n_out: usize,
    train_count: usize,
    test_count: usize,
    seed: u64,
) -> PyResult<(
    (Vec<Vec<f64>>, Vec<Vec<f64>>),
    (Vec<Vec<f64>>, Vec<Vec<f64>>),
)> {
    let (tr, te) = generate_teacher(
        n_in,
        n_out,
        train_count,
        test_count,
        &mut RngStream::new(seed, StreamId::DataGen),
    )
    .map_err(py_err)?;
    Ok((
        (rows(tr.inputs()), rows(tr.targets())),
        (rows(te.inputs()), rows(te.targets())),
    ))
}

/// Pixels scaled to `[0, 1]` and the raw labels.
#[pyfunction]
fn load_mnist(images: &str, labels: &str) -> PyResult<(Vec<Vec<f64>>, Vec<u8>)> {
    let d = load_mnist_idx(images, labels).map_err(py_err)?;
    Ok((rows(d.inputs()), d.labels().unwrap_or_default().to_vec()))
}

#[pyfunction]
#[pyo3(signature = (t, schedule="power_law", gamma0=0.9995, lambda_=0.0001, a0=1.0, b0=0.5, steps_per_epoch=10))]
#[allow(clippy::too_many_arguments)]
fn memory_length_pmf(
    t: u64,
    schedule: &str,
    gamma0: f64,
    lambda_: f64,
    a0: f64,
    b0: f64,
    steps_per_epoch: u64,
) -> PyResult<Vec<f64>> {
    if steps_per_epoch == 0 {
        return Err(PyValueError::new_err("steps_per_epoch must be >= 1"));
    }
    let s = self::schedule(schedule, gamma0, lambda_, a0, b0)?;
    Ok(optim::memory_length_pmf(&s, t, |l| l / steps_per_epoch))
}

#[pyfunction]
#[pyo3(signature = (eta0, beta, floor, epoch))]
fn learning_rate(eta0: f64, beta: f64, floor: f64, epoch: u64) -> PyResult<f64> {
    Ok(optim::LearningRateSchedule::new(eta0, beta, floor)
        .map_err(py_err)?
        .eta_at(epoch))
}

fn corners(list: Vec<PyNetwork>) -> PyResult<[NetworkParams; 4]> {
    let v: Vec<NetworkParams> = list.into_iter().map(|n| n.inner).collect();
    v.try_into()
        .map_err(|v: Vec<_>| PyValueError::new_err(format!("need 4 corners, got {}", v.len())))
}

#[pyfunction]
fn bilinear_interpolate(
    corner_networks: Vec<PyNetwork>,
    alpha: f64,
    beta: f64,
) -> PyResult<PyNetwork> {
    let c = corners(corner_networks)?;
    Ok(PyNetwork {
        inner: surface::bilinear_interpolate(&c, alpha, beta).map_err(py_err)?,
    })
}

/// Grid of errors indexed `[alpha][beta]`; NaN marks points that failed.
#[pyfunction]
#[pyo3(signature = (corner_networks, inputs, targets, resolution=41, metric="mse"))]
fn scan_surface(
    py: Python<'_>,
    corner_networks: Vec<PyNetwork>,
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    resolution: usize,
    metric: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let c = corners(corner_networks)?;
    let d = dataset(inputs, targets)?;
    let metric = parse::<Metric>(metric)?;
    let grid = py
        .detach(|| surface::scan_surface(&c, resolution, &d, metric))
        .map_err(py_err)?;
    Ok(rows(&grid.values))
}

#[pymodule]
fn rsgd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyOptimizer>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(resolve_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(teacher_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(load_mnist, m)?)?;
    m.add_function(wrap_pyfunction!(memory_length_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(learning_rate, m)?)?;
    m.add_function(wrap_pyfunction!(bilinear_interpolate, m)?)?;
    m.add_function(wrap_pyfunction!(scan_surface, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_round_trip() {
        let m = matrix(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(rows(&m), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn error_kinds() {
        assert!(schedule("power_law", 0.9, 0.0, -1.0, 0.5).is_err());
        assert!(schedule("bogus", 0.9, 0.0, 1.0, 0.5).is_err());
    }
}
