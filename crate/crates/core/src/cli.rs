//! `rsgd` command line.
//!
//! Exit status is 0 on success, 1 for usage and configuration errors, and 2
//! for runtime failures (I/O, divergence, incomplete surface scans).

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{encode_dataset, generate_teacher_dataset};
use crate::error::{Error, Result};
use crate::experiment::{
    aggregate_csv, evaluate, metrics_csv, prepare_data, run_suite, train, write_text, DataCache,
    DatasetSource, Metric, OptimizerName, RhoSetting, ScheduleName, TrainConfig,
};
use crate::network::{read_checkpoint, write_checkpoint, Activation, LossKind, NetworkParams};
use crate::optim::{memory_length_pmf, ReinforcementSchedule};
use crate::rng::{RngStream, StreamId};
use crate::surface::{scan_surface_parallel, DEFAULT_RESOLUTION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rsgd", version, about = "Reinforced SGD training lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic teacher dataset (first half train, second half test).
    GenData(GenDataArgs),
    /// Train one network and log per-epoch metrics.
    Train(TrainArgs),
    /// Repeat runs over seeds and optimizers and aggregate final test errors.
    Suite(SuiteArgs),
    /// Evaluate a checkpoint.
    Eval(EvalArgs),
    /// Evaluate the error over the bilinear span of four checkpoints.
    ScanSurface(ScanArgs),
    /// Print the memory-length distribution of the reinforced gradient.
    AnalyzeMemory(MemoryArgs),
}

#[derive(Debug, Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 100)]
    n_in: usize,
    #[arg(long, default_value_t = 10)]
    n_out: usize,
    #[arg(long, default_value_t = 2000)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Config keys settable from the command line.
#[derive(Debug, Args, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    optimizer: Option<OptimizerName>,
    #[arg(long)]
    schedule: Option<ScheduleName>,
    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    a0: Option<f64>,
    #[arg(long)]
    b0: Option<f64>,
    #[arg(long)]
    rho: Option<RhoSetting>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta_floor: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<u64>,
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    activation: Option<Activation>,
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    bias: Option<bool>,
    #[arg(long)]
    metric: Option<Metric>,
    #[arg(long, value_delimiter = ',')]
    checkpoint_epochs: Option<Vec<u64>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    dataset: Option<DatasetSource>,
    #[arg(long)]
    train_count: Option<usize>,
    #[arg(long)]
    test_count: Option<usize>,
    #[arg(long)]
    mnist_dir: Option<PathBuf>,
    /// Dataset file written by `gen-data`; implies `--dataset file`.
    #[arg(long = "data")]
    data_file: Option<PathBuf>,
}

macro_rules! apply {
    ($cfg:ident, $o:ident, $($f:ident),*) => {
        $(if let Some(v) = $o.$f.clone() { $cfg.$f = v; })*
    };
}

impl Overrides {
    fn apply(&self, cfg: &mut TrainConfig) {
        let o = self;
        apply!(
            cfg,
            o,
            seed,
            optimizer,
            schedule,
            gamma0,
            lambda,
            a0,
            b0,
            rho,
            beta,
            batch,
            epochs,
            arch,
            activation,
            loss,
            bias,
            metric,
            checkpoint_epochs,
            runs,
            jobs,
            dataset,
            train_count,
            test_count,
            mnist_dir
        );
        if o.eta0.is_some() {
            cfg.eta0 = o.eta0;
        }
        if o.eta_floor.is_some() {
            cfg.eta_floor = o.eta_floor;
        }
        if o.data_file.is_some() {
            cfg.data_file = o.data_file.clone();
            if o.dataset.is_none() {
                cfg.dataset = DatasetSource::File;
            }
        }
    }

    fn config(&self, file: Option<&Path>) -> Result<TrainConfig> {
        let mut cfg = match file {
            Some(p) => TrainConfig::from_file(p)?,
            None => TrainConfig::default(),
        };
        self.apply(&mut cfg);
        Ok(cfg.resolved())
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    /// Directory for metrics.csv and checkpoints; metrics go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    /// One config per file, identified by file stem; repeatable.
    #[arg(long = "config")]
    configs: Vec<PathBuf>,
    /// Run the same settings once per listed optimizer.
    #[arg(long, value_delimiter = ',')]
    optimizers: Vec<OptimizerName>,
    #[command(flatten)]
    overrides: Overrides,
    /// Directory for aggregate.csv and per-run metrics; aggregate goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value = "test")]
    split: Split,
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// Four checkpoint paths W1,W2,W3,W4.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    corners: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: usize,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value = "test")]
    split: Split,
    /// Output CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Split {
    Train,
    Test,
}

#[derive(Debug, Args)]
struct MemoryArgs {
    #[arg(long, default_value = "power_law")]
    schedule: ScheduleName,
    #[arg(long, default_value_t = 0.9995)]
    gamma0: f64,
    #[arg(long, default_value_t = 0.0001)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    a0: f64,
    #[arg(long, default_value_t = 0.5)]
    b0: f64,
    /// Step indices to analyze.
    #[arg(long, value_delimiter = ',', default_value = "300")]
    t: Vec<u64>,
    /// Updates per epoch, for schedules that change per epoch.
    #[arg(long, default_value_t = 10)]
    steps_per_epoch: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Suite(a) => suite_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::ScanSurface(a) => scan_cmd(a),
        Command::AnalyzeMemory(a) => memory_cmd(a),
    }
}

fn print_resolved(cfg: &TrainConfig) {
    eprintln!("# resolved configuration\n{}", cfg.to_toml_string());
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn gen_data(a: GenDataArgs) -> Result<i32> {
    eprintln!(
        "# resolved configuration\nn_in = {}\nn_out = {}\ncount = {}\nseed = {}\nout = {:?}\n",
        a.n_in,
        a.n_out,
        a.count,
        a.seed,
        a.out.display().to_string()
    );
    let (train, test) = generate_teacher_dataset(
        a.n_in,
        a.n_out,
        a.count,
        &mut RngStream::new(a.seed, StreamId::DataGen),
    )?;
    let bytes = encode_dataset(&train.concat(&test)?);
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(&a.out, bytes).map_err(|e| Error::io(&a.out, e))?;
    Ok(EXIT_OK)
}

fn train_cmd(a: TrainArgs) -> Result<i32> {
    let cfg = a.overrides.config(a.config.as_deref())?;
    print_resolved(&cfg);
    cfg.validate()?;
    let out = train(&cfg)?;
    match &a.out {
        Some(dir) => {
            write_text(dir.join("metrics.csv"), &out.metrics_csv())?;
            for (epoch, p) in &out.checkpoints {
                write_checkpoint(p, dir.join(format!("checkpoints/epoch_{epoch:03}.ckpt")))?;
            }
            write_checkpoint(&out.params, dir.join("final.ckpt"))?;
        }
        None => emit(None, &out.metrics_csv())?,
    }
    if let Some(last) = out.history.last() {
        eprintln!(
            "epochs {} steps {} final train {} test {}",
            last.epoch, out.steps, last.train_error, last.test_error
        );
    }
    if let crate::experiment::RunStatus::Diverged {
        epoch,
        step,
        reason,
    } = &out.status
    {
        eprintln!("error: run diverged at epoch {epoch}, step {step}: {reason}");
        return Ok(EXIT_RUNTIME);
    }
    Ok(EXIT_OK)
}

fn suite_cmd(a: SuiteArgs) -> Result<i32> {
    let mut configs = Vec::new();
    for path in &a.configs {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        configs.push((id, a.overrides.config(Some(path))?));
    }
    if configs.is_empty() {
        configs.push(("base".to_string(), a.overrides.config(None)?));
    }
    if !a.optimizers.is_empty() {
        configs = configs
            .into_iter()
            .flat_map(|(id, base)| {
                let single = a.configs.len() <= 1;
                a.optimizers.iter().map(move |&opt| {
                    let id = if single {
                        opt.to_string()
                    } else {
                        format!("{id}-{opt}")
                    };
                    let mut c = TrainConfig {
                        optimizer: opt,
                        eta0: None,
                        eta_floor: None,
                        ..base.clone()
                    };
                    c.eta0 = a.overrides.eta0;
                    c.eta_floor = a.overrides.eta_floor;
                    (id, c.resolved())
                })
            })
            .collect();
    }
    for (id, c) in &configs {
        eprintln!("# config {id}");
        print_resolved(c);
    }
    let (runs, jobs) = (configs[0].1.runs, configs[0].1.jobs);
    let report = run_suite(&configs, runs, jobs)?;
    let csv = aggregate_csv(&report.rows);
    match &a.out {
        Some(dir) => {
            write_text(dir.join("aggregate.csv"), &csv)?;
            for r in &report.runs {
                write_text(
                    dir.join(format!("{}_run{}.csv", r.config_id, r.run_index)),
                    &metrics_csv(&r.history),
                )?;
            }
        }
        None => emit(None, &csv)?,
    }
    let diverged: usize = report.rows.iter().map(|r| r.n_diverged).sum();
    if diverged > 0 {
        eprintln!("warning: {diverged} run(s) diverged and were left out of the means");
    }
    Ok(EXIT_OK)
}

/// Config whose architecture follows a loaded network.
fn config_for(
    params: &NetworkParams,
    overrides: &Overrides,
    file: Option<&Path>,
) -> Result<TrainConfig> {
    let mut cfg = overrides.config(file)?;
    let arch = params.architecture();
    cfg.arch = arch.widths_string();
    cfg.activation = arch.hidden_activation();
    cfg.loss = arch.loss();
    cfg.bias = arch.use_bias();
    Ok(cfg)
}

fn load_split(cfg: &TrainConfig, split: Split) -> Result<crate::data::LabeledDataset> {
    cfg.validate()?;
    let pool = match cfg.dataset {
        DatasetSource::Mnist => Some(DataCache::default().mnist(&cfg.mnist_dir)?),
        _ => None,
    };
    let (train, test) = prepare_data(cfg, pool.as_deref())?;
    Ok(match split {
        Split::Train => train,
        Split::Test => test,
    })
}

fn eval_cmd(a: EvalArgs) -> Result<i32> {
    let params = read_checkpoint(&a.checkpoint)?;
    let cfg = config_for(&params, &a.overrides, a.config.as_deref())?;
    print_resolved(&cfg);
    let data = load_split(&cfg, a.split)?;
    let value = evaluate(&params, &data, cfg.metric)?;
    println!("{value}");
    Ok(if value.is_finite() {
        EXIT_OK
    } else {
        EXIT_RUNTIME
    })
}

fn scan_cmd(a: ScanArgs) -> Result<i32> {
    if a.corners.len() != 4 {
        return Err(Error::Config(format!(
            "--corners needs 4 checkpoints, got {}",
            a.corners.len()
        )));
    }
    let loaded = a
        .corners
        .iter()
        .map(read_checkpoint)
        .collect::<Result<Vec<_>>>()?;
    let corners: [NetworkParams; 4] = loaded.try_into().expect("four corners");
    let cfg = config_for(&corners[0], &a.overrides, a.config.as_deref())?;
    print_resolved(&cfg);
    eprintln!("resolution = {}\nsplit = {:?}\n", a.resolution, a.split);
    let data = load_split(&cfg, a.split)?;
    let grid = scan_surface_parallel(&corners, a.resolution, &data, cfg.metric, cfg.jobs)?;
    emit(a.out.as_deref(), &grid.to_csv())?;
    if !grid.is_complete() {
        eprintln!(
            "warning: {} grid point(s) could not be evaluated",
            grid.invalid_points
        );
        return Ok(EXIT_RUNTIME);
    }
    Ok(EXIT_OK)
}

fn memory_cmd(a: MemoryArgs) -> Result<i32> {
    let schedule = match a.schedule {
        ScheduleName::ExpGamma => ReinforcementSchedule::exp_gamma(a.gamma0, a.lambda)?,
        ScheduleName::PowerLaw => ReinforcementSchedule::power_law(a.a0, a.b0)?,
    };
    if a.steps_per_epoch == 0 {
        return Err(Error::Config("steps-per-epoch must be >= 1".into()));
    }
    eprintln!(
        "# resolved configuration\nschedule = {:?}\nt = {:?}\nsteps_per_epoch = {}\n",
        schedule, a.t, a.steps_per_epoch
    );
    let mut csv = String::from("t,length,probability\n");
    for &t in &a.t {
        let pmf = memory_length_pmf(&schedule, t, |l| l / a.steps_per_epoch);
        for (len, p) in pmf.iter().enumerate() {
            csv.push_str(&format!("{t},{len},{p}\n"));
        }
    }
    emit(a.out.as_deref(), &csv)?;
    Ok(EXIT_OK)
}
