use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::config::{ExperimentConfig, Mode, Precision};
use crate::ddpg::{metrics_to_csv, EpisodeMetrics, Trainer};
use crate::error::{Error, Result};
use crate::game::ObservationSchema;
use crate::neural::checkpoint;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker threads for independent runs.
    pub jobs: usize,
    pub checkpoints: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            checkpoints: true,
        }
    }
}

/// Metrics of one (seed, mode) training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub mode: Mode,
    pub seed: u64,
    pub metrics: Vec<EpisodeMetrics>,
}

pub fn metrics_file_name(mode: Mode, seed: u64) -> String {
    format!("{mode}_seed{seed}.csv")
}

pub fn metrics_path(out_dir: &Path, mode: Mode, seed: u64) -> PathBuf {
    out_dir.join("metrics").join(metrics_file_name(mode, seed))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Trains one (seed, mode) pair, stopping after `limit` episodes when
/// given. The exploration schedule always follows `cfg.episodes`, so a
/// shortened run reproduces the head of the full one.
pub fn train_run<T: Scalar>(
    cfg: &ExperimentConfig,
    mode: Mode,
    seed: u64,
    limit: Option<usize>,
) -> Result<(Vec<EpisodeMetrics>, Trainer<T>)> {
    let mut trainer = Trainer::<T>::new(cfg, mode, seed)?;
    let n = limit.map_or(cfg.episodes, |k| k.min(cfg.episodes));
    let metrics = trainer.train(n)?;
    Ok((metrics, trainer))
}

fn save_checkpoints<T: Scalar>(trainer: &Trainer<T>, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let named = trainer
        .agents()
        .iter()
        .enumerate()
        .map(|(i, l)| (format!("factory{i}"), l))
        .chain(trainer.manager().map(|l| ("manager".to_string(), l)));
    for (name, learner) in named {
        checkpoint::save(
            learner.agent.actor(),
            &dir.join(format!("{name}_actor.bin")),
        )?;
        checkpoint::save(
            learner.agent.critic(),
            &dir.join(format!("{name}_critic.bin")),
        )?;
    }
    Ok(())
}

fn execute<T: Scalar>(
    cfg: &ExperimentConfig,
    mode: Mode,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunRecord> {
    let (metrics, trainer) = train_run::<T>(cfg, mode, seed, None)?;
    write(
        &metrics_path(&opts.out_dir, mode, seed),
        metrics_to_csv(&metrics),
    )?;
    if opts.checkpoints {
        let dir = opts
            .out_dir
            .join("checkpoints")
            .join(format!("{mode}_seed{seed}"));
        save_checkpoints(&trainer, &dir)?;
    }
    Ok(RunRecord {
        mode,
        seed,
        metrics,
    })
}

/// Trains every (seed, mode) pair of `cfg` and writes metrics CSVs,
/// checkpoints, the resolved config and the observation schema under
/// `opts.out_dir`. Records come back in (mode, seed) order.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    create_dir(&opts.out_dir.join("metrics"))?;
    write(&opts.out_dir.join("config.txt"), cfg.to_kv_string())?;
    ObservationSchema::new(&cfg.env).write_csv(&opts.out_dir.join("observation_schema.csv"))?;

    let jobs: Vec<(Mode, u64)> = cfg
        .mode
        .modes()
        .into_iter()
        .flat_map(|m| cfg.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunRecord>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = opts.jobs.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(mode, seed)) = jobs.get(k) else {
                    break;
                };
                let out = match cfg.precision {
                    Precision::F32 => execute::<f32>(cfg, mode, seed, opts),
                    Precision::F64 => execute::<f64>(cfg, mode, seed, opts),
                };
                results.lock().expect("worker panicked")[k] = Some(out);
            });
        }
    });
    results
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}
