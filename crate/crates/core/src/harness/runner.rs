//! Worker pool and persistence for experiment runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use crate::error::Result;

use super::config::ExperimentConfig;
use super::experiments;
use super::records::{write_summary, RecordWriter, SummaryRow, TrialRecord};

/// Runs `trial(0..n)` on `workers` threads and hands the records to `sink`
/// in trial order, whatever order they finish in.
pub fn run_ordered<F, S>(n: u64, workers: usize, trial: F, mut sink: S) -> Result<()>
where
    F: Fn(u64) -> Result<TrialRecord> + Sync,
    S: FnMut(TrialRecord) -> Result<()>,
{
    let workers = workers.max(1).min(n.max(1) as usize);
    let next = AtomicU64::new(0);
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(u64, Result<TrialRecord>)>();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, stop, trial) = (&next, &stop, &trial);
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let t0 = Instant::now();
                let r = trial(i).map(|mut rec| {
                    rec.wall_time_ms = t0.elapsed().as_secs_f64() * 1e3;
                    rec
                });
                if tx.send((i, r)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut expected = 0u64;
        for (i, r) in rx {
            pending.insert(i, r);
            while let Some(r) = pending.remove(&expected) {
                expected += 1;
                if let Err(e) = r.and_then(&mut sink) {
                    stop.store(true, Ordering::Relaxed);
                    return Err(e);
                }
            }
        }
        Ok(())
    })
}

/// Runs every trial in memory.
pub fn collect(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let prepared = experiments::Prepared::new(cfg)?;
    let mut out = Vec::with_capacity(cfg.total_trials() as usize);
    run_ordered(
        cfg.total_trials(),
        cfg.workers,
        |i| experiments::trial(&prepared, i),
        |r| {
            out.push(r);
            Ok(())
        },
    )?;
    Ok(out)
}

/// Where a run leaves its files.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: PathBuf,
    pub summary: PathBuf,
    pub rows: Vec<SummaryRow>,
}

/// Streams records to `dir/records.jsonl` and writes `dir/summary.csv`.
pub fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    let prepared = experiments::Prepared::new(cfg)?;
    fs::create_dir_all(dir)?;
    let records = dir.join("records.jsonl");
    let summary = dir.join("summary.csv");
    let mut writer = RecordWriter::create(&records)?;
    let mut kept = Vec::with_capacity(cfg.total_trials() as usize);
    run_ordered(
        cfg.total_trials(),
        cfg.workers,
        |i| experiments::trial(&prepared, i),
        |r| {
            writer.write(&r)?;
            kept.push(r);
            Ok(())
        },
    )?;
    let rows = experiments::summarize(&prepared, &kept)?;
    write_summary(&rows, fs::File::create(&summary)?)?;
    Ok(RunOutput { records, summary, rows })
}

/// Loads a configuration file and runs it into its `output` directory.
pub fn run_file(path: &Path) -> Result<RunOutput> {
    let cfg = ExperimentConfig::load(path)?;
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("out"));
    run(&cfg, &dir)
}
