//! Epoch loop with metrics logging, checkpointing and resume.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pmsn_core::train::{evaluate, train_step, Dataset, EvalStats, Network, OptimState};
use pmsn_core::Real;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::checkpoint::{checkpoint_from_container, checkpoint_to_container};
use crate::config::RunConfig;
use crate::container::Container;
use crate::dataset::Splits;
use crate::error::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.pmsn";
pub const LAST_GOOD_FILE: &str = "last_good.pmsn";

/// One row of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub accuracy: f64,
    pub wall_seconds: f64,
    pub spikes_per_neuron_per_step: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Directory for `metrics.csv` and checkpoints; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    /// Checkpoint to continue from.
    pub resume: Option<PathBuf>,
    /// Stop after this many epochs of this invocation (the schedule still
    /// spans `train.epochs`).
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub net: Network<T>,
    pub opt: OptimState,
    pub history: Vec<EpochMetrics>,
    /// Loss of every optimization step run by this invocation.
    pub step_losses: Vec<f64>,
    /// Evaluation of the test split after the last epoch.
    pub final_eval: Option<EvalStats>,
}

/// Evaluates `data` in batches spread over `workers` threads. Results are
/// merged in batch order, so they do not depend on the worker count.
pub fn evaluate_parallel<T: Real>(
    net: &Network<T>,
    data: &Dataset<T>,
    batch: usize,
    workers: usize,
) -> Result<EvalStats> {
    let bs = batch.max(1);
    let starts: Vec<usize> = (0..data.len()).step_by(bs).collect();
    let run = || -> Vec<pmsn_core::Result<EvalStats>> {
        starts
            .par_iter()
            .map(|&s| evaluate(net, &data.slice(s, (s + bs).min(data.len())), bs))
            .collect()
    };
    let parts = if workers <= 1 {
        starts
            .iter()
            .map(|&s| evaluate(net, &data.slice(s, (s + bs).min(data.len())), bs))
            .collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?
            .install(run)
    };
    let mut total = EvalStats {
        spikes: vec![0; net.blocks.len()],
        neuron_steps: vec![0; net.blocks.len()],
        ..EvalStats::default()
    };
    for p in parts {
        total.merge(&p?);
    }
    Ok(total)
}

/// Shuffled sample order of `epoch`, a pure function of the run seed.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mix = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (epoch as u64).wrapping_add(1);
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix));
    order
}

pub fn write_metrics(path: &Path, history: &[EpochMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in history {
        w.serialize(row).map_err(|e| Error::format(path, e.to_string()))?;
    }
    if history.is_empty() {
        w.write_record([
            "epoch",
            "split",
            "loss",
            "accuracy",
            "wall_seconds",
            "spikes_per_neuron_per_step",
        ])
        .map_err(|e| Error::format(path, e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpochMetrics>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

fn save<T: Real>(
    path: &Path,
    net: &Network<T>,
    opt: &OptimState,
    cfg: &RunConfig,
    epoch: usize,
    history: &[EpochMetrics],
) -> Result<()> {
    let meta = json!({
        "epochs_done": epoch,
        "config": cfg.to_toml(),
        "history": history,
    });
    checkpoint_to_container(net, opt, meta).write(path)
}

/// Trains on `data.train`, evaluating on `data.test` after every epoch.
pub fn train_loop<T: Real>(cfg: &RunConfig, data: &Splits<T>, opts: &TrainOptions) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let spec = cfg.network_spec(data.inputs(), data.classes());
    let (mut net, mut opt, start, mut history) = match &opts.resume {
        Some(path) => {
            let c = Container::read(path)?;
            let (net, opt) = checkpoint_from_container::<T>(&c, spec, path)?;
            let run = &c.meta["run"];
            let done = run["epochs_done"]
                .as_u64()
                .ok_or_else(|| Error::format(path, "checkpoint lacks the epoch counter"))?
                as usize;
            let history: Vec<EpochMetrics> = serde_json::from_value(run["history"].clone()).unwrap_or_default();
            (net, opt, done, history)
        }
        None => (Network::<T>::new(spec)?, OptimState::default(), 0, Vec::new()),
    };
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let n = data.train.len();
    let bs = cfg.train.batch_size;
    let steps_per_epoch = n.div_ceil(bs);
    let schedule = cfg.schedule((steps_per_epoch * cfg.train.epochs) as u64);
    let adamw = cfg.adamw();
    let end = match opts.stop_after {
        Some(k) => (start + k).min(cfg.train.epochs),
        None => cfg.train.epochs,
    };
    let mut step_losses = Vec::new();
    let mut final_eval = None;
    for epoch in start..end {
        let t0 = Instant::now();
        let order = epoch_order(n, cfg.seed, epoch);
        let (mut loss_sum, mut correct, mut spikes, mut steps) = (0.0, 0usize, 0u64, 0u64);
        for chunk in order.chunks(bs) {
            let (x, y) = data.train.gather(chunk);
            let st = match train_step(&mut net, &mut opt, &adamw, schedule, &x, &y) {
                Ok(st) => st,
                Err(e @ pmsn_core::Error::NumericFailure(_)) => {
                    let mut msg = format!("epoch {epoch}, step {}: {e}", opt.step);
                    if let Some(dir) = &opts.out_dir {
                        let p = dir.join(LAST_GOOD_FILE);
                        save(&p, &net, &opt, cfg, epoch, &history)?;
                        msg.push_str(&format!("; last good state saved to {}", p.display()));
                    }
                    return Err(Error::Numeric(msg));
                }
                Err(e) => return Err(e.into()),
            };
            step_losses.push(st.loss);
            loss_sum += st.loss * st.batch as f64;
            correct += st.correct;
            spikes += st.spikes;
            steps += st.neuron_steps;
        }
        history.push(EpochMetrics {
            epoch,
            split: "train".into(),
            loss: loss_sum / n.max(1) as f64,
            accuracy: correct as f64 / n.max(1) as f64,
            wall_seconds: t0.elapsed().as_secs_f64(),
            spikes_per_neuron_per_step: if steps == 0 { 0.0 } else { spikes as f64 / steps as f64 },
        });
        let t1 = Instant::now();
        let ev = evaluate_parallel(&net, &data.test, cfg.train.eval_batch_size, cfg.workers)?;
        history.push(EpochMetrics {
            epoch,
            split: "test".into(),
            loss: ev.loss(),
            accuracy: ev.accuracy(),
            wall_seconds: t1.elapsed().as_secs_f64(),
            spikes_per_neuron_per_step: ev.density(),
        });
        final_eval = Some(ev);
        if let Some(dir) = &opts.out_dir {
            write_metrics(&dir.join(METRICS_FILE), &history)?;
            save(&dir.join(CHECKPOINT_FILE), &net, &opt, cfg, epoch + 1, &history)?;
        }
    }
    Ok(TrainOutcome {
        net,
        opt,
        history,
        step_losses,
        final_eval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TaskOpt;
    use crate::dataset::DatasetHandle;

    fn tiny_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.data.task = TaskOpt::DelayedRecall;
        cfg.data.time = 24;
        cfg.data.cue_window = 4;
        cfg.data.train_size = Some(24);
        cfg.data.test_size = Some(10);
        cfg.model.width = 6;
        cfg.train.batch_size = 8;
        cfg.train.eval_batch_size = 3;
        cfg.train.epochs = 2;
        cfg
    }

    #[test]
    fn epoch_order_is_a_seeded_permutation() {
        let a = epoch_order(50, 3, 0);
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_eq!(a, epoch_order(50, 3, 0));
        assert_ne!(a, epoch_order(50, 3, 1));
        assert_ne!(a, epoch_order(50, 4, 0));
    }

    #[test]
    fn metrics_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(METRICS_FILE);
        let rows = vec![EpochMetrics {
            epoch: 0,
            split: "test".into(),
            loss: 0.5,
            accuracy: 0.75,
            wall_seconds: 1.25,
            spikes_per_neuron_per_step: 0.125,
        }];
        write_metrics(&p, &rows).unwrap();
        assert_eq!(read_metrics(&p).unwrap(), rows);
        write_metrics(&p, &[]).unwrap();
        assert!(read_metrics(&p).unwrap().is_empty());
    }

    #[test]
    fn evaluation_does_not_depend_on_worker_count() {
        let cfg = tiny_config();
        let data = DatasetHandle::from_config(&cfg).load::<f64>().unwrap();
        let net = Network::<f64>::new(cfg.network_spec(data.inputs(), data.classes())).unwrap();
        let one = evaluate_parallel(&net, &data.test, 3, 1).unwrap();
        let three = evaluate_parallel(&net, &data.test, 3, 3).unwrap();
        assert_eq!(one, three);
        assert_eq!(one.samples, 10);
    }

    #[test]
    fn loop_records_both_splits_every_epoch() {
        let cfg = tiny_config();
        let data = DatasetHandle::from_config(&cfg).load::<f32>().unwrap();
        let out = train_loop(&cfg, &data, &TrainOptions::default()).unwrap();
        assert_eq!(out.history.len(), 4);
        assert_eq!(out.step_losses.len(), 2 * 3);
        assert!(out.step_losses.iter().all(|l| l.is_finite()));
        assert_eq!(out.opt.step, 6);
        assert!(out.final_eval.is_some());
    }

    #[test]
    fn diverging_run_aborts_and_saves_last_good_state() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config();
        cfg.train.lr_global = 1e300;
        cfg.train.schedule = crate::config::ScheduleOpt::Constant;
        let data = DatasetHandle::from_config(&cfg).load::<f32>().unwrap();
        let opts = TrainOptions {
            out_dir: Some(dir.path().to_path_buf()),
            ..TrainOptions::default()
        };
        match train_loop(&cfg, &data, &opts) {
            Err(e @ Error::Numeric(_)) => {
                assert_eq!(e.exit_code(), 2);
                assert!(dir.path().join(LAST_GOOD_FILE).exists());
            }
            other => panic!("expected a numeric failure, got {:?}", other.map(|o| o.history)),
        }
    }
}
