use std::path::Path;
use std::process::Command;

use pmsn::config::{RunConfig, TaskOpt};
use pmsn::dataset::DatasetHandle;
use pmsn::trainer::{read_metrics, train_loop, TrainOptions, CHECKPOINT_FILE};

fn small_recall() -> RunConfig {
    let mut cfg = RunConfig {
        seed: 9,
        ..RunConfig::default()
    };
    cfg.data.task = TaskOpt::DelayedRecall;
    cfg.data.time = 40;
    cfg.data.cue_window = 5;
    cfg.data.train_size = Some(48);
    cfg.data.test_size = Some(16);
    cfg.model.width = 8;
    cfg.train.batch_size = 16;
    cfg.train.eval_batch_size = 8;
    cfg.train.epochs = 3;
    cfg
}

#[test]
fn resume_continues_with_the_same_next_step_loss() {
    let cfg = small_recall();
    let data = DatasetHandle::from_config(&cfg).load::<f32>().unwrap();
    let full = train_loop(&cfg, &data, &TrainOptions::default()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let first = TrainOptions {
        out_dir: Some(dir.path().to_path_buf()),
        stop_after: Some(1),
        ..TrainOptions::default()
    };
    let head = train_loop(&cfg, &data, &first).unwrap();
    let rest = TrainOptions {
        resume: Some(dir.path().join(CHECKPOINT_FILE)),
        ..TrainOptions::default()
    };
    let tail = train_loop(&cfg, &data, &rest).unwrap();

    let k = head.step_losses.len();
    assert_eq!(k, 3);
    assert_eq!(&full.step_losses[..k], &head.step_losses[..]);
    assert_eq!(&full.step_losses[k..], &tail.step_losses[..]);
    assert_eq!(full.net, tail.net);
    assert_eq!(full.opt.step, tail.opt.step);
}

#[test]
fn seeded_runs_repeat_and_seeds_differ() {
    let cfg = small_recall();
    let data = DatasetHandle::from_config(&cfg).load::<f32>().unwrap();
    let a = train_loop(&cfg, &data, &TrainOptions::default()).unwrap();
    let b = train_loop(&cfg, &data, &TrainOptions::default()).unwrap();
    for (x, y) in a.step_losses.iter().zip(&b.step_losses) {
        assert!((x - y).abs() <= 1e-6);
    }
    let mut other = cfg.clone();
    other.seed = 10;
    let c = train_loop(&other, &data, &TrainOptions::default()).unwrap();
    assert_ne!(a.step_losses, c.step_losses);
}

#[test]
fn delayed_recall_default_config_trains_one_epoch() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = Command::new(env!("CARGO_BIN_EXE_pmsn"))
        .args(["--config", "configs/delayed_recall.toml", "--out"])
        .arg(&out)
        .args(["train", "--stop-after", "1"])
        .current_dir(&root)
        .output()
        .unwrap();
    assert_eq!(
        status.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let m = read_metrics(&out.join("metrics.csv")).unwrap();
    assert_eq!(m.len(), 2);
    assert_eq!(m[1].split, "test");
    assert!(m
        .iter()
        .all(|r| r.loss.is_finite() && (0.0..=1.0).contains(&r.accuracy)));
    let cfg = RunConfig::load(&root.join("configs/delayed_recall.toml")).unwrap();
    assert_eq!(cfg.model.compartment_count(), 5);
    assert_eq!((cfg.data.time, cfg.data.cue_window), (200, 10));
}
