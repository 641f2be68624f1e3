//! Dataset sources and sequence transforms behind the training loop.

use std::path::{Path, PathBuf};

use pmsn_core::train::{gen_delayed_recall, Dataset, ImageSet, SequenceTransform};
use pmsn_core::Real;

use crate::config::{RunConfig, TaskOpt};
use crate::error::{Error, Result};
use crate::idx::load_idx;

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// IDX files `{train,test}-images-idx3-ubyte` / `{train,test}-labels-idx1-ubyte`
    /// in `dir`, restricted to `digits`.
    Idx { dir: PathBuf, digits: Vec<u8> },
    DelayedRecall {
        time: usize,
        classes: usize,
        cue_window: usize,
    },
}

/// Where the samples come from, how images become sequences and how many
/// samples each split holds.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHandle {
    pub source: Source,
    pub transform: SequenceTransform,
    pub train_size: Option<usize>,
    pub test_size: Option<usize>,
    pub seed: u64,
}

/// Train and test splits.
#[derive(Debug, Clone)]
pub struct Splits<T> {
    pub train: Dataset<T>,
    pub test: Dataset<T>,
}

impl<T: Real> Splits<T> {
    pub fn inputs(&self) -> usize {
        self.train.x.feature()
    }

    pub fn classes(&self) -> usize {
        self.train.classes
    }
}

impl DatasetHandle {
    pub fn from_config(cfg: &RunConfig) -> Self {
        let d = &cfg.data;
        let (source, transform) = match d.task {
            TaskOpt::DelayedRecall => (
                Source::DelayedRecall {
                    time: d.time,
                    classes: d.classes,
                    cue_window: d.cue_window,
                },
                SequenceTransform::Raster,
            ),
            TaskOpt::Smnist => (
                Source::Idx {
                    dir: d.dir.clone(),
                    digits: d.digits.clone(),
                },
                SequenceTransform::Raster,
            ),
            TaskOpt::Psmnist => (
                Source::Idx {
                    dir: d.dir.clone(),
                    digits: d.digits.clone(),
                },
                SequenceTransform::Permuted { seed: d.seed },
            ),
        };
        DatasetHandle {
            source,
            transform,
            train_size: d.train_size,
            test_size: d.test_size,
            seed: d.seed,
        }
    }

    fn idx_split(dir: &Path, split: &str, digits: &[u8], size: Option<usize>) -> Result<ImageSet> {
        let images = dir.join(format!("{split}-images-idx3-ubyte"));
        let labels = dir.join(format!("{split}-labels-idx1-ubyte"));
        let set = load_idx(&images, &labels)?.filter_labels(digits);
        match size {
            Some(n) if n > set.len() => Err(Error::Validation(format!(
                "{split} split requested {n} samples but {} has only {}",
                dir.display(),
                set.len()
            ))),
            Some(n) => Ok(set.take(n)),
            None => Ok(set),
        }
    }

    pub fn load<T: Real>(&self) -> Result<Splits<T>> {
        match &self.source {
            Source::Idx { dir, digits } => {
                let classes = digits.len();
                let train = Self::idx_split(dir, "train", digits, self.train_size)?;
                let test = Self::idx_split(dir, "test", digits, self.test_size)?;
                Ok(Splits {
                    train: Dataset::from_images(&train, self.transform, classes)?,
                    test: Dataset::from_images(&test, self.transform, classes)?,
                })
            }
            &Source::DelayedRecall {
                time,
                classes,
                cue_window,
            } => {
                let ntr = self.train_size.unwrap_or(2000);
                let nte = self.test_size.unwrap_or(500);
                let all = gen_delayed_recall::<T>(ntr + nte, time, classes, cue_window, self.seed)?;
                Ok(Splits {
                    train: all.slice(0, ntr),
                    test: all.slice(ntr, ntr + nte),
                })
            }
        }
    }
}
