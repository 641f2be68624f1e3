//! TOML run configuration.
//!
//! Every section rejects unknown keys. Top-level keys: `seed`, `workers`,
//! `precision`, `reset`, `clamp_ih`; sections `[model]`, `[train]`,
//! `[data]`, `[forward]`, `[bench]`, `[gradcheck]`.

use std::path::{Path, PathBuf};

use pmsn_core::grad::SurrogateConfig;
use pmsn_core::neuron::{InitConfig, ResetMode};
use pmsn_core::parallel::{Context, ExecMode, LayerConfig};
use pmsn_core::train::{AdamWConfig, BlockSpec, LrSchedule, NetworkSpec, NeuronKind, Readout};
use pmsn_core::Precision;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecisionOpt {
    Single,
    Double,
}

impl PrecisionOpt {
    pub fn core(self) -> Precision {
        match self {
            PrecisionOpt::Single => Precision::Single,
            PrecisionOpt::Double => Precision::Double,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "single" => Some(PrecisionOpt::Single),
            "double" => Some(PrecisionOpt::Double),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResetOpt {
    Floor,
    Subtract,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeOpt {
    Serial,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextOpt {
    Local,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeuronOpt {
    Pmsn,
    Lif,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutOpt {
    Mean,
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleOpt {
    Constant,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskOpt {
    DelayedRecall,
    Smnist,
    Psmnist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: NeuronOpt,
    /// Compartments per neuron; `n` is accepted as a synonym.
    pub compartments: Option<usize>,
    pub n: Option<usize>,
    /// Neurons per hidden layer.
    pub width: usize,
    /// Number of hidden blocks.
    pub depth: usize,
    pub norm: bool,
    pub readout: ReadoutOpt,
    pub readout_window: usize,
    pub lif_alpha: f64,
    pub theta: f64,
    pub surrogate_width: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: NeuronOpt::Pmsn,
            compartments: None,
            n: None,
            width: 64,
            depth: 1,
            norm: true,
            readout: ReadoutOpt::Mean,
            readout_window: 10,
            lif_alpha: 0.9,
            theta: 1.0,
            surrogate_width: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn compartment_count(&self) -> usize {
        self.compartments.or(self.n).unwrap_or(5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr_global: f64,
    pub lr_neuronal: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub eval_batch_size: usize,
    pub schedule: ScheduleOpt,
    /// Accepted for completeness; only 0 is supported.
    pub dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_global: 1e-2,
            lr_neuronal: 1e-3,
            weight_decay: 1e-2,
            epochs: 20,
            batch_size: 32,
            eval_batch_size: 128,
            schedule: ScheduleOpt::Cosine,
            dropout: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub task: TaskOpt,
    pub seed: u64,
    /// Directory holding `{train,test}-{images,labels}-idx*-ubyte`.
    pub dir: PathBuf,
    /// Digits kept from the image files, relabelled 0, 1, ...
    pub digits: Vec<u8>,
    pub train_size: Option<usize>,
    pub test_size: Option<usize>,
    /// Delayed recall: sequence length, cue length and class count.
    pub time: usize,
    pub cue_window: usize,
    pub classes: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            task: TaskOpt::Smnist,
            seed: 0,
            dir: PathBuf::from("data/mnist01"),
            digits: vec![0, 1],
            train_size: None,
            test_size: None,
            time: 200,
            cue_window: 10,
            classes: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardConfig {
    pub mode: ModeOpt,
    pub context: ContextOpt,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        ForwardConfig {
            mode: ModeOpt::Parallel,
            context: ContextOpt::Local,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub t_list: Vec<usize>,
    pub batch_list: Vec<usize>,
    pub reps: usize,
    pub warmup: usize,
    /// Neurons per timed layer.
    pub width: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            t_list: vec![128, 256, 512, 1024],
            batch_list: vec![1, 8],
            reps: 5,
            warmup: 1,
            width: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    pub seeds: usize,
    pub time: usize,
    pub features: usize,
    pub batch: usize,
    pub eps: f64,
    pub tolerance: f64,
    pub linear_eps: f64,
    pub linear_tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            seeds: 20,
            time: 32,
            features: 3,
            batch: 2,
            eps: 1e-6,
            tolerance: 1e-4,
            linear_eps: 3e-4,
            linear_tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub precision: PrecisionOpt,
    pub reset: ResetOpt,
    pub clamp_ih: bool,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub forward: ForwardConfig,
    pub bench: BenchConfig,
    pub gradcheck: GradcheckConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            workers: 1,
            precision: PrecisionOpt::Single,
            reset: ResetOpt::Floor,
            clamp_ih: true,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            data: DataConfig::default(),
            forward: ForwardConfig::default(),
            bench: BenchConfig::default(),
            gradcheck: GradcheckConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates a TOML document. Errors carry the line, column
    /// and offending key.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let m = &self.model;
        if let (Some(a), Some(b)) = (m.compartments, m.n) {
            if a != b {
                return bad(format!("model.n = {b} disagrees with model.compartments = {a}"));
            }
        }
        if m.kind == NeuronOpt::Pmsn && m.compartment_count() < 2 {
            return bad("model.compartments must be at least 2".into());
        }
        if m.width == 0 || m.depth == 0 {
            return bad("model.width and model.depth must be positive".into());
        }
        if m.readout == ReadoutOpt::Tail && m.readout_window == 0 {
            return bad("model.readout_window must be positive".into());
        }
        if !(m.lif_alpha > 0.0 && m.lif_alpha <= 1.0) {
            return bad("model.lif_alpha must lie in (0, 1]".into());
        }
        if !(m.theta > 0.0 && m.theta.is_finite()) || !(m.surrogate_width > 0.0 && m.surrogate_width.is_finite()) {
            return bad("model.theta and model.surrogate_width must be positive".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        let t = &self.train;
        if t.dropout != 0.0 {
            return bad("train.dropout is not supported; it must be 0".into());
        }
        if t.batch_size == 0 || t.eval_batch_size == 0 {
            return bad("train.batch_size and train.eval_batch_size must be positive".into());
        }
        if !(t.lr_global >= 0.0 && t.lr_neuronal >= 0.0 && t.weight_decay >= 0.0) {
            return bad("learning rates and weight decay must be non-negative".into());
        }
        let d = &self.data;
        if d.task == TaskOpt::DelayedRecall && (d.cue_window == 0 || d.cue_window >= d.time || d.classes < 2) {
            return bad("data: delayed recall needs 0 < cue_window < time and classes >= 2".into());
        }
        if d.task != TaskOpt::DelayedRecall && d.digits.len() < 2 {
            return bad("data.digits must list at least two digits".into());
        }
        if self.forward.mode == ModeOpt::Parallel && self.reset != ResetOpt::Floor && m.kind == NeuronOpt::Pmsn {
            return bad("forward.mode = \"parallel\" requires reset = \"floor\"; use forward.mode = \"serial\"".into());
        }
        if self.bench.reps < 5 {
            return bad("bench.reps must be at least 5".into());
        }
        if self.bench.t_list.is_empty() || self.bench.batch_list.is_empty() || self.bench.width == 0 {
            return bad("bench.t_list, bench.batch_list and bench.width must be non-empty".into());
        }
        Ok(())
    }

    pub fn layer_config(&self) -> LayerConfig {
        LayerConfig {
            mode: match self.forward.mode {
                ModeOpt::Serial => ExecMode::Serial,
                ModeOpt::Parallel => ExecMode::Parallel,
            },
            context: match self.forward.context {
                ContextOpt::Local => Context::Local,
                ContextOpt::Global => Context::Global,
            },
            reset: match self.reset {
                ResetOpt::Floor => ResetMode::Floor,
                ResetOpt::Subtract => ResetMode::Subtract,
                ResetOpt::None => ResetMode::None,
            },
            clamp_ih: self.clamp_ih,
        }
    }

    pub fn neuron_kind(&self) -> NeuronKind {
        match self.model.kind {
            NeuronOpt::Pmsn => NeuronKind::Pmsn {
                compartments: self.model.compartment_count(),
            },
            NeuronOpt::Lif => NeuronKind::Lif {
                alpha: self.model.lif_alpha,
            },
        }
    }

    pub fn init_config(&self) -> InitConfig {
        InitConfig {
            theta: self.model.theta,
            ..InitConfig::default()
        }
    }

    /// Network specification for `inputs` features and `classes` outputs.
    pub fn network_spec(&self, inputs: usize, classes: usize) -> NetworkSpec {
        let m = &self.model;
        NetworkSpec {
            inputs,
            blocks: vec![
                BlockSpec {
                    width: m.width,
                    norm: m.norm,
                    neuron: self.neuron_kind(),
                };
                m.depth
            ],
            classes,
            readout: match m.readout {
                ReadoutOpt::Mean => Readout::Mean,
                ReadoutOpt::Tail => Readout::Tail(m.readout_window),
            },
            layer: self.layer_config(),
            init: self.init_config(),
            surrogate: SurrogateConfig {
                gamma_width: m.surrogate_width,
            },
            seed: self.seed,
        }
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            lr_global: self.train.lr_global,
            lr_neuronal: self.train.lr_neuronal,
            weight_decay: self.train.weight_decay,
            ..AdamWConfig::default()
        }
    }

    pub fn schedule(&self, total_steps: u64) -> LrSchedule {
        match self.train.schedule {
            ScheduleOpt::Constant => LrSchedule::Constant,
            ScheduleOpt::Cosine => LrSchedule::Cosine { total_steps },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_keys_parse() {
        let cfg = RunConfig::from_toml_str(
            r#"
            reset = "floor"
            clamp_ih = false
            [model]
            n = 4
            compartments = 4
            [train]
            lr_global = 0.02
            lr_neuronal = 0.002
            epochs = 3
            [data]
            task = "delayed-recall"
            seed = 7
            [forward]
            mode = "serial"
            context = "global"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.model.compartment_count(), 4);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.data.seed, 7);
        assert_eq!(cfg.layer_config().mode, ExecMode::Serial);
        assert_eq!(cfg.layer_config().context, Context::Global);
        assert!(!cfg.clamp_ih);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml_str("[train]\nlearning_rate = 0.1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("learning_rate"), "{err}");
        assert!(err.contains("line 2"), "{err}");
        let err = RunConfig::from_toml_str("bogus = 1\n").unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn bad_values_are_rejected() {
        for text in [
            "[model]\nn = 3\ncompartments = 5\n",
            "[model]\ncompartments = 1\n",
            "[train]\ndropout = 0.1\n",
            "reset = \"subtract\"\n",
            "[forward]\nmode = \"sideways\"\n",
            "workers = 0\n",
        ] {
            assert!(
                matches!(RunConfig::from_toml_str(text), Err(Error::Config(_))),
                "{text}"
            );
        }
        assert!(RunConfig::from_toml_str("reset = \"subtract\"\n[forward]\nmode = \"serial\"\n").is_ok());
    }

    #[test]
    fn serialization_round_trips() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
    }
}
