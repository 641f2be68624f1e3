//! Timing harness, per-layer energy accounting and impulse-response traces.

use std::hint::black_box;
use std::time::Instant;

use pmsn_core::energy::{energy_estimate, EnergyModel, LayerStats, ModelKind, Rate};
use pmsn_core::grad::{backward_params, bptt_serial, LayerTape, SurrogateConfig};
use pmsn_core::neuron::{
    init_params, lif_forward_serial, pmsn_hidden_trace, pmsn_serial_forward, InitConfig, LifParams, PmsnParams,
    ResetMode,
};
use pmsn_core::numeric::{direct_convolve, linear_convolve, SeqTensor};
use pmsn_core::parallel::{build_kernel, layer_forward, LayerConfig};
use pmsn_core::train::{lif_backward, EvalStats, Network, NeuronLayer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::BenchConfig;
use crate::error::{Error, Result};

/// Median and interquartile range of repeated measurements, in microseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub median_us: f64,
    pub iqr_us: f64,
    pub samples: Vec<f64>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Timing {
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Timing {
            median_us: quantile(&samples, 0.5),
            iqr_us: quantile(&samples, 0.75) - quantile(&samples, 0.25),
            samples,
        }
    }
}

/// Runs `f` `warmup` times unmeasured, then `reps` (at least 5) times measured.
pub fn measure<F: FnMut() -> Result<()>>(reps: usize, warmup: usize, mut f: F) -> Result<Timing> {
    for _ in 0..warmup {
        f()?;
    }
    let mut samples = Vec::with_capacity(reps.max(5));
    for _ in 0..reps.max(5) {
        let t0 = Instant::now();
        f()?;
        samples.push(t0.elapsed().as_secs_f64() * 1e6);
    }
    Ok(Timing::from_samples(samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimedModel {
    SerialMsn,
    SerialLif,
    ParallelPmsn,
}

impl TimedModel {
    pub const ALL: [TimedModel; 3] = [TimedModel::SerialMsn, TimedModel::SerialLif, TimedModel::ParallelPmsn];

    pub fn as_str(self) -> &'static str {
        match self {
            TimedModel::SerialMsn => "serial-msn",
            TimedModel::SerialLif => "serial-lif",
            TimedModel::ParallelPmsn => "parallel-pmsn",
        }
    }
}

/// One row of the timing table. `ratio` is this model's median over the
/// parallel PMSN median at the same length, batch and pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub model: String,
    pub pass: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub batch: usize,
    pub median_us: f64,
    pub iqr_us: f64,
    pub ratio: f64,
    pub reps: usize,
    pub threads: usize,
}

/// Workload of one timed layer: PMSN and LIF parameters and random input.
pub struct Workload {
    pub pmsn: PmsnParams<f32>,
    pub lif: LifParams<f32>,
    pub input: SeqTensor<f32>,
    pub upstream: SeqTensor<f32>,
}

impl Workload {
    pub fn new(t: usize, batch: usize, width: usize, compartments: usize, seed: u64) -> Result<Self> {
        let (_, pmsn) = init_params::<f32>(compartments, width, seed, &InitConfig::default())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let n = batch * t * width;
        let input = SeqTensor::from_vec((0..n).map(|_| rng.random_range(0.0f32..1.0)).collect(), batch, t, width)?;
        let upstream = SeqTensor::from_vec(
            (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
            batch,
            t,
            width,
        )?;
        Ok(Workload {
            pmsn,
            lif: LifParams::new(0.9, 1.0)?,
            input,
            upstream,
        })
    }

    /// One forward (and optionally backward) pass of `model`.
    pub fn run(&self, model: TimedModel, backward: bool) -> Result<()> {
        let cfg = LayerConfig::default();
        let sur = SurrogateConfig::default();
        match (model, backward) {
            (TimedModel::SerialMsn, false) => {
                black_box(pmsn_serial_forward(&self.pmsn, &self.input, ResetMode::Floor, true)?);
            }
            (TimedModel::SerialMsn, true) => {
                black_box(bptt_serial(&self.pmsn, &self.input, &self.upstream, &cfg, &sur)?);
            }
            (TimedModel::SerialLif, false) => {
                black_box(lif_forward_serial(&self.lif, &self.input));
            }
            (TimedModel::SerialLif, true) => {
                let (v, _) = lif_forward_serial(&self.lif, &self.input);
                black_box(lif_backward(&self.lif, &v, &self.upstream, &sur)?);
            }
            (TimedModel::ParallelPmsn, false) => {
                black_box(layer_forward(&self.pmsn, &self.input, &cfg)?);
            }
            (TimedModel::ParallelPmsn, true) => {
                let (_, tape) = LayerTape::record(&self.pmsn, &self.input, &cfg)?;
                black_box(backward_params(&tape, &sur, &self.upstream)?);
            }
        }
        Ok(())
    }
}

/// Times every model at every `(T, batch)` of `cfg` on the calling thread.
pub fn time_models(cfg: &BenchConfig, compartments: usize, seed: u64) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    for &t in &cfg.t_list {
        for &batch in &cfg.batch_list {
            let w = Workload::new(t, batch, cfg.width, compartments, seed)?;
            for backward in [false, true] {
                let mut timings = Vec::new();
                for model in TimedModel::ALL {
                    timings.push((model, measure(cfg.reps, cfg.warmup, || w.run(model, backward))?));
                }
                let base = timings
                    .iter()
                    .find(|(m, _)| *m == TimedModel::ParallelPmsn)
                    .map(|(_, t)| t.median_us)
                    .unwrap_or(f64::NAN);
                for (model, tm) in timings {
                    rows.push(TimingRow {
                        model: model.as_str().into(),
                        pass: if backward { "forward_backward" } else { "forward" }.into(),
                        t,
                        batch,
                        median_us: tm.median_us,
                        iqr_us: tm.iqr_us,
                        ratio: tm.median_us / base,
                        reps: tm.samples.len(),
                        threads: 1,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Agreement of the FFT convolution with direct summation on one length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvRow {
    #[serde(rename = "T")]
    pub t: usize,
    pub precision: String,
    /// `max |fft - direct| / max |direct|`.
    pub max_rel_err: f64,
}

fn conv_rel_err<T: pmsn_core::Real>(x: &[T], k: &[T]) -> Result<f64> {
    let fast = linear_convolve(x, k)?;
    let slow = direct_convolve(x, k);
    let scale = slow.iter().fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
    let err = fast
        .iter()
        .zip(&slow)
        .fold(0.0f64, |m, (a, b)| m.max((a.as_f64() - b.as_f64()).abs()));
    Ok(if scale > 0.0 { err / scale } else { err })
}

/// Convolves uniform input with an initialized PMSN kernel at every length
/// of `t_list`, in both precisions.
pub fn convolution_check(t_list: &[usize], compartments: usize, seed: u64) -> Result<Vec<ConvRow>> {
    let mut rows = Vec::new();
    for &t in t_list {
        let (_, p) = init_params::<f64>(compartments, 1, seed, &InitConfig::default())?;
        let kernel = build_kernel(&p, t)?.kernel_lane(0).to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ t as u64);
        let x: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..1.0)).collect();
        rows.push(ConvRow {
            t,
            precision: "double".into(),
            max_rel_err: conv_rel_err(&x, &kernel)?,
        });
        let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let k32: Vec<f32> = kernel.iter().map(|&v| v as f32).collect();
        rows.push(ConvRow {
            t,
            precision: "single".into(),
            max_rel_err: conv_rel_err(&x32, &k32)?,
        });
    }
    Ok(rows)
}

/// One row of the energy table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyRow {
    pub layer: String,
    pub ac_count: f64,
    pub mac_count: u128,
    pub picojoules: f64,
    /// Measured presynaptic firing rate; empty on the total row.
    pub fr_in: Option<f64>,
}

/// Energy of every spiking block of `net`, with presynaptic rates measured
/// by `eval` over sequences of length `t`. The first block's rate is the
/// fraction of non-zero input entries.
pub fn energy_table<T: pmsn_core::Real>(net: &Network<T>, eval: &EvalStats, t: usize) -> Result<Vec<EnergyRow>> {
    let model = EnergyModel::default();
    let mut rows = Vec::new();
    let mut total_pj = 0.0;
    let mut total_ac = 0.0;
    let mut total_mac = 0u128;
    for (i, b) in net.blocks.iter().enumerate() {
        let fr_in = if i == 0 {
            Rate::new(eval.input_nonzero, eval.input_entries)?
        } else {
            Rate::new(eval.spikes[i - 1], eval.neuron_steps[i - 1])?
        };
        let kind = match &b.neuron {
            NeuronLayer::Pmsn(p) => ModelKind::Pmsn {
                compartments: p.compartments() as u64,
            },
            NeuronLayer::Lif(_) => ModelKind::Lif,
        };
        let stats = LayerStats {
            h: b.dense.inputs as u64,
            m: b.dense.outputs as u64,
            t: t as u64,
            fr_in,
        };
        let r = energy_estimate(&stats, kind, &model)?;
        total_pj += r.picojoules();
        total_ac += r.ac_count();
        total_mac += r.mac_count;
        rows.push(EnergyRow {
            layer: format!("block{i}"),
            ac_count: r.ac_count(),
            mac_count: r.mac_count,
            picojoules: r.picojoules(),
            fr_in: Some(fr_in.as_f64()),
        });
    }
    if rows.iter().any(|r| !r.picojoules.is_finite()) {
        return Err(Error::Numeric("energy estimate is not finite".into()));
    }
    rows.push(EnergyRow {
        layer: "total".into(),
        ac_count: total_ac,
        mac_count: total_mac,
        picojoules: total_pj,
        fr_in: None,
    });
    Ok(rows)
}

/// One sample of an impulse-response trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpulseRow {
    pub t: usize,
    pub compartment: String,
    pub value: f64,
}

/// Response of neuron `feature` to a unit impulse at `t = 0`: for each
/// hidden mode `j` the contribution `Re(phi_s_j V_j[t])` to the output
/// compartment current (compartment `h<j>`), and the output potential
/// `v_s` (compartment `s`).
pub fn impulse_trace(p: &PmsnParams<f64>, feature: usize, t: usize) -> Result<Vec<ImpulseRow>> {
    let mut series = vec![0.0; t];
    if t > 0 {
        series[0] = 1.0;
    }
    let modes = pmsn_hidden_trace(p, feature, &series)?;
    let single = p.select(feature)?;
    let input = SeqTensor::from_series(&series);
    let out = layer_forward(&single, &input, &LayerConfig::default())?;
    let mut rows = Vec::with_capacity(t * (p.modes + 1));
    for step in 0..t {
        for (j, tr) in modes.iter().enumerate() {
            rows.push(ImpulseRow {
                t: step,
                compartment: format!("h{j}"),
                value: (p.phi_s[feature * p.modes + j] * tr[step]).re,
            });
        }
        rows.push(ImpulseRow {
            t: step,
            compartment: "s".into(),
            value: out.v_s.get(0, step, 0),
        });
    }
    Ok(rows)
}

/// Damping `Re(lambda dt)` and oscillation frequency `Im(lambda dt) / 2 pi`
/// (cycles per step) of every hidden mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeRow {
    pub neuron: usize,
    pub mode: usize,
    pub damping: f64,
    pub frequency: f64,
}

pub fn mode_table<T: pmsn_core::Real>(p: &PmsnParams<T>) -> Vec<ModeRow> {
    let mut rows = Vec::with_capacity(p.lambda_dt.len());
    for f in 0..p.features {
        for j in 0..p.modes {
            let z = p.lambda_dt[f * p.modes + j];
            rows.push(ModeRow {
                neuron: f,
                mode: j,
                damping: z.re.as_f64(),
                frequency: z.im.as_f64() / (2.0 * std::f64::consts::PI),
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramRow {
    pub quantity: String,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

/// Equal-width histogram over the range of `values`.
pub fn histogram(quantity: &str, values: &[f64], bins: usize) -> Vec<HistogramRow> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramRow {
            quantity: quantity.into(),
            bin_lo: lo + k as f64 * width,
            bin_hi: lo + (k + 1) as f64 * width,
            count,
        })
        .collect()
}
