use alloc::vec;
use alloc::vec::Vec;

use super::data::Dataset;
use super::loss::{correct_count, cross_entropy};
use super::network::Network;
use super::optim::{adamw_step, AdamWConfig, LrSchedule, OptimState};
use crate::error::{numeric, Result};
use crate::numeric::SeqTensor;
use crate::real::Real;

/// Outcome of one optimization step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub correct: usize,
    pub batch: usize,
    /// Spikes emitted by all blocks and the matching neuron-step count.
    pub spikes: u64,
    pub neuron_steps: u64,
}

/// Forward, loss, backward and AdamW update on one batch. A non-finite loss
/// or gradient aborts before the parameters are touched.
pub fn train_step<T: Real>(
    net: &mut Network<T>,
    opt: &mut OptimState,
    cfg: &AdamWConfig,
    schedule: LrSchedule,
    x: &SeqTensor<T>,
    labels: &[usize],
) -> Result<StepStats> {
    let classes = net.spec.classes;
    let (out, trace) = net.forward_train(x)?;
    let (loss, d_logits) = cross_entropy(&out.logits, classes, labels)?;
    let loss = loss.as_f64();
    if !loss.is_finite() {
        return Err(numeric("training loss is not finite"));
    }
    let grads = net.backward(&trace, &d_logits)?;
    let finite = grads.is_finite();
    if !finite {
        return Err(numeric("gradient is not finite"));
    }
    adamw_step(net, opt, &grads, cfg, schedule)?;
    Ok(StepStats {
        loss,
        correct: correct_count(&out.logits, classes, labels),
        batch: labels.len(),
        spikes: out
            .spikes
            .iter()
            .map(|s| s.data().iter().filter(|&&v| v != T::zero()).count() as u64)
            .sum(),
        neuron_steps: out.spikes.iter().map(|s| s.len() as u64).sum(),
    })
}

/// Aggregated evaluation results.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalStats {
    pub loss_sum: f64,
    pub correct: usize,
    pub samples: usize,
    /// Spike count of every block.
    pub spikes: Vec<u64>,
    /// Neuron-steps of every block (`width * T * samples`).
    pub neuron_steps: Vec<u64>,
    /// Number of non-zero input entries and total input entries.
    pub input_nonzero: u64,
    pub input_entries: u64,
}

impl EvalStats {
    /// Adds the counts of `other`, which must come from the same network.
    pub fn merge(&mut self, other: &EvalStats) {
        self.loss_sum += other.loss_sum;
        self.correct += other.correct;
        self.samples += other.samples;
        if self.spikes.len() < other.spikes.len() {
            self.spikes.resize(other.spikes.len(), 0);
            self.neuron_steps.resize(other.neuron_steps.len(), 0);
        }
        for (a, b) in self.spikes.iter_mut().zip(&other.spikes) {
            *a += b;
        }
        for (a, b) in self.neuron_steps.iter_mut().zip(&other.neuron_steps) {
            *a += b;
        }
        self.input_nonzero += other.input_nonzero;
        self.input_entries += other.input_entries;
    }

    pub fn loss(&self) -> f64 {
        self.loss_sum / self.samples.max(1) as f64
    }

    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.samples.max(1) as f64
    }

    /// Spikes per neuron per step of each block.
    pub fn layer_density(&self) -> Vec<f64> {
        self.spikes
            .iter()
            .zip(&self.neuron_steps)
            .map(|(&s, &n)| if n == 0 { 0.0 } else { s as f64 / n as f64 })
            .collect()
    }

    /// Spikes per neuron per step over all blocks.
    pub fn density(&self) -> f64 {
        let s: u64 = self.spikes.iter().sum();
        let n: u64 = self.neuron_steps.iter().sum();
        if n == 0 {
            0.0
        } else {
            s as f64 / n as f64
        }
    }

    /// Fraction of non-zero entries in the network input.
    pub fn input_rate(&self) -> f64 {
        if self.input_entries == 0 {
            0.0
        } else {
            self.input_nonzero as f64 / self.input_entries as f64
        }
    }
}

/// Evaluates `data` in batches of `batch_size` with running normalization
/// statistics.
pub fn evaluate<T: Real>(net: &Network<T>, data: &Dataset<T>, batch_size: usize) -> Result<EvalStats> {
    let bs = batch_size.max(1);
    let depth = net.blocks.len();
    let mut st = EvalStats {
        spikes: vec![0; depth],
        neuron_steps: vec![0; depth],
        ..EvalStats::default()
    };
    let mut start = 0;
    while start < data.len() {
        let end = (start + bs).min(data.len());
        let part = data.slice(start, end);
        let out = net.forward_eval(&part.x)?;
        let (loss, _) = cross_entropy(&out.logits, net.spec.classes, &part.labels)?;
        let loss = loss.as_f64();
        if !loss.is_finite() {
            return Err(numeric("evaluation loss is not finite"));
        }
        st.loss_sum += loss * part.len() as f64;
        st.correct += correct_count(&out.logits, net.spec.classes, &part.labels);
        st.samples += part.len();
        for (k, s) in out.spikes.iter().enumerate() {
            st.spikes[k] += s.data().iter().filter(|&&v| v != T::zero()).count() as u64;
            st.neuron_steps[k] += s.len() as u64;
        }
        st.input_nonzero += part.x.data().iter().filter(|&&v| v != T::zero()).count() as u64;
        st.input_entries += part.x.len() as u64;
        start = end;
    }
    Ok(st)
}
