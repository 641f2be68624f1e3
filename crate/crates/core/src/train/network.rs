use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::{Dense, DenseGrad};
use super::norm::{BatchNorm, NormCache};
use crate::error::{invalid, Error, Result};
use crate::grad::{backward_params, surrogate, GradBundle, LayerTape, SurrogateConfig};
use crate::neuron::{init_params, lif_forward_serial, InitConfig, LifParams, PmsnParams};
use crate::numeric::SeqTensor;
use crate::parallel::{layer_forward, LayerConfig};
use crate::real::Real;

/// Neuron model of a block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeuronKind {
    Pmsn {
        compartments: usize,
    },
    /// LIF with a fixed per-step decay.
    Lif {
        alpha: f64,
    },
}

/// How spikes of the last block are pooled over time before the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    Mean,
    /// Mean over the final `k` steps.
    Tail(usize),
}

impl Readout {
    /// `(start, len)` of the pooling window for a sequence of length `t`.
    pub fn window(self, t: usize) -> (usize, usize) {
        match self {
            Readout::Mean => (0, t),
            Readout::Tail(k) => {
                let k = k.clamp(1, t.max(1));
                (t - k.min(t), k.min(t))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSpec {
    pub width: usize,
    pub norm: bool,
    pub neuron: NeuronKind,
}

/// Architecture of a feed-forward spiking classifier:
/// `(dense -> norm? -> neuron)*` followed by a pooled dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub inputs: usize,
    pub blocks: Vec<BlockSpec>,
    pub classes: usize,
    pub readout: Readout,
    pub layer: LayerConfig,
    pub init: InitConfig,
    pub surrogate: SurrogateConfig,
    pub seed: u64,
}

impl NetworkSpec {
    /// `depth` identical blocks of `width` neurons.
    pub fn uniform(inputs: usize, width: usize, depth: usize, classes: usize, neuron: NeuronKind, norm: bool) -> Self {
        NetworkSpec {
            inputs,
            blocks: vec![BlockSpec { width, norm, neuron }; depth],
            classes,
            readout: Readout::Mean,
            layer: LayerConfig::default(),
            init: InitConfig::default(),
            surrogate: SurrogateConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.classes == 0 {
            return Err(Error::Config("input and class counts must be positive".into()));
        }
        if self.blocks.is_empty() {
            return Err(Error::Config("network needs at least one spiking block".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.width == 0 {
                return Err(Error::Config(format!("block {i} has zero width")));
            }
            match b.neuron {
                NeuronKind::Pmsn { compartments } if compartments < 2 => {
                    return Err(Error::Config(format!("block {i}: PMSN needs at least 2 compartments")));
                }
                NeuronKind::Lif { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                    return Err(Error::Config(format!("block {i}: LIF alpha must lie in (0, 1]")));
                }
                _ => {}
            }
        }
        if let Readout::Tail(0) = self.readout {
            return Err(Error::Config("tail readout window must be positive".into()));
        }
        self.init.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NeuronLayer<T> {
    Pmsn(PmsnParams<T>),
    Lif(LifParams<T>),
}

impl<T: Real> NeuronLayer<T> {
    pub fn width(&self) -> Option<usize> {
        match self {
            NeuronLayer::Pmsn(p) => Some(p.features),
            NeuronLayer::Lif(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block<T> {
    pub dense: Dense<T>,
    pub norm: Option<BatchNorm<T>>,
    pub neuron: NeuronLayer<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub spec: NetworkSpec,
    pub blocks: Vec<Block<T>>,
    pub head: Dense<T>,
}

/// Parameter gradients of one PMSN layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronGrad<T> {
    pub d_lambda_dt: Vec<num_complex::Complex<T>>,
    pub d_phi_c: Vec<num_complex::Complex<T>>,
    pub d_phi_s: Vec<num_complex::Complex<T>>,
    pub d_gamma_n: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrad<T> {
    pub dense: DenseGrad<T>,
    /// `(d_gamma, d_beta)` of the normalization layer.
    pub norm: Option<(Vec<T>, Vec<T>)>,
    pub neuron: Option<NeuronGrad<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads<T> {
    pub blocks: Vec<BlockGrad<T>>,
    pub head: DenseGrad<T>,
}

impl<T: Real> NetGrads<T> {
    pub fn is_finite(&self) -> bool {
        let real = |v: &[T]| v.iter().all(|x| x.is_finite());
        let cplx = |v: &[num_complex::Complex<T>]| v.iter().all(|c| c.re.is_finite() && c.im.is_finite());
        real(&self.head.d_weight)
            && real(&self.head.d_bias)
            && self.blocks.iter().all(|b| {
                real(&b.dense.d_weight)
                    && real(&b.dense.d_bias)
                    && b.norm.as_ref().is_none_or(|(g, h)| real(g) && real(h))
                    && b.neuron.as_ref().is_none_or(|n| {
                        cplx(&n.d_lambda_dt) && cplx(&n.d_phi_c) && cplx(&n.d_phi_s) && real(&n.d_gamma_n)
                    })
            })
    }
}

/// Logits and per-block spike trains of a forward pass.
#[derive(Debug, Clone)]
pub struct NetOutput<T> {
    /// `[batch][classes]`, row-major.
    pub logits: Vec<T>,
    pub spikes: Vec<SeqTensor<T>>,
}

impl<T: Real> NetOutput<T> {
    pub fn batch(&self) -> usize {
        self.spikes.first().map_or(0, |s| s.batch())
    }
}

#[derive(Debug, Clone)]
enum NeuronTape<T> {
    Pmsn(LayerTape),
    Lif(SeqTensor<T>),
}

#[derive(Debug, Clone)]
struct BlockTrace<T> {
    input: SeqTensor<T>,
    norm: Option<NormCache<T>>,
    neuron: NeuronTape<T>,
}

/// Activations of a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct NetTrace<T> {
    blocks: Vec<BlockTrace<T>>,
    pooled: SeqTensor<T>,
    time: usize,
}

/// Spike-count pooling over the readout window, shape `(B, 1, F)`.
fn pool<T: Real>(spikes: &SeqTensor<T>, readout: Readout) -> SeqTensor<T> {
    let (bn, tn, fn_) = spikes.shape();
    let (start, len) = readout.window(tn);
    let mut out = SeqTensor::zeros(bn, 1, fn_);
    let scale = T::lit(1.0 / len.max(1) as f64);
    for b in 0..bn {
        let mut acc = vec![0.0f64; fn_];
        for t in start..start + len {
            for (a, &s) in acc.iter_mut().zip(spikes.row(b, t)) {
                *a += s.as_f64();
            }
        }
        for (d, a) in out.row_mut(b, 0).iter_mut().zip(acc) {
            *d = T::lit(a) * scale;
        }
    }
    out
}

/// Surrogate BPTT through a LIF layer with the reset treated as constant.
pub fn lif_backward<T: Real>(
    p: &LifParams<T>,
    v: &SeqTensor<T>,
    d_spikes: &SeqTensor<T>,
    cfg: &SurrogateConfig,
) -> Result<SeqTensor<T>> {
    if v.shape() != d_spikes.shape() {
        return Err(invalid("LIF backward shape mismatch"));
    }
    let (bn, tn, fn_) = v.shape();
    let alpha = p.alpha.as_f64();
    let theta = p.theta.as_f64();
    let mut d_in = SeqTensor::zeros(bn, tn, fn_);
    let mut carry = vec![0.0f64; fn_];
    for b in 0..bn {
        carry.fill(0.0);
        for t in (0..tn).rev() {
            let vr = v.row(b, t);
            let g = d_spikes.row(b, t);
            let mut row = vec![T::zero(); fn_];
            for f in 0..fn_ {
                let dv = g[f].as_f64() * surrogate(vr[f].as_f64(), theta, cfg) + alpha * carry[f];
                carry[f] = dv;
                row[f] = T::lit(dv);
            }
            d_in.row_mut(b, t).copy_from_slice(&row);
        }
    }
    Ok(d_in)
}

impl<T: Real> Network<T> {
    /// Builds and initializes a network from its specification.
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut blocks = Vec::with_capacity(spec.blocks.len());
        let mut fan_in = spec.inputs;
        for b in &spec.blocks {
            let dense = Dense::init(fan_in, b.width, &mut rng)?;
            let norm = b.norm.then(|| BatchNorm::new(b.width));
            let neuron = match b.neuron {
                NeuronKind::Pmsn { compartments } => {
                    let (_, p) = init_params::<T>(compartments, b.width, rng.next_u64(), &spec.init)?;
                    NeuronLayer::Pmsn(p)
                }
                NeuronKind::Lif { alpha } => NeuronLayer::Lif(LifParams::new(T::lit(alpha), T::lit(spec.init.theta))?),
            };
            blocks.push(Block { dense, norm, neuron });
            fan_in = b.width;
        }
        let head = Dense::init(fan_in, spec.classes, &mut rng)?;
        Ok(Network { spec, blocks, head })
    }

    /// Assembles a network from explicit layers, checking that shapes chain.
    pub fn from_parts(spec: NetworkSpec, blocks: Vec<Block<T>>, head: Dense<T>) -> Result<Self> {
        spec.validate()?;
        if blocks.len() != spec.blocks.len() {
            return Err(Error::Config("block count does not match the specification".into()));
        }
        let mut fan_in = spec.inputs;
        for (i, (b, s)) in blocks.iter().zip(&spec.blocks).enumerate() {
            if b.dense.inputs != fan_in || b.dense.outputs != s.width {
                return Err(Error::Config(format!(
                    "block {i}: dense layer is {}->{} but the chain needs {fan_in}->{}",
                    b.dense.inputs, b.dense.outputs, s.width
                )));
            }
            if b.norm.as_ref().is_some_and(|n| n.features != s.width) || b.norm.is_some() != s.norm {
                return Err(Error::Config(format!("block {i}: normalization layer does not match")));
            }
            match (&b.neuron, s.neuron) {
                (NeuronLayer::Pmsn(p), NeuronKind::Pmsn { compartments }) => {
                    p.validate()?;
                    if p.features != s.width || p.compartments() != compartments {
                        return Err(Error::Config(format!("block {i}: PMSN layer does not match")));
                    }
                }
                (NeuronLayer::Lif(p), NeuronKind::Lif { .. }) => p.validate()?,
                _ => return Err(Error::Config(format!("block {i}: neuron kind does not match"))),
            }
            fan_in = s.width;
        }
        if head.inputs != fan_in || head.outputs != spec.classes {
            return Err(Error::Config("readout head does not match the last block".into()));
        }
        Ok(Network { spec, blocks, head })
    }

    fn check_input(&self, x: &SeqTensor<T>) -> Result<()> {
        if x.feature() != self.spec.inputs {
            return Err(invalid(format!(
                "network expects {} input features, got {}",
                self.spec.inputs,
                x.feature()
            )));
        }
        if x.time() == 0 || x.batch() == 0 {
            return Err(invalid("input sequence is empty"));
        }
        Ok(())
    }

    fn head_logits(&self, pooled: &SeqTensor<T>) -> Result<Vec<T>> {
        Ok(self.head.forward(pooled)?.into_vec())
    }

    /// Inference pass; normalization uses running statistics.
    pub fn forward_eval(&self, x: &SeqTensor<T>) -> Result<NetOutput<T>> {
        self.check_input(x)?;
        let mut spikes = Vec::with_capacity(self.blocks.len());
        let mut h = x.clone();
        for blk in &self.blocks {
            let mut cur = blk.dense.forward(&h)?;
            if let Some(n) = &blk.norm {
                cur = n.forward_eval(&cur)?;
            }
            let s = match &blk.neuron {
                NeuronLayer::Pmsn(p) => layer_forward(p, &cur, &self.spec.layer)?.spikes,
                NeuronLayer::Lif(p) => lif_forward_serial(p, &cur).1,
            };
            spikes.push(s.clone());
            h = s;
        }
        let logits = self.head_logits(&pool(&h, self.spec.readout))?;
        Ok(NetOutput { logits, spikes })
    }

    /// Training pass: batch statistics for normalization and a trace for
    /// [`Network::backward`].
    pub fn forward_train(&mut self, x: &SeqTensor<T>) -> Result<(NetOutput<T>, NetTrace<T>)> {
        self.check_input(x)?;
        let layer = self.spec.layer;
        let mut spikes = Vec::with_capacity(self.blocks.len());
        let mut traces = Vec::with_capacity(self.blocks.len());
        let mut h = x.clone();
        for blk in self.blocks.iter_mut() {
            let mut cur = blk.dense.forward(&h)?;
            let mut norm = None;
            if let Some(n) = blk.norm.as_mut() {
                let (y, c) = n.forward_train(&cur)?;
                cur = y;
                norm = Some(c);
            }
            let (s, tape) = match &blk.neuron {
                NeuronLayer::Pmsn(p) => {
                    let (out, tape) = LayerTape::record(p, &cur, &layer)?;
                    (out.spikes, NeuronTape::Pmsn(tape))
                }
                NeuronLayer::Lif(p) => {
                    let (v, s) = lif_forward_serial(p, &cur);
                    (s, NeuronTape::Lif(v))
                }
            };
            traces.push(BlockTrace {
                input: h,
                norm,
                neuron: tape,
            });
            spikes.push(s.clone());
            h = s;
        }
        let pooled = pool(&h, self.spec.readout);
        let logits = self.head_logits(&pooled)?;
        let time = x.time();
        Ok((
            NetOutput { logits, spikes },
            NetTrace {
                blocks: traces,
                pooled,
                time,
            },
        ))
    }

    /// Gradients of all learnable parameters given `dL/dlogits`.
    pub fn backward(&self, trace: &NetTrace<T>, d_logits: &[T]) -> Result<NetGrads<T>> {
        let (bn, _, fl) = trace.pooled.shape();
        let classes = self.spec.classes;
        if d_logits.len() != bn * classes || trace.blocks.len() != self.blocks.len() {
            return Err(invalid("logit gradient does not match the traced batch"));
        }
        let d_out = SeqTensor::from_vec(d_logits.to_vec(), bn, 1, classes)?;
        let (head, d_pooled) = self.head.backward(&trace.pooled, &d_out, true)?;
        let d_pooled = d_pooled.expect("requested input gradient");
        let tn = trace.time;
        let (start, len) = self.spec.readout.window(tn);
        let inv = T::lit(1.0 / len as f64);
        let mut d_spk = SeqTensor::zeros(bn, tn, fl);
        for b in 0..bn {
            let g: Vec<T> = d_pooled.row(b, 0).iter().map(|&v| v * inv).collect();
            for t in start..start + len {
                d_spk.row_mut(b, t).copy_from_slice(&g);
            }
        }
        let mut grads = Vec::with_capacity(self.blocks.len());
        for (i, (blk, tr)) in self.blocks.iter().zip(&trace.blocks).enumerate().rev() {
            let (d_cur, neuron) = match (&blk.neuron, &tr.neuron) {
                (NeuronLayer::Pmsn(_), NeuronTape::Pmsn(tape)) => {
                    let GradBundle {
                        d_lambda_dt,
                        d_phi_c,
                        d_phi_s,
                        d_gamma_n,
                        d_input,
                        ..
                    } = backward_params::<T>(tape, &self.spec.surrogate, &d_spk)?;
                    (
                        d_input,
                        Some(NeuronGrad {
                            d_lambda_dt,
                            d_phi_c,
                            d_phi_s,
                            d_gamma_n,
                        }),
                    )
                }
                (NeuronLayer::Lif(p), NeuronTape::Lif(v)) => (lif_backward(p, v, &d_spk, &self.spec.surrogate)?, None),
                _ => return Err(Error::InvalidState("trace does not match the network".into())),
            };
            let (d_cur, norm) = match (&blk.norm, &tr.norm) {
                (Some(n), Some(c)) => {
                    let (dg, db, dx) = n.backward(c, &d_cur)?;
                    (dx, Some((dg, db)))
                }
                (None, None) => (d_cur, None),
                _ => return Err(Error::InvalidState("trace does not match the network".into())),
            };
            let (dense, d_in) = blk.dense.backward(&tr.input, &d_cur, i > 0)?;
            grads.push(BlockGrad { dense, norm, neuron });
            if let Some(d) = d_in {
                d_spk = d;
            }
        }
        grads.reverse();
        Ok(NetGrads { blocks: grads, head })
    }

    /// Total number of scalar learnable parameters (complex entries count twice).
    pub fn param_count(&self) -> usize {
        let mut n = self.head.weight.len() + self.head.bias.len();
        for b in &self.blocks {
            n += b.dense.weight.len() + b.dense.bias.len();
            if let Some(nm) = &b.norm {
                n += 2 * nm.features;
            }
            if let NeuronLayer::Pmsn(p) = &b.neuron {
                n += 6 * p.lambda_dt.len() + p.gamma_n.len();
            }
        }
        n
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    dense: b.dense.cast(),
                    norm: b.norm.as_ref().map(|n| n.cast()),
                    neuron: match &b.neuron {
                        NeuronLayer::Pmsn(p) => NeuronLayer::Pmsn(p.cast()),
                        NeuronLayer::Lif(p) => NeuronLayer::Lif(LifParams {
                            alpha: U::lit(p.alpha.as_f64()),
                            theta: U::lit(p.theta.as_f64()),
                            v_rest: U::lit(p.v_rest.as_f64()),
                        }),
                    },
                })
                .collect(),
            head: self.head.cast(),
        }
    }
}
