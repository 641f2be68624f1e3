use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;

use super::network::{NetGrads, Network, NeuronLayer};
use crate::error::{invalid, Error, Result};
use crate::real::Real;

/// Optimizer parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    /// Dense, normalization and head parameters: global learning rate, weight decay.
    Synaptic,
    /// PMSN neuron parameters: neuronal learning rate, no weight decay.
    Neuronal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr_global: f64,
    pub lr_neuronal: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr_global: 1e-2,
            lr_neuronal: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-2,
        }
    }
}

/// Multiplier applied to both learning rates as a function of the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant,
    /// Cosine decay to zero over `total_steps`.
    Cosine {
        total_steps: u64,
    },
}

impl LrSchedule {
    /// Factor for the `step`-th update (0-based).
    pub fn factor(self, step: u64) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine { total_steps } => {
                if total_steps == 0 {
                    return 1.0;
                }
                let x = (step.min(total_steps) as f64) / total_steps as f64;
                0.5 * (1.0 + libm::cos(core::f64::consts::PI * x))
            }
        }
    }
}

/// First and second moments of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn zeros(n: usize) -> Self {
        Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// Adam moments for every parameter tensor (in visitation order) and the
/// number of completed steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimState {
    pub step: u64,
    pub slots: Vec<Moments>,
}

/// One decoupled-weight-decay Adam update of a flat parameter vector.
/// `step` is the 1-based index of this update.
pub fn adamw_update(
    params: &mut [f64],
    grads: &[f64],
    mom: &mut Moments,
    lr: f64,
    weight_decay: f64,
    step: u64,
    cfg: &AdamWConfig,
) {
    let bc1 = 1.0 - libm::pow(cfg.beta1, step as f64);
    let bc2 = 1.0 - libm::pow(cfg.beta2, step as f64);
    for i in 0..params.len() {
        let g = grads[i];
        mom.m[i] = cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * g;
        mom.v[i] = cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = mom.m[i] / bc1;
        let v_hat = mom.v[i] / bc2;
        params[i] -= lr * weight_decay * params[i];
        params[i] -= lr * m_hat / (libm::sqrt(v_hat) + cfg.eps);
    }
}

/// A parameter tensor together with its gradient.
pub enum ParamRef<'a, T> {
    Real(&'a mut [T], &'a [T]),
    Complex(&'a mut [Complex<T>], &'a [Complex<T>]),
}

impl<T: Real> ParamRef<'_, T> {
    /// Number of real scalars.
    pub fn len(&self) -> usize {
        match self {
            ParamRef::Real(p, _) => p.len(),
            ParamRef::Complex(p, _) => 2 * p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Calls `f` on every learnable tensor of `net` with its gradient, in a
/// fixed order. Frozen PMSN fields are skipped.
pub fn visit_params<T: Real>(
    net: &mut Network<T>,
    grads: &NetGrads<T>,
    mut f: impl FnMut(ParamGroup, ParamRef<'_, T>) -> Result<()>,
) -> Result<()> {
    if grads.blocks.len() != net.blocks.len() {
        return Err(invalid("gradient does not match the network"));
    }
    let shape = || Error::InvalidArgument("gradient does not match the network".into());
    for (blk, g) in net.blocks.iter_mut().zip(&grads.blocks) {
        if g.dense.d_weight.len() != blk.dense.weight.len() || g.dense.d_bias.len() != blk.dense.bias.len() {
            return Err(shape());
        }
        f(
            ParamGroup::Synaptic,
            ParamRef::Real(&mut blk.dense.weight, &g.dense.d_weight),
        )?;
        f(
            ParamGroup::Synaptic,
            ParamRef::Real(&mut blk.dense.bias, &g.dense.d_bias),
        )?;
        match (blk.norm.as_mut(), &g.norm) {
            (Some(n), Some((dg, db))) if dg.len() == n.features && db.len() == n.features => {
                f(ParamGroup::Synaptic, ParamRef::Real(&mut n.gamma, dg))?;
                f(ParamGroup::Synaptic, ParamRef::Real(&mut n.beta, db))?;
            }
            (None, None) => {}
            _ => return Err(shape()),
        }
        match (&mut blk.neuron, &g.neuron) {
            (NeuronLayer::Pmsn(p), Some(ng)) => {
                if ng.d_lambda_dt.len() != p.lambda_dt.len() || ng.d_gamma_n.len() != p.gamma_n.len() {
                    return Err(shape());
                }
                let mask = p.learnable;
                if mask.lambda_dt {
                    f(
                        ParamGroup::Neuronal,
                        ParamRef::Complex(&mut p.lambda_dt, &ng.d_lambda_dt),
                    )?;
                }
                if mask.phi_c {
                    f(ParamGroup::Neuronal, ParamRef::Complex(&mut p.phi_c, &ng.d_phi_c))?;
                }
                if mask.phi_s {
                    f(ParamGroup::Neuronal, ParamRef::Complex(&mut p.phi_s, &ng.d_phi_s))?;
                }
                if mask.gamma_n {
                    f(ParamGroup::Neuronal, ParamRef::Real(&mut p.gamma_n, &ng.d_gamma_n))?;
                }
            }
            (NeuronLayer::Lif(_), None) => {}
            _ => return Err(shape()),
        }
    }
    if grads.head.d_weight.len() != net.head.weight.len() || grads.head.d_bias.len() != net.head.bias.len() {
        return Err(shape());
    }
    f(
        ParamGroup::Synaptic,
        ParamRef::Real(&mut net.head.weight, &grads.head.d_weight),
    )?;
    f(
        ParamGroup::Synaptic,
        ParamRef::Real(&mut net.head.bias, &grads.head.d_bias),
    )?;
    Ok(())
}

/// Applies one AdamW step to every learnable parameter of `net`, then
/// re-imposes the PMSN stability bound.
pub fn adamw_step<T: Real>(
    net: &mut Network<T>,
    state: &mut OptimState,
    grads: &NetGrads<T>,
    cfg: &AdamWConfig,
    schedule: LrSchedule,
) -> Result<()> {
    let scale = schedule.factor(state.step);
    let step = state.step + 1;
    let fresh = state.slots.is_empty();
    let mut slot = 0usize;
    let mut pbuf: Vec<f64> = Vec::new();
    let mut gbuf: Vec<f64> = Vec::new();
    visit_params(net, grads, |group, pr| {
        let n = pr.len();
        if fresh {
            state.slots.push(Moments::zeros(n));
        }
        let mom = state
            .slots
            .get_mut(slot)
            .filter(|m| m.m.len() == n && m.v.len() == n)
            .ok_or_else(|| Error::InvalidState("optimizer state does not match the network".into()))?;
        slot += 1;
        let (lr, wd) = match group {
            ParamGroup::Synaptic => (cfg.lr_global * scale, cfg.weight_decay),
            ParamGroup::Neuronal => (cfg.lr_neuronal * scale, 0.0),
        };
        pbuf.clear();
        gbuf.clear();
        match &pr {
            ParamRef::Real(p, g) => {
                pbuf.extend(p.iter().map(|v| v.as_f64()));
                gbuf.extend(g.iter().map(|v| v.as_f64()));
            }
            ParamRef::Complex(p, g) => {
                pbuf.extend(p.iter().flat_map(|c| [c.re.as_f64(), c.im.as_f64()]));
                gbuf.extend(g.iter().flat_map(|c| [c.re.as_f64(), c.im.as_f64()]));
            }
        }
        adamw_update(&mut pbuf, &gbuf, mom, lr, wd, step, cfg);
        match pr {
            ParamRef::Real(p, _) => {
                for (d, &s) in p.iter_mut().zip(&pbuf) {
                    *d = T::lit(s);
                }
            }
            ParamRef::Complex(p, _) => {
                for (d, s) in p.iter_mut().zip(pbuf.chunks_exact(2)) {
                    *d = Complex::new(T::lit(s[0]), T::lit(s[1]));
                }
            }
        }
        Ok(())
    })?;
    if slot != state.slots.len() {
        return Err(Error::InvalidState("optimizer state does not match the network".into()));
    }
    for blk in net.blocks.iter_mut() {
        if let NeuronLayer::Pmsn(p) = &mut blk.neuron {
            p.clamp_stability();
        }
    }
    state.step = step;
    Ok(())
}
