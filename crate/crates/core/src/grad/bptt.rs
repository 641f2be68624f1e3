use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::surrogate::{surrogate, SurrogateConfig};
use crate::error::{invalid, Result};
use crate::neuron::{PmsnParams, ResetMode};
use crate::numeric::SeqTensor;
use crate::parallel::{Context, LayerConfig};
use crate::real::Real;

/// Gradients produced by [`bptt_serial`].
#[derive(Debug, Clone, PartialEq)]
pub struct BpttGrad<T> {
    pub d_input: SeqTensor<T>,
    pub d_phi_s: Vec<num_complex::Complex<T>>,
    pub d_gamma_n: Vec<T>,
    pub spikes: SeqTensor<T>,
}

/// Step-by-step forward and backpropagation through time of a PMSN layer:
/// the hidden modes are stepped one time step at a time and their adjoint
/// is run backwards with the same recurrence. This is the sequential
/// baseline for the convolutional backward pass and agrees with it.
pub fn bptt_serial<T: Real>(
    p: &PmsnParams<T>,
    input: &SeqTensor<T>,
    d_spikes: &SeqTensor<T>,
    cfg: &LayerConfig,
    sur: &SurrogateConfig,
) -> Result<BpttGrad<T>> {
    if cfg.reset != ResetMode::Floor || p.alpha_out != T::one() || cfg.context != Context::Local {
        return Err(invalid(
            "serial BPTT supports floor reset, unit output decay and local context",
        ));
    }
    let (bn, tn, fn_) = input.shape();
    if fn_ != p.features || d_spikes.shape() != input.shape() {
        return Err(invalid("serial BPTT shapes do not match"));
    }
    let p64 = p.cast::<f64>();
    let table = p64.discrete();
    let m = p.modes;
    let theta = p64.theta;
    let zero = Complex64::new(0.0, 0.0);
    let mut d_input = SeqTensor::zeros(bn, tn, fn_);
    let mut spikes = SeqTensor::zeros(bn, tn, fn_);
    let mut raw_s = vec![zero; fn_ * m];
    let mut d_gamma = vec![0.0f64; fn_];
    let mut hist = vec![zero; tn * m];
    let mut delta = vec![0.0f64; tn];
    let mut x = vec![0.0f64; tn];
    let mut adj = vec![zero; m];
    for b in 0..bn {
        for f in 0..fn_ {
            let tb = &table.t_bar[f * m..(f + 1) * m];
            let cg = &table.in_gain[f * m..(f + 1) * m];
            let sg = &table.out_gain[f * m..(f + 1) * m];
            let gn = p64.gamma_n[f];
            let mut state = vec![zero; m];
            let (mut v, mut r) = (0.0f64, 0.0f64);
            for t in 0..tn {
                x[t] = input.get(b, t, f).as_f64();
                let mut ih = gn * x[t];
                for j in 0..m {
                    state[j] = tb[j] * state[j] + cg[j] * x[t];
                    hist[t * m + j] = state[j];
                    ih += (sg[j] * state[j]).re;
                }
                let clamped = cfg.clamp_ih && ih < 0.0;
                v += if clamped { 0.0 } else { ih } - r;
                let fired = v >= theta;
                r = if fired { theta * libm::floor(v / theta) } else { 0.0 };
                spikes.set(b, t, f, if fired { T::one() } else { T::zero() });
                delta[t] = if clamped {
                    0.0
                } else {
                    d_spikes.get(b, t, f).as_f64() * surrogate(v, theta, sur)
                };
            }
            adj.fill(zero);
            for t in (0..tn).rev() {
                let d = delta[t];
                let mut dx = gn * d;
                d_gamma[f] += d * x[t];
                for j in 0..m {
                    adj[j] = sg[j].conj() * d + tb[j].conj() * adj[j];
                    dx += (adj[j] * cg[j].conj()).re;
                    raw_s[f * m + j] += hist[t * m + j].conj() * d;
                }
                d_input.set(b, t, f, T::lit(dx));
            }
        }
    }
    let mut d_phi_s = vec![num_complex::Complex::new(T::zero(), T::zero()); fn_ * m];
    for f in 0..fn_ {
        for j in 0..m {
            let q = p.pairing[j];
            let g = if q == j {
                Complex64::new(raw_s[f * m + j].re, 0.0)
            } else {
                raw_s[f * m + j] + raw_s[f * m + q].conj()
            };
            d_phi_s[f * m + j] = num_complex::Complex::new(T::lit(g.re), T::lit(g.im));
        }
    }
    if !p.learnable.phi_s {
        d_phi_s
            .iter_mut()
            .for_each(|c| *c = num_complex::Complex::new(T::zero(), T::zero()));
    }
    let d_gamma_n = if p.learnable.gamma_n {
        d_gamma.into_iter().map(T::lit).collect()
    } else {
        vec![T::zero(); fn_]
    };
    Ok(BpttGrad {
        d_input,
        d_phi_s,
        d_gamma_n,
        spikes,
    })
}
