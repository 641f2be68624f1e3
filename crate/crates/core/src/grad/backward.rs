use alloc::vec;
use alloc::vec::Vec;

use num_complex::{Complex, Complex64};

use super::surrogate::{surrogate, SurrogateConfig};
use super::tape::LayerTape;
use crate::error::{invalid, Result};
use crate::neuron::{expm1_ratio, expm1_ratio_deriv};
use crate::numeric::SeqTensor;
use crate::parallel::Context;
use crate::real::Real;

/// Gradients of a PMSN layer. Complex entries hold `dL/dRe + i dL/dIm`;
/// conjugate partner modes carry conjugate gradients and real modes real ones.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle<T> {
    pub d_lambda_dt: Vec<Complex<T>>,
    pub d_phi_c: Vec<Complex<T>>,
    pub d_phi_s: Vec<Complex<T>>,
    pub d_gamma_n: Vec<T>,
    /// Threshold is not learnable; always zero.
    pub d_theta: T,
    pub d_input: SeqTensor<T>,
}

impl<T: Real> GradBundle<T> {
    pub fn cast<U: Real>(&self) -> GradBundle<U> {
        let cc = |v: &Vec<Complex<T>>| {
            v.iter()
                .map(|c| Complex::new(U::lit(c.re.as_f64()), U::lit(c.im.as_f64())))
                .collect()
        };
        GradBundle {
            d_lambda_dt: cc(&self.d_lambda_dt),
            d_phi_c: cc(&self.d_phi_c),
            d_phi_s: cc(&self.d_phi_s),
            d_gamma_n: self.d_gamma_n.iter().map(|v| U::lit(v.as_f64())).collect(),
            d_theta: U::zero(),
            d_input: self.d_input.cast(),
        }
    }

    pub fn is_zero(&self) -> bool {
        let z = T::zero();
        self.d_lambda_dt
            .iter()
            .chain(&self.d_phi_c)
            .chain(&self.d_phi_s)
            .all(|c| c.re == z && c.im == z)
            && self.d_gamma_n.iter().all(|&v| v == z)
            && self.d_input.data().iter().all(|&v| v == z)
    }
}

/// `dL/dI_h` from `dL/dS`: surrogate derivative at the recorded potential,
/// masked by the input clamp.
pub fn current_grad<T: Real>(
    tape: &LayerTape,
    cfg: &SurrogateConfig,
    d_spikes: &SeqTensor<T>,
) -> Result<SeqTensor<f64>> {
    let v_s = LayerTape::need(&tape.v_s, "v_s")?;
    let i_h = LayerTape::need(&tape.i_h, "i_h")?;
    if d_spikes.shape() != v_s.shape() {
        return Err(invalid("upstream gradient shape does not match the forward pass"));
    }
    let theta = tape.params.theta;
    let clamp = tape.cfg.clamp_ih;
    let data = d_spikes
        .data()
        .iter()
        .zip(v_s.data())
        .zip(i_h.data())
        .map(|((&g, &v), &h)| {
            if clamp && h < 0.0 {
                0.0
            } else {
                g.as_f64() * surrogate(v, theta, cfg)
            }
        })
        .collect();
    let (b, t, f) = v_s.shape();
    SeqTensor::from_vec(data, b, t, f)
}

/// `dL/dI` of the layer input.
pub fn backward_input<T: Real>(
    tape: &LayerTape,
    cfg: &SurrogateConfig,
    d_spikes: &SeqTensor<T>,
) -> Result<SeqTensor<T>> {
    let delta = current_grad(tape, cfg, d_spikes)?;
    Ok(propagate(tape, &delta, false)?.d_input.cast())
}

/// Gradients of every learnable field and of the input.
pub fn backward_params<T: Real>(
    tape: &LayerTape,
    cfg: &SurrogateConfig,
    d_spikes: &SeqTensor<T>,
) -> Result<GradBundle<T>> {
    let delta = current_grad(tape, cfg, d_spikes)?;
    Ok(propagate(tape, &delta, true)?.cast())
}

/// Gradients given `dL/dI_h` directly (after the clamp mask).
pub fn backward_from_current(tape: &LayerTape, d_ih: &SeqTensor<f64>) -> Result<GradBundle<f64>> {
    propagate(tape, d_ih, true)
}

fn propagate(tape: &LayerTape, delta: &SeqTensor<f64>, want_params: bool) -> Result<GradBundle<f64>> {
    let h = LayerTape::need(&tape.hidden_in, "hidden_in")?;
    let p = &tape.params;
    let (bn, tn, fn_) = delta.shape();
    if h.shape() != delta.shape() || tn != tape.cache.time() || fn_ != p.features {
        return Err(invalid("current gradient shape does not match the tape"));
    }
    let m = p.modes;
    let cache = &tape.cache;
    let plan = cache.convolver().plan();
    let l = cache.fft_len();
    let zero = Complex64::new(0.0, 0.0);
    let mut d_hidden = SeqTensor::zeros(bn, tn, fn_);
    let mut d_gamma = vec![0.0; fn_];
    let mut d_lambda = vec![zero; fn_ * m];
    let mut d_phi_c = vec![zero; fn_ * m];
    let mut d_phi_s = vec![zero; fn_ * m];

    let mut zd = vec![zero; l];
    let mut zx = vec![zero; l];
    let mut acc = vec![zero; l];
    let mut corr = vec![zero; l];
    for f in 0..fn_ {
        let kh = cache.spectrum_lane(f);
        let gn = p.gamma_n[f];
        acc.fill(zero);
        let mut b = 0;
        while b < bn {
            let pair = b + 1 < bn;
            zd.fill(zero);
            zx.fill(zero);
            for t in 0..tn {
                zd[t].re = delta.get(b, t, f);
                if want_params {
                    zx[t].re = h.get(b, t, f);
                }
                if pair {
                    zd[t].im = delta.get(b + 1, t, f);
                    if want_params {
                        zx[t].im = h.get(b + 1, t, f);
                    }
                }
            }
            plan.forward(&mut zd);
            for ((c, d), k) in corr.iter_mut().zip(&zd).zip(kh) {
                *c = d * k.conj();
            }
            plan.inverse(&mut corr);
            for t in 0..tn {
                d_hidden.set(b, t, f, corr[t].re + gn * delta.get(b, t, f));
                if pair {
                    d_hidden.set(b + 1, t, f, corr[t].im + gn * delta.get(b + 1, t, f));
                }
            }
            if want_params {
                for t in 0..tn {
                    d_gamma[f] += delta.get(b, t, f) * h.get(b, t, f);
                    if pair {
                        d_gamma[f] += delta.get(b + 1, t, f) * h.get(b + 1, t, f);
                    }
                }
                plan.forward(&mut zx);
                // Separate the two real lanes packed into each transform and
                // accumulate D_a conj(X_a) + D_b conj(X_b).
                for k in 0..l {
                    let r = (l - k) % l;
                    let (d1, d2) = (zd[k], zd[r].conj());
                    let (x1, x2) = (zx[k], zx[r].conj());
                    let da = (d1 + d2) * 0.5;
                    let xa = (x1 + x2) * 0.5;
                    let mut v = da * xa.conj();
                    if pair {
                        let db = (d1 - d2) * Complex64::new(0.0, -0.5);
                        let xb = (x1 - x2) * Complex64::new(0.0, -0.5);
                        v += db * xb.conj();
                    }
                    acc[k] += v;
                }
            }
            b += 2;
        }
        if want_params && m > 0 {
            plan.inverse(&mut acc);
            mode_grads(tape, f, &acc[..tn], &mut d_lambda, &mut d_phi_c, &mut d_phi_s);
        }
    }

    let d_input = match tape.cfg.context {
        Context::Local => d_hidden,
        Context::Global => spread_mean_grad(&d_hidden),
    };
    let mask = p.learnable;
    if !mask.lambda_dt {
        d_lambda.fill(zero);
    }
    if !mask.phi_c {
        d_phi_c.fill(zero);
    }
    if !mask.phi_s {
        d_phi_s.fill(zero);
    }
    if !mask.gamma_n {
        d_gamma.fill(0.0);
    }
    Ok(GradBundle {
        d_lambda_dt: d_lambda,
        d_phi_c,
        d_phi_s,
        d_gamma_n: d_gamma,
        d_theta: 0.0,
        d_input,
    })
}

/// Per-mode gradients of neuron `f` from the kernel gradient `dk[s]`, with
/// conjugate partners symmetrized.
fn mode_grads(
    tape: &LayerTape,
    f: usize,
    dk: &[Complex64],
    d_lambda: &mut [Complex64],
    d_phi_c: &mut [Complex64],
    d_phi_s: &mut [Complex64],
) {
    let p = &tape.params;
    let m = p.modes;
    let dt = p.dt[f];
    let mut raw_l = vec![Complex64::new(0.0, 0.0); m];
    let mut raw_c = raw_l.clone();
    let mut raw_s = raw_l.clone();
    for j in 0..m {
        let i = f * m + j;
        let z = p.lambda_dt[i];
        let w = z.exp();
        let (mut g, mut hsum) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let mut pw = Complex64::new(1.0, 0.0);
        for (s, d) in dk.iter().enumerate() {
            let term = pw * d.re;
            g += term;
            hsum += term * s as f64;
            pw *= w;
        }
        let e = expm1_ratio(z);
        let in_gain = p.phi_c[i] * e * dt;
        let phi_s = p.phi_s[i];
        raw_s[j] = (in_gain * g).conj();
        raw_c[j] = (phi_s * e * dt * g).conj();
        raw_l[j] = (phi_s * p.phi_c[i] * dt * expm1_ratio_deriv(z) * g + phi_s * in_gain * hsum).conj();
    }
    for j in 0..m {
        let q = p.pairing[j];
        let i = f * m + j;
        if q == j {
            d_lambda[i] = Complex64::new(raw_l[j].re, 0.0);
            d_phi_c[i] = Complex64::new(raw_c[j].re, 0.0);
            d_phi_s[i] = Complex64::new(raw_s[j].re, 0.0);
        } else {
            d_lambda[i] = raw_l[j] + raw_l[q].conj();
            d_phi_c[i] = raw_c[j] + raw_c[q].conj();
            d_phi_s[i] = raw_s[j] + raw_s[q].conj();
        }
    }
}

fn spread_mean_grad(d: &SeqTensor<f64>) -> SeqTensor<f64> {
    let (bn, tn, fn_) = d.shape();
    let mut out = SeqTensor::zeros(bn, tn, fn_);
    let inv = 1.0 / tn as f64;
    let mut s = vec![0.0; fn_];
    for b in 0..bn {
        s.fill(0.0);
        for t in 0..tn {
            for (a, &v) in s.iter_mut().zip(d.row(b, t)) {
                *a += v;
            }
        }
        for a in s.iter_mut() {
            *a *= inv;
        }
        for t in 0..tn {
            out.row_mut(b, t).copy_from_slice(&s);
        }
    }
    out
}
