use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;

use super::kernel::KernelCache;
use crate::error::{invalid, Result};
use crate::neuron::PmsnParams;
use crate::numeric::{pow2_scale, SeqTensor};
use crate::real::Real;

/// Causal convolution of every lane of `x` with its neuron's kernel, or the
/// adjoint correlation `y[t] = sum_{i >= t} x[i] K[i - t]` when `adjoint`.
///
/// Lanes are processed two at a time through one complex FFT: the real and
/// imaginary parts carry the two signals, their spectra are separated by
/// Hermitian symmetry and each is multiplied by its own kernel spectrum.
pub fn convolve_lanes<T: Real>(cache: &KernelCache<T>, x: &SeqTensor<T>, adjoint: bool) -> Result<SeqTensor<T>> {
    let (bn, tn, fn_) = x.shape();
    if tn != cache.time() || fn_ != cache.features() {
        return Err(invalid(format!(
            "input shape (T={tn}, F={fn_}) does not match kernel cache (T={}, F={})",
            cache.time(),
            cache.features()
        )));
    }
    let plan = cache.convolver().plan();
    let l = cache.fft_len();
    let zero = Complex::new(T::zero(), T::zero());
    let half = T::lit(0.5);
    let mut buf = vec![zero; l];
    let mut prod = vec![zero; l];
    let mut out = SeqTensor::zeros(bn, tn, fn_);
    let lanes: Vec<(usize, usize)> = (0..fn_).flat_map(|f| (0..bn).map(move |b| (b, f))).collect();
    let spectrum = |f: usize, k: usize| {
        let v = cache.spectrum_lane(f)[k];
        if adjoint {
            v.conj()
        } else {
            v
        }
    };
    for pair in lanes.chunks(2) {
        let (b1, f1) = pair[0];
        let second = pair.get(1).copied();
        let s1 = pow2_scale((0..tn).map(|t| x.get(b1, t, f1)));
        let s2 = second.map_or(T::one(), |(b2, f2)| pow2_scale((0..tn).map(|t| x.get(b2, t, f2))));
        buf.fill(zero);
        for t in 0..tn {
            buf[t].re = x.get(b1, t, f1) / s1;
            if let Some((b2, f2)) = second {
                buf[t].im = x.get(b2, t, f2) / s2;
            }
        }
        plan.forward(&mut buf);
        match second {
            Some((_, f2)) if f2 != f1 => {
                for k in 0..l {
                    let z = buf[k];
                    let zc = buf[(l - k) % l].conj();
                    let a = (z + zc) * half;
                    let d = (z - zc) * half;
                    // The second spectrum is d / i; multiplying it back by i gives d.
                    prod[k] = a * spectrum(f1, k) + d * spectrum(f2, k);
                }
            }
            _ => {
                for k in 0..l {
                    prod[k] = buf[k] * spectrum(f1, k);
                }
            }
        }
        plan.inverse(&mut prod);
        for t in 0..tn {
            out.set(b1, t, f1, prod[t].re * s1);
            if let Some((b2, f2)) = second {
                out.set(b2, t, f2, prod[t].im * s2);
            }
        }
    }
    Ok(out)
}

/// Output-compartment input current `I_h = K * I + gamma_n I`.
pub fn hidden_forward_parallel<T: Real>(
    cache: &KernelCache<T>,
    p: &PmsnParams<T>,
    input: &SeqTensor<T>,
) -> Result<SeqTensor<T>> {
    if p.features != cache.features() {
        return Err(invalid("kernel cache was built for a different layer width"));
    }
    let mut out = convolve_lanes(cache, input, false)?;
    let (bn, tn, _) = input.shape();
    for b in 0..bn {
        for t in 0..tn {
            let x = input.row(b, t);
            for ((o, &xi), &g) in out.row_mut(b, t).iter_mut().zip(x).zip(&p.gamma_n) {
                *o += g * xi;
            }
        }
    }
    Ok(out)
}

/// Replaces every lane by its time average.
pub fn mean_over_time<T: Real>(x: &SeqTensor<T>) -> SeqTensor<T> {
    let (bn, tn, fn_) = x.shape();
    let mut out = SeqTensor::zeros(bn, tn, fn_);
    if tn == 0 {
        return out;
    }
    let inv = T::one() / T::count(tn);
    let mut mean = vec![T::zero(); fn_];
    for b in 0..bn {
        mean.fill(T::zero());
        for t in 0..tn {
            for (m, &v) in mean.iter_mut().zip(x.row(b, t)) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m *= inv;
        }
        for t in 0..tn {
            out.row_mut(b, t).copy_from_slice(&mean);
        }
    }
    out
}
