//! Causal linear convolution via zero-padded FFT, plus the direct O(T^2)
//! reference.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;

use crate::error::Result;
use crate::numeric::fft::FftPlan;
use crate::real::Real;

/// Smallest power of two `>= 2T - 1`, the padding that makes circular
/// convolution of two length-`T` signals equal to linear convolution.
pub fn fft_len_for(time: usize) -> usize {
    (2 * time.max(1) - 1).next_power_of_two()
}

/// Power of two `s` with `max |x| / s` in `[0.5, 1)`, or 1 for a zero signal.
/// Dividing by `s` is exact, and packing two signals normalized this way
/// into one complex FFT keeps the rounding error of each relative to its
/// own magnitude.
pub fn pow2_scale<T: Real>(x: impl IntoIterator<Item = T>) -> T {
    let m = x.into_iter().fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
    if m == 0.0 || !m.is_finite() {
        return T::one();
    }
    let (_, e) = libm::frexp(m);
    T::lit(libm::ldexp(1.0, e))
}

/// `out[t] = sum_{i <= t} x[i] * k[t - i]` for `t < x.len()`, by direct summation.
pub fn direct_convolve<T: Real>(x: &[T], k: &[T]) -> Vec<T> {
    (0..x.len())
        .map(|t| {
            let mut acc = T::zero();
            for i in 0..=t {
                if t - i < k.len() {
                    acc += x[i] * k[t - i];
                }
            }
            acc
        })
        .collect()
}

/// Same result as [`direct_convolve`] (for `k.len() == x.len()`), via FFT.
pub fn linear_convolve<T: Real>(x: &[T], k: &[T]) -> Result<Vec<T>> {
    let tn = x.len().max(k.len());
    let conv = Convolver::new(tn)?;
    let (xs, ks) = conv.spectra_pair(x, k);
    let prod: Vec<_> = xs.iter().zip(&ks).map(|(a, b)| a * b).collect();
    let mut out = vec![T::zero(); x.len()];
    conv.inverse_real(&prod, &mut out);
    Ok(out)
}

/// FFT workspace for length-`T` real convolutions.
///
/// Real signals are transformed two at a time by packing them into the real
/// and imaginary parts of one complex buffer; the two spectra are separated
/// using Hermitian symmetry.
#[derive(Debug, Clone)]
pub struct Convolver<T> {
    time: usize,
    plan: FftPlan<T>,
}

impl<T: Real> Convolver<T> {
    pub fn new(time: usize) -> Result<Self> {
        Ok(Convolver {
            time,
            plan: FftPlan::new(fft_len_for(time))?,
        })
    }

    /// Convolver with an explicit (power of two) padded length.
    pub fn with_len(time: usize, len: usize) -> Result<Self> {
        Ok(Convolver {
            time,
            plan: FftPlan::new(len)?,
        })
    }

    #[inline]
    pub fn time(&self) -> usize {
        self.time
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.plan.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.plan.is_empty()
    }

    pub fn plan(&self) -> &FftPlan<T> {
        &self.plan
    }

    fn zero_buf(&self) -> Vec<Complex<T>> {
        vec![Complex::new(T::zero(), T::zero()); self.len()]
    }

    /// Spectrum of one real signal (zero-padded).
    pub fn spectrum(&self, x: &[T]) -> Vec<Complex<T>> {
        let mut buf = self.zero_buf();
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.plan.forward(&mut buf);
        buf
    }

    /// Spectrum of a complex signal (zero-padded).
    pub fn spectrum_complex(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut buf = self.zero_buf();
        buf[..x.len()].copy_from_slice(x);
        self.plan.forward(&mut buf);
        buf
    }

    /// Spectra of two real signals using a single complex FFT.
    pub fn spectra_pair(&self, a: &[T], b: &[T]) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let n = self.len();
        let (s1, s2) = (pow2_scale(a.iter().copied()), pow2_scale(b.iter().copied()));
        let mut z = self.zero_buf();
        for (zi, &v) in z.iter_mut().zip(a) {
            zi.re = v / s1;
        }
        for (zi, &v) in z.iter_mut().zip(b) {
            zi.im = v / s2;
        }
        self.plan.forward(&mut z);
        let half = T::lit(0.5);
        let mut sa = self.zero_buf();
        let mut sb = self.zero_buf();
        for k in 0..n {
            let zk = z[k];
            let zc = z[(n - k) % n].conj();
            sa[k] = (zk + zc) * (half * s1);
            // (zk - zc) / (2i)
            let d = zk - zc;
            sb[k] = Complex::new(d.im * half, -d.re * half) * s2;
        }
        (sa, sb)
    }

    /// Inverse transform of a Hermitian spectrum; writes the first `out.len()`
    /// samples.
    pub fn inverse_real(&self, spec: &[Complex<T>], out: &mut [T]) {
        let mut buf = spec.to_vec();
        self.plan.inverse(&mut buf);
        for (o, v) in out.iter_mut().zip(&buf) {
            *o = v.re;
        }
    }

    /// Inverse transform of two Hermitian spectra with one complex IFFT.
    pub fn inverse_real_pair(&self, spec_a: &[Complex<T>], spec_b: &[Complex<T>], out_a: &mut [T], out_b: &mut [T]) {
        let mut buf: Vec<Complex<T>> = spec_a
            .iter()
            .zip(spec_b)
            .map(|(a, b)| Complex::new(a.re - b.im, a.im + b.re))
            .collect();
        self.plan.inverse(&mut buf);
        for (o, v) in out_a.iter_mut().zip(&buf) {
            *o = v.re;
        }
        for (o, v) in out_b.iter_mut().zip(&buf) {
            *o = v.im;
        }
    }

    /// Inverse transform of a general spectrum.
    pub fn inverse_complex(&self, spec: &[Complex<T>], out: &mut [Complex<T>]) {
        let mut buf = spec.to_vec();
        self.plan.inverse(&mut buf);
        let take = out.len();
        out.copy_from_slice(&buf[..take]);
    }
}
