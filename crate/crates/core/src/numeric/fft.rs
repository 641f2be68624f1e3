//! Iterative radix-2 FFT.
//!
//! Convention: the forward transform is unnormalized,
//! `X[k] = sum_t x[t] exp(-2 pi i k t / N)`, and the inverse divides by `N`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex;
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::numeric::tensor::ComplexSeq;
use crate::real::Real;

/// Precomputed twiddles and bit-reversal permutation for one transform length.
#[derive(Debug, Clone)]
pub struct FftPlan<T> {
    len: usize,
    /// Twiddles of every butterfly stage laid out contiguously: the stage
    /// of half-width `h` occupies `[h - 1, 2h - 1)`.
    twiddles: Vec<Complex<T>>,
    inv_twiddles: Vec<Complex<T>>,
    bitrev: Vec<u32>,
}

impl<T: Real> FftPlan<T> {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(invalid(alloc::format!("FFT length must be a power of two, got {len}")));
        }
        let bits = len.trailing_zeros();
        let bitrev = (0..len as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        // Twiddles are evaluated in f64 and rounded once.
        let mut twiddles = Vec::with_capacity(len.saturating_sub(1));
        let mut half = 1;
        while half < len {
            let step = len / (2 * half);
            for j in 0..half {
                let ang = -2.0 * PI * ((j * step) as f64) / (len as f64);
                twiddles.push(Complex::new(T::lit(Float::cos(ang)), T::lit(Float::sin(ang))));
            }
            half *= 2;
        }
        let inv_twiddles = twiddles.iter().map(|w| w.conj()).collect();
        Ok(FftPlan {
            len,
            twiddles,
            inv_twiddles,
            bitrev,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&self, buf: &mut [Complex<T>]) {
        self.transform(buf, false);
    }

    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        self.transform(buf, true);
        let scale = T::one() / T::count(self.len);
        for v in buf.iter_mut() {
            *v = *v * scale;
        }
    }

    fn transform(&self, buf: &mut [Complex<T>], inverse: bool) {
        let n = self.len;
        assert_eq!(buf.len(), n, "buffer length must equal plan length");
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if i < j {
                buf.swap(i, j);
            }
        }
        let table = if inverse { &self.inv_twiddles } else { &self.twiddles };
        let mut half = 1;
        while half < n {
            let tw = &table[half - 1..2 * half - 1];
            for chunk in buf.chunks_exact_mut(2 * half) {
                let (lo, hi) = chunk.split_at_mut(half);
                for ((a, b), &w) in lo.iter_mut().zip(hi.iter_mut()).zip(tw) {
                    let t = *b * w;
                    *b = *a - t;
                    *a = *a + t;
                }
            }
            half *= 2;
        }
    }
}

fn transform_seq<T: Real>(x: &ComplexSeq<T>, len: usize, inverse: bool) -> Result<ComplexSeq<T>> {
    let (bn, tn, fn_) = x.shape();
    if len < tn {
        return Err(invalid(alloc::format!(
            "FFT length {len} shorter than sequence length {tn}"
        )));
    }
    let plan = FftPlan::new(len)?;
    let mut out = ComplexSeq::zeros(bn, len, fn_);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); len];
    for b in 0..bn {
        for f in 0..fn_ {
            buf.iter_mut().for_each(|v| *v = Complex::new(T::zero(), T::zero()));
            for (t, v) in x.lane(b, f).into_iter().enumerate() {
                buf[t] = v;
            }
            if inverse {
                plan.inverse(&mut buf);
            } else {
                plan.forward(&mut buf);
            }
            out.write_lane(b, f, &buf);
        }
    }
    Ok(out)
}

/// Forward DFT along the time axis of every lane, zero-padded to `len`.
pub fn fft_forward<T: Real>(x: &ComplexSeq<T>, len: usize) -> Result<ComplexSeq<T>> {
    transform_seq(x, len, false)
}

/// Inverse DFT along the time axis (divides by `len`).
pub fn fft_inverse<T: Real>(x: &ComplexSeq<T>, len: usize) -> Result<ComplexSeq<T>> {
    transform_seq(x, len, true)
}
