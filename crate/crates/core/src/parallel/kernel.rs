use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::{Complex, Complex64};

use crate::error::{invalid, numeric, Result};
use crate::neuron::{ModeTable, PmsnParams};
use crate::numeric::{fft_len_for, Convolver, SeqTensor};
use crate::real::Real;

/// Imaginary residue tolerated in a kernel entry, relative to `1 + |Re|`.
pub const REALNESS_TOL: f64 = 1e-5;

/// Convolution kernels of a layer for one sequence length, with their
/// spectra at the padded FFT length.
#[derive(Debug, Clone)]
pub struct KernelCache<T> {
    features: usize,
    time: usize,
    /// `[feature][t]`
    kernel: Vec<T>,
    /// `[feature][k]`, length `fft_len` per feature.
    spectrum: Vec<Complex<T>>,
    conv: Convolver<T>,
}

impl<T: Real> KernelCache<T> {
    #[inline]
    pub fn features(&self) -> usize {
        self.features
    }

    #[inline]
    pub fn time(&self) -> usize {
        self.time
    }

    #[inline]
    pub fn fft_len(&self) -> usize {
        self.conv.len()
    }

    pub fn convolver(&self) -> &Convolver<T> {
        &self.conv
    }

    pub fn kernel_lane(&self, f: usize) -> &[T] {
        &self.kernel[f * self.time..(f + 1) * self.time]
    }

    pub fn spectrum_lane(&self, f: usize) -> &[Complex<T>] {
        let l = self.fft_len();
        &self.spectrum[f * l..(f + 1) * l]
    }

    /// Kernel as a `(1, T, F)` tensor.
    pub fn to_tensor(&self) -> SeqTensor<T> {
        let mut out = SeqTensor::zeros(1, self.time, self.features);
        for f in 0..self.features {
            out.write_lane(0, f, self.kernel_lane(f));
        }
        out
    }
}

/// Kernel cache for `time` steps from the layer parameters.
pub fn build_kernel<T: Real>(p: &PmsnParams<T>, time: usize) -> Result<KernelCache<T>> {
    p.validate()?;
    build_kernel_from_modes(&p.discrete(), time)
}

/// Same as [`build_kernel`] with an explicit FFT length (at least `2T - 1`).
pub fn build_kernel_padded<T: Real>(table: &ModeTable<T>, time: usize, fft_len: usize) -> Result<KernelCache<T>> {
    if time == 0 {
        return Err(invalid("sequence length must be >= 1"));
    }
    if fft_len < 2 * time - 1 {
        return Err(invalid("FFT length too short for linear convolution"));
    }
    let (fcount, m) = (table.features, table.modes);
    let conv = Convolver::with_len(time, fft_len)?;
    let mut kernel = vec![T::zero(); fcount * time];
    let mut acc = vec![Complex64::new(0.0, 0.0); time];
    for f in 0..fcount {
        acc.fill(Complex64::new(0.0, 0.0));
        for j in 0..m {
            let idx = f * m + j;
            let tb = c64(table.t_bar[idx]);
            let mut w = c64(table.out_gain[idx]) * c64(table.in_gain[idx]);
            for a in acc.iter_mut() {
                *a += w;
                w *= tb;
            }
            if !w.re.is_finite() || !w.im.is_finite() {
                return Err(numeric(format!(
                    "kernel overflow in neuron {f}, mode {j} (|T_bar| = {})",
                    tb.norm()
                )));
            }
        }
        for (t, a) in acc.iter().enumerate() {
            if !a.re.is_finite() || !a.im.is_finite() {
                return Err(numeric(format!("kernel of neuron {f} overflows at t = {t}")));
            }
            if a.im.abs() > REALNESS_TOL * (1.0 + a.re.abs()) {
                return Err(numeric(format!(
                    "kernel of neuron {f} is not real at t = {t} (imaginary part {})",
                    a.im
                )));
            }
            kernel[f * time + t] = T::lit(a.re);
        }
    }
    let l = conv.len();
    let mut spectrum = Vec::with_capacity(fcount * l);
    for f in 0..fcount {
        spectrum.extend(conv.spectrum(&kernel[f * time..(f + 1) * time]));
    }
    Ok(KernelCache {
        features: fcount,
        time,
        kernel,
        spectrum,
        conv,
    })
}

/// Kernel cache from discrete per-mode quantities.
pub fn build_kernel_from_modes<T: Real>(table: &ModeTable<T>, time: usize) -> Result<KernelCache<T>> {
    build_kernel_padded(table, time, fft_len_for(time))
}

#[inline]
fn c64<T: Real>(c: Complex<T>) -> Complex64 {
    Complex64::new(c.re.as_f64(), c.im.as_f64())
}
