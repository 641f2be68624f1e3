use alloc::vec;

use crate::neuron::ResetMode;
use crate::numeric::{scan_inclusive_tree, SeqTensor};
use crate::real::Real;

/// Result of a layer forward pass. `v_s` is the pre-reset output potential,
/// `v_r` the amount discharged after each step and `cum` the running sum of
/// the (clamped) output-compartment input.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput<T> {
    pub spikes: SeqTensor<T>,
    pub v_s: SeqTensor<T>,
    /// Output-compartment input before clamping.
    pub i_h: SeqTensor<T>,
    pub cum: SeqTensor<T>,
    pub v_r: SeqTensor<T>,
}

impl<T: Real> ForwardOutput<T> {
    pub fn spike_count(&self) -> T {
        self.spikes.sum()
    }

    pub fn cast<U: Real>(&self) -> ForwardOutput<U> {
        ForwardOutput {
            spikes: self.spikes.cast(),
            v_s: self.v_s.cast(),
            i_h: self.i_h.cast(),
            cum: self.cum.cast(),
            v_r: self.v_r.cast(),
        }
    }
}

/// Floor-reset output compartment with unit decay from a prefix scan:
/// `v_s[t] = cum[t] - theta floor(cum[t-1] / theta)`.
///
/// The scan and the reset arithmetic run in double precision.
pub fn output_forward_parallel<T: Real>(i_h: &SeqTensor<T>, theta: T, clamp: bool) -> ForwardOutput<T> {
    let (bn, tn, fn_) = i_h.shape();
    let th = theta.as_f64();
    let mut spikes = SeqTensor::zeros(bn, tn, fn_);
    let mut v_s = SeqTensor::zeros(bn, tn, fn_);
    let mut cum = SeqTensor::zeros(bn, tn, fn_);
    let mut v_r = SeqTensor::zeros(bn, tn, fn_);
    let mut lane = vec![0.0f64; tn];
    for b in 0..bn {
        for f in 0..fn_ {
            for (t, l) in lane.iter_mut().enumerate() {
                let h = i_h.get(b, t, f).as_f64();
                *l = if clamp && h < 0.0 { 0.0 } else { h };
            }
            scan_inclusive_tree(&mut lane);
            let mut prev = 0.0f64;
            for (t, &c) in lane.iter().enumerate() {
                let v = c - th * libm::floor(prev / th);
                let fired = v >= th;
                let r = if fired { th * libm::floor(v / th) } else { 0.0 };
                spikes.set(b, t, f, if fired { T::one() } else { T::zero() });
                v_s.set(b, t, f, T::lit(v));
                cum.set(b, t, f, T::lit(c));
                v_r.set(b, t, f, T::lit(r));
                prev = c;
            }
        }
    }
    ForwardOutput {
        spikes,
        v_s,
        i_h: i_h.clone(),
        cum,
        v_r,
    }
}

/// Step-by-step output compartment for settings the scan cannot express
/// (decay below 1, subtractive or no reset, unclamped input).
pub fn output_forward_serial<T: Real>(
    i_h: &SeqTensor<T>,
    theta: T,
    alpha: T,
    reset: ResetMode,
    clamp: bool,
) -> ForwardOutput<T> {
    let (bn, tn, fn_) = i_h.shape();
    let th = theta.as_f64();
    let a = alpha.as_f64();
    let mut spikes = SeqTensor::zeros(bn, tn, fn_);
    let mut v_s = SeqTensor::zeros(bn, tn, fn_);
    let mut cum = SeqTensor::zeros(bn, tn, fn_);
    let mut v_r = SeqTensor::zeros(bn, tn, fn_);
    for b in 0..bn {
        for f in 0..fn_ {
            let (mut v, mut r, mut c) = (0.0f64, 0.0f64, 0.0f64);
            for t in 0..tn {
                let mut h = i_h.get(b, t, f).as_f64();
                if clamp && h < 0.0 {
                    h = 0.0;
                }
                c += h;
                v = a * v + h - r;
                let fired = v >= th;
                r = match (fired, reset) {
                    (false, _) | (_, ResetMode::None) => 0.0,
                    (true, ResetMode::Floor) => th * libm::floor(v / th),
                    (true, ResetMode::Subtract) => th,
                };
                spikes.set(b, t, f, if fired { T::one() } else { T::zero() });
                v_s.set(b, t, f, T::lit(v));
                cum.set(b, t, f, T::lit(c));
                v_r.set(b, t, f, T::lit(r));
            }
        }
    }
    ForwardOutput {
        spikes,
        v_s,
        i_h: i_h.clone(),
        cum,
        v_r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    #[test]
    fn small_example() {
        let out = output_forward_parallel(&SeqTensor::from_series(&[0.4f64, 0.4, 0.4]), 1.0, true);
        assert_eq!(out.spikes.data(), &[0.0, 0.0, 1.0]);
        let vs = out.v_s.data();
        assert!((vs[0] - 0.4).abs() < 1e-15 && (vs[1] - 0.8).abs() < 1e-15 && (vs[2] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn large_input_discharges_integer_part() {
        let out = output_forward_parallel(&SeqTensor::from_series(&[2.5f64]), 1.0, true);
        assert_eq!(out.spikes.data(), &[1.0]);
        assert_eq!(out.v_s.data(), &[2.5]);
        assert_eq!(out.v_r.data(), &[2.0]);
    }

    #[test]
    fn clamp_zeroes_negative_current() {
        let out = output_forward_parallel(&SeqTensor::from_series(&[-3.0f64, 0.5, 0.6]), 1.0, true);
        assert_eq!(out.cum.data()[0], 0.0);
        assert_eq!(out.spikes.data(), &[0.0, 0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn scan_and_recurrence_agree_on_dyadic_input(xs in proptest::collection::vec(0u32..64, 1..300)) {
            let series: Vec<f64> = xs.iter().map(|&v| v as f64 / 16.0).collect();
            let x = SeqTensor::from_series(&series);
            let par = output_forward_parallel(&x, 1.0, true);
            let ser = output_forward_serial(&x, 1.0, 1.0, ResetMode::Floor, true);
            prop_assert_eq!(&par.spikes, &ser.spikes);
            prop_assert_eq!(&par.v_s, &ser.v_s);
            let mut discharged = 0.0;
            for t in 0..series.len() {
                discharged += par.v_r.data()[t];
                prop_assert_eq!(discharged, libm::floor(par.cum.data()[t]));
            }
        }
    }
}
