//! Inclusive prefix sums along the time axis.

use alloc::vec;

use crate::numeric::tensor::SeqTensor;
use crate::real::Real;

/// Sequential inclusive scan, in place.
pub fn scan_inclusive<T: Real>(x: &mut [T]) {
    let mut acc = T::zero();
    for v in x.iter_mut() {
        acc += *v;
        *v = acc;
    }
}

/// Work-efficient (up-sweep / down-sweep) inclusive scan, in place.
///
/// Every level of both sweeps consists of independent additions, so the
/// loop bodies are the log-depth parallel schedule of the scan. The input is
/// padded internally to a power of two.
pub fn scan_inclusive_tree<T: Real>(x: &mut [T]) {
    let n = x.len();
    if n <= 1 {
        return;
    }
    let size = n.next_power_of_two();
    let mut buf = vec![T::zero(); size];
    buf[..n].copy_from_slice(x);

    // up-sweep: buf[k] holds the sum of its subtree
    let mut stride = 1;
    while stride < size {
        let mut i = 2 * stride - 1;
        while i < size {
            let left = buf[i - stride];
            buf[i] += left;
            i += 2 * stride;
        }
        stride *= 2;
    }
    // down-sweep to an exclusive scan
    buf[size - 1] = T::zero();
    stride = size / 2;
    while stride >= 1 {
        let mut i = 2 * stride - 1;
        while i < size {
            let left = buf[i - stride];
            buf[i - stride] = buf[i];
            buf[i] += left;
            i += 2 * stride;
        }
        stride /= 2;
    }
    for (xi, &ex) in x.iter_mut().zip(&buf) {
        *xi += ex;
    }
}

/// Inclusive prefix sum along time for every `(batch, feature)` lane.
pub fn prefix_sum<T: Real>(x: &SeqTensor<T>) -> SeqTensor<T> {
    let (bn, tn, fn_) = x.shape();
    let mut out = SeqTensor::zeros(bn, tn, fn_);
    let mut lane = vec![T::zero(); tn];
    for b in 0..bn {
        for f in 0..fn_ {
            x.read_lane(b, f, &mut lane);
            scan_inclusive_tree(&mut lane);
            out.write_lane(b, f, &lane);
        }
    }
    out
}
