use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::real::Real;

/// Mean softmax cross-entropy over the batch and its gradient
/// `(softmax - onehot) / B`. `logits` is `[batch][classes]` row-major.
pub fn cross_entropy<T: Real>(logits: &[T], classes: usize, labels: &[usize]) -> Result<(T, Vec<T>)> {
    let batch = labels.len();
    if classes == 0 || logits.len() != batch * classes {
        return Err(invalid("logits do not match the batch and class count"));
    }
    if batch == 0 {
        return Err(invalid("empty batch"));
    }
    let mut grad = vec![T::zero(); logits.len()];
    let mut total = 0.0f64;
    let inv_b = 1.0 / batch as f64;
    for (b, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(invalid(alloc::format!("label {y} out of range for {classes} classes")));
        }
        let row = &logits[b * classes..(b + 1) * classes];
        let mx = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| libm::exp(v.as_f64() - mx)).sum();
        let lse = mx + libm::log(sum);
        total += lse - row[y].as_f64();
        for (c, g) in grad[b * classes..(b + 1) * classes].iter_mut().enumerate() {
            let p = libm::exp(row[c].as_f64() - lse);
            let onehot = if c == y { 1.0 } else { 0.0 };
            *g = T::lit((p - onehot) * inv_b);
        }
    }
    Ok((T::lit(total * inv_b), grad))
}

/// Number of rows whose arg-max equals the label.
pub fn correct_count<T: Real>(logits: &[T], classes: usize, labels: &[usize]) -> usize {
    labels
        .iter()
        .enumerate()
        .filter(|&(b, &y)| {
            let row = &logits[b * classes..(b + 1) * classes];
            let mut best = 0;
            for c in 1..classes {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best == y
        })
        .count()
}
