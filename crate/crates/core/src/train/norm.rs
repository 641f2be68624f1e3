use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::numeric::SeqTensor;
use crate::real::Real;

/// Per-feature normalization with statistics over batch and time jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub features: usize,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
}

/// Values retained by a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct NormCache<T> {
    xhat: SeqTensor<T>,
    inv_std: Vec<T>,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(features: usize) -> Self {
        BatchNorm {
            features,
            gamma: vec![T::one(); features],
            beta: vec![T::zero(); features],
            running_mean: vec![T::zero(); features],
            running_var: vec![T::one(); features],
            momentum: T::lit(0.1),
            eps: T::lit(1e-5),
        }
    }

    fn check(&self, x: &SeqTensor<T>) -> Result<()> {
        if x.feature() != self.features {
            return Err(invalid("normalization width does not match its input"));
        }
        Ok(())
    }

    /// Training-mode forward: normalizes with batch statistics and updates
    /// the running estimates.
    pub fn forward_train(&mut self, x: &SeqTensor<T>) -> Result<(SeqTensor<T>, NormCache<T>)> {
        self.check(x)?;
        let (bn, tn, fn_) = x.shape();
        let count = bn * tn;
        let mut mean = vec![0.0f64; fn_];
        let mut var = vec![0.0f64; fn_];
        for b in 0..bn {
            for t in 0..tn {
                for (m, &v) in mean.iter_mut().zip(x.row(b, t)) {
                    *m += v.as_f64();
                }
            }
        }
        let inv_n = 1.0 / count.max(1) as f64;
        for m in mean.iter_mut() {
            *m *= inv_n;
        }
        for b in 0..bn {
            for t in 0..tn {
                for ((s, &v), m) in var.iter_mut().zip(x.row(b, t)).zip(&mean) {
                    let d = v.as_f64() - m;
                    *s += d * d;
                }
            }
        }
        for s in var.iter_mut() {
            *s *= inv_n;
        }
        let inv_std: Vec<T> = var
            .iter()
            .map(|v| T::lit(1.0 / libm::sqrt(v + self.eps.as_f64())))
            .collect();
        let mut xhat = SeqTensor::zeros(bn, tn, fn_);
        let mut y = SeqTensor::zeros(bn, tn, fn_);
        for b in 0..bn {
            for t in 0..tn {
                let src = x.row(b, t);
                let xh = xhat.row_mut(b, t);
                for f in 0..fn_ {
                    xh[f] = (src[f] - T::lit(mean[f])) * inv_std[f];
                }
                let xh = xhat.row(b, t).to_vec();
                let dst = y.row_mut(b, t);
                for f in 0..fn_ {
                    dst[f] = self.gamma[f] * xh[f] + self.beta[f];
                }
            }
        }
        let mom = self.momentum;
        let unbiased = if count > 1 {
            count as f64 / (count - 1) as f64
        } else {
            1.0
        };
        for f in 0..fn_ {
            self.running_mean[f] = (T::one() - mom) * self.running_mean[f] + mom * T::lit(mean[f]);
            self.running_var[f] = (T::one() - mom) * self.running_var[f] + mom * T::lit(var[f] * unbiased);
        }
        Ok((y, NormCache { xhat, inv_std }))
    }

    /// Evaluation-mode forward with the running statistics.
    pub fn forward_eval(&self, x: &SeqTensor<T>) -> Result<SeqTensor<T>> {
        self.check(x)?;
        let scale: Vec<T> = (0..self.features)
            .map(|f| self.gamma[f] / (self.running_var[f] + self.eps).sqrt())
            .collect();
        let shift: Vec<T> = (0..self.features)
            .map(|f| self.beta[f] - scale[f] * self.running_mean[f])
            .collect();
        let (bn, tn, _) = x.shape();
        let mut y = x.clone();
        for b in 0..bn {
            for t in 0..tn {
                for ((v, s), h) in y.row_mut(b, t).iter_mut().zip(&scale).zip(&shift) {
                    *v = *v * *s + *h;
                }
            }
        }
        Ok(y)
    }

    /// Returns `(d_gamma, d_beta, d_x)`.
    pub fn backward(&self, cache: &NormCache<T>, dy: &SeqTensor<T>) -> Result<(Vec<T>, Vec<T>, SeqTensor<T>)> {
        let (bn, tn, fn_) = dy.shape();
        if cache.xhat.shape() != dy.shape() {
            return Err(invalid("normalization backward shape mismatch"));
        }
        let count = (bn * tn).max(1) as f64;
        let mut d_gamma = vec![0.0f64; fn_];
        let mut d_beta = vec![0.0f64; fn_];
        for b in 0..bn {
            for t in 0..tn {
                let g = dy.row(b, t);
                let xh = cache.xhat.row(b, t);
                for f in 0..fn_ {
                    d_beta[f] += g[f].as_f64();
                    d_gamma[f] += (g[f] * xh[f]).as_f64();
                }
            }
        }
        let mut dx = SeqTensor::zeros(bn, tn, fn_);
        for b in 0..bn {
            for t in 0..tn {
                let g = dy.row(b, t);
                let xh = cache.xhat.row(b, t);
                let xh = xh.to_vec();
                let g = g.to_vec();
                let dst = dx.row_mut(b, t);
                for f in 0..fn_ {
                    let k = (self.gamma[f] * cache.inv_std[f]).as_f64() / count;
                    let v = count * g[f].as_f64() - d_beta[f] - xh[f].as_f64() * d_gamma[f];
                    dst[f] = T::lit(k * v);
                }
            }
        }
        Ok((
            d_gamma.into_iter().map(T::lit).collect(),
            d_beta.into_iter().map(T::lit).collect(),
            dx,
        ))
    }

    pub fn cast<U: Real>(&self) -> BatchNorm<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::lit(x.as_f64())).collect();
        BatchNorm {
            features: self.features,
            gamma: c(&self.gamma),
            beta: c(&self.beta),
            running_mean: c(&self.running_mean),
            running_var: c(&self.running_var),
            momentum: U::lit(self.momentum.as_f64()),
            eps: U::lit(self.eps.as_f64()),
        }
    }
}
