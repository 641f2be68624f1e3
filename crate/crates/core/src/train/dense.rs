use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{invalid, Result};
use crate::numeric::SeqTensor;
use crate::real::Real;

/// Fully connected layer applied independently at every time step:
/// `y[b, t, :] = W x[b, t, :] + bias`, with `W` stored `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Gradients of a [`Dense`] layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad<T> {
    pub d_weight: Vec<T>,
    pub d_bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    /// Uniform `(-1/sqrt(in), 1/sqrt(in))` initialization for weights and bias.
    pub fn init<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(invalid("dense layer dimensions must be positive"));
        }
        let bound = 1.0 / libm::sqrt(inputs as f64);
        let dist = Uniform::new(-bound, bound).map_err(|_| invalid("bad init bound"))?;
        let weight = (0..inputs * outputs).map(|_| T::lit(dist.sample(rng))).collect();
        let bias = (0..outputs).map(|_| T::lit(dist.sample(rng))).collect();
        Ok(Dense {
            inputs,
            outputs,
            weight,
            bias,
        })
    }

    pub fn from_parts(inputs: usize, outputs: usize, weight: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if weight.len() != inputs * outputs || bias.len() != outputs {
            return Err(invalid("dense weight/bias sizes do not match the layer shape"));
        }
        Ok(Dense {
            inputs,
            outputs,
            weight,
            bias,
        })
    }

    pub fn forward(&self, x: &SeqTensor<T>) -> Result<SeqTensor<T>> {
        let (bn, tn, fi) = x.shape();
        if fi != self.inputs {
            return Err(invalid(alloc::format!(
                "dense layer expects {} features, got {fi}",
                self.inputs
            )));
        }
        let mut out = SeqTensor::zeros(bn, tn, self.outputs);
        for b in 0..bn {
            for t in 0..tn {
                let row = x.row(b, t);
                let dst = out.row_mut(b, t);
                dst.copy_from_slice(&self.bias);
                for (i, &xi) in row.iter().enumerate() {
                    if xi == T::zero() {
                        continue;
                    }
                    for (o, d) in dst.iter_mut().enumerate() {
                        *d += self.weight[o * self.inputs + i] * xi;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Returns parameter gradients and `dL/dx`.
    pub fn backward(
        &self,
        x: &SeqTensor<T>,
        d_out: &SeqTensor<T>,
        want_input: bool,
    ) -> Result<(DenseGrad<T>, Option<SeqTensor<T>>)> {
        let (bn, tn, fi) = x.shape();
        if fi != self.inputs || d_out.shape() != (bn, tn, self.outputs) {
            return Err(invalid("dense backward shapes do not match"));
        }
        let mut d_weight = vec![T::zero(); self.weight.len()];
        let mut d_bias = vec![T::zero(); self.outputs];
        let mut d_in = if want_input {
            Some(SeqTensor::zeros(bn, tn, fi))
        } else {
            None
        };
        for b in 0..bn {
            for t in 0..tn {
                let g = d_out.row(b, t);
                let row = x.row(b, t);
                for (db, &gv) in d_bias.iter_mut().zip(g) {
                    *db += gv;
                }
                for (o, &gv) in g.iter().enumerate() {
                    if gv == T::zero() {
                        continue;
                    }
                    let w_row = &mut d_weight[o * self.inputs..(o + 1) * self.inputs];
                    for (dw, &xi) in w_row.iter_mut().zip(row) {
                        *dw += gv * xi;
                    }
                }
                if let Some(di) = d_in.as_mut() {
                    let dst = di.row_mut(b, t);
                    for (o, &gv) in g.iter().enumerate() {
                        if gv == T::zero() {
                            continue;
                        }
                        let w_row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
                        for (d, &w) in dst.iter_mut().zip(w_row) {
                            *d += gv * w;
                        }
                    }
                }
            }
        }
        Ok((DenseGrad { d_weight, d_bias }, d_in))
    }

    pub fn cast<U: Real>(&self) -> Dense<U> {
        Dense {
            inputs: self.inputs,
            outputs: self.outputs,
            weight: self.weight.iter().map(|v| U::lit(v.as_f64())).collect(),
            bias: self.bias.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}
