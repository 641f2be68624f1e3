use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::backward::{backward_from_current, backward_params};
use super::surrogate::{smooth_step, SurrogateConfig};
use super::tape::LayerTape;
use crate::error::Result;
use crate::neuron::{init_params, InitConfig, PmsnParams};
use crate::numeric::SeqTensor;
use crate::parallel::{build_kernel, hidden_forward_parallel, LayerConfig};
use crate::train::Dense;

/// Optional dense layer followed by one PMSN layer, scored by a fixed
/// weighting of the output: `L = sum r * S~` where `S~` is the smoothed
/// spike function, or `L = sum r * I_h` for the linear submodel.
///
/// The smoothed output is `S~ = step(max(I_h, 0) + carry - theta)` with the
/// reset carry frozen at its value in the hard forward pass, so its exact
/// gradient is the one the surrogate backward computes.
#[derive(Debug, Clone)]
pub struct FdModel {
    pub dense: Option<Dense<f64>>,
    pub params: PmsnParams<f64>,
    pub input: SeqTensor<f64>,
    pub weights: SeqTensor<f64>,
    pub layer: LayerConfig,
    pub surrogate: SurrogateConfig,
    pub linear: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamError {
    pub name: String,
    pub max_rel_err: f64,
    /// Index of the worst coordinate in this parameter's enumeration.
    pub argmax: usize,
    pub coords: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub eps: f64,
    pub params: Vec<ParamError>,
}

impl FdReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max)
    }
}

impl FdModel {
    /// Random model: a dense layer from `inputs` to `features` followed by a
    /// perturbed PMSN layer of `n` compartments, with uniform input and
    /// loss weights in `[-1, 1)`.
    pub fn sample(seed: u64, n: usize, inputs: usize, features: usize, batch: usize, time: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dense = Dense::init(inputs, features, &mut rng)?;
        let params = perturbed_params(n, features, seed)?;
        let mut uniform = |f: usize| -> Result<SeqTensor<f64>> {
            SeqTensor::from_vec(
                (0..batch * time * f).map(|_| rng.random_range(-1.0..1.0)).collect(),
                batch,
                time,
                f,
            )
        };
        let input = uniform(inputs)?;
        let weights = uniform(features)?;
        Ok(FdModel {
            dense: Some(dense),
            params,
            input,
            weights,
            layer: LayerConfig::default(),
            surrogate: SurrogateConfig::default(),
            linear: false,
        })
    }

    fn layer_input(&self, dense: &Option<Dense<f64>>) -> Result<SeqTensor<f64>> {
        match dense {
            Some(d) => d.forward(&self.input),
            None => Ok(self.input.clone()),
        }
    }

    fn loss(&self, dense: &Option<Dense<f64>>, p: &PmsnParams<f64>, carry: &SeqTensor<f64>) -> Result<f64> {
        let x = self.layer_input(dense)?;
        let h = self.layer.hidden_input(&x);
        let cache = build_kernel(p, x.time())?;
        let i_h = hidden_forward_parallel(&cache, p, &h)?;
        let w = self.surrogate.gamma_width;
        let mut total = 0.0;
        for ((&ih, &r), &c) in i_h.data().iter().zip(self.weights.data()).zip(carry.data()) {
            total += if self.linear {
                r * ih
            } else {
                let ih = if self.layer.clamp_ih { ih.max(0.0) } else { ih };
                r * smooth_step(ih + c - p.theta, w)
            };
        }
        Ok(total)
    }
}

struct Analytic {
    lambda: Vec<Complex64>,
    phi_c: Vec<Complex64>,
    phi_s: Vec<Complex64>,
    gamma: Vec<f64>,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

fn analytic(model: &FdModel) -> Result<(Analytic, SeqTensor<f64>)> {
    let x = model.layer_input(&model.dense)?;
    let (_, tape) = LayerTape::record(&model.params, &x, &model.layer)?;
    let v_s = tape.v_s.as_ref().expect("recorded");
    let i_h = tape.i_h.as_ref().expect("recorded");
    let carry_data = v_s
        .data()
        .iter()
        .zip(i_h.data())
        .map(|(&v, &h)| if model.layer.clamp_ih { v - h.max(0.0) } else { v - h })
        .collect();
    let (b, t, f) = v_s.shape();
    let carry = SeqTensor::from_vec(carry_data, b, t, f)?;
    let g = if model.linear {
        backward_from_current(&tape, &model.weights)?
    } else {
        backward_params(&tape, &model.surrogate, &model.weights)?
    };
    let (weight, bias) = match &model.dense {
        Some(d) => {
            let (dg, _) = d.backward(&model.input, &g.d_input, false)?;
            (dg.d_weight, dg.d_bias)
        }
        None => (Vec::new(), Vec::new()),
    };
    Ok((
        Analytic {
            lambda: g.d_lambda_dt,
            phi_c: g.d_phi_c,
            phi_s: g.d_phi_s,
            gamma: g.d_gamma_n,
            weight,
            bias,
        },
        carry,
    ))
}

#[derive(Clone, Copy)]
enum Field {
    Lambda,
    PhiC,
    PhiS,
}

fn field(p: &mut PmsnParams<f64>, which: Field) -> &mut Vec<Complex64> {
    match which {
        Field::Lambda => &mut p.lambda_dt,
        Field::PhiC => &mut p.phi_c,
        Field::PhiS => &mut p.phi_s,
    }
}

/// Fourth-order central difference from evaluations at `k * eps`.
fn central(eval: impl Fn(f64) -> Result<f64>, eps: f64) -> Result<f64> {
    let (p1, m1) = (eval(1.0)?, eval(-1.0)?);
    let (p2, m2) = (eval(2.0)?, eval(-2.0)?);
    Ok((8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * eps))
}

fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Relative-error floor as a fraction of the largest analytic gradient of a
/// parameter, so that coordinates with vanishing gradient are compared
/// absolutely.
const FLOOR_FRACTION: f64 = 1e-6;

/// Compares the analytic gradient of `model` with fourth-order central
/// differences of step `eps`, coordinate by coordinate. Conjugate partner modes are moved
/// together so the perturbed parameters stay paired.
pub fn fd_check(model: &FdModel, eps: f64) -> Result<FdReport> {
    let (an, carry) = analytic(model)?;
    let mut report = Vec::new();
    let m = model.params.modes;

    let complex_fields = [
        ("lambda_dt", Field::Lambda, &an.lambda),
        ("phi_c", Field::PhiC, &an.phi_c),
        ("phi_s", Field::PhiS, &an.phi_s),
    ];
    for (name, which, grads) in complex_fields {
        let scale = grads.iter().map(|g| g.norm()).fold(0.0, f64::max);
        let floor = (scale * FLOOR_FRACTION).max(1e-300);
        let mut worst = (0.0f64, 0usize);
        let mut coord = 0usize;
        for f in 0..model.params.features {
            for j in 0..m {
                let q = model.params.pairing[j];
                if q < j {
                    continue;
                }
                let parts: &[bool] = if q == j { &[false] } else { &[false, true] };
                for &imag in parts {
                    let shift = |sign: f64| -> Result<f64> {
                        let mut p = model.params.clone();
                        let v = field(&mut p, which);
                        let (a, b) = (f * m + j, f * m + q);
                        if imag {
                            v[a].im += sign * eps;
                            if b != a {
                                v[b].im -= sign * eps;
                            }
                        } else {
                            v[a].re += sign * eps;
                            if b != a {
                                v[b].re += sign * eps;
                            }
                        }
                        model.loss(&model.dense, &p, &carry)
                    };
                    let num = central(shift, eps)?;
                    let g = grads[f * m + j];
                    let a = if imag { g.im } else { g.re };
                    let e = rel_err(a, num, floor);
                    if e > worst.0 {
                        worst = (e, coord);
                    }
                    coord += 1;
                }
            }
        }
        report.push(ParamError {
            name: name.to_string(),
            max_rel_err: worst.0,
            argmax: worst.1,
            coords: coord,
        });
    }

    {
        let scale = an.gamma.iter().map(|g| g.abs()).fold(0.0, f64::max);
        let floor = (scale * FLOOR_FRACTION).max(1e-300);
        let mut worst = (0.0f64, 0usize);
        for f in 0..model.params.features {
            let eval = |sign: f64| -> Result<f64> {
                let mut p = model.params.clone();
                p.gamma_n[f] += sign * eps;
                model.loss(&model.dense, &p, &carry)
            };
            let num = central(eval, eps)?;
            let e = rel_err(an.gamma[f], num, floor);
            if e > worst.0 {
                worst = (e, f);
            }
        }
        report.push(ParamError {
            name: "gamma_n".to_string(),
            max_rel_err: worst.0,
            argmax: worst.1,
            coords: model.params.features,
        });
    }

    if let Some(dense) = &model.dense {
        for (name, grads, is_bias) in [("weight", &an.weight, false), ("bias", &an.bias, true)] {
            let scale = grads.iter().map(|g| g.abs()).fold(0.0, f64::max);
            let floor = (scale * FLOOR_FRACTION).max(1e-300);
            let mut worst = (0.0f64, 0usize);
            for k in 0..grads.len() {
                let eval = |sign: f64| -> Result<f64> {
                    let mut d = dense.clone();
                    if is_bias {
                        d.bias[k] += sign * eps;
                    } else {
                        d.weight[k] += sign * eps;
                    }
                    model.loss(&Some(d), &model.params, &carry)
                };
                let num = central(eval, eps)?;
                let e = rel_err(grads[k], num, floor);
                if e > worst.0 {
                    worst = (e, k);
                }
            }
            report.push(ParamError {
                name: name.to_string(),
                max_rel_err: worst.0,
                argmax: worst.1,
                coords: grads.len(),
            });
        }
    }
    Ok(FdReport { eps, params: report })
}

/// Randomizes trained-looking parameters around the default initialization
/// while keeping conjugate pairing.
pub fn perturbed_params(n: usize, features: usize, seed: u64) -> Result<PmsnParams<f64>> {
    let (_, mut p) = init_params::<f64>(n, features, seed, &InitConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let m = p.modes;
    for f in 0..features {
        for j in 0..m {
            let q = p.pairing[j];
            if q < j {
                continue;
            }
            let i = f * m + j;
            let k = f * m + q;
            let dz = Complex64::new(rng.random_range(-0.3..0.0), rng.random_range(-0.2..0.2));
            let dc = Complex64::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
            let ds = Complex64::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
            if q == j {
                p.lambda_dt[i].re += dz.re;
                p.phi_c[i].re += dc.re;
                p.phi_s[i].re += ds.re;
            } else {
                p.lambda_dt[i] += dz;
                p.lambda_dt[k] = p.lambda_dt[i].conj();
                p.phi_c[i] += dc;
                p.phi_c[k] = p.phi_c[i].conj();
                p.phi_s[i] += ds;
                p.phi_s[k] = p.phi_s[i].conj();
            }
        }
    }
    Ok(p)
}
