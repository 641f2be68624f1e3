use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;

use super::discretize::zoh_step_matrices;
use super::params::{GeneralizedMcnParams, LifParams, PmsnParams, ResetMode};
use crate::error::{invalid, Result};
use crate::numeric::SeqTensor;
use crate::real::Real;

/// Time-stepping scheme for [`mcn_forward_serial`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Explicit Euler on the coupled system, with the input entering as
    /// `dt * gamma_i * I[t]`.
    Euler,
    /// Exact update for input held constant over each step.
    Zoh,
}

/// Per-compartment potentials and output spikes of a generalized neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct McnTrace {
    /// `v[i]` is compartment `i`, shape of the input.
    pub v: Vec<SeqTensor<f64>>,
    pub spikes: SeqTensor<f64>,
}

/// Serial PMSN layer output. `v_s` is the pre-reset potential and `v_r` the
/// amount discharged after step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SerialOutput<T> {
    pub v_s: SeqTensor<T>,
    pub spikes: SeqTensor<T>,
    pub i_h: SeqTensor<T>,
    pub v_r: SeqTensor<T>,
}

#[inline]
fn heaviside(x: f64, theta: f64) -> bool {
    x >= theta
}

/// Leaky integrate-and-fire with soft reset:
/// `V[t] = v_rest + alpha (V[t-1] - v_rest) + I[t] - theta S[t-1]`.
pub fn lif_forward_serial<T: Real>(p: &LifParams<T>, input: &SeqTensor<T>) -> (SeqTensor<T>, SeqTensor<T>) {
    let (b, t_len, f) = input.shape();
    let mut v_out = SeqTensor::zeros(b, t_len, f);
    let mut s_out = SeqTensor::zeros(b, t_len, f);
    let mut v = vec![p.v_rest; f];
    let mut s = vec![T::zero(); f];
    for bi in 0..b {
        v.fill(p.v_rest);
        s.fill(T::zero());
        for t in 0..t_len {
            let x = input.row(bi, t);
            for k in 0..f {
                let mut nv = p.v_rest + p.alpha * (v[k] - p.v_rest) + x[k];
                if s[k] > T::zero() {
                    nv -= p.theta;
                }
                v[k] = nv;
                s[k] = if nv >= p.theta { T::one() } else { T::zero() };
            }
            v_out.row_mut(bi, t).copy_from_slice(&v);
            s_out.row_mut(bi, t).copy_from_slice(&s);
        }
    }
    (v_out, s_out)
}

/// Simulates one generalized multi-compartment neuron on every lane of
/// `input`. The last compartment spikes and resets by subtracting `theta`.
pub fn mcn_forward_serial(
    p: &GeneralizedMcnParams,
    input: &SeqTensor<f64>,
    integrator: Integrator,
) -> Result<McnTrace> {
    p.validate()?;
    let n = p.n;
    let a = p.state_matrix();
    let (ad, bd) = match integrator {
        Integrator::Euler => {
            let mut ad = a.iter().map(|v| v * p.dt).collect::<Vec<_>>();
            for i in 0..n {
                ad[i * n + i] = 1.0 - p.dt / p.tau[i];
            }
            (ad, p.gamma.iter().map(|g| p.dt * g).collect::<Vec<_>>())
        }
        Integrator::Zoh => zoh_step_matrices(&a, &p.gamma, n, p.dt)?,
    };
    let (b, t_len, f) = input.shape();
    let mut v: Vec<SeqTensor<f64>> = (0..n).map(|_| SeqTensor::zeros(b, t_len, f)).collect();
    let mut spikes = SeqTensor::zeros(b, t_len, f);
    let mut x = vec![0.0; n];
    let mut next = vec![0.0; n];
    for bi in 0..b {
        for k in 0..f {
            x.fill(0.0);
            let mut s_prev = 0.0;
            for t in 0..t_len {
                let u = input.get(bi, t, k);
                for i in 0..n {
                    let mut acc = ad[i * n + i] * x[i];
                    if i > 0 {
                        acc += ad[i * n + i - 1] * x[i - 1];
                    }
                    if i + 1 < n {
                        acc += ad[i * n + i + 1] * x[i + 1];
                    }
                    if integrator == Integrator::Zoh {
                        for j in 0..n {
                            if j + 1 < i || j > i + 1 {
                                acc += ad[i * n + j] * x[j];
                            }
                        }
                    }
                    next[i] = acc + bd[i] * u;
                }
                if s_prev > 0.0 {
                    next[n - 1] -= p.theta;
                }
                core::mem::swap(&mut x, &mut next);
                let s = if heaviside(x[n - 1], p.theta) { 1.0 } else { 0.0 };
                for i in 0..n {
                    v[i].set(bi, t, k, x[i]);
                }
                spikes.set(bi, t, k, s);
                s_prev = s;
            }
        }
    }
    Ok(McnTrace { v, spikes })
}

/// Step-by-step PMSN layer: the reference the parallel path must reproduce.
///
/// Hidden modes evolve in the working precision; the output compartment
/// accumulates in double precision.
pub fn pmsn_serial_forward<T: Real>(
    p: &PmsnParams<T>,
    input: &SeqTensor<T>,
    reset: ResetMode,
    clamp_ih: bool,
) -> Result<SerialOutput<T>> {
    p.validate()?;
    let (b, t_len, f) = input.shape();
    if f != p.features {
        return Err(invalid(alloc::format!(
            "input has {f} features but the layer has {}",
            p.features
        )));
    }
    let table = p.discrete();
    let m = p.modes;
    let theta = p.theta.as_f64();
    let alpha = p.alpha_out.as_f64();
    let mut v_s = SeqTensor::zeros(b, t_len, f);
    let mut spikes = SeqTensor::zeros(b, t_len, f);
    let mut i_h = SeqTensor::zeros(b, t_len, f);
    let mut v_r = SeqTensor::zeros(b, t_len, f);
    let mut vh = vec![Complex::new(T::zero(), T::zero()); m];
    for bi in 0..b {
        for k in 0..f {
            vh.fill(Complex::new(T::zero(), T::zero()));
            let modes = k * m..(k + 1) * m;
            let (tb, cin, cout) = (
                &table.t_bar[modes.clone()],
                &table.in_gain[modes.clone()],
                &table.out_gain[modes],
            );
            let mut vs = 0.0f64;
            let mut vr = 0.0f64;
            for t in 0..t_len {
                let u = input.get(bi, t, k);
                let mut h = T::zero();
                for j in 0..m {
                    vh[j] = tb[j] * vh[j] + cin[j] * u;
                    h += (cout[j] * vh[j]).re;
                }
                h += p.gamma_n[k] * u;
                if clamp_ih && h < T::zero() {
                    h = T::zero();
                }
                vs = alpha * vs + h.as_f64() - vr;
                let fired = heaviside(vs, theta);
                vr = match (fired, reset) {
                    (false, _) | (_, ResetMode::None) => 0.0,
                    (true, ResetMode::Floor) => theta * libm::floor(vs / theta),
                    (true, ResetMode::Subtract) => theta,
                };
                i_h.set(bi, t, k, h);
                v_s.set(bi, t, k, T::lit(vs));
                spikes.set(bi, t, k, if fired { T::one() } else { T::zero() });
                v_r.set(bi, t, k, T::lit(vr));
            }
        }
    }
    Ok(SerialOutput { v_s, spikes, i_h, v_r })
}

/// Hidden-mode trajectories `V_h[t]` of neuron `feature` driven by `series`,
/// indexed `[mode][t]`.
pub fn pmsn_hidden_trace<T: Real>(p: &PmsnParams<T>, feature: usize, series: &[T]) -> Result<Vec<Vec<Complex<T>>>> {
    if feature >= p.features {
        return Err(invalid("feature index out of range"));
    }
    let table = p.discrete();
    let m = p.modes;
    let mut out = vec![Vec::with_capacity(series.len()); m];
    for j in 0..m {
        let idx = feature * m + j;
        let mut v = Complex::new(T::zero(), T::zero());
        for &u in series {
            v = table.t_bar[idx] * v + table.in_gain[idx] * u;
            out[j].push(v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::{init_params, InitConfig, LearnableMask};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_hidden(gamma_n: f64, theta: f64) -> PmsnParams<f64> {
        PmsnParams {
            features: 1,
            modes: 1,
            lambda_dt: vec![Complex64::new(-0.1, 0.0)],
            phi_c: vec![Complex64::new(1.0, 0.0)],
            phi_s: vec![Complex64::new(0.0, 0.0)],
            dt: vec![0.1],
            gamma_n: vec![gamma_n],
            theta,
            alpha_out: 1.0,
            pairing: vec![0],
            learnable: LearnableMask::default(),
        }
    }

    #[test]
    fn lif_hand_unrolled() {
        let p = LifParams::new(0.5, 1.0).unwrap();
        let (v, s) = lif_forward_serial(&p, &SeqTensor::from_series(&[1.0, 1.0, 1.0]));
        assert_eq!(v.data(), &[1.0, 0.5, 1.25]);
        assert_eq!(s.data(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn lif_zero_input_and_no_threshold() {
        let p = LifParams::new(0.5, 1.0).unwrap();
        let (v, s) = lif_forward_serial(&p, &SeqTensor::zeros(2, 5, 3));
        assert!(v.data().iter().chain(s.data()).all(|&x| x == 0.0));
        let p = LifParams::new(0.5, f64::INFINITY).unwrap();
        let (v, s) = lif_forward_serial(&p, &SeqTensor::from_series(&[1.0, 0.0, 0.0]));
        assert_eq!(v.data(), &[1.0, 0.5, 0.25]);
        assert_eq!(s.sum(), 0.0);
    }

    #[test]
    fn mcn_single_compartment_is_lif() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dt = 0.05;
        let tau = 0.4;
        let gamma = 1.3;
        let mcn = GeneralizedMcnParams {
            n: 1,
            tau: vec![tau],
            beta_fwd: vec![],
            beta_bwd: vec![],
            gamma: vec![gamma],
            theta: 1.0,
            dt,
        };
        let lif = LifParams::new(1.0 - dt / tau, 1.0).unwrap();
        for _ in 0..1000 {
            let series: Vec<f64> = (0..40).map(|_| rng.random_range(-5.0..25.0)).collect();
            let x = SeqTensor::from_series(&series);
            let scaled = x.map(|u| (dt * gamma) * u);
            let trace = mcn_forward_serial(&mcn, &x, Integrator::Euler).unwrap();
            let (v, s) = lif_forward_serial(&lif, &scaled);
            assert_eq!(trace.v[0], v);
            assert_eq!(trace.spikes, s);
        }
    }

    #[test]
    fn mcn_two_compartment_without_output_gain_runs() {
        let p = GeneralizedMcnParams {
            n: 2,
            tau: vec![2.0, 2.0],
            beta_fwd: vec![-5.0],
            beta_bwd: vec![5.0],
            gamma: vec![1.0, 0.0],
            theta: 1.0,
            dt: 0.05,
        };
        let x = SeqTensor::filled(1, 300, 1, 3.0);
        for integ in [Integrator::Euler, Integrator::Zoh] {
            let tr = mcn_forward_serial(&p, &x, integ).unwrap();
            assert!(tr.v.iter().all(|v| v.data().iter().all(|x| x.is_finite())));
        }
    }

    #[test]
    fn mcn_zoh_and_euler_agree_for_small_steps() {
        let (neurons, _) = init_params::<f64>(4, 1, 2, &InitConfig::default()).unwrap();
        let mut p = neurons[0].clone();
        p.theta = f64::INFINITY;
        p.dt = 1e-4;
        let x = SeqTensor::filled(1, 2000, 1, 1.0);
        let a = mcn_forward_serial(&p, &x, Integrator::Euler).unwrap();
        let b = mcn_forward_serial(&p, &x, Integrator::Zoh).unwrap();
        for i in 0..4 {
            let scale = b.v[i].data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(a.v[i].max_abs_diff(&b.v[i]) < 1e-2 * scale.max(1e-12));
        }
    }

    #[test]
    fn impulse_oscillates_at_the_dominant_eigenfrequency() {
        use crate::numeric::{tridiag_skew_eigen, TridiagMatrix};
        for dt in [0.05, 0.1] {
            let cfg = InitConfig {
                dt_min: dt,
                dt_max: dt,
                ..InitConfig::default()
            };
            let (neurons, _) = init_params::<f64>(5, 1, 0, &cfg).unwrap();
            let mut p = neurons[0].clone();
            p.theta = f64::INFINITY;
            let steps = 200;
            let mut x = SeqTensor::zeros(1, steps, 1);
            x.set(0, 0, 0, 1.0);
            let tr = mcn_forward_serial(&p, &x, Integrator::Zoh).unwrap();
            let v: Vec<f64> = tr.v[0].data().to_vec();
            let crossings = (1..steps).filter(|&t| (v[t - 1] > 0.0) != (v[t] > 0.0)).count() as f64;

            let m = p.n - 1;
            let hidden = TridiagMatrix::new(
                p.tau[..m].iter().map(|t| -1.0 / t).collect(),
                p.beta_bwd[..m - 1].to_vec(),
                p.beta_fwd[..m - 1].to_vec(),
            )
            .unwrap();
            let eig = tridiag_skew_eigen(&hidden).unwrap();
            let weight = |j: usize| {
                let c: Complex64 = (0..m).map(|k| eig.inverse.get(j, k) * p.gamma[k]).sum();
                (eig.vectors.get(0, j) * c).norm()
            };
            let dominant = (0..m).max_by(|&a, &b| weight(a).total_cmp(&weight(b))).unwrap();
            let omega = eig.values[dominant].im.abs();
            let predicted = 2.0 * steps as f64 * dt * omega / (2.0 * core::f64::consts::PI);
            assert!(
                (crossings - predicted).abs() <= 0.1 * predicted,
                "dt {dt}: {crossings} crossings vs {predicted:.1}"
            );
        }
    }

    #[test]
    fn floor_reset_example() {
        let p = zero_hidden(1.0, 1.0);
        let out = pmsn_serial_forward(&p, &SeqTensor::from_series(&[0.4, 0.4, 0.4]), ResetMode::Floor, true).unwrap();
        let vs = out.v_s.data();
        assert!((vs[0] - 0.4).abs() < 1e-15 && (vs[1] - 0.8).abs() < 1e-15);
        assert!((vs[2] - 1.2).abs() < 1e-12);
        assert_eq!(out.spikes.data(), &[0.0, 0.0, 1.0]);
        assert!((vs[2] - out.v_r.data()[2] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn floor_reset_discharges_integer_multiple() {
        let p = zero_hidden(1.0, 1.0);
        let out = pmsn_serial_forward(&p, &SeqTensor::from_series(&[2.3]), ResetMode::Floor, true).unwrap();
        assert_eq!(out.v_r.data(), &[2.0]);
        assert!((out.v_s.data()[0] - out.v_r.data()[0] - 0.3).abs() < 1e-12);
        let out = pmsn_serial_forward(&p, &SeqTensor::from_series(&[2.3, 0.0]), ResetMode::Subtract, true).unwrap();
        assert!((out.v_s.data()[1] - 1.3).abs() < 1e-12);
    }

    #[test]
    fn no_reset_is_pure_integrator() {
        let p = zero_hidden(1.0, 1.0);
        let xs = [0.5, -0.2, 1.5, 0.25, 3.0];
        let out = pmsn_serial_forward(&p, &SeqTensor::from_series(&xs), ResetMode::None, false).unwrap();
        let mut acc = 0.0;
        for (t, &x) in xs.iter().enumerate() {
            acc += x;
            assert!((out.v_s.data()[t] - acc).abs() < 1e-14);
        }
    }

    #[test]
    fn carry_stays_in_range() {
        let (_, p) = init_params::<f64>(5, 6, 3, &InitConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..2 * 100 * 6).map(|_| rng.random_range(-1.0..3.0)).collect();
        let x = SeqTensor::from_vec(data, 2, 100, 6).unwrap();
        let out = pmsn_serial_forward(&p, &x, ResetMode::Floor, true).unwrap();
        for (v, r) in out.v_s.data().iter().zip(out.v_r.data()) {
            let carry = v - r;
            assert!((0.0..1.0).contains(&carry), "{carry}");
        }
        assert!(out.i_h.data().iter().all(|&h| h >= 0.0));
    }

    #[test]
    fn hidden_trace_matches_output_current() {
        let (_, p) = init_params::<f64>(4, 2, 5, &InitConfig::default()).unwrap();
        let series: Vec<f64> = (0..30).map(|t| libm::sin(t as f64)).collect();
        let mut x = SeqTensor::zeros(1, 30, 2);
        x.write_lane(0, 1, &series);
        let out = pmsn_serial_forward(&p, &x, ResetMode::None, false).unwrap();
        let tr = pmsn_hidden_trace(&p, 1, &series).unwrap();
        for t in 0..30 {
            let mut h = p.gamma_n[1] * series[t];
            for j in 0..3 {
                h += (p.phi_s[3 + j] * tr[j][t]).re;
            }
            assert!((h - out.i_h.get(0, t, 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_feature_mismatch() {
        let p = zero_hidden(1.0, 1.0);
        assert!(pmsn_serial_forward(&p, &SeqTensor::zeros(1, 3, 2), ResetMode::Floor, true).is_err());
    }
}
