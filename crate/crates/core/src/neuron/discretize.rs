use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::params::{ct, expm1_ratio, GeneralizedMcnParams, LearnableMask, PmsnParams};
use crate::error::{invalid, numeric, Result};
use crate::numeric::{tridiag_skew_eigen, Eigen, TridiagMatrix};
use crate::real::Real;

/// Hyperparameters of the default neuron initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    pub tau: f64,
    /// Coupling `beta_{i+1,i} = -beta_{i,i+1} = beta_scale * i`.
    pub beta_scale: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub gamma_hidden: f64,
    pub gamma_out_std: f64,
    pub theta: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            tau: 2.0,
            beta_scale: 5.0,
            dt_min: 1e-3,
            dt_max: 1e-1,
            gamma_hidden: 1.0,
            gamma_out_std: 1.0,
            theta: 1.0,
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !(self.theta > 0.0) {
            return Err(invalid("tau and theta must be positive"));
        }
        if !(self.dt_min > 0.0 && self.dt_max >= self.dt_min) {
            return Err(invalid("dt range must satisfy 0 < dt_min <= dt_max"));
        }
        if !(self.gamma_out_std >= 0.0) {
            return Err(invalid("gamma_out_std must be non-negative"));
        }
        Ok(())
    }
}

fn hidden_matrix(p: &GeneralizedMcnParams) -> Result<TridiagMatrix> {
    let m = p.n - 1;
    TridiagMatrix::new(
        p.tau[..m].iter().map(|t| -1.0 / t).collect(),
        p.beta_bwd[..m - 1].to_vec(),
        p.beta_fwd[..m - 1].to_vec(),
    )
}

struct Modes {
    eig: Eigen,
    phi_c: Vec<Complex64>,
    phi_s: Vec<Complex64>,
}

fn modes_of(p: &GeneralizedMcnParams) -> Result<Modes> {
    p.validate()?;
    if p.n < 2 {
        return Err(invalid("diagonalized form needs at least one hidden compartment"));
    }
    if p.beta_bwd[p.n - 2] != 0.0 {
        return Err(invalid("feedback from the output compartment must be zero"));
    }
    let m = p.n - 1;
    let eig = tridiag_skew_eigen(&hidden_matrix(p)?)?;
    let phi_c = (0..m)
        .map(|j| (0..m).map(|k| eig.inverse.get(j, k) * p.gamma[k]).sum())
        .collect();
    let b_out = p.beta_fwd[m - 1];
    let phi_s = (0..m).map(|j| eig.vectors.get(m - 1, j) * b_out).collect();
    Ok(Modes { eig, phi_c, phi_s })
}

/// Diagonalizes a single neuron into its PMSN form (`features = 1`).
///
/// The output decay is `exp(-dt / tau_n)`.
pub fn discretize<T: Real>(p: &GeneralizedMcnParams) -> Result<PmsnParams<T>> {
    let modes = modes_of(p)?;
    let m = p.n - 1;
    let out = PmsnParams {
        features: 1,
        modes: m,
        lambda_dt: modes.eig.values.iter().map(|&l| ct(l * p.dt)).collect(),
        phi_c: modes.phi_c.iter().map(|&c| ct(c)).collect(),
        phi_s: modes.phi_s.iter().map(|&c| ct(c)).collect(),
        dt: vec![T::lit(p.dt)],
        gamma_n: vec![T::lit(p.gamma[m])],
        theta: T::lit(p.theta),
        alpha_out: T::lit(libm::exp(-p.dt / p.tau[m])),
        pairing: modes.eig.pairing,
        learnable: LearnableMask::default(),
    };
    out.validate()?;
    Ok(out)
}

/// Default-initialized layer of `features` neurons with `n` compartments.
///
/// All neurons share the coupling matrix and therefore the eigenbasis; each
/// draws its own `dt` and output gain. Returns the per-neuron continuous
/// parameters alongside the diagonalized layer (output decay fixed to 1).
pub fn init_params<T: Real>(
    n: usize,
    features: usize,
    seed: u64,
    cfg: &InitConfig,
) -> Result<(Vec<GeneralizedMcnParams>, PmsnParams<T>)> {
    if n < 2 {
        return Err(invalid("PMSN neurons need n >= 2 compartments"));
    }
    if features == 0 {
        return Err(invalid("layer must have at least one neuron"));
    }
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt_dist = Uniform::new_inclusive(cfg.dt_min, cfg.dt_max).map_err(|_| invalid("bad dt range"))?;
    let g_dist = Normal::new(0.0, cfg.gamma_out_std).map_err(|_| invalid("bad gamma std"))?;

    let m = n - 1;
    let template = |dt: f64, g_out: f64| {
        let mut gamma = vec![cfg.gamma_hidden; n];
        gamma[m] = g_out;
        let beta_fwd: Vec<f64> = (1..n).map(|i| -cfg.beta_scale * i as f64).collect();
        let mut beta_bwd: Vec<f64> = (1..n).map(|i| cfg.beta_scale * i as f64).collect();
        beta_bwd[m - 1] = 0.0;
        GeneralizedMcnParams {
            n,
            tau: vec![cfg.tau; n],
            beta_fwd,
            beta_bwd,
            gamma,
            theta: cfg.theta,
            dt,
        }
    };

    let probe = template(1.0, 0.0);
    let modes = modes_of(&probe)?;
    let mut neurons = Vec::with_capacity(features);
    let mut lambda_dt = Vec::with_capacity(features * m);
    let mut phi_c = Vec::with_capacity(features * m);
    let mut phi_s = Vec::with_capacity(features * m);
    let mut dts = Vec::with_capacity(features);
    let mut gammas = Vec::with_capacity(features);
    for _ in 0..features {
        let dt = dt_dist.sample(&mut rng);
        let g = g_dist.sample(&mut rng);
        for j in 0..m {
            lambda_dt.push(ct(modes.eig.values[j] * dt));
            phi_c.push(ct(modes.phi_c[j]));
            phi_s.push(ct(modes.phi_s[j]));
        }
        dts.push(T::lit(dt));
        gammas.push(T::lit(g));
        neurons.push(template(dt, g));
    }
    let p = PmsnParams {
        features,
        modes: m,
        lambda_dt,
        phi_c,
        phi_s,
        dt: dts,
        gamma_n: gammas,
        theta: T::lit(cfg.theta),
        alpha_out: T::one(),
        pairing: modes.eig.pairing,
        learnable: LearnableMask::default(),
    };
    p.validate()?;
    Ok((neurons, p))
}

/// Matrix exponential of a dense real `n x n` row-major matrix by scaling and
/// squaring with a Taylor core.
pub fn expm(a: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(invalid("expm expects a square row-major matrix"));
    }
    let norm = (0..n)
        .map(|r| a[r * n..(r + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    if !norm.is_finite() {
        return Err(numeric("expm of non-finite matrix"));
    }
    let mut s = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        s += 1;
    }
    let x: Vec<f64> = a.iter().map(|v| v * scale).collect();
    let mut result = identity(n);
    let mut term = identity(n);
    for k in 1..=18 {
        term = matmul(&term, &x, n);
        let inv = 1.0 / k as f64;
        for (r, t) in result.iter_mut().zip(term.iter_mut()) {
            *t *= inv;
            *r += *t;
        }
    }
    for _ in 0..s {
        result = matmul(&result, &result, n);
    }
    Ok(result)
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Exact discretization of `x' = A x + b u` with `u` held over one step:
/// returns `(exp(A dt), int_0^dt exp(A s) ds b)` via the augmented matrix.
pub fn zoh_step_matrices(a: &[f64], b: &[f64], n: usize, dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if b.len() != n {
        return Err(invalid("input vector length must match the state dimension"));
    }
    let k = n + 1;
    let mut aug = vec![0.0; k * k];
    for r in 0..n {
        for c in 0..n {
            aug[r * k + c] = a[r * n + c] * dt;
        }
        aug[r * k + n] = b[r] * dt;
    }
    let e = expm(&aug, k)?;
    let mut ad = vec![0.0; n * n];
    let mut bd = vec![0.0; n];
    for r in 0..n {
        ad[r * n..(r + 1) * n].copy_from_slice(&e[r * k..r * k + n]);
        bd[r] = e[r * k + n];
    }
    Ok((ad, bd))
}

/// Scalar zero-order-hold pair `(exp(z), dt (exp(z) - 1) / z * phi_c)` for
/// `z = lambda * dt`.
pub fn zoh_scalar(lambda: Complex64, dt: f64, phi_c: Complex64) -> (Complex64, Complex64) {
    let z = lambda * dt;
    (z.exp(), expm1_ratio(z) * dt * phi_c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_zoh_closed_form() {
        let (tb, pc) = zoh_scalar(Complex64::new(-0.5, 0.0), 0.1, Complex64::new(1.0, 0.0));
        assert!((tb.re - 0.951229424500714).abs() < 1e-12);
        assert!((pc.re - 0.09754115099857).abs() < 1e-12);
        let (_, lim) = zoh_scalar(Complex64::new(1e-14, 0.0), 0.1, Complex64::new(2.0, 0.0));
        assert!((lim.re - 0.2).abs() < 1e-12);
        let (_, zero) = zoh_scalar(Complex64::new(0.0, 0.0), 0.1, Complex64::new(1.0, 0.0));
        assert!((zero.re - 0.1).abs() < 1e-15);
    }

    #[test]
    fn paper_init_real_parts() {
        for seed in 0..5 {
            let (neurons, p) = init_params::<f64>(5, 8, seed, &InitConfig::default()).unwrap();
            for f in 0..8 {
                let dt = neurons[f].dt;
                assert!((1e-3..=1e-1).contains(&dt));
                for j in 0..4 {
                    assert!((p.lambda_dt[f * 4 + j].re + dt / 2.0).abs() < 1e-9);
                }
            }
            assert_eq!(p.pairing_defect(), 0.0);
        }
    }

    #[test]
    fn two_compartments_has_one_real_mode() {
        let (n, p) = init_params::<f64>(2, 1, 3, &InitConfig::default()).unwrap();
        assert_eq!(p.modes, 1);
        assert_eq!(p.pairing, vec![0]);
        assert!((p.lambda_dt[0].re + n[0].dt / 2.0).abs() < 1e-15);
        assert_eq!(p.lambda_dt[0].im, 0.0);
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params::<f32>(7, 16, 42, &InitConfig::default()).unwrap();
        let b = init_params::<f32>(7, 16, 42, &InitConfig::default()).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.0, b.0);
        let c = init_params::<f32>(7, 16, 43, &InitConfig::default()).unwrap();
        assert_ne!(a.1.dt, c.1.dt);
    }

    #[test]
    fn discretize_matches_init() {
        let (neurons, p) = init_params::<f64>(5, 3, 9, &InitConfig::default()).unwrap();
        for (f, neuron) in neurons.iter().enumerate() {
            let d = discretize::<f64>(neuron).unwrap();
            for j in 0..4 {
                assert!((d.lambda_dt[j] - p.lambda_dt[f * 4 + j]).norm() < 1e-14);
                assert!((d.phi_c[j] - p.phi_c[f * 4 + j]).norm() < 1e-14);
                assert!((d.phi_s[j] - p.phi_s[f * 4 + j]).norm() < 1e-14);
            }
            assert_eq!(d.gamma_n[0], p.gamma_n[f]);
        }
    }

    #[test]
    fn discretize_rejects_feedback() {
        let (mut neurons, _) = init_params::<f64>(3, 1, 0, &InitConfig::default()).unwrap();
        neurons[0].beta_bwd[1] = 0.3;
        assert!(discretize::<f64>(&neurons[0]).is_err());
    }

    #[test]
    fn expm_of_rotation() {
        let th = 0.7;
        let e = expm(&[0.0, -th, th, 0.0], 2).unwrap();
        assert!((e[0] - libm::cos(th)).abs() < 1e-14);
        assert!((e[1] + libm::sin(th)).abs() < 1e-14);
        assert!((e[2] - libm::sin(th)).abs() < 1e-14);
    }

    #[test]
    fn expm_diagonal_large_norm() {
        let e = expm(&[-3.0, 0.0, 0.0, 2.5], 2).unwrap();
        assert!((e[0] - libm::exp(-3.0)).abs() < 1e-14);
        assert!((e[3] / libm::exp(2.5) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn modal_zoh_matches_matrix_exponential() {
        // Diagonalized update must reproduce exp(T dt) on the hidden block.
        let (neurons, p) = init_params::<f64>(5, 1, 11, &InitConfig::default()).unwrap();
        let g = &neurons[0];
        let m = 4;
        let a = hidden_matrix(g).unwrap().to_dense();
        let mut ar = vec![0.0; m * m];
        for r in 0..m {
            for c in 0..m {
                ar[r * m + c] = a.get(r, c).re;
            }
        }
        let (ad, bd) = zoh_step_matrices(&ar, &g.gamma[..m], m, g.dt).unwrap();
        let modes = modes_of(g).unwrap();
        // x = P V: reconstruct Bd = P Phi_c, Ad = P diag(T_bar) P^{-1}.
        for r in 0..m {
            let mut b = Complex64::new(0.0, 0.0);
            for j in 0..m {
                b += modes.eig.vectors.get(r, j) * p.in_gain64(0, j);
            }
            assert!((b.re - bd[r]).abs() < 1e-13, "{r}: {b} vs {}", bd[r]);
            assert!(b.im.abs() < 1e-13);
            for c in 0..m {
                let mut v = Complex64::new(0.0, 0.0);
                for j in 0..m {
                    v += modes.eig.vectors.get(r, j) * p.transition64(0, j) * modes.eig.inverse.get(j, c);
                }
                assert!((v.re - ad[r * m + c]).abs() < 1e-12);
            }
        }
    }
}
