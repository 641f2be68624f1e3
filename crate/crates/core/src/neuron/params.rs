use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::{Complex, Complex64};

use crate::error::{invalid, Result};
use crate::real::Real;

/// Upper bound enforced on `Re(lambda * dt)` after every optimizer step.
pub const STABILITY_MAX_RE: f64 = -1e-4;

/// Reset applied to the output compartment after a spike.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetMode {
    /// Subtract `theta * floor(v / theta)`: drops below threshold in one step.
    Floor,
    /// Subtract `theta`.
    Subtract,
    None,
}

impl ResetMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "floor" => Some(ResetMode::Floor),
            "subtract" => Some(ResetMode::Subtract),
            "none" => Some(ResetMode::None),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ResetMode::Floor => "floor",
            ResetMode::Subtract => "subtract",
            ResetMode::None => "none",
        }
    }
}

/// Continuous-time generalized multi-compartment neuron (one neuron).
///
/// Compartment `i` obeys
/// `dv_i/dt = -v_i/tau_i + beta_bwd[i] v_{i+1} + beta_fwd[i-1] v_{i-1} + gamma_i I`,
/// where `beta_fwd[i]` couples compartment `i` into `i+1` and `beta_bwd[i]`
/// couples `i+1` back into `i`. Only the last compartment spikes.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedMcnParams {
    pub n: usize,
    pub tau: Vec<f64>,
    pub beta_fwd: Vec<f64>,
    pub beta_bwd: Vec<f64>,
    pub gamma: Vec<f64>,
    pub theta: f64,
    pub dt: f64,
}

impl GeneralizedMcnParams {
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(invalid("compartment count must be >= 1"));
        }
        if self.tau.len() != n || self.gamma.len() != n {
            return Err(invalid("tau and gamma must have one entry per compartment"));
        }
        if self.beta_fwd.len() != n - 1 || self.beta_bwd.len() != n - 1 {
            return Err(invalid("couplings must have n-1 entries"));
        }
        if self.tau.iter().any(|&t| t.is_nan() || t <= 0.0) {
            return Err(invalid("membrane time constants must be positive"));
        }
        if self.theta.is_nan() || self.theta <= 0.0 || self.dt.is_nan() || self.dt <= 0.0 {
            return Err(invalid("theta and dt must be positive"));
        }
        Ok(())
    }

    /// Full `n x n` state matrix, row-major.
    pub fn state_matrix(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = alloc::vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = -1.0 / self.tau[i];
            if i + 1 < n {
                a[i * n + i + 1] = self.beta_bwd[i];
                a[(i + 1) * n + i] = self.beta_fwd[i];
            }
        }
        a
    }
}

/// Discrete LIF neuron parameters, shared by a layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifParams<T> {
    /// Per-step decay `exp(-dt / tau_m)`.
    pub alpha: T,
    pub theta: T,
    pub v_rest: T,
}

impl<T: Real> LifParams<T> {
    pub fn new(alpha: T, theta: T) -> Result<Self> {
        let p = LifParams {
            alpha,
            theta,
            v_rest: T::zero(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.alpha <= T::one()) {
            return Err(invalid("LIF alpha must lie in (0, 1]"));
        }
        if !(self.theta > T::zero()) {
            return Err(invalid("LIF theta must be positive"));
        }
        Ok(())
    }
}

/// Which neuronal parameters receive gradient updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LearnableMask {
    pub lambda_dt: bool,
    pub phi_c: bool,
    pub phi_s: bool,
    pub gamma_n: bool,
}

impl Default for LearnableMask {
    fn default() -> Self {
        LearnableMask {
            lambda_dt: true,
            phi_c: true,
            phi_s: true,
            gamma_n: true,
        }
    }
}

/// Diagonalized PMSN parameters for a layer of `features` neurons with
/// `modes = n - 1` hidden eigenmodes each. Per-mode arrays are indexed
/// `[neuron * modes + mode]`.
///
/// The discrete hidden update of mode `j` is
/// `V[t] = exp(z_j) V[t-1] + dt * (exp(z_j) - 1) / z_j * phi_c_j * I[t]`
/// with `z_j = lambda_j * dt` the learnable `lambda_dt` entry.
#[derive(Debug, Clone, PartialEq)]
pub struct PmsnParams<T> {
    pub features: usize,
    pub modes: usize,
    pub lambda_dt: Vec<Complex<T>>,
    pub phi_c: Vec<Complex<T>>,
    pub phi_s: Vec<Complex<T>>,
    /// Integration step per neuron (not learnable).
    pub dt: Vec<T>,
    pub gamma_n: Vec<T>,
    pub theta: T,
    /// Output-compartment decay; the parallel path requires exactly 1.
    pub alpha_out: T,
    /// `pairing[j]` is the conjugate partner of mode `j` (itself if real).
    pub pairing: Vec<usize>,
    pub learnable: LearnableMask,
}

/// `(exp(z) - 1) / z`, continuous at 0.
pub fn expm1_ratio(z: Complex64) -> Complex64 {
    if z.norm() < 1e-2 {
        // sum z^k / (k+1)!
        let mut term = Complex64::new(1.0, 0.0);
        let mut acc = term;
        for k in 1..9 {
            term = term * z / (k as f64 + 1.0);
            acc += term;
        }
        acc
    } else {
        (z.exp() - 1.0) / z
    }
}

/// Derivative of [`expm1_ratio`]: `(z e^z - e^z + 1) / z^2`.
pub fn expm1_ratio_deriv(z: Complex64) -> Complex64 {
    if z.norm() < 1e-2 {
        // sum z^k (k+1) / (k+2)!
        let mut fact = 2.0;
        let mut zk = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..9 {
            acc += zk * ((k as f64 + 1.0) / fact);
            zk *= z;
            fact *= k as f64 + 3.0;
        }
        acc
    } else {
        let e = z.exp();
        (z * e - e + 1.0) / (z * z)
    }
}

#[inline]
pub(crate) fn c64<T: Real>(c: Complex<T>) -> Complex64 {
    Complex64::new(c.re.as_f64(), c.im.as_f64())
}

#[inline]
pub(crate) fn ct<T: Real>(c: Complex64) -> Complex<T> {
    Complex::new(T::lit(c.re), T::lit(c.im))
}

impl<T: Real> PmsnParams<T> {
    #[inline]
    pub fn compartments(&self) -> usize {
        self.modes + 1
    }

    pub fn validate(&self) -> Result<()> {
        let per_mode = self.features * self.modes;
        if self.lambda_dt.len() != per_mode || self.phi_c.len() != per_mode || self.phi_s.len() != per_mode {
            return Err(invalid("per-mode arrays must have features * modes entries"));
        }
        if self.dt.len() != self.features || self.gamma_n.len() != self.features {
            return Err(invalid("dt and gamma_n must have one entry per neuron"));
        }
        if self.pairing.len() != self.modes {
            return Err(invalid("pairing must have one entry per mode"));
        }
        for (j, &p) in self.pairing.iter().enumerate() {
            if p >= self.modes || self.pairing[p] != j {
                return Err(invalid(format!("pairing is not an involution at mode {j}")));
            }
        }
        if !(self.theta > T::zero()) {
            return Err(invalid("theta must be positive"));
        }
        Ok(())
    }

    /// `exp(z)` for neuron `f`, mode `j`, computed in double precision.
    pub fn transition64(&self, f: usize, j: usize) -> Complex64 {
        c64(self.lambda_dt[f * self.modes + j]).exp()
    }

    /// Discrete input gain `Phi_c = dt (e^z - 1)/z phi_c` in double precision.
    pub fn in_gain64(&self, f: usize, j: usize) -> Complex64 {
        let i = f * self.modes + j;
        c64(self.phi_c[i]) * expm1_ratio(c64(self.lambda_dt[i])) * self.dt[f].as_f64()
    }

    /// Discrete per-mode quantities used by the kernel and the serial oracle.
    pub fn discrete(&self) -> ModeTable<T> {
        let n = self.features * self.modes;
        let mut t_bar = Vec::with_capacity(n);
        let mut in_gain = Vec::with_capacity(n);
        for f in 0..self.features {
            for j in 0..self.modes {
                t_bar.push(ct(self.transition64(f, j)));
                in_gain.push(ct(self.in_gain64(f, j)));
            }
        }
        ModeTable {
            features: self.features,
            modes: self.modes,
            t_bar,
            in_gain,
            out_gain: self.phi_s.clone(),
        }
    }

    /// Enforces `Re(lambda_dt) <= STABILITY_MAX_RE` on every mode.
    pub fn clamp_stability(&mut self) {
        let cap = T::lit(STABILITY_MAX_RE);
        for z in self.lambda_dt.iter_mut() {
            if z.re > cap {
                z.re = cap;
            }
        }
    }

    /// Largest deviation from exact conjugate pairing across all fields.
    pub fn pairing_defect(&self) -> T {
        let mut worst = T::zero();
        for f in 0..self.features {
            for j in 0..self.modes {
                let a = f * self.modes + j;
                let b = f * self.modes + self.pairing[j];
                for arr in [&self.lambda_dt, &self.phi_c, &self.phi_s] {
                    let d = arr[a] - arr[b].conj();
                    worst = worst.max(d.re.abs()).max(d.im.abs());
                }
            }
        }
        worst
    }

    pub fn cast<U: Real>(&self) -> PmsnParams<U> {
        let cc = |v: &Vec<Complex<T>>| v.iter().map(|&c| ct::<U>(c64(c))).collect();
        PmsnParams {
            features: self.features,
            modes: self.modes,
            lambda_dt: cc(&self.lambda_dt),
            phi_c: cc(&self.phi_c),
            phi_s: cc(&self.phi_s),
            dt: self.dt.iter().map(|&x| U::lit(x.as_f64())).collect(),
            gamma_n: self.gamma_n.iter().map(|&x| U::lit(x.as_f64())).collect(),
            theta: U::lit(self.theta.as_f64()),
            alpha_out: U::lit(self.alpha_out.as_f64()),
            pairing: self.pairing.clone(),
            learnable: self.learnable,
        }
    }

    /// Concatenates single-layer parameter blocks along the neuron axis.
    pub fn stack(parts: &[PmsnParams<T>]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| invalid("nothing to stack"))?;
        let mut out = PmsnParams {
            features: 0,
            modes: first.modes,
            lambda_dt: Vec::new(),
            phi_c: Vec::new(),
            phi_s: Vec::new(),
            dt: Vec::new(),
            gamma_n: Vec::new(),
            theta: first.theta,
            alpha_out: first.alpha_out,
            pairing: first.pairing.clone(),
            learnable: first.learnable,
        };
        for p in parts {
            if p.modes != first.modes || p.pairing != first.pairing {
                return Err(invalid("cannot stack neurons with different mode structure"));
            }
            out.features += p.features;
            out.lambda_dt.extend_from_slice(&p.lambda_dt);
            out.phi_c.extend_from_slice(&p.phi_c);
            out.phi_s.extend_from_slice(&p.phi_s);
            out.dt.extend_from_slice(&p.dt);
            out.gamma_n.extend_from_slice(&p.gamma_n);
        }
        out.validate()?;
        Ok(out)
    }

    /// The single neuron `feature` as a one-neuron layer.
    pub fn select(&self, feature: usize) -> Result<Self> {
        if feature >= self.features {
            return Err(invalid("feature index out of range"));
        }
        let m = self.modes;
        let r = feature * m..(feature + 1) * m;
        Ok(PmsnParams {
            features: 1,
            modes: m,
            lambda_dt: self.lambda_dt[r.clone()].to_vec(),
            phi_c: self.phi_c[r.clone()].to_vec(),
            phi_s: self.phi_s[r].to_vec(),
            dt: vec![self.dt[feature]],
            gamma_n: vec![self.gamma_n[feature]],
            theta: self.theta,
            alpha_out: self.alpha_out,
            pairing: self.pairing.clone(),
            learnable: self.learnable,
        })
    }

    /// Parameters with the hidden path switched off (`Phi_s = 0`).
    pub fn with_hidden_zeroed(mut self) -> Self {
        for v in self.phi_s.iter_mut() {
            *v = Complex::new(T::zero(), T::zero());
        }
        self
    }
}

/// Discrete per-mode quantities `T_bar`, `Phi_c`, `Phi_s`, indexed
/// `[neuron * modes + mode]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTable<T> {
    pub features: usize,
    pub modes: usize,
    pub t_bar: Vec<Complex<T>>,
    pub in_gain: Vec<Complex<T>>,
    pub out_gain: Vec<Complex<T>>,
}

/// Neuron state at one time step, per lane.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronState<T> {
    pub v_h: Vec<Complex<T>>,
    pub v_s: T,
    pub last_spike: bool,
}

impl<T: Real> NeuronState<T> {
    pub fn rest(modes: usize) -> Self {
        NeuronState {
            v_h: alloc::vec![Complex::new(T::zero(), T::zero()); modes],
            v_s: T::zero(),
            last_spike: false,
        }
    }
}
