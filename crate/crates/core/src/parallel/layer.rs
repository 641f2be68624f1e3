use super::hidden::{hidden_forward_parallel, mean_over_time};
use super::kernel::{build_kernel, KernelCache};
use super::output::{output_forward_parallel, output_forward_serial, ForwardOutput};
use crate::error::{invalid, Result};
use crate::neuron::{pmsn_serial_forward, PmsnParams, ResetMode};
use crate::numeric::{prefix_sum, SeqTensor};
use crate::real::{Precision, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Parallel,
    Serial,
}

impl ExecMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "parallel" => Some(ExecMode::Parallel),
            "serial" => Some(ExecMode::Serial),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExecMode::Parallel => "parallel",
            ExecMode::Serial => "serial",
        }
    }
}

/// Input seen by the hidden compartments: the raw current, or its time
/// average broadcast over the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Context {
    Local,
    Global,
}

impl Context {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "local" => Some(Context::Local),
            "global" => Some(Context::Global),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Context::Local => "local",
            Context::Global => "global",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerConfig {
    pub mode: ExecMode,
    pub context: Context,
    pub reset: ResetMode,
    pub clamp_ih: bool,
}

impl Default for LayerConfig {
    fn default() -> Self {
        LayerConfig {
            mode: ExecMode::Parallel,
            context: Context::Local,
            reset: ResetMode::Floor,
            clamp_ih: true,
        }
    }
}

impl LayerConfig {
    /// Checks that the configuration can run in the requested mode.
    pub fn check<T: Real>(&self, p: &PmsnParams<T>) -> Result<()> {
        if self.mode == ExecMode::Parallel {
            if self.reset != ResetMode::Floor {
                return Err(invalid(alloc::format!(
                    "reset '{}' has no parallel form; use serial mode",
                    self.reset.as_str()
                )));
            }
            if p.alpha_out != T::one() {
                return Err(invalid("parallel mode requires output decay alpha = 1"));
            }
        }
        Ok(())
    }

    pub fn hidden_input<T: Real>(&self, input: &SeqTensor<T>) -> SeqTensor<T> {
        match self.context {
            Context::Local => input.clone(),
            Context::Global => mean_over_time(input),
        }
    }
}

/// Parallel forward with a prebuilt kernel cache. `hidden_in` must already
/// carry the context substitution.
pub fn forward_with_cache<T: Real>(
    p: &PmsnParams<T>,
    cache: &KernelCache<T>,
    hidden_in: &SeqTensor<T>,
    cfg: &LayerConfig,
) -> Result<ForwardOutput<T>> {
    cfg.check(p)?;
    let i_h = hidden_forward_parallel(cache, p, hidden_in)?;
    Ok(if cfg.clamp_ih {
        output_forward_parallel(&i_h, p.theta, true)
    } else {
        output_forward_serial(&i_h, p.theta, p.alpha_out, cfg.reset, false)
    })
}

/// Runs one PMSN layer on `input` of shape `(B, T, F)`.
///
/// Neuron dynamics are evaluated in double precision whatever the storage
/// precision `T`; results are rounded back to `T`.
pub fn layer_forward<T: Real>(p: &PmsnParams<T>, input: &SeqTensor<T>, cfg: &LayerConfig) -> Result<ForwardOutput<T>> {
    cfg.check(p)?;
    if T::PRECISION == Precision::Double {
        return layer_forward_exact(p, input, cfg);
    }
    Ok(layer_forward_exact(&p.cast::<f64>(), &input.cast::<f64>(), cfg)?.cast())
}

/// [`layer_forward`] carried out entirely in the precision `T`.
pub fn layer_forward_exact<T: Real>(
    p: &PmsnParams<T>,
    input: &SeqTensor<T>,
    cfg: &LayerConfig,
) -> Result<ForwardOutput<T>> {
    cfg.check(p)?;
    let hidden_in = cfg.hidden_input(input);
    match cfg.mode {
        ExecMode::Parallel => {
            let cache = build_kernel(p, input.time())?;
            forward_with_cache(p, &cache, &hidden_in, cfg)
        }
        ExecMode::Serial => {
            let out = pmsn_serial_forward(p, &hidden_in, cfg.reset, cfg.clamp_ih)?;
            let cum = prefix_sum(&out.i_h);
            // pmsn_serial_forward reports the clamped current; recompute the raw one.
            let i_h = if cfg.clamp_ih {
                pmsn_serial_forward(p, &hidden_in, ResetMode::None, false)?.i_h
            } else {
                out.i_h
            };
            Ok(ForwardOutput {
                spikes: out.spikes,
                v_s: out.v_s,
                i_h,
                cum,
                v_r: out.v_r,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::{init_params, InitConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(rng: &mut ChaCha8Rng, b: usize, t: usize, f: usize) -> SeqTensor<f64> {
        SeqTensor::from_vec((0..b * t * f).map(|_| rng.random_range(-0.5..2.0)).collect(), b, t, f).unwrap()
    }

    #[test]
    fn parallel_matches_serial() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in 0..30u64 {
            let n = 2 + (case as usize) % 8;
            let t = [1, 2, 31, 32, 33, 100][case as usize % 6];
            let (_, p) = init_params::<f64>(n, 4, case, &InitConfig::default()).unwrap();
            let x = random_input(&mut rng, 2, t, 4);
            let mut cfg = LayerConfig::default();
            let par = layer_forward(&p, &x, &cfg).unwrap();
            cfg.mode = ExecMode::Serial;
            let ser = layer_forward(&p, &x, &cfg).unwrap();
            assert_eq!(par.spikes, ser.spikes);
            assert!(par.v_s.max_abs_diff(&ser.v_s) < 1e-9);
            assert!(par.i_h.max_abs_diff(&ser.i_h) < 1e-9);
        }
    }

    #[test]
    fn global_context_with_constant_input_equals_local() {
        let (_, p) = init_params::<f64>(5, 3, 1, &InitConfig::default()).unwrap();
        let x = SeqTensor::filled(2, 40, 3, 0.75);
        let local = layer_forward(&p, &x, &LayerConfig::default()).unwrap();
        let cfg = LayerConfig {
            context: Context::Global,
            ..LayerConfig::default()
        };
        let global = layer_forward(&p, &x, &cfg).unwrap();
        assert_eq!(local, global);
    }

    #[test]
    fn global_context_feeds_constant_hidden_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_input(&mut rng, 1, 20, 2);
        let cfg = LayerConfig {
            context: Context::Global,
            ..LayerConfig::default()
        };
        let h = cfg.hidden_input(&x);
        for f in 0..2 {
            let mean: f64 = x.lane(0, f).iter().sum::<f64>() / 20.0;
            assert!(h.lane(0, f).iter().all(|v| (v - mean).abs() < 1e-6));
        }
    }

    #[test]
    fn parallel_refuses_serial_only_settings() {
        let (_, mut p) = init_params::<f64>(3, 1, 0, &InitConfig::default()).unwrap();
        let x = SeqTensor::zeros(1, 5, 1);
        let cfg = LayerConfig {
            reset: ResetMode::Subtract,
            ..LayerConfig::default()
        };
        assert!(layer_forward(&p, &x, &cfg).is_err());
        p.alpha_out = 0.9;
        assert!(layer_forward(&p, &x, &LayerConfig::default()).is_err());
        let serial = LayerConfig {
            mode: ExecMode::Serial,
            reset: ResetMode::Subtract,
            ..LayerConfig::default()
        };
        assert!(layer_forward(&p, &x, &serial).is_ok());
    }

    #[test]
    fn unclamped_parallel_runs_serial_output() {
        let (_, p) = init_params::<f64>(4, 2, 3, &InitConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_input(&mut rng, 3, 64, 2);
        let cfg = LayerConfig {
            clamp_ih: false,
            ..LayerConfig::default()
        };
        let par = layer_forward(&p, &x, &cfg).unwrap();
        let ser = layer_forward(
            &p,
            &x,
            &LayerConfig {
                mode: ExecMode::Serial,
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(par.spikes, ser.spikes);
        assert!(par.v_s.max_abs_diff(&ser.v_s) < 1e-9);
    }
}
