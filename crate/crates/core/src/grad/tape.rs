use crate::error::{invalid, Error, Result};
use crate::neuron::{PmsnParams, ResetMode};
use crate::numeric::SeqTensor;
use crate::parallel::{
    build_kernel, forward_with_cache, layer_forward_exact, ExecMode, ForwardOutput, KernelCache, LayerConfig,
};
use crate::real::Real;

/// Forward activations of one layer retained for the backward pass, in
/// double precision.
#[derive(Debug, Clone)]
pub struct LayerTape {
    pub params: PmsnParams<f64>,
    pub cfg: LayerConfig,
    pub cache: KernelCache<f64>,
    /// Input of the hidden pass (after the context substitution).
    pub hidden_in: Option<SeqTensor<f64>>,
    /// Output-compartment current before clamping.
    pub i_h: Option<SeqTensor<f64>>,
    pub v_s: Option<SeqTensor<f64>>,
    /// Reset bookkeeping; kept for inspection, never read by the backward pass.
    pub v_r: Option<SeqTensor<f64>>,
}

impl LayerTape {
    /// Runs the layer forward and records what the backward pass needs.
    pub fn record<T: Real>(
        p: &PmsnParams<T>,
        input: &SeqTensor<T>,
        cfg: &LayerConfig,
    ) -> Result<(ForwardOutput<T>, LayerTape)> {
        if cfg.reset != ResetMode::Floor || p.alpha_out != T::one() {
            return Err(invalid("gradients are defined for floor reset with unit output decay"));
        }
        let params = p.cast::<f64>();
        let x = input.cast::<f64>();
        let hidden_in = cfg.hidden_input(&x);
        let cache = build_kernel(&params, x.time())?;
        let out = match cfg.mode {
            ExecMode::Parallel => forward_with_cache(&params, &cache, &hidden_in, cfg)?,
            ExecMode::Serial => layer_forward_exact(&params, &x, cfg)?,
        };
        let tape = LayerTape {
            params,
            cfg: *cfg,
            cache,
            hidden_in: Some(hidden_in),
            i_h: Some(out.i_h.clone()),
            v_s: Some(out.v_s.clone()),
            v_r: Some(out.v_r.clone()),
        };
        Ok((out.cast(), tape))
    }

    pub(crate) fn need<'a>(t: &'a Option<SeqTensor<f64>>, name: &str) -> Result<&'a SeqTensor<f64>> {
        t.as_ref()
            .ok_or_else(|| Error::InvalidState(alloc::format!("tape is missing '{name}'")))
    }

    pub fn shape(&self) -> Result<(usize, usize, usize)> {
        Ok(Self::need(&self.i_h, "i_h")?.shape())
    }
}
