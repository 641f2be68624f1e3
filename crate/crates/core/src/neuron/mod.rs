//! Neuron parameterization, initialization, ZOH discretization and the
//! serial reference dynamics.

pub mod discretize;
pub mod params;
pub mod serial;

pub use discretize::{discretize, expm, init_params, zoh_scalar, zoh_step_matrices, InitConfig};
pub use params::{
    expm1_ratio, expm1_ratio_deriv, GeneralizedMcnParams, LearnableMask, LifParams, ModeTable, NeuronState, PmsnParams,
    ResetMode, STABILITY_MAX_RE,
};
pub use serial::{
    lif_forward_serial, mcn_forward_serial, pmsn_hidden_trace, pmsn_serial_forward, Integrator, McnTrace, SerialOutput,
};
