//! Surrogate-gradient backward pass of a PMSN layer and finite-difference
//! verification.
//!
//! The spike nonlinearity is differentiated with a triangle surrogate and the
//! reset with a straight-through estimator, so the output potential carries no
//! gradient from one step to the next. Gradients reach the input through the
//! direct gain and through the adjoint of the hidden convolution.

mod backward;
mod bptt;
mod fd;
mod surrogate;
mod tape;

pub use backward::{backward_from_current, backward_input, backward_params, current_grad, GradBundle};
pub use bptt::{bptt_serial, BpttGrad};
pub use fd::{fd_check, perturbed_params, FdModel, FdReport, ParamError};
pub use surrogate::{smooth_step, surrogate, SurrogateConfig};
pub use tape::LayerTape;
