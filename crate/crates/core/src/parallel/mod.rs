//! Time-parallel PMSN forward pass.
//!
//! The hidden compartments form a linear time-invariant system, so their
//! contribution to the output current is a causal convolution with a kernel
//! `K[t] = sum_j Re(Phi_s T_bar^t Phi_c)`, evaluated with FFTs. With unit
//! output decay and floor reset the output compartment only depends on the
//! running sum of its clamped input, which is a prefix scan.

mod hidden;
mod kernel;
mod layer;
mod output;

pub use hidden::{convolve_lanes, hidden_forward_parallel, mean_over_time};
pub use kernel::{build_kernel, build_kernel_from_modes, build_kernel_padded, KernelCache, REALNESS_TOL};
pub use layer::{forward_with_cache, layer_forward, layer_forward_exact, Context, ExecMode, LayerConfig};
pub use output::{output_forward_parallel, output_forward_serial, ForwardOutput};
