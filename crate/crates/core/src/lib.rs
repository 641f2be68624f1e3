//! Numerical core for the Parallel Multi-compartment Spiking Neuron (PMSN).
//!
//! The crate is `no_std` (with `alloc`) and contains only pure computation:
//!
//! * [`numeric`]: sequence tensors, radix-2 FFT, prefix scan, tridiagonal eigensolver.
//! * [`neuron`]: parameterization, initialization, ZOH discretization and the
//!   serial reference dynamics (LIF, generalized multi-compartment, serial PMSN).
//! * [`parallel`]: the time-parallel forward pass (FFT kernel convolution for the
//!   hidden compartments, prefix-sum floor reset for the output compartment).
//! * [`grad`]: surrogate-gradient backward pass and finite-difference checking.
//! * [`train`]: dense/norm layers, network composition, loss and AdamW.
//! * [`energy`]: AC/MAC energy accounting and spike density.
//!
//! IO, datasets, timing and the command line live in the companion `pmsn` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod energy;
pub mod error;
pub mod grad;
pub mod neuron;
pub mod numeric;
pub mod parallel;
pub mod real;
pub mod train;

pub use error::{Error, Result};
pub use real::{Precision, Real};
