//! Array primitives shared by every other module: sequence tensors, FFT,
//! linear convolution, prefix scan and the tridiagonal eigensolver.

pub mod conv;
pub mod eigen;
pub mod fft;
pub mod scan;
pub mod tensor;

pub use conv::{direct_convolve, fft_len_for, linear_convolve, pow2_scale, Convolver};
pub use eigen::{tridiag_skew_eigen, CMatrix, Eigen, TridiagMatrix};
pub use fft::{fft_forward, fft_inverse, FftPlan};
pub use scan::{prefix_sum, scan_inclusive, scan_inclusive_tree};
pub use tensor::{ComplexSeq, SeqTensor};
