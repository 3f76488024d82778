//! Covariance-based grant-free activity detection for massive-MIMO uplink.
//!
//! The receiver sees `Y_p = H·Sᴴ + W` from `K` single-antenna nodes, of which
//! only a few are active, on an `M`-antenna array with non-orthogonal length-`L`
//! pilots. Activity is recovered from the `L×L` sample covariance by
//! vectorizing it through the Khatri-Rao product `conj(S)⊙S` and solving a
//! non-negative LASSO over the per-node channel variances.
//!
//! Modules:
//! - [`model`]: supports, channels (ULA multipath and Gaussian) and received signals
//! - [`pilots`]: Gaussian pilot dictionaries and coherence analysis
//! - [`detect`]: sample covariance, Khatri-Rao sketch, non-negative LASSO detector
//! - [`baselines`]: MSBL, block-OMP and regularized M-FOCUSS
//! - [`link`]: LS channel estimation, LS decoding, demodulation, SER/MSE
//! - [`theory`]: recovery-probability constants and bounds
//! - [`harness`]: experiment configuration, Monte Carlo sweeps, CSV output

pub mod baselines;
pub mod detect;
mod error;
pub mod harness;
pub mod link;
mod linalg;
pub mod model;
pub mod pilots;
pub mod theory;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix, column-major.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
