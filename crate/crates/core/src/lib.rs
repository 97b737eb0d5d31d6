//! senslab-core: a desk-scale laboratory for input-sensitivity analysis.
//!
//! The crate covers five connected subsystems:
//!
//! - [`boolean`]: exact Fourier analysis and sensitivity measures on small
//!   Boolean cubes (fast Walsh–Hadamard, total influence, degree bounds);
//! - [`kernel`]: univariate CK/NTK profiles of layer stacks with linear
//!   attention, their exact cube eigenvalues, and the even/odd degree
//!   ordering check;
//! - [`synth`]: sparse/frequent/irrelevant token datasets with an OOD
//!   test variant;
//! - [`attention`]: a single-head softmax/ReLU/linear attention scorer
//!   with manual gradients, SGD training, and alignment/attention-mass
//!   diagnostics;
//! - [`sensitivity`] and [`extensions`]: Monte Carlo and exact sensitivity
//!   estimators, noise-based training interventions, and flatness metrics.
//!
//! All numerics are generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix the default `f64` instantiation.

pub mod attention;
pub mod boolean;
pub mod error;
pub mod extensions;
pub mod kernel;
pub mod scalar;
pub mod sensitivity;
pub mod synth;

pub use error::{CoreError, Result};
pub use scalar::{sign_pm, Scalar};

/// Default-precision Boolean function.
pub type BooleanFunction64 = boolean::BooleanFunction<f64>;
/// Default-precision Fourier coefficient table.
pub type FourierCoefficients64 = boolean::FourierCoefficients<f64>;
/// Default-precision kernel profile.
pub type KernelPsi64 = kernel::KernelPsi<f64>;
/// Default-precision spectrum.
pub type Spectrum64 = kernel::Spectrum<f64>;
/// Default-precision dataset.
pub type Dataset64 = synth::Dataset<f64>;
/// Default-precision model parameters.
pub type AttentionParams64 = attention::AttentionParams<f64>;
/// Default-precision sensitivity report.
pub type SensitivityReport64 = sensitivity::SensitivityReport<f64>;
