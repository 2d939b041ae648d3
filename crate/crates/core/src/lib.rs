//! Surface reconstruction from gradient fields: fast marching
//! initialisation, preconditioned conjugate gradients on the masked
//! Poisson system, spectral baselines and photometric stereo.

// `!(x > 0.0)` is used on purpose so that NaN takes the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod domain;
pub mod error;
pub mod field;
pub mod fm;
pub mod io;
pub mod krylov;
pub mod metrics;
pub mod photometric;
pub mod pipeline;
pub mod poisson;
pub mod scalar;
pub mod sparse;
pub mod spectral;
pub mod synthetic;

pub use domain::{Domain, DomainMask};
pub use error::{Error, Result};
pub use field::{DepthMap, GradientField};
pub use fm::{integrate_fm, FmConfig};
pub use krylov::{cg_solve, PreconditionerKind, SolveStats, SolverConfig};
pub use metrics::{mse_opt, Metrics};
pub use pipeline::{run, Method, RunSpec};
pub use poisson::{assemble, SparseSystem};
pub use scalar::Real;
pub use sparse::CsrMatrix;

pub type GradientField64 = GradientField<f64>;
pub type GradientField32 = GradientField<f32>;
pub type DepthMap64 = DepthMap<f64>;
pub type DepthMap32 = DepthMap<f32>;
pub type SparseSystem64 = SparseSystem<f64>;
pub type SparseSystem32 = SparseSystem<f32>;
