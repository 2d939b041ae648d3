//! Conjugate gradient with incomplete Cholesky preconditioning.

mod cg;
mod ichol;

pub use cg::cg_solve;
pub use ichol::{apply_preconditioner, factorize, ic_factorize, mic_factorize, CholeskyFactor};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// Default diagonal shift for MIC.
pub const DEFAULT_ALPHA: f64 = 1e-3;
/// Default relative-residual threshold.
pub const DEFAULT_TOL: f64 = 1e-4;

/// Which factorization, if any, preconditions CG.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PreconditionerKind {
    None,
    /// IC(τ)
    Ic { tau: f64 },
    /// MIC(τ, α) on `A + α·diag(A)`
    Mic { tau: f64, alpha: f64 },
}

impl PreconditionerKind {
    pub fn mic(tau: f64) -> Self {
        PreconditionerKind::Mic { tau, alpha: DEFAULT_ALPHA }
    }

    /// Short label such as `none`, `ic(0)` or `mic(0.001,0.001)`.
    pub fn label(&self) -> String {
        match *self {
            PreconditionerKind::None => "none".into(),
            PreconditionerKind::Ic { tau } => format!("ic({tau})"),
            PreconditionerKind::Mic { tau, alpha } => format!("mic({tau},{alpha})"),
        }
    }

    pub fn tau(&self) -> f64 {
        match *self {
            PreconditionerKind::None => 0.0,
            PreconditionerKind::Ic { tau } | PreconditionerKind::Mic { tau, .. } => tau,
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            PreconditionerKind::Mic { alpha, .. } => alpha,
            _ => 0.0,
        }
    }

    /// Builds the factor this preconditioner calls for.
    pub fn factorize<T: Real>(&self, a: &CsrMatrix<T>) -> Result<Option<CholeskyFactor<T>>> {
        Ok(match *self {
            PreconditionerKind::None => None,
            PreconditionerKind::Ic { tau } => Some(ic_factorize(a, T::lit(tau))?),
            PreconditionerKind::Mic { tau, alpha } => Some(mic_factorize(a, T::lit(tau), T::lit(alpha))?),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T> {
    pub tol: T,
    /// `None` means `10·√n + 1000`.
    pub max_iter: Option<usize>,
    pub preconditioner: PreconditionerKind,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(DEFAULT_TOL),
            max_iter: None,
            preconditioner: PreconditionerKind::Mic { tau: 1e-3, alpha: DEFAULT_ALPHA },
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn max_iter_for(&self, n: usize) -> usize {
        self.max_iter.unwrap_or_else(|| 10 * (n as f64).sqrt().ceil() as usize + 1000)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Relative residual before the first iteration and after each one.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Seconds spent in the iteration.
    pub wall_time: f64,
}

impl SolveStats {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}
