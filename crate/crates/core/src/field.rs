//! Per-pixel data living on a [`Domain`](crate::domain::Domain).

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gradient field `(p, q)` = `(∂v/∂x, ∂v/∂y)` in depth units per pixel,
/// indexed by linear domain index.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField<T> {
    pub p: Vec<T>,
    pub q: Vec<T>,
}

impl<T: Real> GradientField<T> {
    pub fn new(p: Vec<T>, q: Vec<T>) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
        }
        Ok(Self { p, q })
    }

    pub fn zeros(n: usize) -> Self {
        Self { p: vec![T::zero(); n], q: vec![T::zero(); n] }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn check_domain(&self, domain: &Domain) -> Result<()> {
        if self.p.len() != domain.len() || self.q.len() != domain.len() {
            return Err(Error::DimensionMismatch { expected: domain.len(), got: self.p.len() });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(&self.q).all(|v| v.is_finite())
    }

    /// `max_k max(|p_k|, |q_k|)`, the ∞-norm of the stacked field.
    pub fn max_abs(&self) -> T {
        self.p.iter().chain(&self.q).fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            p: self.p.iter().map(|&v| v * s).collect(),
            q: self.q.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> GradientField<U> {
        GradientField {
            p: self.p.iter().map(|v| U::lit(v.as_f64())).collect(),
            q: self.q.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Depth `v` per domain pixel, defined up to an additive constant per
/// connected component.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap<T> {
    pub values: Vec<T>,
}

impl<T: Real> DepthMap<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![T::zero(); n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    /// Adds a constant to every pixel.
    pub fn shifted(&self, c: T) -> Self {
        Self { values: self.values.iter().map(|&v| v + c).collect() }
    }

    pub fn cast<U: Real>(&self) -> DepthMap<U> {
        DepthMap { values: self.values.iter().map(|v| U::lit(v.as_f64())).collect() }
    }
}

/// Subtracts the per-component mean from `values` in place.
pub fn remove_component_means<T: Real>(domain: &Domain, values: &mut [T]) {
    let comps = domain.components();
    let mut sums = vec![0.0f64; comps.count];
    let sizes = comps.sizes();
    for (k, &c) in comps.labels.iter().enumerate() {
        sums[c as usize] += values[k].as_f64();
    }
    let means: Vec<T> = sums.iter().zip(&sizes).map(|(&s, &n)| T::lit(s / n as f64)).collect();
    for (k, &c) in comps.labels.iter().enumerate() {
        values[k] -= means[c as usize];
    }
}
