//! Discrete Poisson system over an arbitrary domain.
//!
//! Every row comes from the stencil of its pixel's [`BoundaryClass`]: the
//! 5-point Laplacian and central-difference divergence inside, and the
//! natural-boundary stencils obtained by averaging forward and backward
//! discretisations of `(∇v − g)·μ = 0` on the fourteen boundary types.
//! Rows are negated so that `A = −Δ` is positive semidefinite.

use num_traits::Num;

use crate::domain::{BoundaryClass, Domain, Side};
use crate::field::GradientField;
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// Integer stencil of one row of `Δv = div(p, q)` (unnegated).
///
/// Divergence weights are stored doubled, so the divergence is
/// `½ (Σ p_w · p + Σ q_w · q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stencil {
    pub center: i64,
    /// Laplacian weight of each neighbour, indexed by [`Side::slot`].
    pub neighbors: [i64; 4],
    /// Doubled weights on `p` at `[left, center, right]`.
    pub p: [i64; 3],
    /// Doubled weights on `q` at `[down, center, up]`.
    pub q: [i64; 3],
}

impl Stencil {
    /// Stencil for a boundary class. A missing neighbour drops its Laplacian
    /// term and moves its divergence contribution onto the centre pixel.
    pub fn for_class(class: BoundaryClass) -> Self {
        let present = class.presence();
        let has = |s: Side| present[s.slot()];
        let mut neighbors = [0; 4];
        for s in Side::ALL {
            if has(s) {
                neighbors[s.slot()] = 1;
            }
        }
        let center = -neighbors.iter().sum::<i64>();
        let axis = |minus: Side, plus: Side| -> [i64; 3] {
            let lo = if has(minus) { -1 } else { 0 };
            let hi = if has(plus) { 1 } else { 0 };
            let mid = if has(minus) { 0 } else { 1 } + if has(plus) { 0 } else { -1 };
            [lo, mid, hi]
        };
        Stencil {
            center,
            neighbors,
            p: axis(Side::Left, Side::Right),
            q: axis(Side::Down, Side::Up),
        }
    }
}

/// `A x = b` with `A = −Δ` over a domain.
#[derive(Clone, Debug)]
pub struct SparseSystem<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    /// Component label per row.
    pub component_ids: Vec<u32>,
    pub n_components: usize,
    /// Constant subtracted from `rhs` on each component by [`compatibilize`].
    pub rhs_shift: Vec<T>,
}

impl<T: Real> SparseSystem<T> {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// `‖b − A x‖ / ‖b‖`, or `‖b − A x‖` when `b = 0`.
    pub fn relative_residual(&self, x: &[T]) -> T {
        let ax = self.matrix.mul_vec(x);
        let r: Vec<T> = self.rhs.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
        let nb = crate::sparse::norm2(&self.rhs);
        let nr = crate::sparse::norm2(&r);
        if nb > T::zero() {
            nr / nb
        } else {
            nr
        }
    }
}

/// Exact integer matrix `A = −Δ` of a domain.
pub fn laplacian_matrix(domain: &Domain) -> CsrMatrix<i64> {
    laplacian_with(domain, |v| v)
}

/// `A = −Δ` with each integer coefficient converted by `f`, written
/// straight into CSR arrays.
fn laplacian_with<U: Copy + Num>(domain: &Domain, f: impl Fn(i64) -> U) -> CsrMatrix<U> {
    let n = domain.len();
    let nnz = n + (0..n).map(|k| domain.degree(k)).sum::<usize>();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    offsets.push(0);
    for k in 0..n {
        let st = Stencil::for_class(domain.class(k));
        let mut row = [(0usize, 0i64); 5];
        row[0] = (k, -st.center);
        let mut len = 1;
        for (side, j) in domain.neighbors(k) {
            row[len] = (j, -st.neighbors[side.slot()]);
            len += 1;
        }
        row[..len].sort_unstable_by_key(|&(c, _)| c);
        for &(c, v) in &row[..len] {
            cols.push(c);
            vals.push(f(v));
        }
        offsets.push(cols.len());
    }
    CsrMatrix::try_from_parts(n, n, offsets, cols, vals).expect("stencil rows are sorted and in range")
}

/// Right-hand side `b = −div(p, q)` using each pixel's stencil.
pub fn divergence_rhs<T: Real>(domain: &Domain, g: &GradientField<T>) -> Vec<T> {
    let half = T::lit(0.5);
    (0..domain.len())
        .map(|k| {
            let st = Stencil::for_class(domain.class(k));
            let at = |side: Side, field: &[T]| domain.neighbor(k, side).map_or(T::zero(), |j| field[j]);
            let w = |c: i64| T::lit(c as f64);
            let div = w(st.p[0]) * at(Side::Left, &g.p)
                + w(st.p[1]) * g.p[k]
                + w(st.p[2]) * at(Side::Right, &g.p)
                + w(st.q[0]) * at(Side::Down, &g.q)
                + w(st.q[1]) * g.q[k]
                + w(st.q[2]) * at(Side::Up, &g.q);
            -(div * half)
        })
        .collect()
}

/// Assembles the Poisson system of `g` over `domain`.
pub fn assemble<T: Real>(domain: &Domain, g: &GradientField<T>) -> SparseSystem<T> {
    assert_eq!(g.len(), domain.len(), "gradient must be defined on every domain pixel");
    let comps = domain.components();
    SparseSystem {
        matrix: laplacian_with(domain, |v| T::lit(v as f64)),
        rhs: divergence_rhs(domain, g),
        component_ids: comps.labels.clone(),
        n_components: comps.count,
        rhs_shift: vec![T::zero(); comps.count],
    }
}

/// Removes the per-component mean of `b`, making each pure-Neumann block
/// consistent. The shift applied to each component is recorded.
pub fn compatibilize<T: Real>(mut system: SparseSystem<T>) -> SparseSystem<T> {
    let mut sums = vec![0.0f64; system.n_components];
    let mut counts = vec![0usize; system.n_components];
    for (&b, &c) in system.rhs.iter().zip(&system.component_ids) {
        sums[c as usize] += b.as_f64();
        counts[c as usize] += 1;
    }
    let means: Vec<T> = sums.iter().zip(&counts).map(|(&s, &n)| T::lit(s / n as f64)).collect();
    for (b, &c) in system.rhs.iter_mut().zip(&system.component_ids) {
        *b -= means[c as usize];
    }
    for (shift, m) in system.rhs_shift.iter_mut().zip(means) {
        *shift += m;
    }
    system
}

/// Outlier-weighted gradient `(p̄, q̄) = (p, q)·exp(−I²)`.
#[derive(Clone, Debug)]
pub struct RobustifiedGradient<T> {
    pub gradient: GradientField<T>,
    /// `ν = exp(I²) − 1`.
    pub nu: Vec<T>,
    /// `I = p_y − q_x`.
    pub integrability: Vec<T>,
}

/// Largest exponent fed to `exp`; beyond it the weight is treated as zero.
const MAX_EXPONENT: f64 = 700.0;
const MIN_WEIGHT: f64 = 1e-300;

/// One-sided derivative of `field` at `k` along the axis `(minus, plus)`:
/// forward difference where the `plus` neighbour exists, backward otherwise.
fn one_sided<T: Real>(domain: &Domain, field: &[T], k: usize, minus: Side, plus: Side) -> T {
    if let Some(j) = domain.neighbor(k, plus) {
        field[j] - field[k]
    } else if let Some(j) = domain.neighbor(k, minus) {
        field[k] - field[j]
    } else {
        T::zero()
    }
}

/// Integrability field `I = p_y − q_x`, one-sided differences.
pub fn integrability<T: Real>(domain: &Domain, g: &GradientField<T>) -> Vec<T> {
    (0..domain.len())
        .map(|k| {
            one_sided(domain, &g.p, k, Side::Down, Side::Up)
                - one_sided(domain, &g.q, k, Side::Left, Side::Right)
        })
        .collect()
}

/// Down-weights the gradient where it fails to be integrable.
pub fn robustify_gradient<T: Real>(domain: &Domain, g: &GradientField<T>) -> RobustifiedGradient<T> {
    let integ = integrability(domain, g);
    // f32 overflows long before e^700.
    let cap = T::lit(MAX_EXPONENT.min(T::max_value().ln().as_f64() - 1.0));
    let mut nu = Vec::with_capacity(integ.len());
    let mut p = Vec::with_capacity(integ.len());
    let mut q = Vec::with_capacity(integ.len());
    for (k, &i) in integ.iter().enumerate() {
        let e = (i * i).min(cap);
        nu.push(e.exp() - T::one());
        let mut weight = (-e).exp();
        if weight.as_f64() < MIN_WEIGHT || (i * i) > cap {
            weight = T::zero();
        }
        p.push(g.p[k] * weight);
        q.push(g.q[k] * weight);
    }
    RobustifiedGradient { gradient: GradientField { p, q }, nu, integrability: integ }
}
