//! Fast marching integration of a gradient field.
//!
//! With an auxiliary function `d` that grows away from the seed, the
//! substitution `w = v + λ·d` turns `∇v = (p, q)` into the eikonal equation
//! `‖∇w‖ = ‖(p + λ d_x, q + λ d_y)‖`, whose right-hand side stays positive
//! for large `λ`. One fast marching pass then yields `w`, and `v = w − λ·d`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Side};
use crate::error::{Error, Result};
use crate::field::{DepthMap, GradientField};
use crate::scalar::Real;

pub const DEFAULT_LAMBDA: f64 = 1e5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Auxiliary {
    /// `d = (x − x₀)² + (y − y₀)²`; only sensible on convex domains.
    SquaredEuclidean,
    /// `d` = squared in-domain geodesic distance to the seed.
    #[default]
    Geodesic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FmConfig {
    pub lambda: f64,
    /// `(x, y)` of the start pixel. Components not containing it are seeded
    /// at their own default pixel.
    pub seed_pixel: Option<(usize, usize)>,
    pub auxiliary: Auxiliary,
}

impl Default for FmConfig {
    fn default() -> Self {
        Self { lambda: DEFAULT_LAMBDA, seed_pixel: None, auxiliary: Auxiliary::Geodesic }
    }
}

/// Smallest `w` with `Σ max(w − m, 0)² = F²` over the two axis minima.
///
/// Pass `∞` for an axis without accepted neighbours.
pub fn local_update<T: Real>(mx: T, my: T, f: T) -> Result<T> {
    let (lo, hi) = if mx <= my { (mx, my) } else { (my, mx) };
    if !lo.is_finite() {
        return Err(Error::NoUpwindInformation);
    }
    if !hi.is_finite() || hi - lo >= f {
        return Ok(lo + f);
    }
    let two = T::lit(2.0);
    let disc = two * f * f - (hi - lo) * (hi - lo);
    let w = (lo + hi + disc.max(T::zero()).sqrt()) / two;
    Ok(if w > hi { w } else { lo + f })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Label {
    Far,
    Trial,
    Accepted,
}

/// Min-heap entry ordered by value, then by pixel index.
#[derive(Clone, Copy)]
struct Entry {
    value: f64,
    index: u32,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.value.total_cmp(&self.value).then_with(|| other.index.cmp(&self.index))
    }
}

/// Result of a fast marching run.
#[derive(Clone, Debug)]
pub struct EikonalSolution<T> {
    pub values: Vec<T>,
    /// Pixels in the order they were accepted.
    pub order: Vec<u32>,
}

/// Solves `‖∇u‖ = rhs` on the domain with `u` fixed at the seeds.
///
/// Panics if an accepted value is ever smaller than its predecessor.
pub fn solve_eikonal<T: Real>(domain: &Domain, rhs: &[T], seeds: &[(usize, T)]) -> Result<Vec<T>> {
    solve_eikonal_traced(domain, rhs, seeds).map(|s| s.values)
}

pub fn solve_eikonal_traced<T: Real>(
    domain: &Domain,
    rhs: &[T],
    seeds: &[(usize, T)],
) -> Result<EikonalSolution<T>> {
    let n = domain.len();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rhs.len() });
    }
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("fast marching needs at least one seed".into()));
    }
    let mut values = vec![T::infinity(); n];
    let mut labels = vec![Label::Far; n];
    let mut heap = BinaryHeap::new();
    for &(k, v) in seeds {
        if k >= n {
            return Err(Error::InvalidArgument(format!("seed index {k} outside domain of {n} pixels")));
        }
        if v < values[k] {
            values[k] = v;
        }
        labels[k] = Label::Trial;
        heap.push(Entry { value: values[k].as_f64(), index: k as u32 });
    }

    let mut order = Vec::with_capacity(n);
    let mut last = f64::NEG_INFINITY;
    while let Some(Entry { value, index }) = heap.pop() {
        let k = index as usize;
        if labels[k] == Label::Accepted || value != values[k].as_f64() {
            continue;
        }
        assert!(value >= last, "fast marching accepted {value} after {last}");
        last = value;
        labels[k] = Label::Accepted;
        order.push(index);

        for (_, j) in domain.neighbors(k) {
            if labels[j] == Label::Accepted {
                continue;
            }
            let axis_min = |minus: Side, plus: Side| -> T {
                [minus, plus]
                    .into_iter()
                    .filter_map(|s| domain.neighbor(j, s))
                    .filter(|&m| labels[m] == Label::Accepted)
                    .map(|m| values[m])
                    .fold(T::infinity(), T::min)
            };
            let mx = axis_min(Side::Left, Side::Right);
            let my = axis_min(Side::Down, Side::Up);
            let w = local_update(mx, my, rhs[j])?;
            if w < values[j] {
                values[j] = w;
                labels[j] = Label::Trial;
                heap.push(Entry { value: w.as_f64(), index: j as u32 });
            }
        }
    }

    if order.len() != n {
        return Err(Error::Unreachable { count: n - order.len() });
    }
    Ok(EikonalSolution { values, order })
}

/// Pixel nearest the centroid of each connected component, as domain indices.
pub fn default_seeds(domain: &Domain) -> Vec<usize> {
    domain
        .components()
        .members()
        .iter()
        .map(|members| {
            let m = members.len() as f64;
            let (sx, sy) = members.iter().fold((0.0, 0.0), |(sx, sy), &k| {
                let (x, y) = domain.pixel_of(k);
                (sx + x as f64, sy + y as f64)
            });
            let (cx, cy) = (sx / m, sy / m);
            *members
                .iter()
                .min_by(|&&a, &&b| {
                    let da = dist2(domain.pixel_of(a), cx, cy);
                    let db = dist2(domain.pixel_of(b), cx, cy);
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .expect("components are non-empty")
        })
        .collect()
}

fn dist2((x, y): (usize, usize), cx: f64, cy: f64) -> f64 {
    (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)
}

/// One seed per component, honouring `cfg.seed_pixel` for its component.
pub fn resolve_seeds(domain: &Domain, cfg: &FmConfig) -> Result<Vec<usize>> {
    let mut seeds = default_seeds(domain);
    if let Some((x, y)) = cfg.seed_pixel {
        let k = domain
            .index_of(x, y)
            .ok_or_else(|| Error::InvalidArgument(format!("seed pixel ({x}, {y}) is outside the domain")))?;
        let c = domain.components().labels[k] as usize;
        seeds[c] = k;
    }
    Ok(seeds)
}

/// Auxiliary function `d` for the given seeds.
pub fn auxiliary_distance(domain: &Domain, seeds: &[usize], kind: Auxiliary) -> Result<Vec<f64>> {
    match kind {
        Auxiliary::Geodesic => {
            let ones = vec![1.0; domain.len()];
            let zero_seeds: Vec<(usize, f64)> = seeds.iter().map(|&k| (k, 0.0)).collect();
            let dist = solve_eikonal(domain, &ones, &zero_seeds)?;
            Ok(dist.into_iter().map(|t| t * t).collect())
        }
        Auxiliary::SquaredEuclidean => {
            let labels = &domain.components().labels;
            let mut seed_of = vec![usize::MAX; domain.components().count];
            for &s in seeds {
                seed_of[labels[s] as usize] = s;
            }
            (0..domain.len())
                .map(|k| {
                    let s = seed_of[labels[k] as usize];
                    if s == usize::MAX {
                        return Err(Error::Unreachable { count: 1 });
                    }
                    let (sx, sy) = domain.pixel_of(s);
                    Ok(dist2(domain.pixel_of(k), sx as f64, sy as f64))
                })
                .collect()
        }
    }
}

/// Signed upwind derivative of `d` at `k` along `(minus, plus)`: the
/// one-sided difference towards the smaller neighbour, zero at a local minimum.
fn upwind_derivative(domain: &Domain, d: &[f64], k: usize, minus: Side, plus: Side) -> f64 {
    let back = domain.neighbor(k, minus).map_or(f64::NEG_INFINITY, |j| d[k] - d[j]);
    let fwd = domain.neighbor(k, plus).map_or(f64::NEG_INFINITY, |j| d[k] - d[j]);
    if back <= 0.0 && fwd <= 0.0 {
        0.0
    } else if back >= fwd {
        back
    } else {
        -fwd
    }
}

/// Integrates `g` over `domain` with one fast marching pass.
///
/// The result is zero at each component's seed. Internally computed in `f64`.
pub fn integrate_fm<T: Real>(g: &GradientField<T>, domain: &Domain, cfg: &FmConfig) -> Result<DepthMap<T>> {
    g.check_domain(domain)?;
    if !(cfg.lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {}", cfg.lambda)));
    }
    let seeds = resolve_seeds(domain, cfg)?;
    let d = auxiliary_distance(domain, &seeds, cfg.auxiliary)?;
    let lambda = cfg.lambda;
    let rhs: Vec<f64> = (0..domain.len())
        .map(|k| {
            let fx = upwind_derivative(domain, &d, k, Side::Left, Side::Right);
            let fy = upwind_derivative(domain, &d, k, Side::Down, Side::Up);
            let a = g.p[k].as_f64() + lambda * fx;
            let b = g.q[k].as_f64() + lambda * fy;
            a.hypot(b)
        })
        .collect();
    let zero_seeds: Vec<(usize, f64)> = seeds.iter().map(|&k| (k, 0.0)).collect();
    let w = solve_eikonal(domain, &rhs, &zero_seeds)?;
    Ok(DepthMap::new(w.iter().zip(&d).map(|(&w, &d)| T::lit(w - lambda * d)).collect()))
}
