use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{CholeskyFactor, SolveStats, SolverConfig};
use crate::error::{Error, Result};
use crate::poisson::SparseSystem;
use crate::scalar::Real;
use crate::sparse::{dot, norm2};

/// Preconditioned conjugate gradient on a compatibilized system.
///
/// Stops when `‖b − A x‖ / ‖b‖ ≤ tol` (recursively updated residual) or after
/// `max_iter` iterations. The reported solution has zero mean on every
/// connected component. A nonpositive curvature `pᵀAp` triggers one restart
/// from a perturbed start; a second one is an error.
pub fn cg_solve<T: Real>(
    system: &SparseSystem<T>,
    x0: Option<&[T]>,
    factor: Option<&CholeskyFactor<T>>,
    cfg: &SolverConfig<T>,
) -> Result<(Vec<T>, SolveStats)> {
    let n = system.dim();
    if let Some(x0) = x0 {
        if x0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
        }
    }
    if let Some(f) = factor {
        if f.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: f.dim() });
        }
    }
    let start = Instant::now();
    let initial = || x0.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
    let max_iter = cfg.max_iter_for(n);

    let mut stats = SolveStats::default();
    let outcome = match iterate(system, initial(), factor, cfg.tol, max_iter, &mut stats) {
        Err(Error::CgBreakdown { .. }) => {
            let perturbed = perturb(system, &initial());
            iterate(system, perturbed, factor, cfg.tol, max_iter, &mut stats)
        }
        other => other,
    };
    let mut x = outcome?;
    remove_means(system, &mut x);
    stats.wall_time = start.elapsed().as_secs_f64();
    Ok((x, stats))
}

fn iterate<T: Real>(
    system: &SparseSystem<T>,
    mut x: Vec<T>,
    factor: Option<&CholeskyFactor<T>>,
    tol: T,
    max_iter: usize,
    stats: &mut SolveStats,
) -> Result<Vec<T>> {
    let a = &system.matrix;
    let b = &system.rhs;
    let n = b.len();
    let b_norm = norm2(b);
    stats.residual_history.clear();
    stats.iterations = 0;
    stats.converged = false;

    if b_norm == T::zero() {
        stats.residual_history.push(0.0);
        stats.converged = true;
        return Ok(x);
    }

    let mut r = a.mul_vec(&x);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut rel = norm2(&r) / b_norm;
    stats.residual_history.push(rel.as_f64());
    if rel <= tol {
        stats.converged = true;
        return Ok(x);
    }

    let precondition = |r: &[T], z: &mut [T]| {
        z.copy_from_slice(r);
        if let Some(f) = factor {
            f.solve_in_place(z);
        }
    };
    let mut z = vec![T::zero(); n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];

    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > T::zero()) || !curvature.is_finite() {
            return Err(Error::CgBreakdown { iteration: it, curvature: curvature.as_f64() });
        }
        let step = rz / curvature;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        rel = norm2(&r) / b_norm;
        stats.iterations = it;
        stats.residual_history.push(rel.as_f64());
        if rel <= tol {
            stats.converged = true;
            return Ok(x);
        }
        precondition(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(x)
}

/// `x0` plus unit-scale noise with zero mean on every component.
fn perturb<T: Real>(system: &SparseSystem<T>, x0: &[T]) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut noise: Vec<T> = (0..x0.len())
        .map(|_| T::lit(StandardNormal.sample(&mut rng)))
        .collect();
    remove_means(system, &mut noise);
    x0.iter().zip(noise).map(|(&x, e)| x + e).collect()
}

fn remove_means<T: Real>(system: &SparseSystem<T>, x: &mut [T]) {
    let mut sums = vec![0.0f64; system.n_components];
    let mut counts = vec![0usize; system.n_components];
    for (&v, &c) in x.iter().zip(&system.component_ids) {
        sums[c as usize] += v.as_f64();
        counts[c as usize] += 1;
    }
    let means: Vec<T> = sums.iter().zip(&counts).map(|(&s, &n)| T::lit(s / n as f64)).collect();
    for (v, &c) in x.iter_mut().zip(&system.component_ids) {
        *v -= means[c as usize];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{mic_factorize, PreconditionerKind};
    use crate::sparse::CsrMatrix;

    fn spd_system(matrix: CsrMatrix<f64>, rhs: Vec<f64>) -> SparseSystem<f64> {
        let n = rhs.len();
        SparseSystem {
            matrix,
            rhs,
            component_ids: (0..n as u32).collect(),
            n_components: n,
            rhs_shift: vec![0.0; n],
        }
    }

    fn solve_raw(system: &SparseSystem<f64>, cfg: &SolverConfig<f64>) -> (Vec<f64>, SolveStats) {
        let mut stats = SolveStats::default();
        let x = iterate(system, vec![0.0; system.dim()], None, cfg.tol, cfg.max_iter_for(system.dim()), &mut stats)
            .unwrap();
        (x, stats)
    }

    #[test]
    fn two_by_two_exact_in_two_steps() {
        let a = CsrMatrix::from_rows(2, vec![vec![(0, 4.0), (1, 1.0)], vec![(0, 1.0), (1, 3.0)]]);
        let s = spd_system(a, vec![1.0, 2.0]);
        let cfg = SolverConfig { tol: 1e-14, ..SolverConfig::default() };
        let (x, stats) = solve_raw(&s, &cfg);
        assert!(stats.iterations <= 2);
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-10);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-10);
    }

    #[test]
    fn diagonal_system_converges_immediately() {
        let a = CsrMatrix::from_rows(3, vec![vec![(0, 2.0)], vec![(1, 2.0)], vec![(2, 2.0)]]);
        let s = spd_system(a, vec![1.0, -4.0, 6.0]);
        let (x, stats) = solve_raw(&s, &SolverConfig { tol: 1e-12, ..SolverConfig::default() });
        assert!(stats.iterations <= 2);
        assert_eq!(x, vec![0.5, -2.0, 3.0]);
    }

    #[test]
    fn zero_rhs_returns_start() {
        let d = crate::domain::Domain::full(4, 4).unwrap();
        let s = crate::poisson::assemble(&d, &crate::field::GradientField::<f64>::zeros(16));
        let x0 = vec![3.0; 16];
        let (x, stats) = cg_solve(&s, Some(&x0), None, &SolverConfig::default()).unwrap();
        assert!(stats.converged);
        assert_eq!(stats.iterations, 0);
        // Mean removed.
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stats_are_consistent() {
        let d = crate::domain::Domain::full(12, 9).unwrap();
        let g = crate::field::GradientField::new(
            (0..108).map(|k| ((k * 7) % 11) as f64 * 0.1).collect(),
            (0..108).map(|k| ((k * 3) % 5) as f64 * -0.2).collect(),
        )
        .unwrap();
        let s = crate::poisson::compatibilize(crate::poisson::assemble(&d, &g));
        let cfg = SolverConfig { tol: 1e-8, preconditioner: PreconditionerKind::None, max_iter: None };
        let (x, stats) = cg_solve(&s, None, None, &cfg).unwrap();
        assert!(stats.converged);
        assert_eq!(stats.residual_history.len(), stats.iterations + 1);
        assert!(*stats.residual_history.last().unwrap() <= 1e-8);
        assert!(s.relative_residual(&x) < 1e-7);

        let f = mic_factorize(&s.matrix, 1e-3, 1e-3).unwrap();
        let (xp, sp) = cg_solve(&s, None, Some(&f), &cfg).unwrap();
        assert!(sp.iterations < stats.iterations);
        for (a, b) in x.iter().zip(&xp) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn max_iter_caps_and_reports_not_converged() {
        let d = crate::domain::Domain::full(30, 30).unwrap();
        let g = crate::field::GradientField::new(
            (0..900).map(|k| (k as f64 * 0.37).sin()).collect(),
            (0..900).map(|k| (k as f64 * 0.11).cos()).collect(),
        )
        .unwrap();
        let s = crate::poisson::compatibilize(crate::poisson::assemble(&d, &g));
        let cfg = SolverConfig { tol: 1e-12, max_iter: Some(3), preconditioner: PreconditionerKind::None };
        let (_, stats) = cg_solve(&s, None, None, &cfg).unwrap();
        assert!(!stats.converged);
        assert_eq!(stats.iterations, 3);
        assert!(*stats.residual_history.last().unwrap() > 1e-12);
    }

    #[test]
    fn dimension_checks() {
        let d = crate::domain::Domain::full(3, 3).unwrap();
        let s = crate::poisson::assemble(&d, &crate::field::GradientField::<f64>::zeros(9));
        assert!(cg_solve(&s, Some(&[0.0; 4]), None, &SolverConfig::default()).is_err());
    }
}
