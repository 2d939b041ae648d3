use proptest::prelude::*;

use sni::domain::{Domain, DomainMask, Side};
use sni::field::{DepthMap, GradientField};
use sni::fm::{integrate_fm, FmConfig};
use sni::krylov::{cg_solve, PreconditionerKind, SolverConfig};
use sni::metrics::mse_opt;
use sni::poisson::{assemble, compatibilize, divergence_rhs, laplacian_matrix};
use sni::spectral::{embed_masked, integrate_dct, integrate_fft, RectGradient};

/// Random mask with isolated pixels cleared.
fn mask_strategy(max: usize) -> impl Strategy<Value = DomainMask> {
    (1..=max, 1..=max)
        .prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(prop::bool::weighted(0.7), w * h)))
        .prop_filter_map("mask has no pixel with a neighbour", |(w, h, raw)| {
            let at = |x: isize, y: isize| x >= 0 && y >= 0 && x < w as isize && y < h as isize && raw[y as usize * w + x as usize];
            let cells: Vec<bool> = (0..w * h)
                .map(|c| {
                    let (x, y) = ((c % w) as isize, (c / w) as isize);
                    raw[c] && (at(x + 1, y) || at(x - 1, y) || at(x, y + 1) || at(x, y - 1))
                })
                .collect();
            cells.iter().any(|&c| c).then(|| DomainMask::new(w, h, cells).unwrap())
        })
}

fn with_gradient(max: usize) -> impl Strategy<Value = (Domain, GradientField<f64>)> {
    mask_strategy(max).prop_flat_map(|mask| {
        let domain = Domain::new(mask).unwrap();
        let n = domain.len();
        (
            Just(domain),
            prop::collection::vec(-2.0f64..2.0, n),
            prop::collection::vec(-2.0f64..2.0, n),
        )
            .prop_map(|(d, p, q)| (d, GradientField { p, q }))
    })
}

fn rect_gradient(w: usize, h: usize) -> impl Strategy<Value = RectGradient<f64>> {
    (prop::collection::vec(-1.0f64..1.0, w * h), prop::collection::vec(-1.0f64..1.0, w * h)).prop_map(move |(p, q)| {
        RectGradient { width: w, height: h, p, q, mask: DomainMask::full(w, h).unwrap() }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn class_matches_neighbour_presence(mask in mask_strategy(12)) {
        let d = Domain::new(mask).unwrap();
        for k in 0..d.len() {
            let mut expected = [false; 4];
            for s in Side::ALL {
                expected[s.slot()] = d.neighbor(k, s).is_some();
            }
            prop_assert_eq!(d.class(k).presence(), expected);
            prop_assert_eq!(d.degree(k), expected.iter().filter(|&&b| b).count());
        }
    }

    #[test]
    fn laplacian_is_symmetric_with_zero_rows(mask in mask_strategy(14)) {
        let d = Domain::new(mask).unwrap();
        let a = laplacian_matrix(&d);
        prop_assert!(a.is_symmetric());
        prop_assert!(a.row_sums().iter().all(|&s| s == 0));
        for k in 0..d.len() {
            prop_assert_eq!(a.get(k, k), d.degree(k) as i64);
        }
    }

    /// `⟨b, v⟩` equals the sum over edges of the averaged gradient times the
    /// difference of `v`, so `b` is the adjoint of the forward difference.
    #[test]
    fn rhs_is_adjoint_of_differences((d, g) in with_gradient(10), seed in 0u64..1000) {
        let v: Vec<f64> = (0..d.len()).map(|k| ((k as u64 * 2654435761 + seed) % 97) as f64 / 13.0).collect();
        let b = divergence_rhs(&d, &g);
        let lhs: f64 = b.iter().zip(&v).map(|(b, v)| b * v).sum();
        let mut rhs = 0.0;
        for i in 0..d.len() {
            for (side, f) in [(Side::Right, &g.p), (Side::Up, &g.q)] {
                if let Some(j) = d.neighbor(i, side) {
                    rhs += 0.5 * (f[i] + f[j]) * (v[j] - v[i]);
                }
            }
        }
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn cg_reaches_tolerance((d, g) in with_gradient(12)) {
        let system = compatibilize(assemble(&d, &g));
        for pc in [PreconditionerKind::None, PreconditionerKind::mic(0.0), PreconditionerKind::mic(1e-3)] {
            let cfg = SolverConfig { tol: 1e-8, max_iter: None, preconditioner: pc };
            let factor = pc.factorize(&system.matrix).unwrap();
            let (x, stats) = cg_solve(&system, None, factor.as_ref(), &cfg).unwrap();
            prop_assert!(stats.converged);
            prop_assert!(system.relative_residual(&x) <= 1e-6);
        }
    }

    #[test]
    fn fm_runs_on_any_domain((d, g) in with_gradient(12)) {
        let depth = integrate_fm(&g, &d, &FmConfig::default()).unwrap();
        prop_assert!(depth.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn spectral_baselines_are_linear(
        a in rect_gradient(9, 7),
        b in rect_gradient(9, 7),
        s in -3.0f64..3.0,
    ) {
        let combo = RectGradient {
            p: a.p.iter().zip(&b.p).map(|(x, y)| s * x + y).collect(),
            q: a.q.iter().zip(&b.q).map(|(x, y)| s * x + y).collect(),
            ..a.clone()
        };
        for f in [integrate_dct::<f64>, integrate_fft::<f64>] {
            let (za, zb, zc) = (f(&a).unwrap(), f(&b).unwrap(), f(&combo).unwrap());
            for i in 0..zc.len() {
                prop_assert!((s * za.values[i] + zb.values[i] - zc.values[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mse_ignores_constant_offsets(
        values in prop::collection::vec(-50.0f64..50.0, 36),
        noise in prop::collection::vec(-1.0f64..1.0, 36),
        c in -100.0f64..100.0,
    ) {
        let d = Domain::full(6, 6).unwrap();
        let truth = DepthMap::new(values.clone());
        let est = DepthMap::new(values.iter().zip(&noise).map(|(v, n)| v + n).collect::<Vec<_>>());
        let m0 = mse_opt(&est, &truth, &d).unwrap();
        let m1 = mse_opt(&est.shifted(c), &truth, &d).unwrap();
        prop_assert!((m0.mse - m1.mse).abs() <= 1e-9 * (1.0 + m0.mse));
        prop_assert!((m0.ssim - m1.ssim).abs() <= 1e-9);
    }
}

#[test]
fn embedding_zero_fills_outside() {
    let mask = DomainMask::from_fn(6, 5, |x, y| x > 0 && y < 4).unwrap();
    let d = Domain::new(mask).unwrap();
    let g = GradientField { p: vec![1.0; d.len()], q: vec![2.0; d.len()] };
    let rect = embed_masked(&d, &g).unwrap();
    for y in 0..5 {
        for x in 0..6 {
            let c = y * 6 + x;
            let inside = d.index_of(x, y).is_some();
            assert_eq!(rect.p[c], if inside { 1.0 } else { 0.0 });
            assert_eq!(rect.q[c], if inside { 2.0 } else { 0.0 });
        }
    }
}
