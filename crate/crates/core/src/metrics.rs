//! Error measures between a reconstruction and the ground truth.

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::DepthMap;
use crate::scalar::Real;

const WINDOW_RADIUS: usize = 5;
const WINDOW_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub ssim: f64,
    /// Constant added to the estimate before comparison.
    pub offset_used: f64,
}

/// MSE and SSIM after shifting `estimate` by the constant that minimises
/// the squared error.
pub fn mse_opt<T: Real>(estimate: &DepthMap<T>, truth: &DepthMap<T>, domain: &Domain) -> Result<Metrics> {
    for len in [estimate.len(), truth.len()] {
        if len != domain.len() {
            return Err(Error::DimensionMismatch { expected: domain.len(), got: len });
        }
    }
    let n = domain.len() as f64;
    let est: Vec<f64> = estimate.values.iter().map(|v| v.as_f64()).collect();
    let tru: Vec<f64> = truth.values.iter().map(|v| v.as_f64()).collect();
    let c = tru.iter().zip(&est).map(|(t, e)| t - e).sum::<f64>() / n;
    let aligned: Vec<f64> = est.iter().map(|e| e + c).collect();
    let mse = aligned.iter().zip(&tru).map(|(a, t)| (a - t).powi(2)).sum::<f64>() / n;
    Ok(Metrics { mse, ssim: ssim(&tru, &aligned, domain)?, offset_used: c })
}

/// Mean SSIM of `b` against the reference `a`, both indexed by domain pixel.
///
/// Gaussian 11×11 window with σ = 1.5 and dynamic range `max − min` of `a`.
/// Averages over pixels whose whole window lies in the domain; if there are
/// none, windows are truncated to the domain and renormalised.
pub fn ssim(a: &[f64], b: &[f64], domain: &Domain) -> Result<f64> {
    for len in [a.len(), b.len()] {
        if len != domain.len() {
            return Err(Error::DimensionMismatch { expected: domain.len(), got: len });
        }
    }
    if a.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let (lo, hi) = a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mut range = hi - lo;
    if range == 0.0 {
        if a == b {
            return Ok(1.0);
        }
        range = 1.0;
    }
    let c1 = (K1 * range).powi(2);
    let c2 = (K2 * range).powi(2);

    let (w, h) = (domain.width(), domain.height());
    let raster = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for k in 0..domain.len() {
            out[domain.cell_of(k)] = f(k);
        }
        out
    };
    let kernel = gaussian_kernel();
    let blur = |img: Vec<f64>| separable_blur(&img, w, h, &kernel);
    let weight = blur(raster(&|_| 1.0));
    let mu_a = blur(raster(&|k| a[k]));
    let mu_b = blur(raster(&|k| b[k]));
    let aa = blur(raster(&|k| a[k] * a[k]));
    let bb = blur(raster(&|k| b[k] * b[k]));
    let ab = blur(raster(&|k| a[k] * b[k]));

    let local = |cell: usize| {
        let s = weight[cell];
        let (ma, mb) = (mu_a[cell] / s, mu_b[cell] / s);
        let va = aa[cell] / s - ma * ma;
        let vb = bb[cell] / s - mb * mb;
        let cov = ab[cell] / s - ma * mb;
        ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
    };
    let cells: Vec<usize> = (0..domain.len()).map(|k| domain.cell_of(k)).collect();
    let full: Vec<usize> = cells.iter().copied().filter(|&c| weight[c] > 1.0 - 1e-9).collect();
    let used = if full.is_empty() { &cells } else { &full };
    Ok(used.iter().map(|&c| local(c)).sum::<f64>() / used.len() as f64)
}

fn gaussian_kernel() -> Vec<f64> {
    let r = WINDOW_RADIUS as isize;
    let raw: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Separable convolution with zeros outside the rectangle.
fn separable_blur(img: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = kernel.len() / 2;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            tmp[y * w + x] = (lo..=hi).map(|i| kernel[i + r - x] * img[y * w + i]).sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (lo..=hi).map(|j| kernel[j + r - y] * tmp[j * w + x]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainMask;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn surface(d: &Domain) -> Vec<f64> {
        (0..d.len())
            .map(|k| {
                let (x, y) = d.pixel_of(k);
                (x as f64 * 0.2).sin() * 10.0 + (y as f64 * 0.13).cos() * 5.0
            })
            .collect()
    }

    #[test]
    fn offset_is_removed() {
        let d = Domain::full(40, 30).unwrap();
        let t = DepthMap::new(surface(&d));
        let m = mse_opt(&t.shifted(5.0), &t, &d).unwrap();
        assert!(m.mse < 1e-20);
        assert!((m.offset_used + 5.0).abs() < 1e-12);
        assert!((m.ssim - 1.0).abs() < 1e-12);
        let same = mse_opt(&t, &t, &d).unwrap();
        assert_eq!(same.mse, 0.0);
        assert!((same.ssim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_noise_gives_unit_mse() {
        let d = Domain::full(256, 256).unwrap();
        let t = DepthMap::new(surface(&d));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noisy = DepthMap::new(
            t.values
                .iter()
                .map(|v| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    v + e
                })
                .collect::<Vec<f64>>(),
        );
        let m = mse_opt(&noisy, &t, &d).unwrap();
        assert!((m.mse - 1.0).abs() < 0.02, "{}", m.mse);
    }

    #[test]
    fn negated_field_has_negative_ssim() {
        let d = Domain::full(32, 32).unwrap();
        // Checkerboard texture: zero mean under every window.
        let a: Vec<f64> = (0..d.len())
            .map(|k| {
                let (x, y) = d.pixel_of(k);
                if (x + y) % 2 == 0 { 1.0 + 0.01 * x as f64 } else { -1.0 - 0.01 * x as f64 }
            })
            .collect();
        let b: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!(ssim(&a, &b, &d).unwrap() < 0.0);
    }

    #[test]
    fn independent_noise_near_zero() {
        let d = Domain::full(128, 128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut draw = || -> Vec<f64> { (0..d.len()).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let (a, b) = (draw(), draw());
        assert!(ssim(&a, &b, &d).unwrap().abs() < 0.05);
    }

    #[test]
    fn constant_reference() {
        let d = Domain::full(8, 8).unwrap();
        assert_eq!(ssim(&[3.0; 64], &[3.0; 64], &d).unwrap(), 1.0);
        assert!(ssim(&[3.0; 64], &[4.0; 64], &d).unwrap() < 1.0);
    }

    #[test]
    fn masked_domain_ignores_outside() {
        let mask = DomainMask::from_fn(40, 40, |x, y| (x as f64 - 20.0).hypot(y as f64 - 20.0) < 15.0).unwrap();
        let d = Domain::new(mask).unwrap();
        let a = surface(&d);
        assert!((ssim(&a, &a, &d).unwrap() - 1.0).abs() < 1e-12);
        let small = Domain::new(DomainMask::from_fn(6, 6, |x, _| x < 4).unwrap()).unwrap();
        let s = surface(&small);
        assert!((ssim(&s, &s, &small).unwrap() - 1.0).abs() < 1e-12);
    }
}
