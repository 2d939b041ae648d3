//! Benchmark surfaces, image-derived gradients and gradient corruption.
//!
//! Analytic datasets sample the surface on a world-coordinate grid with
//! spacing `h` and report gradients per pixel, i.e. `p = h·∂v/∂x`, so that
//! integrating with unit grid spacing returns `v` in its own units.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, DomainMask};
use crate::error::{Error, Result};
use crate::field::{DepthMap, GradientField};
use crate::scalar::Real;

pub const SOMBRERO_AMPLITUDE: f64 = 30.0;
pub const SOMBRERO_HALF_WIDTH: f64 = 15.0;
pub const PEAKS_HALF_WIDTH: f64 = 3.0;
/// The vase mask keeps `|x| ≤ 0.9·f(y)` so slopes stay bounded at the rim.
pub const VASE_RIM: f64 = 0.9;

#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub name: String,
    pub domain: Domain,
    pub gradient: GradientField<T>,
    pub ground_truth: Option<DepthMap<T>>,
}

/// Datasets that can be generated by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Sombrero,
    Peaks,
    Vase,
    Phantom,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] =
        [DatasetKind::Sombrero, DatasetKind::Peaks, DatasetKind::Vase, DatasetKind::Phantom];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Sombrero => "sombrero",
            DatasetKind::Peaks => "peaks",
            DatasetKind::Vase => "vase",
            DatasetKind::Phantom => "phantom",
        }
    }

    pub fn generate<T: Real>(self, n: usize) -> Result<Dataset<T>> {
        match self {
            DatasetKind::Sombrero => gen_sombrero(n),
            DatasetKind::Peaks => gen_peaks(n),
            DatasetKind::Vase => gen_vase(n),
            DatasetKind::Phantom => gen_phantom(n, PhantomTable::default()),
        }
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown dataset {s:?}")))
    }
}

fn check_size(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::InvalidArgument(format!("side length must be at least {min}, got {n}")));
    }
    Ok(())
}

/// World coordinate of grid index `i` on `[-half, half]` with `n` samples.
fn coord(i: usize, n: usize, half: f64) -> f64 {
    -half + 2.0 * half * i as f64 / (n - 1) as f64
}

fn analytic<T: Real>(
    name: &str,
    n: usize,
    half: f64,
    f: impl Fn(f64, f64) -> (f64, f64, f64),
) -> Result<Dataset<T>> {
    let domain = Domain::full(n, n)?;
    let h = 2.0 * half / (n - 1) as f64;
    let mut v = Vec::with_capacity(n * n);
    let mut p = Vec::with_capacity(n * n);
    let mut q = Vec::with_capacity(n * n);
    for k in 0..domain.len() {
        let (i, j) = domain.pixel_of(k);
        let (z, zx, zy) = f(coord(i, n, half), coord(j, n, half));
        v.push(T::lit(z));
        p.push(T::lit(zx * h));
        q.push(T::lit(zy * h));
    }
    Ok(Dataset {
        name: name.into(),
        domain,
        gradient: GradientField { p, q },
        ground_truth: Some(DepthMap::new(v)),
    })
}

/// `a·sin(r)/r` on `[−15, 15]²` with `a = 30`.
pub fn gen_sombrero<T: Real>(n: usize) -> Result<Dataset<T>> {
    check_size(n, 8)?;
    analytic("sombrero", n, SOMBRERO_HALF_WIDTH, |x, y| {
        let a = SOMBRERO_AMPLITUDE;
        let r = x.hypot(y);
        let (sinc, dsinc_over_r) = if r < 1e-4 {
            // sinc'(r)/r = −1/3 + r²/30 − …
            (1.0 - r * r / 6.0, -1.0 / 3.0 + r * r / 30.0)
        } else {
            (r.sin() / r, (r * r.cos() - r.sin()) / (r * r * r))
        };
        (a * sinc, a * dsinc_over_r * x, a * dsinc_over_r * y)
    })
}

/// The three-Gaussian "peaks" function on `[−3, 3]²`.
pub fn gen_peaks<T: Real>(n: usize) -> Result<Dataset<T>> {
    check_size(n, 8)?;
    analytic("peaks", n, PEAKS_HALF_WIDTH, peaks)
}

/// Value and partial derivatives of the peaks function.
pub fn peaks(x: f64, y: f64) -> (f64, f64, f64) {
    let e1 = (-x * x - (y + 1.0).powi(2)).exp();
    let e2 = (-x * x - y * y).exp();
    let e3 = (-(x + 1.0).powi(2) - y * y).exp();
    let poly = x / 5.0 - x.powi(3) - y.powi(5);
    let z = 3.0 * (1.0 - x).powi(2) * e1 - 10.0 * poly * e2 - e3 / 3.0;
    let zx = (-6.0 * (1.0 - x) - 6.0 * x * (1.0 - x).powi(2)) * e1
        - 10.0 * (0.2 - 3.0 * x * x - 2.0 * x * poly) * e2
        + 2.0 * (x + 1.0) / 3.0 * e3;
    let zy = -6.0 * (1.0 - x).powi(2) * (y + 1.0) * e1 - 10.0 * (-5.0 * y.powi(4) - 2.0 * y * poly) * e2
        + 2.0 * y / 3.0 * e3;
    (z, zx, zy)
}

/// Vase silhouette half-width `f(t)` and `f'(t)` for `t ∈ [0, 1]`.
pub fn vase_profile(t: f64) -> (f64, f64) {
    let a = 6.0 * t + 1.0;
    let b = t - 1.0;
    let c = 3.0 * t - 2.0;
    let g = t * a * a * b * b * c;
    let dg = a * a * b * b * c + 12.0 * t * a * b * b * c + 2.0 * t * a * a * b * c + 3.0 * t * a * a * b * b;
    (0.15 - 0.1 * g, -0.1 * dg)
}

/// Surface of revolution `√(f(y)² − x²)` on a non-rectangular mask.
///
/// Rows map to `t ∈ [0, 1]`, columns to `x ∈ [−½, ½]`, and depth is scaled
/// by `n − 1` so it shares units with the pixel grid.
pub fn gen_vase<T: Real>(n: usize) -> Result<Dataset<T>> {
    check_size(n, 16)?;
    let scale = (n - 1) as f64;
    let world = |i: usize, j: usize| (i as f64 / scale - 0.5, j as f64 / scale);
    let mask = DomainMask::from_fn(n, n, |i, j| {
        let (x, t) = world(i, j);
        x.abs() <= VASE_RIM * vase_profile(t).0
    })?;
    let domain = Domain::new(mask)?;
    let mut v = Vec::with_capacity(domain.len());
    let mut p = Vec::with_capacity(domain.len());
    let mut q = Vec::with_capacity(domain.len());
    for k in 0..domain.len() {
        let (i, j) = domain.pixel_of(k);
        let (x, t) = world(i, j);
        let (f, df) = vase_profile(t);
        let z = (f * f - x * x).sqrt();
        v.push(T::lit(scale * z));
        p.push(T::lit(-x / z));
        q.push(T::lit(f * df / z));
    }
    Ok(Dataset {
        name: "vase".into(),
        domain,
        gradient: GradientField { p, q },
        ground_truth: Some(DepthMap::new(v)),
    })
}

/// Ellipse parameters for the head phantom.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomTable {
    /// Original Shepp–Logan intensities.
    SheppLogan,
    /// Higher-contrast variant with intensities `1, −0.8, −0.2, …`, the
    /// usual default in numerical packages.
    #[default]
    Modified,
}

/// `(a, b, x0, y0, phi°)` shared by both tables.
const ELLIPSES: [(f64, f64, f64, f64, f64); 10] = [
    (0.69, 0.92, 0.0, 0.0, 0.0),
    (0.6624, 0.874, 0.0, -0.0184, 0.0),
    (0.11, 0.31, 0.22, 0.0, -18.0),
    (0.16, 0.41, -0.22, 0.0, 18.0),
    (0.21, 0.25, 0.0, 0.35, 0.0),
    (0.046, 0.046, 0.0, 0.1, 0.0),
    (0.046, 0.046, 0.0, -0.1, 0.0),
    (0.046, 0.023, -0.08, -0.605, 0.0),
    (0.023, 0.023, 0.0, -0.606, 0.0),
    (0.023, 0.046, 0.06, -0.605, 0.0),
];

impl PhantomTable {
    fn intensities(self) -> [f64; 10] {
        match self {
            PhantomTable::SheppLogan => [2.0, -0.98, -0.02, -0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01],
            PhantomTable::Modified => [1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1],
        }
    }
}

/// Head phantom image on `[−1, 1]²`, scaled so its maximum is 255.
/// Row 0 is the top of the head.
pub fn shepp_logan(n: usize, table: PhantomTable) -> Vec<f64> {
    let amps = table.intensities();
    let mut img = vec![0.0; n * n];
    for j in 0..n {
        let y = -coord(j, n, 1.0);
        for i in 0..n {
            let x = coord(i, n, 1.0);
            img[j * n + i] = ELLIPSES
                .iter()
                .zip(amps)
                .filter(|&(&(a, b, x0, y0, phi), _)| {
                    let (s, c) = phi.to_radians().sin_cos();
                    let (dx, dy) = (x - x0, y - y0);
                    let u = dx * c + dy * s;
                    let w = -dx * s + dy * c;
                    (u / a).powi(2) + (w / b).powi(2) <= 1.0
                })
                .map(|(_, amp)| amp)
                .sum();
        }
    }
    let max = img.iter().copied().fold(f64::MIN, f64::max);
    img.iter_mut().for_each(|v| *v *= 255.0 / max);
    img
}

/// Phantom image as a depth map with forward-difference gradients.
pub fn gen_phantom<T: Real>(n: usize, table: PhantomTable) -> Result<Dataset<T>> {
    check_size(n, 8)?;
    let img: Vec<T> = shepp_logan(n, table).into_iter().map(T::lit).collect();
    let gradient = gradient_from_image(&img, n, n)?;
    Ok(Dataset {
        name: "phantom".into(),
        domain: Domain::full(n, n)?,
        gradient,
        ground_truth: Some(DepthMap::new(img)),
    })
}

/// Forward differences of a row-major image, backward on the last
/// column and row.
pub fn gradient_from_image<T: Real>(image: &[T], width: usize, height: usize) -> Result<GradientField<T>> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidArgument(format!("image must be at least 2×2, got {width}×{height}")));
    }
    if image.len() != width * height {
        return Err(Error::DimensionMismatch { expected: width * height, got: image.len() });
    }
    let at = |x: usize, y: usize| image[y * width + x];
    let mut p = Vec::with_capacity(image.len());
    let mut q = Vec::with_capacity(image.len());
    for y in 0..height {
        for x in 0..width {
            p.push(if x + 1 < width { at(x + 1, y) - at(x, y) } else { at(x, y) - at(x - 1, y) });
            q.push(if y + 1 < height { at(x, y + 1) - at(x, y) } else { at(x, y) - at(x, y - 1) });
        }
    }
    Ok(GradientField { p, q })
}

/// Adds Gaussian noise with `σ = pct/100 · max(|p|, |q|)` to both components.
pub fn add_noise<T: Real>(g: &GradientField<T>, sigma_pct: f64, seed: u64) -> Result<GradientField<T>> {
    if !(0.0..=100.0).contains(&sigma_pct) {
        return Err(Error::InvalidArgument(format!("noise percentage must be in [0, 100], got {sigma_pct}")));
    }
    if sigma_pct == 0.0 {
        return Ok(g.clone());
    }
    let sigma = sigma_pct / 100.0 * g.max_abs().as_f64();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = g.clone();
    for k in 0..g.len() {
        out.p[k] += T::lit(normal.sample(&mut rng));
        out.q[k] += T::lit(normal.sample(&mut rng));
    }
    Ok(out)
}

/// Replaces `⌊fraction·n⌋` distinct pixels by `±magnitude·max(|p|, |q|)`
/// with independent random signs.
pub fn inject_outliers<T: Real>(
    g: &GradientField<T>,
    fraction: f64,
    magnitude: f64,
    seed: u64,
) -> Result<GradientField<T>> {
    if !(0.0..1.0).contains(&fraction) || !(magnitude > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "outliers need 0 ≤ fraction < 1 and magnitude > 0, got {fraction} and {magnitude}"
        )));
    }
    let count = (fraction * g.len() as f64).floor() as usize;
    let value = T::lit(magnitude) * g.max_abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, g.len(), count).into_vec();
    picked.sort_unstable();
    let mut out = g.clone();
    for k in picked {
        let sign = |b: bool| if b { value } else { -value };
        out.p[k] = sign(rng.random());
        out.q[k] = sign(rng.random());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sombrero_centre_and_symmetry() {
        let d = gen_sombrero::<f64>(33).unwrap();
        let c = d.domain.index_of(16, 16).unwrap();
        assert_eq!(d.gradient.p[c], 0.0);
        assert_eq!(d.gradient.q[c], 0.0);
        let v = &d.ground_truth.unwrap().values;
        assert_eq!(v[c], SOMBRERO_AMPLITUDE);
        for (i, j) in [(3, 7), (10, 30), (0, 5)] {
            let at = |x: usize, y: usize| v[y * 33 + x];
            assert!((at(i, j) - at(j, i)).abs() < 1e-12);
            assert!((at(i, j) - at(32 - i, j)).abs() < 1e-12);
        }
    }

    fn check_second_order(gen: fn(usize) -> Result<Dataset<f64>>, sizes: [usize; 2]) {
        // Max error of the analytic gradient against central differences
        // over interior pixels, at two resolutions.
        let err = |n: usize| {
            let d = gen(n).unwrap();
            let v = d.ground_truth.unwrap().values;
            let mut e: f64 = 0.0;
            for y in 1..n - 1 {
                for x in 1..n - 1 {
                    let k = y * n + x;
                    let cx = (v[k + 1] - v[k - 1]) / 2.0;
                    let cy = (v[k + n] - v[k - n]) / 2.0;
                    // Convert per-pixel differences back to per-unit slopes.
                    let h = 1.0 / (n - 1) as f64;
                    e = e.max((cx - d.gradient.p[k]).abs() / h).max((cy - d.gradient.q[k]).abs() / h);
                }
            }
            e
        };
        let ratio = err(sizes[0]) / err(sizes[1]);
        assert!(ratio > 3.5 && ratio < 4.5, "refinement ratio {ratio}");
    }

    #[test]
    fn analytic_gradients_are_second_order() {
        check_second_order(gen_sombrero, [129, 257]);
        check_second_order(gen_peaks, [65, 129]);
    }

    #[test]
    fn peaks_corners_decay() {
        for (x, y) in [(3.0, 3.0), (-3.0, 3.0), (3.0, -3.0), (-3.0, -3.0)] {
            assert!(peaks(x, y).0.abs() < 0.1);
        }
    }

    #[test]
    fn vase_symmetry() {
        let d = gen_vase::<f64>(65).unwrap();
        let m = d.domain.mask();
        for y in 0..65 {
            for x in 0..65 {
                assert_eq!(m.is_inside(x, y), m.is_inside(64 - x, y));
            }
        }
        for y in 0..65 {
            if let Some(k) = d.domain.index_of(32, y) {
                assert_eq!(d.gradient.p[k], 0.0);
            }
        }
        assert!(!d.domain.is_rectangular());
        assert!(d.gradient.is_finite());
    }

    #[test]
    fn vase_profile_derivative() {
        for t in [0.1, 0.35, 0.6, 0.9] {
            let e = 1e-6;
            let fd = (vase_profile(t + e).0 - vase_profile(t - e).0) / (2.0 * e);
            assert!((fd - vase_profile(t).1).abs() < 1e-7);
        }
    }

    #[test]
    fn image_gradients() {
        let flat = vec![4.0; 12];
        let g = gradient_from_image(&flat, 4, 3).unwrap();
        assert!(g.p.iter().chain(&g.q).all(|&v| v == 0.0));
        let ramp: Vec<f64> = (0..12).map(|k| (k % 4) as f64).collect();
        let g = gradient_from_image(&ramp, 4, 3).unwrap();
        assert!(g.p.iter().all(|&v| v == 1.0));
        assert!(g.q.iter().all(|&v| v == 0.0));
        assert!(gradient_from_image(&[1.0], 1, 1).is_err());
    }

    #[test]
    fn phantom_tables() {
        let std = shepp_logan(64, PhantomTable::SheppLogan);
        let modi = shepp_logan(64, PhantomTable::Modified);
        assert_eq!(std.iter().copied().fold(0.0, f64::max), 255.0);
        assert_eq!(std[0], 0.0);
        assert_ne!(std, modi);
        let d = gen_phantom::<f64>(64, PhantomTable::SheppLogan).unwrap();
        assert!(d.gradient.max_abs() > 10.0);
    }

    #[test]
    fn noise_statistics() {
        let n = 500_000;
        let g = GradientField::new(vec![1.0; n], vec![-2.0; n]).unwrap();
        assert_eq!(add_noise(&g, 0.0, 1).unwrap(), g);
        let out = add_noise(&g, 10.0, 7).unwrap();
        let diffs: Vec<f64> =
            out.p.iter().zip(&g.p).chain(out.q.iter().zip(&g.q)).map(|(a, b)| a - b).collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt();
        assert!((sd - 0.2).abs() < 0.002, "sd {sd}");
        assert_eq!(add_noise(&g, 10.0, 7).unwrap(), out);
        assert_ne!(add_noise(&g, 10.0, 8).unwrap(), out);
    }

    #[test]
    fn outlier_count_is_exact() {
        let n = 1000;
        let g = GradientField::new((0..n).map(|k| (k as f64).sin()).collect(), vec![0.5; n]).unwrap();
        let out = inject_outliers(&g, 0.013, 10.0, 3).unwrap();
        let changed = (0..n).filter(|&k| out.p[k] != g.p[k] || out.q[k] != g.q[k]).count();
        assert_eq!(changed, 13);
        let none = inject_outliers(&g, 0.0009, 10.0, 3).unwrap();
        assert_eq!(none, g);
        assert_eq!(inject_outliers(&g, 0.013, 10.0, 3).unwrap(), out);
        assert!(inject_outliers(&g, 0.5, 0.0, 3).is_err());
    }

    #[test]
    fn dataset_names_parse() {
        for k in DatasetKind::ALL {
            assert_eq!(k.name().parse::<DatasetKind>().unwrap(), k);
        }
        assert!("lena".parse::<DatasetKind>().is_err());
    }
}
