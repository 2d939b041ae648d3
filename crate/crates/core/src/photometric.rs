//! Lambertian photometric stereo with known directional lights.

use crate::domain::{Domain, Side};
use crate::error::{Error, Result};
use crate::field::{DepthMap, GradientField};
use crate::metrics::ssim;
use crate::scalar::Real;

/// Lower bound on the normal's `z` component.
pub const MIN_NZ: f64 = 1e-2;
/// Albedo below this fraction of the largest albedo marks a pixel degenerate.
const MIN_RELATIVE_ALBEDO: f64 = 1e-6;

/// `m ≥ 3` images over one domain with their unit light directions.
#[derive(Clone, Debug)]
pub struct PsProblem<T> {
    pub domain: Domain,
    /// One intensity per domain pixel, per image.
    pub images: Vec<Vec<T>>,
    pub lightings: Vec<[f64; 3]>,
}

impl<T: Real> PsProblem<T> {
    pub fn new(domain: Domain, images: Vec<Vec<T>>, lightings: Vec<[f64; 3]>) -> Result<Self> {
        if images.len() != lightings.len() {
            return Err(Error::DimensionMismatch { expected: lightings.len(), got: images.len() });
        }
        if images.len() < 3 {
            return Err(Error::InvalidArgument(format!("need at least 3 images, got {}", images.len())));
        }
        for img in &images {
            if img.len() != domain.len() {
                return Err(Error::DimensionMismatch { expected: domain.len(), got: img.len() });
            }
        }
        let lightings = lightings.into_iter().map(normalize).collect();
        Ok(Self { domain, images, lightings })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalField<T> {
    pub normals: Vec<[T; 3]>,
    pub albedo: Vec<T>,
    /// Pixels whose normal could not be estimated or was clamped.
    pub degenerate: Vec<bool>,
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// `(LᵀL)⁻¹Lᵀ` for the `m × 3` light matrix.
fn pseudo_inverse(lights: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
    let mut g = [[0.0; 3]; 3];
    for l in lights {
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] += l[i] * l[j];
            }
        }
    }
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| g[r0][c0] * g[r1][c1] - g[r0][c1] * g[r1][c0];
    let det = g[0][0] * cof(1, 2, 1, 2) - g[0][1] * cof(1, 2, 0, 2) + g[0][2] * cof(1, 2, 0, 1);
    let scale = g.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if !(det.abs() > 1e-10 * scale.powi(3)) {
        return Err(Error::RankDeficientLighting);
    }
    let inv = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    Ok(lights
        .iter()
        .map(|l| {
            let mut col = [0.0; 3];
            for (i, c) in col.iter_mut().enumerate() {
                *c = (0..3).map(|j| inv[i][j] * l[j]).sum::<f64>() / det;
            }
            col
        })
        .collect())
}

/// Per-pixel least squares `L·(ρ n) = I`.
pub fn estimate_normals<T: Real>(problem: &PsProblem<T>) -> Result<NormalField<T>> {
    let pinv = pseudo_inverse(&problem.lightings)?;
    let n = problem.domain.len();
    let mut raw = Vec::with_capacity(n);
    for k in 0..n {
        let mut m = [0.0; 3];
        for (img, col) in problem.images.iter().zip(&pinv) {
            let i = img[k].as_f64();
            for a in 0..3 {
                m[a] += col[a] * i;
            }
        }
        raw.push(m);
    }
    let rho: Vec<f64> = raw.iter().map(|m| (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt()).collect();
    let max_rho = rho.iter().copied().fold(0.0, f64::max);
    let mut out = NormalField { normals: Vec::with_capacity(n), albedo: Vec::with_capacity(n), degenerate: Vec::with_capacity(n) };
    for (m, &r) in raw.iter().zip(&rho) {
        let nz = if r > 0.0 { m[2] / r } else { 0.0 };
        if r <= MIN_RELATIVE_ALBEDO * max_rho || nz <= MIN_NZ {
            out.normals.push([T::zero(), T::zero(), T::one()]);
            out.albedo.push(T::zero());
            out.degenerate.push(true);
        } else {
            out.normals.push([T::lit(m[0] / r), T::lit(m[1] / r), T::lit(nz)]);
            out.albedo.push(T::lit(r));
            out.degenerate.push(false);
        }
    }
    Ok(out)
}

/// `p = −n₁/n₃`, `q = −n₂/n₃`, with `n₃` clamped to at least
/// [`MIN_NZ`]; clamped pixels are returned flagged.
pub fn normals_to_gradient<T: Real>(nf: &NormalField<T>) -> (GradientField<T>, Vec<bool>) {
    let eps = T::lit(MIN_NZ);
    let mut g = GradientField::zeros(nf.normals.len());
    let mut flagged = nf.degenerate.clone();
    for (k, n) in nf.normals.iter().enumerate() {
        let nz = if n[2] < eps {
            flagged[k] = true;
            eps
        } else {
            n[2]
        };
        g.p[k] = -n[0] / nz;
        g.q[k] = -n[1] / nz;
    }
    (g, flagged)
}

/// Unit normals `(−p, −q, 1)/√(1 + p² + q²)`.
pub fn gradient_to_normals<T: Real>(g: &GradientField<T>) -> Vec<[T; 3]> {
    g.p.iter()
        .zip(&g.q)
        .map(|(&p, &q)| {
            let s = (T::one() + p * p + q * q).sqrt();
            [-p / s, -q / s, T::one() / s]
        })
        .collect()
}

/// Lambertian images `ρ·max(n·l, 0)`, one per light.
pub fn render<T: Real>(normals: &[[T; 3]], albedo: &[T], lightings: &[[f64; 3]]) -> Vec<Vec<T>> {
    lightings
        .iter()
        .map(|l| {
            let l = normalize(*l).map(T::lit);
            normals
                .iter()
                .zip(albedo)
                .map(|(n, &a)| a * (n[0] * l[0] + n[1] * l[1] + n[2] * l[2]).max(T::zero()))
                .collect()
        })
        .collect()
}

/// Gradient of a depth map by forward differences, backward where the
/// forward neighbour is missing, zero on an axis with no neighbour.
pub fn depth_gradient<T: Real>(depth: &DepthMap<T>, domain: &Domain) -> Result<GradientField<T>> {
    if depth.len() != domain.len() {
        return Err(Error::DimensionMismatch { expected: domain.len(), got: depth.len() });
    }
    let v = &depth.values;
    let diff = |k: usize, minus: Side, plus: Side| {
        if let Some(j) = domain.neighbor(k, plus) {
            v[j] - v[k]
        } else if let Some(j) = domain.neighbor(k, minus) {
            v[k] - v[j]
        } else {
            T::zero()
        }
    };
    Ok(GradientField {
        p: (0..domain.len()).map(|k| diff(k, Side::Left, Side::Right)).collect(),
        q: (0..domain.len()).map(|k| diff(k, Side::Down, Side::Up)).collect(),
    })
}

#[derive(Clone, Debug)]
pub struct Reprojection<T> {
    pub images: Vec<Vec<T>>,
    pub mse: Vec<f64>,
    pub ssim: Vec<f64>,
}

impl<T> Reprojection<T> {
    pub fn mean_mse(&self) -> f64 {
        self.mse.iter().sum::<f64>() / self.mse.len() as f64
    }

    pub fn mean_ssim(&self) -> f64 {
        self.ssim.iter().sum::<f64>() / self.ssim.len() as f64
    }
}

/// Renders `depth` under the problem's lights with the given albedo and
/// compares with the input images.
pub fn reproject<T: Real>(depth: &DepthMap<T>, albedo: &[T], problem: &PsProblem<T>) -> Result<Reprojection<T>> {
    if albedo.len() != problem.domain.len() {
        return Err(Error::DimensionMismatch { expected: problem.domain.len(), got: albedo.len() });
    }
    let normals = gradient_to_normals(&depth_gradient(depth, &problem.domain)?);
    let images = render(&normals, albedo, &problem.lightings);
    let mut mse = Vec::with_capacity(images.len());
    let mut sims = Vec::with_capacity(images.len());
    for (rendered, input) in images.iter().zip(&problem.images) {
        let a: Vec<f64> = input.iter().map(|v| v.as_f64()).collect();
        let b: Vec<f64> = rendered.iter().map(|v| v.as_f64()).collect();
        mse.push(a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64);
        sims.push(ssim(&a, &b, &problem.domain)?);
    }
    Ok(Reprojection { images, mse, ssim: sims })
}

/// Four lights tilted 30° from the viewing axis towards ±x and ±y.
pub fn default_lightings() -> Vec<[f64; 3]> {
    let (s, c) = 30f64.to_radians().sin_cos();
    vec![[s, 0.0, c], [0.0, s, c], [-s, 0.0, c], [0.0, -s, c]]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_problem() -> PsProblem<f64> {
        let d = Domain::full(4, 4).unwrap();
        let normals = vec![[0.0, 0.0, 1.0]; 16];
        let imgs = render(&normals, &[1.0; 16], &default_lightings());
        PsProblem::new(d, imgs, default_lightings()).unwrap()
    }

    #[test]
    fn flat_surface_exact() {
        let nf = estimate_normals(&flat_problem()).unwrap();
        for (n, a) in nf.normals.iter().zip(&nf.albedo) {
            assert!(n[0].abs() < 1e-10 && n[1].abs() < 1e-10 && (n[2] - 1.0).abs() < 1e-10);
            assert!((a - 1.0).abs() < 1e-10);
        }
        let (g, flagged) = normals_to_gradient(&nf);
        assert!(g.max_abs() < 1e-10);
        assert!(flagged.iter().all(|f| !f));
    }

    #[test]
    fn tilted_normal_gradient() {
        let s = 0.5f64.sqrt();
        let nf = NormalField { normals: vec![[-s, 0.0, s]], albedo: vec![1.0], degenerate: vec![false] };
        let (g, _) = normals_to_gradient(&nf);
        assert!((g.p[0] - 1.0).abs() < 1e-15 && g.q[0] == 0.0);
    }

    #[test]
    fn gradient_normal_round_trip() {
        let g = GradientField::<f64>::new(vec![0.3, -2.0, 5.0], vec![1.5, 0.0, -0.7]).unwrap();
        let normals = gradient_to_normals(&g);
        let nf = NormalField { normals, albedo: vec![1.0; 3], degenerate: vec![false; 3] };
        let (back, _) = normals_to_gradient(&nf);
        for k in 0..3 {
            assert!((back.p[k] - g.p[k]).abs() < 1e-12);
            assert!((back.q[k] - g.q[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn coplanar_lights_rejected() {
        let p = PsProblem::new(
            Domain::full(2, 2).unwrap(),
            vec![vec![1.0; 4]; 3],
            vec![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 2.0]],
        )
        .unwrap();
        assert!(matches!(estimate_normals(&p), Err(Error::RankDeficientLighting)));
    }

    #[test]
    fn too_few_images_rejected() {
        assert!(PsProblem::new(Domain::full(2, 2).unwrap(), vec![vec![1.0; 4]; 2], vec![[0.0, 0.0, 1.0]; 2]).is_err());
    }

    #[test]
    fn dark_pixel_is_degenerate() {
        let mut p = flat_problem();
        for img in &mut p.images {
            img[5] = 0.0;
        }
        let nf = estimate_normals(&p).unwrap();
        assert!(nf.degenerate[5]);
        assert_eq!(nf.normals[5], [0.0, 0.0, 1.0]);
        assert_eq!(nf.albedo[5], 0.0);
    }

    #[test]
    fn reprojection_ignores_constant() {
        let p = flat_problem();
        let depth = DepthMap::new((0..16).map(|k| (k % 4) as f64 * 0.1).collect());
        let a = reproject(&depth, &[1.0; 16], &p).unwrap();
        let b = reproject(&depth.shifted(7.0), &[1.0; 16], &p).unwrap();
        assert_eq!(a.mse, b.mse);
        let flat = reproject(&DepthMap::zeros(16), &[1.0; 16], &p).unwrap();
        assert!(flat.mean_mse() < 1e-20);
    }
}
