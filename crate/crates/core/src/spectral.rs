//! Frequency-domain Poisson baselines on full rectangles.
//!
//! Both use the symbols of the same second-order differences as the sparse
//! system, so they differ from it only in the boundary condition: periodic
//! for the Fourier method, free (Neumann) for the cosine method. The cosine
//! basis diagonalises the rectangle's graph Laplacian exactly.

use rustdct::rustfft::num_complex::Complex;
use rustdct::rustfft::FftPlanner;
use rustdct::DctPlanner;

use crate::domain::{Domain, DomainMask};
use crate::error::{Error, Result};
use crate::field::{DepthMap, GradientField};
use crate::poisson::divergence_rhs;
use crate::scalar::Real;

/// Gradient on a full `width × height` rectangle, row-major, with the mask
/// of the domain it was embedded from.
#[derive(Clone, Debug, PartialEq)]
pub struct RectGradient<T> {
    pub width: usize,
    pub height: usize,
    pub p: Vec<T>,
    pub q: Vec<T>,
    pub mask: DomainMask,
}

impl<T: Real> RectGradient<T> {
    fn check(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::InvalidArgument(format!(
                "spectral baselines need at least 2×2, got {}×{}",
                self.width, self.height
            )));
        }
        let n = self.width * self.height;
        for len in [self.p.len(), self.q.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        Ok(())
    }
}

/// Zero-fills the gradient outside the domain's bounding rectangle.
pub fn embed_masked<T: Real>(domain: &Domain, g: &GradientField<T>) -> Result<RectGradient<T>> {
    g.check_domain(domain)?;
    Ok(RectGradient {
        width: domain.width(),
        height: domain.height(),
        p: domain.scatter(&g.p, T::zero()),
        q: domain.scatter(&g.q, T::zero()),
        mask: domain.mask().clone(),
    })
}

/// Restricts a rectangle-sized depth to the domain's pixels.
pub fn restrict<T: Real>(domain: &Domain, rect: &DepthMap<T>) -> Result<DepthMap<T>> {
    let n = domain.width() * domain.height();
    if rect.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rect.len() });
    }
    Ok(DepthMap::new(domain.gather(&rect.values)))
}

/// Periodic-boundary Fourier integration; zero-frequency term set to 0.
///
/// Returns depth on the whole rectangle.
pub fn integrate_fft<T: Real>(g: &RectGradient<T>) -> Result<DepthMap<T>> {
    g.check()?;
    let (w, h) = (g.width, g.height);
    let mut planner = FftPlanner::<T>::new();
    let to_complex = |v: &[T]| v.iter().map(|&x| Complex::new(x, T::zero())).collect::<Vec<_>>();
    let mut ph = to_complex(&g.p);
    let mut qh = to_complex(&g.q);
    fft2(&mut planner, &mut ph, w, h, false);
    fft2(&mut planner, &mut qh, w, h, false);

    let two = T::lit(2.0);
    let tau = T::lit(std::f64::consts::TAU);
    let mut vh = vec![Complex::new(T::zero(), T::zero()); w * h];
    for l in 0..h {
        let wy = tau * T::from_usize_lossy(l) / T::from_usize_lossy(h);
        for k in 0..w {
            let wx = tau * T::from_usize_lossy(k) / T::from_usize_lossy(w);
            let symbol = two * wx.cos() + two * wy.cos() - two * two;
            if k == 0 && l == 0 {
                continue;
            }
            let c = l * w + k;
            // Central difference (f[x+1] − f[x−1]) / 2 has symbol i·sin ω.
            let div = (ph[c] * wx.sin() + qh[c] * wy.sin()) * Complex::new(T::zero(), T::one());
            vh[c] = div / symbol;
        }
    }
    fft2(&mut planner, &mut vh, w, h, true);
    let scale = T::from_usize_lossy(w * h);
    Ok(DepthMap::new(vh.iter().map(|c| c.re / scale).collect()))
}

fn fft2<T: Real>(planner: &mut FftPlanner<T>, data: &mut [Complex<T>], w: usize, h: usize, inverse: bool) {
    let row = if inverse { planner.plan_fft_inverse(w) } else { planner.plan_fft_forward(w) };
    row.process(data);
    let col = if inverse { planner.plan_fft_inverse(h) } else { planner.plan_fft_forward(h) };
    let mut t = transpose(data, w, h);
    col.process(&mut t);
    data.copy_from_slice(&transpose(&t, h, w));
}

/// Free-boundary cosine integration; zero mode set to 0.
///
/// Solves the same discrete system as the sparse Poisson route on the full
/// rectangle. Returns depth on the whole rectangle.
pub fn integrate_dct<T: Real>(g: &RectGradient<T>) -> Result<DepthMap<T>> {
    g.check()?;
    let (w, h) = (g.width, g.height);
    let full = Domain::full(w, h)?;
    let field = GradientField::new(g.p.clone(), g.q.clone())?;
    let mut b = divergence_rhs(&full, &field);

    let mut planner = DctPlanner::<T>::new();
    let (row2, col2) = (planner.plan_dct2(w), planner.plan_dct2(h));
    let (row3, col3) = (planner.plan_dct3(w), planner.plan_dct3(h));
    for chunk in b.chunks_exact_mut(w) {
        row2.process_dct2(chunk);
    }
    let mut t = transpose(&b, w, h);
    for chunk in t.chunks_exact_mut(h) {
        col2.process_dct2(chunk);
    }

    // Eigenvalues of the Neumann path Laplacian: 2 − 2cos(πk/N).
    let two = T::lit(2.0);
    let pi = T::lit(std::f64::consts::PI);
    let eig = |k: usize, n: usize| two - two * (pi * T::from_usize_lossy(k) / T::from_usize_lossy(n)).cos();
    let ex: Vec<T> = (0..w).map(|k| eig(k, w)).collect();
    let ey: Vec<T> = (0..h).map(|l| eig(l, h)).collect();
    for k in 0..w {
        for l in 0..h {
            let c = k * h + l;
            t[c] = if k == 0 && l == 0 { T::zero() } else { t[c] / (ex[k] + ey[l]) };
        }
    }

    for chunk in t.chunks_exact_mut(h) {
        col3.process_dct3(chunk);
    }
    let mut v = transpose(&t, h, w);
    for chunk in v.chunks_exact_mut(w) {
        row3.process_dct3(chunk);
    }
    // DCT-III after DCT-II scales by N/2 per axis.
    let scale = T::lit(4.0) / T::from_usize_lossy(w * h);
    Ok(DepthMap::new(v.into_iter().map(|x| x * scale).collect()))
}

/// Transpose of a row-major `w × h` buffer.
fn transpose<U: Copy>(data: &[U], w: usize, h: usize) -> Vec<U> {
    let mut out = Vec::with_capacity(data.len());
    for x in 0..w {
        for y in 0..h {
            out.push(data[y * w + x]);
        }
    }
    out
}
