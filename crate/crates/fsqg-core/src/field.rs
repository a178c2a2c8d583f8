//! Real scalar fields on the torus stored as truncated Fourier coefficients.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::FourierLattice;

/// Sobolev norm flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SobolevKind {
    /// (sum over k of (1 + |k|^2)^r |u(k)|^2)^{1/2}
    Inhomogeneous,
    /// (sum over k != 0 of |k|^{2r} |u(k)|^2)^{1/2}
    Homogeneous,
}

/// A real field on the torus, represented by its Fourier coefficients on the
/// full N x N lattice. Hermitian symmetry u(-k) = conj(u(k)) is maintained by
/// every constructor and operation.
#[derive(Debug, Clone)]
pub struct SpectralField {
    lattice: Arc<FourierLattice>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zero(lattice: &Arc<FourierLattice>) -> Self {
        Self { lattice: lattice.clone(), coeffs: vec![Complex64::default(); lattice.len()] }
    }

    /// Build a field from raw coefficients (Hermitian symmetry is projected).
    pub fn from_coeffs(lattice: &Arc<FourierLattice>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != lattice.len() {
            return Err(Error::DimensionMismatch { expected: lattice.len(), got: coeffs.len() });
        }
        let mut f = Self { lattice: lattice.clone(), coeffs };
        f.hermitian_project();
        Ok(f)
    }

    /// Transform physical grid values (row-major, row = x2 index) to
    /// spectral coefficients. Enforces Hermitian symmetry by projection.
    pub fn to_spectral(lattice: &Arc<FourierLattice>, grid: &[f64]) -> Result<Self> {
        if grid.len() != lattice.len() {
            return Err(Error::DimensionMismatch { expected: lattice.len(), got: grid.len() });
        }
        let mut buf: Vec<Complex64> = grid.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        lattice.fft2_unnorm(&mut buf);
        let scale = 1.0 / lattice.len() as f64;
        for (idx, c) in buf.iter_mut().enumerate() {
            let (k1, k2) = lattice.wavevector(idx);
            // phase for the grid origin at x = (-1/2, -1/2)
            let sign = if (k1 + k2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            *c *= sign * scale;
        }
        let mut f = Self { lattice: lattice.clone(), coeffs: buf };
        f.hermitian_project();
        Ok(f)
    }

    /// Evaluate on the physical grid (row-major, row = x2 index).
    pub fn to_physical(&self) -> Vec<f64> {
        let lat = &self.lattice;
        let mut buf = self.coeffs.clone();
        for (idx, c) in buf.iter_mut().enumerate() {
            let (k1, k2) = lat.wavevector(idx);
            if (k1 + k2).rem_euclid(2) != 0 {
                *c = -*c;
            }
        }
        lat.ifft2_unnorm(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Physical values on a `factor`-times oversampled grid via spectral
    /// zero padding (Nyquist coefficients are split across the +-N/2 pair).
    /// Factor 2 reuses the lattice's cached doubled companion.
    pub fn to_physical_oversampled(&self, factor: usize) -> Vec<f64> {
        assert!(factor >= 2);
        let n = self.lattice.n();
        let big = if factor == 2 {
            self.lattice.doubled().clone()
        } else {
            FourierLattice::new(n * factor).expect("oversampled lattice")
        };
        let mut coeffs = vec![Complex64::default(); big.len()];
        let half = n as i64 / 2;
        let big_n = big.n() as i64;
        let wrap = |kj: i64| kj.rem_euclid(big_n) as usize;
        for (idx, &c) in self.coeffs.iter().enumerate() {
            let (k1, k2) = self.lattice.wavevector(idx);
            if k1 != -half && k2 != -half {
                coeffs[wrap(k2) * big.n() + wrap(k1)] += c;
                continue;
            }
            // Nyquist coefficients split across the +-N/2 pair
            let split = |kj: i64| -> [(i64, f64); 2] {
                if kj == -half {
                    [(-half, 0.5), (half, 0.5)]
                } else {
                    [(kj, 1.0), (kj, 0.0)]
                }
            };
            for &(q1, w1) in &split(k1) {
                for &(q2, w2) in &split(k2) {
                    let w = w1 * w2;
                    if w != 0.0 {
                        coeffs[wrap(q2) * big.n() + wrap(q1)] += c * w;
                    }
                }
            }
        }
        for (idx, c) in coeffs.iter_mut().enumerate() {
            let (k1, k2) = big.wavevector(idx);
            if (k1 + k2).rem_euclid(2) != 0 {
                *c = -*c;
            }
        }
        big.ifft2_unnorm(&mut coeffs);
        coeffs.into_iter().map(|c| c.re).collect()
    }

    /// Random smooth mean-zero field: Gaussian coefficients on |k|_inf <= kmax
    /// shaped by exp(-|k|^2 / (2 k0^2)), normalized to unit L2.
    pub fn random_smooth(lattice: &Arc<FourierLattice>, kmax: i64, k0: f64, rng: &mut impl Rng) -> Self {
        let mut f = Self::zero(lattice);
        for idx in 0..lattice.len() {
            let (k1, k2) = lattice.wavevector(idx);
            if (k1 == 0 && k2 == 0) || k1.abs() > kmax || k2.abs() > kmax {
                continue;
            }
            let ksq = (k1 * k1 + k2 * k2) as f64;
            let shape = (-ksq / (2.0 * k0 * k0)).exp();
            let re: f64 = rng.gen::<f64>() - 0.5;
            let im: f64 = rng.gen::<f64>() - 0.5;
            f.coeffs[idx] = Complex64::new(re, im) * shape;
        }
        f.hermitian_project();
        let nrm = f.l2_norm();
        if nrm > 0.0 {
            f.scale_mut(1.0 / nrm);
        }
        f
    }

    /// Seeded variant of [`random_smooth`](Self::random_smooth).
    pub fn random_smooth_seeded(lattice: &Arc<FourierLattice>, kmax: i64, k0: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random_smooth(lattice, kmax, k0, &mut rng)
    }

    #[inline]
    pub fn lattice(&self) -> &Arc<FourierLattice> {
        &self.lattice
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at wavevector k (zero off the lattice).
    pub fn coeff(&self, k: (i64, i64)) -> Complex64 {
        self.lattice.index_of(k).map(|i| self.coeffs[i]).unwrap_or_default()
    }

    pub fn set_coeff(&mut self, k: (i64, i64), value: Complex64) {
        if let Some(i) = self.lattice.index_of(k) {
            self.coeffs[i] = value;
        }
        // keep the conjugate partner consistent
        if let Some(j) = self.lattice.index_of((-k.0, -k.1)) {
            if Some(j) != self.lattice.index_of(k) {
                self.coeffs[j] = value.conj();
            } else {
                self.coeffs[j] = Complex64::new(value.re, 0.0);
            }
        }
    }

    /// Spatial mean (the k = 0 coefficient).
    #[inline]
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn zero_mean_mut(&mut self) {
        self.coeffs[0] = Complex64::default();
    }

    pub fn same_lattice(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.lattice, &other.lattice) || self.lattice.n() == other.lattice.n() {
            Ok(())
        } else {
            Err(Error::LatticeMismatch(self.lattice.n(), other.lattice.n()))
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_lattice(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Self { lattice: self.lattice.clone(), coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_lattice(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(Self { lattice: self.lattice.clone(), coeffs })
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale_mut(s);
        out
    }

    pub fn scale_mut(&mut self, s: f64) {
        for c in &mut self.coeffs {
            *c *= s;
        }
    }

    /// self += s * other
    pub fn axpy_mut(&mut self, s: f64, other: &Self) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    /// Pointwise product on the physical grid (no dealiasing).
    pub fn pointwise_mul(&self, other: &Self) -> Result<Self> {
        self.same_lattice(other)?;
        let a = self.to_physical();
        let b = other.to_physical();
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Self::to_spectral(&self.lattice, &prod)
    }

    /// Multiply by a physical-space mask. Equivalent to a to_physical /
    /// multiply / to_spectral roundtrip, fused into one complex buffer.
    pub fn masked(&self, mask: &[f64]) -> Result<Self> {
        if mask.len() != self.coeffs.len() {
            return Err(Error::DimensionMismatch { expected: self.coeffs.len(), got: mask.len() });
        }
        let lat = &self.lattice;
        let mut buf = self.coeffs.clone();
        for (idx, c) in buf.iter_mut().enumerate() {
            let (k1, k2) = lat.wavevector(idx);
            if (k1 + k2).rem_euclid(2) != 0 {
                *c = -*c;
            }
        }
        lat.ifft2_unnorm(&mut buf);
        for (c, &m) in buf.iter_mut().zip(mask) {
            *c = Complex64::new(c.re * m, 0.0);
        }
        lat.fft2_unnorm(&mut buf);
        let scale = 1.0 / lat.len() as f64;
        for (idx, c) in buf.iter_mut().enumerate() {
            let (k1, k2) = lat.wavevector(idx);
            let sign = if (k1 + k2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            *c *= sign * scale;
        }
        let mut out = Self { lattice: lat.clone(), coeffs: buf };
        out.hermitian_project();
        Ok(out)
    }

    /// L2 inner product int f g dx = sum_k f(k) conj(g(k)).
    pub fn inner(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a * b.conj()).re).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(0.0, SobolevKind::Inhomogeneous)
    }

    /// Sobolev norm of the stated kind; the sum accumulates over modes in
    /// descending |k| order.
    pub fn sobolev_norm(&self, r: f64, kind: SobolevKind) -> f64 {
        let mut acc = 0.0;
        for &idx in self.lattice.norm_order() {
            let (k1, k2) = self.lattice.wavevector(idx as usize);
            let ksq = (k1 * k1 + k2 * k2) as f64;
            let w = match kind {
                SobolevKind::Inhomogeneous => (1.0 + ksq).powf(r),
                SobolevKind::Homogeneous => {
                    if ksq == 0.0 {
                        continue;
                    }
                    ksq.powf(r)
                }
            };
            acc += w * self.coeffs[idx as usize].norm_sqr();
        }
        acc.sqrt()
    }

    /// Apply the fractional Laplacian (-Delta)^r: coefficient at k is scaled
    /// by |2 pi k|^{2r}. The mean is unchanged for r = 0 and zeroed for r > 0.
    pub fn fractional_laplacian(&self, r: f64) -> Result<Self> {
        if r < 0.0 {
            return Err(Error::NegativeOrder(r));
        }
        let mut out = self.clone();
        if r == 0.0 {
            return Ok(out);
        }
        for (idx, c) in out.coeffs.iter_mut().enumerate() {
            let (k1, k2) = self.lattice.wavevector(idx);
            let ksq = (k1 * k1 + k2 * k2) as f64;
            if ksq == 0.0 {
                *c = Complex64::default();
            } else {
                *c *= (2.0 * PI * ksq.sqrt()).powf(2.0 * r);
            }
        }
        Ok(out)
    }

    /// Spectral partial derivative along axis (1 or 2). The unpaired Nyquist
    /// mode kj = -N/2 is zeroed.
    pub fn derivative(&self, axis: usize) -> Self {
        assert!(axis == 1 || axis == 2);
        let mut out = self.clone();
        let nyq = -(self.lattice.n() as i64) / 2;
        for (idx, c) in out.coeffs.iter_mut().enumerate() {
            let (k1, k2) = self.lattice.wavevector(idx);
            let kj = if axis == 1 { k1 } else { k2 };
            if kj == nyq {
                *c = Complex64::default();
            } else {
                *c *= Complex64::new(0.0, 2.0 * PI * kj as f64);
            }
        }
        out
    }

    /// Zero every mode outside the 2/3 dealiasing ball.
    pub fn dealias_mut(&mut self) {
        for idx in 0..self.coeffs.len() {
            let k = self.lattice.wavevector(idx);
            if !self.lattice.in_dealias_ball(k) {
                self.coeffs[idx] = Complex64::default();
            }
        }
    }

    pub fn dealiased(&self) -> Self {
        let mut out = self.clone();
        out.dealias_mut();
        out
    }

    /// Largest |coefficient| over the lattice.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest |coefficient| on modes with max(|k1|,|k2|) >= kmin.
    pub fn spectral_tail(&self, kmin: i64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(idx, _)| {
                let (k1, k2) = self.lattice.wavevector(*idx);
                k1.abs().max(k2.abs()) >= kmin
            })
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }

    /// Sup norm on the physical grid.
    pub fn sup_norm(&self) -> f64 {
        self.to_physical().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn has_non_finite(&self) -> bool {
        self.coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite())
    }

    /// Project onto Hermitian symmetry u(-k) = conj(u(k)) (indices paired
    /// mod N), making the physical field real.
    pub fn hermitian_project(&mut self) {
        let n = self.lattice.n();
        for i2 in 0..n {
            let j2 = (n - i2) % n;
            for i1 in 0..n {
                let j1 = (n - i1) % n;
                let a = i2 * n + i1;
                let b = j2 * n + j1;
                if a < b {
                    let avg = 0.5 * (self.coeffs[a] + self.coeffs[b].conj());
                    self.coeffs[a] = avg;
                    self.coeffs[b] = avg.conj();
                } else if a == b {
                    self.coeffs[a] = Complex64::new(self.coeffs[a].re, 0.0);
                }
            }
        }
    }
}

/// Exact integral of a product of two fields (trig polynomials) using a
/// twice-oversampled grid; alias-free for bandwidths up to the full lattice.
pub fn integral_product2(a: &SpectralField, b: &SpectralField) -> f64 {
    let ga = a.to_physical_oversampled(2);
    let gb = b.to_physical_oversampled(2);
    let m = ga.len() as f64;
    ga.iter().zip(&gb).map(|(x, y)| x * y).sum::<f64>() / m
}

/// Exact integral of a triple product via a twice-oversampled grid.
pub fn integral_product3(a: &SpectralField, b: &SpectralField, c: &SpectralField) -> f64 {
    let ga = a.to_physical_oversampled(2);
    let gb = b.to_physical_oversampled(2);
    let gc = c.to_physical_oversampled(2);
    let m = ga.len() as f64;
    ga.iter().zip(&gb).zip(&gc).map(|((x, y), z)| x * y * z).sum::<f64>() / m
}
