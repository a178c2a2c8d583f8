//! The truncated Fourier lattice on the 2-torus and its FFT machinery.
//!
//! The torus is identified with the cube [-1/2, 1/2)^2; the N x N physical
//! grid has nodes x_j = -1/2 + j/N and the spectral side keeps every
//! wavevector k = (k1, k2) with kj in {-N/2, ..., N/2 - 1}. Arrays are stored
//! row-major with the row index running over x2 (so `grid[i2 * n + i1]`).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Square spectral lattice of even size `n`, with cached FFT plans and the
/// norm accumulation order.
pub struct FourierLattice {
    n: usize,
    /// 1D index -> signed wavenumber (fft layout: 0, 1, ..., n/2-1, -n/2, ..., -1).
    kval: Vec<i64>,
    /// Linear indices sorted by |k|^2 descending (ties by index ascending);
    /// norm sums accumulate in this order.
    order_desc: Vec<u32>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Lazily built companion lattice of twice the size, for oversampled
    /// (alias-free) product quadrature.
    doubled: std::sync::OnceLock<Arc<FourierLattice>>,
}

impl std::fmt::Debug for FourierLattice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierLattice").field("n", &self.n).finish()
    }
}

impl FourierLattice {
    pub fn new(n: usize) -> Result<Arc<Self>> {
        if n < 16 || n % 2 != 0 {
            return Err(Error::BadGridSize(n));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let kval: Vec<i64> = (0..n)
            .map(|m| if m < n / 2 { m as i64 } else { m as i64 - n as i64 })
            .collect();
        let mut order_desc: Vec<u32> = (0..(n * n) as u32).collect();
        let ksq = |idx: u32| {
            let (k1, k2) = (kval[idx as usize % n], kval[idx as usize / n]);
            k1 * k1 + k2 * k2
        };
        order_desc.sort_by(|&a, &b| ksq(b).cmp(&ksq(a)).then(a.cmp(&b)));
        Ok(Arc::new(Self { n, kval, order_desc, fwd, inv, doubled: std::sync::OnceLock::new() }))
    }

    /// The cached lattice of twice the size.
    pub fn doubled(&self) -> &Arc<FourierLattice> {
        self.doubled
            .get_or_init(|| FourierLattice::new(2 * self.n).expect("doubled lattice size is valid"))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Signed wavenumber of a 1D index.
    #[inline]
    pub fn k_of(&self, idx1d: usize) -> i64 {
        self.kval[idx1d]
    }

    /// Wavevector of a linear coefficient index.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> (i64, i64) {
        (self.kval[idx % self.n], self.kval[idx / self.n])
    }

    /// Linear index of a wavevector; `None` when k is off the lattice.
    pub fn index_of(&self, k: (i64, i64)) -> Option<usize> {
        let half = self.n as i64 / 2;
        let ok = |kj: i64| (-half..half).contains(&kj);
        if !ok(k.0) || !ok(k.1) {
            return None;
        }
        let wrap = |kj: i64| kj.rem_euclid(self.n as i64) as usize;
        Some(wrap(k.1) * self.n + wrap(k.0))
    }

    /// Physical grid coordinate of 1D index j (same for both axes).
    #[inline]
    pub fn coord(&self, j: usize) -> f64 {
        -0.5 + j as f64 / self.n as f64
    }

    /// Norm accumulation order: linear indices by descending |k|.
    #[inline]
    pub fn norm_order(&self) -> &[u32] {
        &self.order_desc
    }

    /// True when the mode survives the 2/3 dealiasing rule
    /// (max(|k1|, |k2|) <= N/3).
    #[inline]
    pub fn in_dealias_ball(&self, k: (i64, i64)) -> bool {
        3 * k.0.abs().max(k.1.abs()) <= self.n as i64
    }

    /// Nyquist row/column test; derivatives are zeroed on these modes.
    #[inline]
    pub fn has_nyquist(&self, k: (i64, i64)) -> bool {
        let m = -(self.n as i64) / 2;
        k.0 == m || k.1 == m
    }

    /// In-place 2D FFT, unnormalized (forward: e^{-2 pi i j m / N}).
    pub(crate) fn fft2_unnorm(&self, buf: &mut [Complex64]) {
        self.transform2(buf, &self.fwd);
    }

    /// In-place 2D inverse FFT, unnormalized (e^{+2 pi i j m / N}).
    pub(crate) fn ifft2_unnorm(&self, buf: &mut [Complex64]) {
        self.transform2(buf, &self.inv);
    }

    fn transform2(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(buf.len(), n * n);
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        for row in buf.chunks_exact_mut(n) {
            plan.process_with_scratch(row, &mut scratch);
        }
        // columns via transpose so the 1D transforms stay contiguous
        let mut t = vec![Complex64::default(); n * n];
        transpose_square(buf, &mut t, n);
        for row in t.chunks_exact_mut(n) {
            plan.process_with_scratch(row, &mut scratch);
        }
        transpose_square(&t, buf, n);
    }
}

fn transpose_square(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for b2 in (0..n).step_by(BLOCK) {
        for b1 in (0..n).step_by(BLOCK) {
            for i2 in b2..(b2 + BLOCK).min(n) {
                for i1 in b1..(b1 + BLOCK).min(n) {
                    dst[i1 * n + i2] = src[i2 * n + i1];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(FourierLattice::new(8).is_err());
        assert!(FourierLattice::new(33).is_err());
        assert!(FourierLattice::new(16).is_ok());
    }

    #[test]
    fn wavevector_index_bijection() {
        let lat = FourierLattice::new(16).unwrap();
        for idx in 0..lat.len() {
            let k = lat.wavevector(idx);
            assert!((-8..8).contains(&k.0) && (-8..8).contains(&k.1));
            assert_eq!(lat.index_of(k), Some(idx));
        }
        assert_eq!(lat.index_of((8, 0)), None);
        assert_eq!(lat.index_of((0, -9)), None);
    }

    #[test]
    fn fft_roundtrip_unnormalized() {
        let lat = FourierLattice::new(16).unwrap();
        let mut buf: Vec<Complex64> = (0..lat.len())
            .map(|i| Complex64::new((i % 7) as f64 - 3.0, (i % 5) as f64))
            .collect();
        let orig = buf.clone();
        lat.fft2_unnorm(&mut buf);
        lat.ifft2_unnorm(&mut buf);
        let scale = (lat.len()) as f64;
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a / scale - b).norm() < 1e-12);
        }
    }

    #[test]
    fn norm_order_is_descending() {
        let lat = FourierLattice::new(16).unwrap();
        let ksq = |i: u32| {
            let (k1, k2) = lat.wavevector(i as usize);
            k1 * k1 + k2 * k2
        };
        for w in lat.norm_order().windows(2) {
            assert!(ksq(w[0]) >= ksq(w[1]));
        }
    }

    #[test]
    fn dealias_ball_cutoff() {
        let lat = FourierLattice::new(32).unwrap();
        assert!(lat.in_dealias_ball((10, -10)));
        assert!(!lat.in_dealias_ball((11, 0)));
    }
}
