//! Order -1 Fourier multipliers, their kernels, and the induced
//! divergence-free velocity map.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::lattice::FourierLattice;

/// Closed-form families for the multiplier symbol m(k) with m(0) = 0.
#[derive(Debug, Clone, PartialEq)]
pub enum Symbol {
    /// m(k) = |k|^{-1} (the SQG case).
    Riesz,
    /// m(k) = |k|^{-1} (1 + amplitude * exp(-decay |k|^2)).
    Perturbed { amplitude: f64, decay: f64 },
    /// m(k) = |k|^{-1} (1 + eta(k)) with eta tabulated on listed wavevectors
    /// and zero elsewhere.
    Table { eta: BTreeMap<(i64, i64), f64> },
}

impl Symbol {
    /// Default perturbation eta(k) = (1/2) exp(-|k|^2), giving c = 1/2, C = 3/2.
    pub fn default_perturbed() -> Self {
        Symbol::Perturbed { amplitude: 0.5, decay: 1.0 }
    }

    /// Evaluate the symbol at any integer wavevector.
    pub fn eval(&self, k: (i64, i64)) -> f64 {
        let ksq = (k.0 * k.0 + k.1 * k.1) as f64;
        if ksq == 0.0 {
            return 0.0;
        }
        let inv = 1.0 / ksq.sqrt();
        match self {
            Symbol::Riesz => inv,
            Symbol::Perturbed { amplitude, decay } => inv * (1.0 + amplitude * (-decay * ksq).exp()),
            Symbol::Table { eta } => inv * (1.0 + eta.get(&k).copied().unwrap_or(0.0)),
        }
    }
}

/// A validated multiplier of order -1: the symbol together with the constants
/// of its two-sided |k|^{-1} bound, checked over the whole lattice at
/// construction.
#[derive(Debug, Clone)]
pub struct MultiplierSpec {
    symbol: Symbol,
    c_lower: f64,
    c_upper: f64,
}

impl MultiplierSpec {
    pub fn new(symbol: Symbol, c_lower: f64, c_upper: f64, lattice: &FourierLattice) -> Result<Self> {
        if !(c_lower > 0.0 && c_upper >= c_lower) {
            return Err(Error::BadMultiplierConstants(c_lower, c_upper));
        }
        for idx in 0..lattice.len() {
            let k = lattice.wavevector(idx);
            if k == (0, 0) {
                continue;
            }
            let m = symbol.eval(k);
            let kn = ((k.0 * k.0 + k.1 * k.1) as f64).sqrt();
            if m < c_lower / kn - 1e-12 || m > c_upper / kn + 1e-12 {
                return Err(Error::MultiplierBound(k.0, k.1, m));
            }
            if lattice.index_of((-k.0, -k.1)).is_some() {
                let mneg = symbol.eval((-k.0, -k.1));
                if (m - mneg).abs() > 1e-12 * m.abs().max(1.0) {
                    return Err(Error::MultiplierNotEven(k.0, k.1, m, -k.0, -k.1, mneg));
                }
            }
        }
        Ok(Self { symbol, c_lower, c_upper })
    }

    /// The Riesz potential spec m(k) = |k|^{-1} with c = C = 1.
    pub fn riesz(lattice: &FourierLattice) -> Self {
        Self::new(Symbol::Riesz, 1.0, 1.0, lattice).expect("riesz symbol satisfies its own bounds")
    }

    /// The default perturbed spec, satisfying the bounds with c = 1/2, C = 3/2.
    pub fn perturbed(lattice: &FourierLattice) -> Self {
        Self::new(Symbol::default_perturbed(), 0.5, 1.5, lattice).expect("default perturbation in bounds")
    }

    #[inline]
    pub fn symbol(&self) -> &Symbol {
        &self.symbol
    }

    #[inline]
    pub fn m(&self, k: (i64, i64)) -> f64 {
        self.symbol.eval(k)
    }

    #[inline]
    pub fn c_lower(&self) -> f64 {
        self.c_lower
    }

    #[inline]
    pub fn c_upper(&self) -> f64 {
        self.c_upper
    }

    /// Describe the symbol for run manifests.
    pub fn describe(&self) -> String {
        match &self.symbol {
            Symbol::Riesz => "riesz".to_string(),
            Symbol::Perturbed { amplitude, decay } => {
                format!("perturbed(amplitude={amplitude}, decay={decay})")
            }
            Symbol::Table { eta } => format!("table({} entries)", eta.len()),
        }
    }
}

/// Apply the multiplier: coefficient at k becomes m(k) u(k); the mean is
/// zeroed (m(0) = 0).
pub fn apply_multiplier(field: &SpectralField, spec: &MultiplierSpec) -> SpectralField {
    let mut out = field.clone();
    let lat = field.lattice().clone();
    for (idx, c) in out.coeffs_mut().iter_mut().enumerate() {
        let k = lat.wavevector(idx);
        *c *= spec.m(k);
    }
    out
}

/// Two spectral fields forming the components of a velocity field.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub u1: SpectralField,
    pub u2: SpectralField,
}

impl VectorField {
    /// Largest relative spectral divergence max_k |2 pi k . u(k)| / max_k |u(k)|.
    pub fn relative_divergence(&self) -> f64 {
        let lat = self.u1.lattice();
        let mut div_max = 0.0f64;
        let mut amp_max = 0.0f64;
        for idx in 0..lat.len() {
            let (k1, k2) = lat.wavevector(idx);
            let d = Complex64::new(0.0, 2.0 * PI)
                * (k1 as f64 * self.u1.coeffs()[idx] + k2 as f64 * self.u2.coeffs()[idx]);
            div_max = div_max.max(d.norm());
            amp_max = amp_max.max(self.u1.coeffs()[idx].norm().max(self.u2.coeffs()[idx].norm()));
        }
        if amp_max == 0.0 {
            0.0
        } else {
            div_max / amp_max
        }
    }

    /// Largest pointwise speed max(|u1|, |u2|) on the grid.
    pub fn max_speed(&self) -> f64 {
        let g1 = self.u1.to_physical();
        let g2 = self.u2.to_physical();
        g1.iter()
            .zip(&g2)
            .map(|(a, b)| (a * a + b * b).sqrt())
            .fold(0.0, f64::max)
    }
}

/// The divergence-free velocity u = (-d2 Ktheta, d1 Ktheta):
/// u1(k) = -2 pi i k2 m(k) theta(k), u2(k) = 2 pi i k1 m(k) theta(k).
/// Modes on a Nyquist row or column are zeroed entirely so the pair stays
/// exactly divergence-free.
pub fn velocity(field: &SpectralField, spec: &MultiplierSpec) -> VectorField {
    let lat = field.lattice().clone();
    let mut u1 = field.clone();
    let mut u2 = field.clone();
    for idx in 0..lat.len() {
        let k = lat.wavevector(idx);
        if lat.has_nyquist(k) {
            u1.coeffs_mut()[idx] = Complex64::default();
            u2.coeffs_mut()[idx] = Complex64::default();
            continue;
        }
        let m = spec.m(k);
        let factor1 = Complex64::new(0.0, -2.0 * PI * k.1 as f64 * m);
        let factor2 = Complex64::new(0.0, 2.0 * PI * k.0 as f64 * m);
        let c = field.coeffs()[idx];
        u1.coeffs_mut()[idx] = factor1 * c;
        u2.coeffs_mut()[idx] = factor2 * c;
    }
    VectorField { u1, u2 }
}

/// Truncated kernel sum K(x) = sum over nonzero lattice k of m(k) e^{2 pi i x.k}
/// (real part). Evaluation at the singular point x = 0 is rejected.
pub fn kernel_physical(spec: &MultiplierSpec, lattice: &FourierLattice, x: (f64, f64)) -> Result<f64> {
    if x.0 == 0.0 && x.1 == 0.0 {
        return Err(Error::KernelAtOrigin);
    }
    let mut acc = 0.0;
    for idx in 0..lattice.len() {
        let k = lattice.wavevector(idx);
        if k == (0, 0) {
            continue;
        }
        let phase = 2.0 * PI * (x.0 * k.0 as f64 + x.1 * k.1 as f64);
        acc += spec.m(k) * phase.cos();
    }
    Ok(acc)
}

/// The dealiased pseudospectral advection term u . grad theta with u the
/// multiplier velocity of theta. The output mean is zeroed (divergence
/// structure). Also returns the maximum grid speed for CFL monitoring.
pub fn advection_with_speed(theta: &SpectralField, spec: &MultiplierSpec) -> (SpectralField, f64) {
    let vel = velocity(theta, spec);
    let u1 = vel.u1.dealiased().to_physical();
    let u2 = vel.u2.dealiased().to_physical();
    let g1 = theta.derivative(1).dealiased().to_physical();
    let g2 = theta.derivative(2).dealiased().to_physical();
    let max_speed = u1
        .iter()
        .zip(&u2)
        .map(|(a, b)| (a * a + b * b).sqrt())
        .fold(0.0, f64::max);
    let prod: Vec<f64> = (0..u1.len()).map(|i| u1[i] * g1[i] + u2[i] * g2[i]).collect();
    let mut out = SpectralField::to_spectral(theta.lattice(), &prod).expect("grid sizes agree");
    out.dealias_mut();
    out.zero_mean_mut();
    (out, max_speed)
}

/// The advection term alone.
pub fn advection_term(theta: &SpectralField, spec: &MultiplierSpec) -> SpectralField {
    advection_with_speed(theta, spec).0
}
