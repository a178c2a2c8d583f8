//! Observation/source windows and smooth bump constructions on the torus.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::lattice::FourierLattice;

/// C^3 polynomial blend: 0 at t <= 0, 1 at t >= 1, with three vanishing
/// derivatives at both ends.
pub fn c3_blend(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    let t4 = t * t * t * t;
    t4 * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t)
}

/// Periodic distance |x - c| on the torus.
pub fn torus_distance(x: (f64, f64), c: (f64, f64)) -> f64 {
    let wrap = |d: f64| d - d.round();
    let d1 = wrap(x.0 - c.0);
    let d2 = wrap(x.1 - c.1);
    (d1 * d1 + d2 * d2).sqrt()
}

/// An open disk window W with a smooth interior mask (1 inside radius/2,
/// 0 outside radius) and a smooth exterior mask for W^e = T^2 \ closure(W)
/// (0 inside radius, 1 outside 3 radius / 2). The two masks have disjoint
/// supports, so their product vanishes identically.
#[derive(Debug, Clone)]
pub struct Window {
    center: (f64, f64),
    radius: f64,
    lattice: Arc<FourierLattice>,
    mask: Vec<f64>,
    exterior: Vec<f64>,
}

impl Window {
    pub fn new(lattice: &Arc<FourierLattice>, center: (f64, f64), radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < 0.25) {
            return Err(Error::BadWindowRadius(radius));
        }
        let n = lattice.n();
        let mut mask = vec![0.0; n * n];
        let mut exterior = vec![0.0; n * n];
        for i2 in 0..n {
            for i1 in 0..n {
                let x = (lattice.coord(i1), lattice.coord(i2));
                let d = torus_distance(x, center);
                let idx = i2 * n + i1;
                mask[idx] = c3_blend((radius - d) / (radius / 2.0));
                exterior[idx] = 1.0 - c3_blend((1.5 * radius - d) / (radius / 2.0));
            }
        }
        Ok(Self { center, radius, lattice: lattice.clone(), mask, exterior })
    }

    #[inline]
    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn lattice(&self) -> &Arc<FourierLattice> {
        &self.lattice
    }

    /// Interior mask values on the physical grid.
    #[inline]
    pub fn mask(&self) -> &[f64] {
        &self.mask
    }

    /// Exterior mask values on the physical grid.
    #[inline]
    pub fn exterior_mask(&self) -> &[f64] {
        &self.exterior
    }

    /// Restrict a field to W (pointwise multiply by the interior mask).
    pub fn apply_mask(&self, field: &SpectralField) -> Result<SpectralField> {
        field.masked(&self.mask)
    }

    /// Restrict a field to W^e (pointwise multiply by the exterior mask).
    pub fn apply_exterior(&self, field: &SpectralField) -> Result<SpectralField> {
        field.masked(&self.exterior)
    }

    /// Largest |field| value outside the (open) support of the interior mask;
    /// used to detect support violations of sources.
    pub fn leakage_outside(&self, field: &SpectralField) -> f64 {
        let g = field.to_physical();
        let n = self.lattice.n();
        let mut worst = 0.0f64;
        for i2 in 0..n {
            for i1 in 0..n {
                let x = (self.lattice.coord(i1), self.lattice.coord(i2));
                if torus_distance(x, self.center) >= self.radius {
                    worst = worst.max(g[i2 * n + i1].abs());
                }
            }
        }
        worst
    }

    /// The interior mask as a spectral field (for smoothness diagnostics).
    pub fn mask_field(&self) -> SpectralField {
        SpectralField::to_spectral(&self.lattice, &self.mask).expect("mask has grid size")
    }

    pub fn exterior_field(&self) -> SpectralField {
        SpectralField::to_spectral(&self.lattice, &self.exterior).expect("mask has grid size")
    }
}

/// Radial C^infty mollifier exp(-1/(1 - (|x - c|/width)^2)) scaled to unit
/// mass, sampled on the lattice grid.
pub fn mollifier_bump(
    lattice: &Arc<FourierLattice>,
    center: (f64, f64),
    width: f64,
) -> SpectralField {
    let n = lattice.n();
    let mut g = vec![0.0; n * n];
    let mut total = 0.0;
    for i2 in 0..n {
        for i1 in 0..n {
            let x = (lattice.coord(i1), lattice.coord(i2));
            let rho = torus_distance(x, center) / width;
            if rho < 1.0 {
                let v = (-1.0 / (1.0 - rho * rho)).exp();
                g[i2 * n + i1] = v;
                total += v;
            }
        }
    }
    let mass = total / (n * n) as f64;
    for v in &mut g {
        *v /= mass;
    }
    SpectralField::to_spectral(lattice, &g).expect("bump has grid size")
}

/// Smooth plateau: exactly 1 for |x - c| <= inner, 0 for |x - c| >= outer,
/// with a C^infty exponential blend between.
pub fn plateau(
    lattice: &Arc<FourierLattice>,
    center: (f64, f64),
    inner: f64,
    outer: f64,
) -> SpectralField {
    assert!(outer > inner && inner > 0.0);
    let n = lattice.n();
    let mut g = vec![0.0; n * n];
    let blend = |t: f64| -> f64 {
        // B(t)/(B(t) + B(1-t)) with B(t) = exp(-1/t)
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            let b1 = (-1.0 / t).exp();
            let b2 = (-1.0 / (1.0 - t)).exp();
            b1 / (b1 + b2)
        }
    };
    for i2 in 0..n {
        for i1 in 0..n {
            let x = (lattice.coord(i1), lattice.coord(i2));
            let d = torus_distance(x, center);
            g[i2 * n + i1] = blend((outer - d) / (outer - inner));
        }
    }
    SpectralField::to_spectral(lattice, &g).expect("plateau has grid size")
}
