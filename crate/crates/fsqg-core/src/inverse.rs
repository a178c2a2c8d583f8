//! Source-to-solution measurements, the second-order integral identity, and
//! reconstruction of the kernel-difference gradient from exterior pairings.

use std::sync::Arc;

use rayon::prelude::*;

use crate::diffusion::solve_fractional_diffusion;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::lattice::FourierLattice;
use crate::multiplier::{apply_multiplier, velocity, MultiplierSpec};
use crate::scalar::solve_active_scalar;
use crate::time::{SourceTerm, TimeGrid};
use crate::window::{mollifier_bump, plateau, Window};

/// Physical-space recordings of (theta, u) restricted to the window, per
/// time node. Stored as masked grid values.
pub struct Measurement {
    pub grid: TimeGrid,
    pub n: usize,
    pub theta_w: Vec<Vec<f64>>,
    pub u1_w: Vec<Vec<f64>>,
    pub u2_w: Vec<Vec<f64>>,
}

impl Measurement {
    /// Sup-norm deviation between two measurements over all nodes and both
    /// recorded quantities.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        let pairs = [
            (&self.theta_w, &other.theta_w),
            (&self.u1_w, &other.u1_w),
            (&self.u2_w, &other.u2_w),
        ];
        for (a, b) in pairs {
            for (ga, gb) in a.iter().zip(b) {
                for (x, y) in ga.iter().zip(gb) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        let mut worst = 0.0f64;
        for block in [&self.theta_w, &self.u1_w, &self.u2_w] {
            for g in block {
                for v in g {
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    }
}

/// Run the nonlinear solver and record (theta, u) masked to the window.
pub fn source_to_solution(
    f: &SourceTerm,
    spec: &MultiplierSpec,
    window: &Window,
    lattice: &Arc<FourierLattice>,
    alpha: f64,
    grid: TimeGrid,
) -> Result<Measurement> {
    // support check: the source must vanish outside W x (0, T)
    let leakage = f.support_leakage(lattice, &grid)?;
    let mut scale = 0.0f64;
    for m in [0, grid.steps() / 2, grid.steps()] {
        scale = scale.max(f.eval(lattice, grid.node(m))?.sup_norm());
    }
    if f.window().is_none() && scale > 0.0 {
        // no declared window: measure leakage directly against this one
        let mut worst = 0.0f64;
        for m in [grid.steps() / 4, grid.steps() / 2, 3 * grid.steps() / 4] {
            let fld = f.eval(lattice, grid.node(m))?;
            worst = worst.max(window.leakage_outside(&fld));
        }
        if worst > 1e-10 * scale {
            return Err(Error::SupportViolation(worst));
        }
    } else if leakage > 1e-10 * scale.max(1e-300) {
        return Err(Error::SupportViolation(leakage));
    }

    let traj = solve_active_scalar(f, spec, lattice, alpha, grid)?;
    let mask = window.mask();
    let mut theta_w = Vec::with_capacity(grid.steps() + 1);
    let mut u1_w = Vec::with_capacity(grid.steps() + 1);
    let mut u2_w = Vec::with_capacity(grid.steps() + 1);
    for state in traj.states() {
        let vel = velocity(state, spec);
        let apply = |g: Vec<f64>| -> Vec<f64> {
            g.iter().zip(mask).map(|(v, m)| v * m).collect()
        };
        theta_w.push(apply(state.to_physical()));
        u1_w.push(apply(vel.u1.to_physical()));
        u2_w.push(apply(vel.u2.to_physical()));
    }
    Ok(Measurement { grid, n: lattice.n(), theta_w, u1_w, u2_w })
}

/// Compare the source-to-solution maps of two specs over a basket of sources.
/// Returns (equal within tol, max deviation).
pub fn maps_equal(
    spec1: &MultiplierSpec,
    spec2: &MultiplierSpec,
    sources: &[SourceTerm],
    window: &Window,
    lattice: &Arc<FourierLattice>,
    alpha: f64,
    grid: TimeGrid,
    tol: f64,
) -> Result<(bool, f64)> {
    let mut worst = 0.0f64;
    for f in sources {
        let m1 = source_to_solution(f, spec1, window, lattice, alpha, grid)?;
        let m2 = source_to_solution(f, spec2, window, lattice, alpha, grid)?;
        worst = worst.max(m1.sup_distance(&m2));
    }
    Ok((worst <= tol, worst))
}

/// A pair of disjoint smooth nonnegative unit-mass bumps in the exterior.
pub struct ProbePair {
    pub phi1: SpectralField,
    pub phi2: SpectralField,
}

impl ProbePair {
    pub fn new(phi1: SpectralField, phi2: SpectralField) -> Result<Self> {
        phi1.same_lattice(&phi2)?;
        let g1 = phi1.to_physical();
        let g2 = phi2.to_physical();
        let peak1 = g1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let peak2 = g2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let worst = g1
            .iter()
            .zip(&g2)
            .map(|(a, b)| (a * b).abs())
            .fold(0.0, f64::max);
        if worst > 1e-12 * peak1 * peak2 {
            return Err(Error::OverlappingProbes(worst));
        }
        Ok(Self { phi1, phi2 })
    }

    /// Mollifier bumps of the given width at the two centers.
    pub fn mollifiers(
        lattice: &Arc<FourierLattice>,
        center1: (f64, f64),
        center2: (f64, f64),
        width: f64,
    ) -> Result<Self> {
        Self::new(
            mollifier_bump(lattice, center1, width),
            mollifier_bump(lattice, center2, width),
        )
    }
}

/// A test function equal to the coordinate x_axis on the bump support,
/// compactly supported in a slightly larger disk (kept away from the cube
/// boundary so the coordinate is single-valued).
pub struct CoordinateProbe {
    pub varphi: SpectralField,
    pub axis: usize,
    pub center: (f64, f64),
    pub inner: f64,
    pub outer: f64,
}

impl CoordinateProbe {
    pub fn new(
        lattice: &Arc<FourierLattice>,
        center: (f64, f64),
        inner: f64,
        outer: f64,
        axis: usize,
    ) -> Result<Self> {
        assert!(axis == 1 || axis == 2);
        let reach = center.0.abs().max(center.1.abs()) + outer;
        if reach > 0.45 {
            return Err(Error::ProbeTouchesBoundary(reach));
        }
        let plat = plateau(lattice, center, inner, outer);
        let n = lattice.n();
        let mut g = plat.to_physical();
        for i2 in 0..n {
            for i1 in 0..n {
                let x = if axis == 1 { lattice.coord(i1) } else { lattice.coord(i2) };
                g[i2 * n + i1] *= x;
            }
        }
        let varphi = SpectralField::to_spectral(lattice, &g)?;
        Ok(Self { varphi, axis, center, inner, outer })
    }
}

fn oversample(field: &SpectralField) -> Vec<f64> {
    field.to_physical_oversampled(2)
}

fn pairing_with_grads(
    spec1: &MultiplierSpec,
    spec2: &MultiplierSpec,
    phi1: &SpectralField,
    phi2: &SpectralField,
    g1: &[f64],
    g2: &[f64],
) -> f64 {
    let rdiff = |phi: &SpectralField| {
        let a = velocity(phi, spec1);
        let b = velocity(phi, spec2);
        (
            a.u1.sub(&b.u1).expect("same lattice"),
            a.u2.sub(&b.u2).expect("same lattice"),
        )
    };
    let (d11, d12) = rdiff(phi1);
    let (d21, d22) = rdiff(phi2);
    let p1 = oversample(phi1);
    let p2 = oversample(phi2);
    let d11 = oversample(&d11);
    let d12 = oversample(&d12);
    let d21 = oversample(&d21);
    let d22 = oversample(&d22);
    let len = g1.len();
    let mut acc = 0.0;
    for i in 0..len {
        acc += p2[i] * (d11[i] * g1[i] + d12[i] * g2[i])
            + p1[i] * (d21[i] * g1[i] + d22[i] * g2[i]);
    }
    acc / len as f64
}

/// The static exterior pairing
/// int [phi2 (R1 - R2) phi1 . grad varphi + phi1 (R1 - R2) phi2 . grad varphi] dx,
/// evaluated alias-free on a twice-oversampled grid.
pub fn static_pairing(
    spec1: &MultiplierSpec,
    spec2: &MultiplierSpec,
    phi1: &SpectralField,
    phi2: &SpectralField,
    varphi: &SpectralField,
) -> f64 {
    let g1 = oversample(&varphi.derivative(1));
    let g2 = oversample(&varphi.derivative(2));
    pairing_with_grads(spec1, spec2, phi1, phi2, &g1, &g2)
}

/// The integrated-by-parts rewriting of [`static_pairing`] through the
/// perpendicular gradient:
/// -int [(K1 - K2) phi1 grad-perp phi2 . grad varphi
///      + (K1 - K2) phi2 grad-perp phi1 . grad varphi] dx.
pub fn static_pairing_curl_form(
    spec1: &MultiplierSpec,
    spec2: &MultiplierSpec,
    phi1: &SpectralField,
    phi2: &SpectralField,
    varphi: &SpectralField,
) -> f64 {
    let kdiff = |phi: &SpectralField| {
        apply_multiplier(phi, spec1)
            .sub(&apply_multiplier(phi, spec2))
            .expect("same lattice")
    };
    let q1 = oversample(&kdiff(phi1));
    let q2 = oversample(&kdiff(phi2));
    let g1 = oversample(&varphi.derivative(1));
    let g2 = oversample(&varphi.derivative(2));
    let p11 = oversample(&phi1.derivative(1));
    let p12 = oversample(&phi1.derivative(2));
    let p21 = oversample(&phi2.derivative(1));
    let p22 = oversample(&phi2.derivative(2));
    let len = g1.len();
    let mut acc = 0.0;
    for i in 0..len {
        // grad-perp phi = (-d2 phi, d1 phi)
        acc += q1[i] * (-p22[i] * g1[i] + p21[i] * g2[i])
            + q2[i] * (-p12[i] * g1[i] + p11[i] * g2[i]);
    }
    -acc / len as f64
}

/// Space-time residual of the second-order integral identity:
/// int_0^T int [w2 (R1 - R2) w1 . grad varphi + w1 (R1 - R2) w2 . grad varphi]
/// with w_j the linear solutions driven by f_j.
pub fn second_order_identity_residual(
    spec1: &MultiplierSpec,
    spec2: &MultiplierSpec,
    f1: &SourceTerm,
    f2: &SourceTerm,
    varphi: &SpectralField,
    lattice: &Arc<FourierLattice>,
    alpha: f64,
    grid: TimeGrid,
) -> Result<f64> {
    let w1 = solve_fractional_diffusion(f1, lattice, alpha, grid)?;
    let w2 = solve_fractional_diffusion(f2, lattice, alpha, grid)?;
    let g1 = oversample(&varphi.derivative(1));
    let g2 = oversample(&varphi.derivative(2));
    let dt = grid.dt();
    let mut total = 0.0;
    for m in 0..=grid.steps() {
        let val = pairing_with_grads(spec1, spec2, w1.at(m), w2.at(m), &g1, &g2);
        total += grid.trapezoid_weight(m) * dt * val;
    }
    Ok(total)
}

/// Alternative evaluation of the identity through the unintegrated bilinear
/// form: -int_0^T int [(R1 - R2) w1 . grad w2 + (R1 - R2) w2 . grad w1] varphi,
/// i.e. the pairing of varphi with the source difference of the two
/// second-linearization equations.
pub fn second_order_identity_unintegrated(
    spec1: &MultiplierSpec,
    spec2: &MultiplierSpec,
    f1: &SourceTerm,
    f2: &SourceTerm,
    varphi: &SpectralField,
    lattice: &Arc<FourierLattice>,
    alpha: f64,
    grid: TimeGrid,
) -> Result<f64> {
    let w1 = solve_fractional_diffusion(f1, lattice, alpha, grid)?;
    let w2 = solve_fractional_diffusion(f2, lattice, alpha, grid)?;
    let phi_u = oversample(varphi);
    let dt = grid.dt();
    let mut total = 0.0;
    for m in 0..=grid.steps() {
        let a = w1.at(m);
        let b = w2.at(m);
        let rdiff = |phi: &SpectralField| {
            let v1 = velocity(phi, spec1);
            let v2 = velocity(phi, spec2);
            (
                v1.u1.sub(&v2.u1).expect("same lattice"),
                v1.u2.sub(&v2.u2).expect("same lattice"),
            )
        };
        let (a1, a2) = rdiff(a);
        let (b1, b2) = rdiff(b);
        let a1 = oversample(&a1);
        let a2 = oversample(&a2);
        let b1 = oversample(&b1);
        let b2 = oversample(&b2);
        let ga1 = oversample(&a.derivative(1));
        let ga2 = oversample(&a.derivative(2));
        let gb1 = oversample(&b.derivative(1));
        let gb2 = oversample(&b.derivative(2));
        let len = phi_u.len();
        let mut acc = 0.0;
        for i in 0..len {
            acc += (a1[i] * gb1[i] + a2[i] * gb2[i] + b1[i] * ga1[i] + b2[i] * ga2[i]) * phi_u[i];
        }
        total -= grid.trapezoid_weight(m) * dt * acc / len as f64;
    }
    Ok(total)
}

/// Ground-truth point value of d_j (K1 - K2) at the given offset by direct
/// Fourier summation on a `resolution_factor`-times refined lattice.
pub fn kernel_gradient_point(
    spec1: &MultiplierSpec,
    spec2: &MultiplierSpec,
    lattice: &Arc<FourierLattice>,
    offset: (f64, f64),
    axis: usize,
    resolution_factor: usize,
) -> f64 {
    assert!(axis == 1 || axis == 2);
    let big = FourierLattice::new(lattice.n() * resolution_factor.max(1)).expect("refined lattice");
    let mut acc = 0.0;
    for idx in 0..big.len() {
        let k = big.wavevector(idx);
        if k == (0, 0) {
            continue;
        }
        let dm = spec1.m(k) - spec2.m(k);
        if dm == 0.0 {
            continue;
        }
        let kj = if axis == 1 { k.0 } else { k.1 } as f64;
        let phase = 2.0 * std::f64::consts::PI * (offset.0 * k.0 as f64 + offset.1 * k.1 as f64);
        // real part of 2 pi i k_j dm e^{i phase}
        acc -= 2.0 * std::f64::consts::PI * kj * dm * phase.sin();
    }
    acc
}

/// Margin added to the bump width for the coordinate-probe plateau.
pub const PLATEAU_MARGIN: f64 = 0.05;

/// Geometry of one pairing sample: probe centers realizing the offset.
fn probe_centers(offset: (f64, f64), width: f64) -> Result<((f64, f64), (f64, f64))> {
    let r = (offset.0 * offset.0 + offset.1 * offset.1).sqrt();
    // disjointness: the phi2 bump must not meet the coordinate probe disk
    if r < 2.0 * width + PLATEAU_MARGIN {
        return Err(Error::UnrealizableOffset(offset.0, offset.1, width));
    }
    let u = (offset.0 / r, offset.1 / r);
    let v = (-u.1, u.0);
    // anchor the pair off the window along the perpendicular direction
    let c1 = (0.25 * v.0 + 0.5 * offset.0, 0.25 * v.1 + 0.5 * offset.1);
    let c2 = (0.25 * v.0 - 0.5 * offset.0, 0.25 * v.1 - 0.5 * offset.1);
    Ok((c1, c2))
}

/// One mollified sample of d_j (K1 - K2) at offset center1 - center2,
/// evaluated through the static pairing with the perpendicular coordinate
/// probe (the varphi = x_{3-j} trick; the sign restores d_j).
pub fn kernel_gradient_sample(
    spec1: &MultiplierSpec,
    spec2: &MultiplierSpec,
    probe: &ProbePair,
    axis: usize,
    coordinate_probe: &CoordinateProbe,
) -> Result<f64> {
    assert!(axis == 1 || axis == 2);
    let required = 3 - axis;
    if coordinate_probe.axis != required {
        return Err(Error::ProbeAxisMismatch {
            probe_axis: coordinate_probe.axis,
            derivative_axis: axis,
        });
    }
    let pairing = static_pairing(spec1, spec2, &probe.phi1, &probe.phi2, &coordinate_probe.varphi);
    Ok(if axis == 1 { pairing } else { -pairing })
}

/// One row of the reconstruction table.
#[derive(Debug, Clone, Copy)]
pub struct KernelSample {
    pub offset: (f64, f64),
    pub axis: usize,
    pub sampled: f64,
    pub truth: f64,
    pub abs_error: f64,
}

/// The assembled reconstruction of grad (K1 - K2) over an offset grid.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub width: f64,
    pub rows: Vec<KernelSample>,
    /// Relative L2 error of the samples against the point oracle.
    pub relative_l2_error: f64,
}

/// Default polar offset grid: 8 radii in [0.2, 0.4] times 8 angles.
pub fn default_offset_grid() -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(64);
    for ir in 0..8 {
        let r = 0.2 + 0.2 * ir as f64 / 7.0;
        for ia in 0..8 {
            let th = 2.0 * std::f64::consts::PI * ia as f64 / 8.0;
            out.push((r * th.cos(), r * th.sin()));
        }
    }
    out
}

/// Sample both components of grad (K1 - K2) over the offset grid and compare
/// with the Fourier-sum point oracle at doubled resolution.
pub fn reconstruct_kernel_gradient(
    spec1: &MultiplierSpec,
    spec2: &MultiplierSpec,
    lattice: &Arc<FourierLattice>,
    offsets: &[(f64, f64)],
    width: f64,
) -> Result<KernelTable> {
    let samples: Vec<Result<[KernelSample; 2]>> = offsets
        .par_iter()
        .map(|&offset| {
            let (c1, c2) = probe_centers(offset, width)?;
            let probe = ProbePair::mollifiers(lattice, c1, c2, width)?;
            let mut out = [KernelSample { offset, axis: 0, sampled: 0.0, truth: 0.0, abs_error: 0.0 }; 2];
            for (slot, axis) in [(0usize, 1usize), (1, 2)] {
                let cp = CoordinateProbe::new(lattice, c1, width, width + PLATEAU_MARGIN, 3 - axis)?;
                let sampled = kernel_gradient_sample(spec1, spec2, &probe, axis, &cp)?;
                let truth = kernel_gradient_point(spec1, spec2, lattice, offset, axis, 2);
                out[slot] = KernelSample { offset, axis, sampled, truth, abs_error: (sampled - truth).abs() };
            }
            Ok(out)
        })
        .collect();

    let mut rows = Vec::with_capacity(2 * offsets.len());
    for s in samples {
        rows.extend(s?);
    }
    let num: f64 = rows.iter().map(|r| (r.sampled - r.truth) * (r.sampled - r.truth)).sum();
    let den: f64 = rows.iter().map(|r| r.truth * r.truth).sum();
    let relative_l2_error = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(KernelTable { width, rows, relative_l2_error })
}
