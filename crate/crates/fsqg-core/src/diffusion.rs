//! Linear fractional diffusion: forward and backward (dual) solvers.
//!
//! Per Fourier mode the update over one step is the integrating-factor
//! trapezoid rule
//!
//!   u(k, t_{m+1}) = e^{-lam dt} u(k, t_m)
//!                 + (dt/2) (e^{-lam dt} f(k, t_m) + f(k, t_{m+1})),
//!
//! i.e. the trapezoid quadrature of the exponentially weighted Duhamel
//! integrand with the homogeneous decay treated exactly. The discrete
//! forward/dual pair is exactly adjoint under the trapezoid-in-time,
//! grid-sum-in-space inner product.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::lattice::FourierLattice;
use crate::time::{SourceTerm, TimeGrid, Trajectory};

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.5 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha))
    }
}

/// Per-mode decay factors e^{-|2 pi k|^{2 alpha} dt}.
pub(crate) fn decay_factors(lattice: &FourierLattice, alpha: f64, dt: f64) -> Vec<f64> {
    (0..lattice.len())
        .map(|idx| {
            let (k1, k2) = lattice.wavevector(idx);
            let ksq = (k1 * k1 + k2 * k2) as f64;
            if ksq == 0.0 {
                1.0
            } else {
                (-(2.0 * PI * ksq.sqrt()).powf(2.0 * alpha) * dt).exp()
            }
        })
        .collect()
}

/// Integrate the trapezoid recursion against node samples produced by
/// `sample(m)`.
fn integrate_nodes(
    lattice: &Arc<FourierLattice>,
    alpha: f64,
    grid: TimeGrid,
    mut sample: impl FnMut(usize) -> Result<SpectralField>,
) -> Result<Trajectory> {
    let dt = grid.dt();
    let decay = decay_factors(lattice, alpha, dt);
    let mut states = Vec::with_capacity(grid.steps() + 1);
    let mut u = SpectralField::zero(lattice);
    states.push(u.clone());
    let mut f_prev = sample(0)?;
    for m in 0..grid.steps() {
        let f_next = sample(m + 1)?;
        for idx in 0..lattice.len() {
            let e = decay[idx];
            let un = e * u.coeffs()[idx]
                + 0.5 * dt * (e * f_prev.coeffs()[idx] + f_next.coeffs()[idx]);
            u.coeffs_mut()[idx] = un;
        }
        states.push(u.clone());
        f_prev = f_next;
    }
    Trajectory::new(grid, states)
}

/// Solve d_t u + (-Delta)^alpha u = f, u(0) = 0 on [0, T].
pub fn solve_fractional_diffusion(
    f: &SourceTerm,
    lattice: &Arc<FourierLattice>,
    alpha: f64,
    grid: TimeGrid,
) -> Result<Trajectory> {
    check_alpha(alpha)?;
    integrate_nodes(lattice, alpha, grid, |m| f.eval(lattice, grid.node(m)))
}

/// Forward solve against node-locked source samples.
pub fn solve_diffusion_nodes(
    nodes: &[SpectralField],
    alpha: f64,
    grid: TimeGrid,
) -> Result<Trajectory> {
    check_alpha(alpha)?;
    if nodes.len() != grid.steps() + 1 {
        return Err(Error::DimensionMismatch { expected: grid.steps() + 1, got: nodes.len() });
    }
    let lattice = nodes[0].lattice().clone();
    integrate_nodes(&lattice, alpha, grid, |m| Ok(nodes[m].clone()))
}

/// Solve the dual problem -d_t v + (-Delta)^alpha v = g, v(T) = 0 by time
/// reversal: v(t) = w(T - t) where w solves the forward problem with the
/// reversed source.
pub fn solve_dual(
    g: &SourceTerm,
    lattice: &Arc<FourierLattice>,
    alpha: f64,
    grid: TimeGrid,
) -> Result<Trajectory> {
    check_alpha(alpha)?;
    let total = grid.steps();
    let reversed = integrate_nodes(lattice, alpha, grid, |m| {
        g.eval(lattice, grid.node(total - m))
    })?;
    reverse_trajectory(reversed)
}

/// Dual solve against node-locked samples.
pub fn solve_dual_nodes(nodes: &[SpectralField], alpha: f64, grid: TimeGrid) -> Result<Trajectory> {
    check_alpha(alpha)?;
    if nodes.len() != grid.steps() + 1 {
        return Err(Error::DimensionMismatch { expected: grid.steps() + 1, got: nodes.len() });
    }
    let lattice = nodes[0].lattice().clone();
    let total = grid.steps();
    let reversed =
        integrate_nodes(&lattice, alpha, grid, |m| Ok(nodes[total - m].clone()))?;
    reverse_trajectory(reversed)
}

fn reverse_trajectory(traj: Trajectory) -> Result<Trajectory> {
    let grid = traj.grid();
    let mut states: Vec<SpectralField> = traj.states().to_vec();
    states.reverse();
    Trajectory::new(grid, states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::TimeProfile;
    use num_complex::Complex64;

    fn lat(n: usize) -> Arc<FourierLattice> {
        FourierLattice::new(n).unwrap()
    }

    fn cos_source(lattice: &Arc<FourierLattice>) -> SourceTerm {
        let mut x = SpectralField::zero(lattice);
        x.set_coeff((1, 0), Complex64::new(0.5, 0.0));
        SourceTerm::separable(x, TimeProfile::Constant(1.0))
    }

    #[test]
    fn alpha_range_enforced() {
        let lat = lat(16);
        let grid = TimeGrid::new(0.1, 10).unwrap();
        let f = SourceTerm::zero();
        assert!(solve_fractional_diffusion(&f, &lat, 0.5, grid).is_err());
        assert!(solve_fractional_diffusion(&f, &lat, 1.0, grid).is_err());
        assert!(solve_fractional_diffusion(&f, &lat, 0.75, grid).is_ok());
    }

    #[test]
    fn zero_source_gives_zero_trajectory() {
        let lat = lat(16);
        let grid = TimeGrid::new(0.1, 20).unwrap();
        let traj = solve_fractional_diffusion(&SourceTerm::zero(), &lat, 0.75, grid).unwrap();
        for s in traj.states() {
            assert_eq!(s.max_coeff(), 0.0);
        }
    }

    #[test]
    fn duhamel_closed_form_single_mode() {
        // constant-in-time cos source: amplitude (1 - e^{-lam t})/lam
        let lat = lat(16);
        let grid = TimeGrid::new(0.1, 500).unwrap();
        let traj = solve_fractional_diffusion(&cos_source(&lat), &lat, 0.75, grid).unwrap();
        let lam = (2.0 * PI).powf(1.5);
        let expect = 0.5 * (1.0 - (-lam * 0.1).exp()) / lam;
        let got = traj.at(500).coeff((1, 0)).re;
        let rel = (got - expect).abs() / expect;
        assert!(rel <= 1e-5, "relative error {rel}");

        // halving dt reduces the error by ~4
        let fine = TimeGrid::new(0.1, 1000).unwrap();
        let traj2 = solve_fractional_diffusion(&cos_source(&lat), &lat, 0.75, fine).unwrap();
        let e1 = (traj.at(500).coeff((1, 0)).re - expect).abs();
        let e2 = (traj2.at(1000).coeff((1, 0)).re - expect).abs();
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "refinement ratio {ratio}");
    }

    #[test]
    fn linearity() {
        let lat = lat(16);
        let grid = TimeGrid::new(0.2, 40).unwrap();
        let f1 = SpectralField::random_smooth_seeded(&lat, 4, 2.0, 1);
        let f2 = SpectralField::random_smooth_seeded(&lat, 4, 2.0, 2);
        let p = TimeProfile::Bump { t_on: 0.02, t_off: 0.18 };
        let s1 = SourceTerm::separable(f1.clone(), p);
        let s2 = SourceTerm::separable(f2.clone(), p);
        let mut combo = SpectralField::zero(&lat);
        combo.axpy_mut(2.0, &f1);
        combo.axpy_mut(-3.0, &f2);
        let sc = SourceTerm::separable(combo, p);

        let t1 = solve_fractional_diffusion(&s1, &lat, 0.8, grid).unwrap();
        let t2 = solve_fractional_diffusion(&s2, &lat, 0.8, grid).unwrap();
        let tc = solve_fractional_diffusion(&sc, &lat, 0.8, grid).unwrap();
        let lin = t1.scaled(2.0).axpy(-3.0, &t2).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in tc.states().iter().zip(lin.states()) {
            worst = worst.max(a.sub(b).unwrap().max_coeff());
        }
        assert!(worst <= 1e-12);
    }

    #[test]
    fn dual_time_reversal_is_definitional() {
        let lat = lat(16);
        let grid = TimeGrid::new(0.3, 30).unwrap();
        let g = SourceTerm::separable(
            SpectralField::random_smooth_seeded(&lat, 4, 2.0, 9),
            TimeProfile::Bump { t_on: 0.05, t_off: 0.25 },
        );
        let v = solve_dual(&g, &lat, 0.75, grid).unwrap();
        // forward solve of the reversed source, compared node by node
        let rev = integrate_nodes(&lat, 0.75, grid, |m| {
            g.eval(&lat, grid.node(grid.steps() - m))
        })
        .unwrap();
        for m in 0..=grid.steps() {
            let diff = v.at(m).sub(rev.at(grid.steps() - m)).unwrap().max_coeff();
            assert_eq!(diff, 0.0);
        }
        // zero source -> zero dual
        let z = solve_dual(&SourceTerm::zero(), &lat, 0.75, grid).unwrap();
        for s in z.states() {
            assert_eq!(s.max_coeff(), 0.0);
        }
    }

    #[test]
    fn adjoint_identity_is_exact() {
        let lat = lat(32);
        let grid = TimeGrid::new(0.4, 60).unwrap();
        for seed in 0..10u64 {
            let f = SourceTerm::separable(
                SpectralField::random_smooth_seeded(&lat, 6, 3.0, 100 + seed),
                TimeProfile::Bump { t_on: 0.05, t_off: 0.35 },
            );
            let g = SourceTerm::separable(
                SpectralField::random_smooth_seeded(&lat, 6, 3.0, 200 + seed),
                TimeProfile::Bump { t_on: 0.1, t_off: 0.3 },
            );
            let u = solve_fractional_diffusion(&f, &lat, 0.75, grid).unwrap();
            let v = solve_dual(&g, &lat, 0.75, grid).unwrap();
            let f_traj = sample_traj(&f, &lat, grid);
            let g_traj = sample_traj(&g, &lat, grid);
            let lhs = u.space_time_inner(&g_traj).unwrap();
            let rhs = f_traj.space_time_inner(&v).unwrap();
            let denom = f_traj.space_time_norm() * g_traj.space_time_norm();
            assert!((lhs - rhs).abs() <= 1e-6 * denom, "adjoint gap {}", (lhs - rhs).abs() / denom);
        }
    }

    fn sample_traj(f: &SourceTerm, lat: &Arc<FourierLattice>, grid: TimeGrid) -> Trajectory {
        let states = (0..=grid.steps())
            .map(|m| f.eval(lat, grid.node(m)).unwrap())
            .collect();
        Trajectory::new(grid, states).unwrap()
    }
}
