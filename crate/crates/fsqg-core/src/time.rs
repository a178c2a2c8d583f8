//! Time grids, trajectories, and space-time source terms.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{SobolevKind, SpectralField};
use crate::lattice::FourierLattice;
use crate::window::Window;

/// Uniform time grid over [0, T] with M steps (M + 1 nodes t_m = m T / M).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final > 0.0) || steps == 0 {
            return Err(Error::BadTimeGrid { t_final, steps });
        }
        Ok(Self { t_final, steps })
    }

    #[inline]
    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    #[inline]
    pub fn node(&self, m: usize) -> f64 {
        m as f64 * self.dt()
    }

    /// Trapezoid weight of node m (1/2 at the endpoints).
    #[inline]
    pub fn trapezoid_weight(&self, m: usize) -> f64 {
        if m == 0 || m == self.steps {
            0.5
        } else {
            1.0
        }
    }

    /// Refined grid with twice the steps (same final time).
    pub fn refined(&self) -> Self {
        Self { t_final: self.t_final, steps: 2 * self.steps }
    }
}

/// A time-indexed sequence of spectral fields on the nodes of a [`TimeGrid`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: TimeGrid,
    states: Vec<SpectralField>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, states: Vec<SpectralField>) -> Result<Self> {
        if states.len() != grid.steps() + 1 {
            return Err(Error::DimensionMismatch { expected: grid.steps() + 1, got: states.len() });
        }
        Ok(Self { grid, states })
    }

    pub fn zero(lattice: &Arc<FourierLattice>, grid: TimeGrid) -> Self {
        let states = (0..=grid.steps()).map(|_| SpectralField::zero(lattice)).collect();
        Self { grid, states }
    }

    #[inline]
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    #[inline]
    pub fn states(&self) -> &[SpectralField] {
        &self.states
    }

    #[inline]
    pub fn at(&self, m: usize) -> &SpectralField {
        &self.states[m]
    }

    #[inline]
    pub fn lattice(&self) -> &Arc<FourierLattice> {
        self.states[0].lattice()
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::TrajectoryGridMismatch)
        }
    }

    /// Largest physical-grid |difference| over all nodes.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        self.same_grid(other)?;
        let mut worst = 0.0f64;
        for (a, b) in self.states.iter().zip(&other.states) {
            worst = worst.max(a.sub(b)?.sup_norm());
        }
        Ok(worst)
    }

    /// Space-time L2 inner product with trapezoid weights in time.
    pub fn space_time_inner(&self, other: &Self) -> Result<f64> {
        self.same_grid(other)?;
        let dt = self.grid.dt();
        let mut acc = 0.0;
        for m in 0..=self.grid.steps() {
            acc += self.grid.trapezoid_weight(m) * dt * self.states[m].inner(&other.states[m]);
        }
        Ok(acc)
    }

    pub fn space_time_norm(&self) -> f64 {
        self.space_time_inner(self).expect("same grid").max(0.0).sqrt()
    }

    /// Discrete L2(0,T; H^r) norm (trapezoid in time).
    pub fn l2_in_time_sobolev(&self, r: f64) -> f64 {
        let dt = self.grid.dt();
        let mut acc = 0.0;
        for m in 0..=self.grid.steps() {
            let nr = self.states[m].sobolev_norm(r, SobolevKind::Inhomogeneous);
            acc += self.grid.trapezoid_weight(m) * dt * nr * nr;
        }
        acc.sqrt()
    }

    /// Discrete sup-in-time H^r norm (max over nodes).
    pub fn sup_in_time_sobolev(&self, r: f64) -> f64 {
        self.states
            .iter()
            .map(|s| s.sobolev_norm(r, SobolevKind::Inhomogeneous))
            .fold(0.0, f64::max)
    }

    /// self + s * other, node by node.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| {
                let mut c = a.clone();
                c.axpy_mut(s, b);
                c
            })
            .collect();
        Ok(Self { grid: self.grid, states })
    }

    pub fn scaled(&self, s: f64) -> Self {
        let states = self.states.iter().map(|f| f.scaled(s)).collect();
        Self { grid: self.grid, states }
    }

    /// Apply a physical-space mask to every node.
    pub fn masked(&self, mask: &[f64]) -> Result<Self> {
        let states = self.states.iter().map(|f| f.masked(mask)).collect::<Result<Vec<_>>>()?;
        Ok(Self { grid: self.grid, states })
    }
}

/// Scalar amplitude profiles in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeProfile {
    Constant(f64),
    /// Compactly supported smooth bump exp(-1/(1 - tau^2)) on
    /// tau = (2t - ta - tb)/(tb - ta), zero outside (ta, tb).
    Bump { t_on: f64, t_off: f64 },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant(a) => a,
            TimeProfile::Bump { t_on, t_off } => {
                if t <= t_on || t >= t_off {
                    0.0
                } else {
                    let tau = (2.0 * t - t_on - t_off) / (t_off - t_on);
                    (-1.0 / (1.0 - tau * tau)).exp()
                }
            }
        }
    }

    /// Temporal support when compactly supported.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            TimeProfile::Constant(_) => None,
            TimeProfile::Bump { t_on, t_off } => Some((t_on, t_off)),
        }
    }
}

#[derive(Clone)]
enum SourceKind {
    Zero,
    Separable { spatial: SpectralField, profile: TimeProfile },
    Samples { grid: TimeGrid, states: Vec<SpectralField> },
    Sum(Vec<SourceTerm>),
}

/// A space-time source f(x, t), evaluable at arbitrary times (node-locked for
/// the `Samples` variant). The spatial window, when declared, has already
/// been applied to the stored data; it is kept for support checks.
#[derive(Clone)]
pub struct SourceTerm {
    kind: SourceKind,
    scale: f64,
    window: Option<Window>,
}

impl SourceTerm {
    pub fn zero() -> Self {
        Self { kind: SourceKind::Zero, scale: 1.0, window: None }
    }

    /// f(x, t) = spatial(x) * profile(t).
    pub fn separable(spatial: SpectralField, profile: TimeProfile) -> Self {
        Self { kind: SourceKind::Separable { spatial, profile }, scale: 1.0, window: None }
    }

    /// Separable source restricted to a window: the spatial factor is masked
    /// by the window now and the window is recorded as the declared support.
    pub fn windowed(spatial: &SpectralField, profile: TimeProfile, window: &Window) -> Result<Self> {
        let masked = window.apply_mask(spatial)?;
        Ok(Self {
            kind: SourceKind::Separable { spatial: masked, profile },
            scale: 1.0,
            window: Some(window.clone()),
        })
    }

    /// Node-locked samples on a specific grid.
    pub fn from_samples(grid: TimeGrid, states: Vec<SpectralField>) -> Result<Self> {
        if states.len() != grid.steps() + 1 {
            return Err(Error::DimensionMismatch { expected: grid.steps() + 1, got: states.len() });
        }
        Ok(Self { kind: SourceKind::Samples { grid, states }, scale: 1.0, window: None })
    }

    pub fn sum(terms: Vec<SourceTerm>) -> Self {
        Self { kind: SourceKind::Sum(terms), scale: 1.0, window: None }
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.scale *= s;
        self
    }

    pub fn window(&self) -> Option<&Window> {
        self.window.as_ref()
    }

    /// Declared temporal support, when one exists.
    pub fn time_support(&self) -> Option<(f64, f64)> {
        match &self.kind {
            SourceKind::Separable { profile, .. } => profile.support(),
            SourceKind::Sum(terms) => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for t in terms {
                    let (a, b) = t.time_support()?;
                    lo = lo.min(a);
                    hi = hi.max(b);
                }
                Some((lo, hi))
            }
            _ => None,
        }
    }

    /// Evaluate at time t on the given lattice.
    pub fn eval(&self, lattice: &Arc<FourierLattice>, t: f64) -> Result<SpectralField> {
        let mut f = match &self.kind {
            SourceKind::Zero => SpectralField::zero(lattice),
            SourceKind::Separable { spatial, profile } => {
                if spatial.lattice().n() != lattice.n() {
                    return Err(Error::LatticeMismatch(spatial.lattice().n(), lattice.n()));
                }
                spatial.scaled(profile.eval(t))
            }
            SourceKind::Samples { grid, states } => {
                let pos = t / grid.dt();
                let m = pos.round() as isize;
                if m < 0
                    || m > grid.steps() as isize
                    || (pos - m as f64).abs() > 1e-9 * grid.steps() as f64
                {
                    return Err(Error::TimeGridMismatch);
                }
                let s = &states[m as usize];
                if s.lattice().n() != lattice.n() {
                    return Err(Error::LatticeMismatch(s.lattice().n(), lattice.n()));
                }
                s.clone()
            }
            SourceKind::Sum(terms) => {
                let mut acc = SpectralField::zero(lattice);
                for term in terms {
                    acc = acc.add(&term.eval(lattice, t)?)?;
                }
                acc
            }
        };
        f.scale_mut(self.scale);
        Ok(f)
    }

    /// Check the declared supports: returns the worst leakage outside the
    /// spatial window (over a few probe times) and outside the temporal
    /// support.
    pub fn support_leakage(&self, lattice: &Arc<FourierLattice>, grid: &TimeGrid) -> Result<f64> {
        let mut worst = 0.0f64;
        if let Some(win) = &self.window {
            for m in [0, grid.steps() / 3, grid.steps() / 2, grid.steps()] {
                let f = self.eval(lattice, grid.node(m))?;
                worst = worst.max(win.leakage_outside(&f));
            }
        }
        if let Some((t_on, t_off)) = self.time_support() {
            let mut probes = vec![0.5 * t_on];
            if t_off < grid.t_final() {
                probes.push(t_off + 0.5 * (grid.t_final() - t_off));
            }
            for &t in &probes {
                let f = self.eval(lattice, t)?;
                worst = worst.max(f.max_coeff());
            }
        }
        Ok(worst)
    }
}
