//! Micro-benchmark of the transform and solver hot paths at desk scale.
//!
//! Run with `cargo run -p fsqg-core --example timing --release`.

use std::time::Instant;

use num_complex::Complex64;

use fsqg_core::multiplier::advection_term;
use fsqg_core::scalar::solve_active_scalar;
use fsqg_core::{FourierLattice, MultiplierSpec, SourceTerm, SpectralField, TimeGrid, TimeProfile};

fn main() {
    let lat = FourierLattice::new(128).unwrap();
    let f = SpectralField::random_smooth_seeded(&lat, 10, 4.0, 1);
    let mask: Vec<f64> = (0..lat.len()).map(|i| (i % 7) as f64 / 7.0).collect();
    // warm the plans, including the doubled lattice
    let _ = f.to_physical_oversampled(2);
    let _ = f.masked(&mask).unwrap();

    let t0 = Instant::now();
    for _ in 0..200 {
        let _ = f.to_physical();
    }
    println!("to_physical:        {:?}/call", t0.elapsed() / 200);

    let t0 = Instant::now();
    for _ in 0..100 {
        let _ = f.masked(&mask).unwrap();
    }
    println!("masked:             {:?}/call", t0.elapsed() / 100);

    let t0 = Instant::now();
    for _ in 0..50 {
        let _ = f.to_physical_oversampled(2);
    }
    println!("oversampled (2x):   {:?}/call", t0.elapsed() / 50);

    let spec = MultiplierSpec::riesz(&lat);
    let t0 = Instant::now();
    for _ in 0..20 {
        let _ = advection_term(&f.scaled(1e-3), &spec);
    }
    println!("advection term:     {:?}/call", t0.elapsed() / 20);

    let grid = TimeGrid::new(0.5, 500).unwrap();
    let mut x = SpectralField::zero(&lat);
    x.set_coeff((1, 0), Complex64::new(1.5, 0.0));
    let src = SourceTerm::separable(x, TimeProfile::Bump { t_on: 0.05, t_off: 0.45 });
    let t0 = Instant::now();
    let _ = solve_active_scalar(&src.scaled(0.01), &spec, &lat, 0.75, grid).unwrap();
    println!("nonlinear solve:    {:?} (N = 128, M = 500)", t0.elapsed());
}
