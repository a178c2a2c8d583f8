//! Binary field snapshots and trajectory dumps.
//!
//! Snapshot layout: magic bytes "FSQG", version byte 0x01, little-endian u32
//! grid size N, then N*N row-major little-endian f64 physical values with the
//! row running over the x2 index.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::lattice::FourierLattice;
use crate::time::Trajectory;

const MAGIC: &[u8; 4] = b"FSQG";
const VERSION: u8 = 0x01;

/// Write one field snapshot.
pub fn write_snapshot(path: &Path, field: &SpectralField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    let n = field.lattice().n() as u32;
    w.write_all(&n.to_le_bytes())?;
    for v in field.to_physical() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read one field snapshot back onto a lattice of the stored size.
pub fn read_snapshot(path: &Path) -> Result<SpectralField> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::SnapshotFormat(format!("bad magic {magic:?}")));
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version)?;
    if version[0] != VERSION {
        return Err(Error::SnapshotFormat(format!("unsupported version {}", version[0])));
    }
    let mut nb = [0u8; 4];
    r.read_exact(&mut nb)?;
    let n = u32::from_le_bytes(nb) as usize;
    let lattice = FourierLattice::new(n)?;
    let mut grid = vec![0.0f64; n * n];
    let mut buf = [0u8; 8];
    for v in &mut grid {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    SpectralField::to_spectral(&lattice, &grid)
}

/// Dump a trajectory as a directory of snapshots `t_%06d.bin` plus a
/// `manifest.toml` recording the time grid and solver parameters.
pub fn dump_trajectory(
    dir: &Path,
    traj: &Trajectory,
    alpha: f64,
    spec_desc: &str,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (m, state) in traj.states().iter().enumerate() {
        write_snapshot(&dir.join(format!("t_{m:06}.bin")), state)?;
    }
    let grid = traj.grid();
    let manifest = format!(
        "format = \"FSQG1\"\nn = {}\nt_final = {}\nsteps = {}\nalpha = {}\nmultiplier = \"{}\"\n",
        traj.lattice().n(),
        grid.t_final(),
        grid.steps(),
        alpha,
        spec_desc,
    );
    fs::write(dir.join("manifest.toml"), manifest)?;
    Ok(())
}

/// Load a dumped trajectory given its directory and time grid metadata read
/// from the manifest.
pub fn load_trajectory(dir: &Path) -> Result<Trajectory> {
    let manifest = fs::read_to_string(dir.join("manifest.toml"))?;
    let mut t_final = None;
    let mut steps = None;
    for line in manifest.lines() {
        let mut parts = line.splitn(2, '=');
        let key = parts.next().unwrap_or("").trim();
        let val = parts.next().unwrap_or("").trim();
        match key {
            "t_final" => t_final = val.parse::<f64>().ok(),
            "steps" => steps = val.parse::<usize>().ok(),
            _ => {}
        }
    }
    let (t_final, steps) = match (t_final, steps) {
        (Some(t), Some(m)) => (t, m),
        _ => return Err(Error::SnapshotFormat("manifest missing t_final/steps".into())),
    };
    let grid = crate::time::TimeGrid::new(t_final, steps)?;
    let mut states = Vec::with_capacity(steps + 1);
    for m in 0..=steps {
        states.push(read_snapshot(&dir.join(format!("t_{m:06}.bin")))?);
    }
    Trajectory::new(grid, states)
}

/// Convenience: lattice of a snapshot's stored grid size.
pub fn snapshot_lattice(field: &SpectralField) -> Arc<FourierLattice> {
    field.lattice().clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::TimeGrid;

    #[test]
    fn snapshot_roundtrip() {
        let lat = FourierLattice::new(32).unwrap();
        let f = SpectralField::random_smooth_seeded(&lat, 6, 3.0, 77);
        let dir = std::env::temp_dir().join("fsqg_snapshot_test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("field.bin");
        write_snapshot(&path, &f).unwrap();
        let g = read_snapshot(&path).unwrap();
        assert_eq!(g.lattice().n(), 32);
        assert!(f.sub(&g).unwrap().max_coeff() < 1e-13);

        // header check
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"FSQG");
        assert_eq!(bytes[4], 0x01);
        assert_eq!(u32::from_le_bytes(bytes[5..9].try_into().unwrap()), 32);
        assert_eq!(bytes.len(), 9 + 32 * 32 * 8);
    }

    #[test]
    fn trajectory_roundtrip() {
        let lat = FourierLattice::new(16).unwrap();
        let grid = TimeGrid::new(0.2, 3).unwrap();
        let states = (0..=3)
            .map(|m| SpectralField::random_smooth_seeded(&lat, 4, 2.0, m as u64))
            .collect();
        let traj = Trajectory::new(grid, states).unwrap();
        let dir = std::env::temp_dir().join("fsqg_traj_test");
        dump_trajectory(&dir, &traj, 0.75, "riesz").unwrap();
        let back = load_trajectory(&dir).unwrap();
        assert!(traj.sup_distance(&back).unwrap() < 1e-13);
    }
}
