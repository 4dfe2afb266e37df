//! Snapshot ensembles and their binary file format.
//!
//! Layout (little-endian): magic `VPS1`, `u16` version, `u64` space
//! fingerprint, `u32` snapshot count `M`, `u32` velocity dofs `n_u`, `f64`
//! snapshot spacing, then `M` blocks of `n_u` `f64` values.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{FormatError, PodError};
use crate::io::ByteReader;
use crate::scalar::Scalar;

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"VPS1";
pub const SNAPSHOT_VERSION: u16 = 1;

/// Velocity snapshots `u_h(·, t_k)`, `k = 1..M`, at uniform spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet<T> {
    pub fingerprint: u64,
    pub dt_snap: T,
    pub snapshots: Vec<Vec<T>>,
}

impl<T: Scalar> SnapshotSet<T> {
    pub fn new(fingerprint: u64, dt_snap: T, snapshots: Vec<Vec<T>>) -> Result<Self, PodError> {
        let first = snapshots.first().ok_or(PodError::EmptyEnsemble)?;
        let n = first.len();
        if n == 0 || snapshots.iter().any(|s| s.len() != n) {
            return Err(PodError::Dimension("snapshots must share one nonzero length".into()));
        }
        Ok(Self {
            fingerprint,
            dt_snap,
            snapshots,
        })
    }

    /// Snapshots of a trajectory `u⁰, u¹, …` sampled as `uᵏ` for
    /// `k = first, first + stride, …`.
    pub fn from_trajectory(
        fingerprint: u64,
        dt: T,
        trajectory: &[Vec<T>],
        first: usize,
        stride: usize,
    ) -> Result<Self, PodError> {
        let stride = stride.max(1);
        let picked = (first..trajectory.len())
            .step_by(stride)
            .map(|k| trajectory[k].clone())
            .collect();
        Self::new(fingerprint, dt * T::from_count(stride), picked)
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn n_dofs(&self) -> usize {
        self.snapshots.first().map_or(0, Vec::len)
    }

    pub fn check_fingerprint(&self, expected: u64) -> Result<(), PodError> {
        if self.fingerprint == expected {
            Ok(())
        } else {
            Err(PodError::FingerprintMismatch {
                expected,
                found: self.fingerprint,
            })
        }
    }

    /// Every snapshot multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            fingerprint: self.fingerprint,
            dt_snap: self.dt_snap,
            snapshots: self
                .snapshots
                .iter()
                .map(|s| s.iter().map(|&v| c * v).collect())
                .collect(),
        }
    }
}

pub fn write_snapshots<T: Scalar>(set: &SnapshotSet<T>, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&set.fingerprint.to_le_bytes())?;
    w.write_all(&u32_len(set.len())?.to_le_bytes())?;
    w.write_all(&u32_len(set.n_dofs())?.to_le_bytes())?;
    w.write_all(&set.dt_snap.as_f64().to_le_bytes())?;
    for s in &set.snapshots {
        for v in s {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a snapshot file; with `expected` set, the stored fingerprint must
/// match it.
pub fn read_snapshots<T: Scalar>(
    path: impl AsRef<Path>,
    expected: Option<u64>,
) -> Result<SnapshotSet<T>, FormatError> {
    let bytes = fs::read(path)?;
    let mut r = ByteReader::new(&bytes);
    r.magic(SNAPSHOT_MAGIC)?;
    let version = r.u16()?;
    if version != SNAPSHOT_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let fingerprint = r.u64()?;
    if let Some(e) = expected {
        if e != fingerprint {
            return Err(FormatError::FingerprintMismatch {
                expected: e,
                found: fingerprint,
            });
        }
    }
    let m = r.u32()? as usize;
    let n = r.u32()? as usize;
    let dt = r.f64()?;
    if m == 0 || n == 0 {
        return Err(FormatError::Inconsistent("empty snapshot ensemble".into()));
    }
    r.expect_remaining(m * n * 8)?;
    let mut snapshots = Vec::with_capacity(m);
    for _ in 0..m {
        snapshots.push(r.f64_vec::<T>(n)?);
    }
    r.finish()?;
    Ok(SnapshotSet {
        fingerprint,
        dt_snap: T::lit(dt),
        snapshots,
    })
}

pub(crate) fn u32_len(n: usize) -> Result<u32, FormatError> {
    u32::try_from(n).map_err(|_| FormatError::Inconsistent(format!("length {n} exceeds u32")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SnapshotSet<f64> {
        let snaps = (0..3)
            .map(|k| (0..5).map(|i| (k * 5 + i) as f64 * 0.1 - 0.7).collect())
            .collect();
        SnapshotSet::new(0xdead_beef_0123_4567, 0.01, snaps).unwrap()
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.vps");
        let set = sample();
        write_snapshots(&set, &p).unwrap();
        let back: SnapshotSet<f64> = read_snapshots(&p, Some(set.fingerprint)).unwrap();
        assert_eq!(back, set);
        let p2 = dir.path().join("t.vps");
        write_snapshots(&back, &p2).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&p2).unwrap());
        assert_eq!(fs::read(&p).unwrap().len(), 4 + 2 + 8 + 4 + 4 + 8 + 15 * 8);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.vps");
        write_snapshots(&sample(), &p).unwrap();
        let mut b = fs::read(&p).unwrap();
        b[0] = b'X';
        fs::write(&p, b).unwrap();
        let err = read_snapshots::<f64>(&p, None).unwrap_err();
        assert!(matches!(err, FormatError::BadMagic { .. }), "{err}");
    }

    #[test]
    fn fingerprint_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.vps");
        write_snapshots(&sample(), &p).unwrap();
        let err = read_snapshots::<f64>(&p, Some(1)).unwrap_err();
        assert!(matches!(err, FormatError::FingerprintMismatch { expected: 1, .. }));
    }

    #[test]
    fn truncation_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.vps");
        write_snapshots(&sample(), &p).unwrap();
        let b = fs::read(&p).unwrap();
        for cut in [3, 10, 25, b.len() - 1] {
            fs::write(&p, &b[..cut]).unwrap();
            let err = read_snapshots::<f64>(&p, None).unwrap_err();
            assert!(matches!(err, FormatError::Truncated(_)), "cut {cut}: {err}");
        }
        let mut long = b.clone();
        long.push(0);
        fs::write(&p, long).unwrap();
        assert!(matches!(
            read_snapshots::<f64>(&p, None).unwrap_err(),
            FormatError::Inconsistent(_)
        ));
    }

    #[test]
    fn trajectory_sampling_and_validation() {
        let traj: Vec<Vec<f64>> = (0..7).map(|k| vec![k as f64]).collect();
        let s = SnapshotSet::from_trajectory(1, 0.5, &traj, 1, 1).unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s.snapshots[0], vec![1.0]);
        let s = SnapshotSet::from_trajectory(1, 0.5, &traj, 2, 2).unwrap();
        assert_eq!(s.snapshots, vec![vec![2.0], vec![4.0], vec![6.0]]);
        assert_eq!(s.dt_snap, 1.0);
        assert!(SnapshotSet::<f64>::new(1, 0.1, vec![]).is_err());
        assert!(SnapshotSet::new(1, 0.1, vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
