//! Proper orthogonal decomposition by the method of snapshots.
//!
//! Basis file layout (little-endian): magic `VPB1`, `u16` version, `u64`
//! space fingerprint, `u32` mode count `r`, `u32` retained count `d`, `u32`
//! velocity dofs `n_u`, then `λ` (`d` values), `‖ψ‖₁` (`d` values) and the
//! `r` modes, mode-major.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::dns::snapshots::{u32_len, SnapshotSet};
use crate::error::{FormatError, PodError};
use crate::fem::FemOperators;
use crate::io::ByteReader;
use crate::linalg::dense::{DMat, SymmetricEigen};
use crate::linalg::sparse::CsrMatrix;
use crate::scalar::{axpy, dot, Scalar};

pub const BASIS_MAGIC: [u8; 4] = *b"VPB1";
pub const BASIS_VERSION: u16 = 1;

/// Eigenvalues below `RANK_TOL · λ₁` count as zero.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PodOptions {
    /// Subtract the snapshot mean before the decomposition.
    pub center: bool,
}

/// Mass-orthonormal POD modes with their eigenvalues.
///
/// `eigenvalues` and `h1_norms` cover every retained mode (the numerical
/// rank of the correlation matrix); `modes` holds only the leading `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct PodBasis<T> {
    pub fingerprint: u64,
    pub modes: Vec<Vec<T>>,
    pub eigenvalues: Vec<T>,
    pub h1_norms: Vec<T>,
    /// Snapshot mean when the basis was built from centered data.
    pub mean: Option<Vec<T>>,
}

impl<T: Scalar> PodBasis<T> {
    pub fn r(&self) -> usize {
        self.modes.len()
    }

    pub fn retained(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.modes.first().map_or(0, Vec::len)
    }

    /// The leading `r` modes only.
    pub fn truncated(&self, r: usize) -> Result<Self, PodError> {
        if r > self.r() {
            return Err(PodError::RankExceeded {
                requested: r,
                rank: self.r(),
            });
        }
        let mut out = self.clone();
        out.modes.truncate(r);
        Ok(out)
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

    /// `Ψ a`.
    pub fn reconstruct(&self, a: &[T]) -> Vec<T> {
        assert_eq!(a.len(), self.r(), "coefficient length");
        let mut u = vec![T::zero(); self.n_dofs()];
        for (psi, &c) in self.modes.iter().zip(a) {
            axpy(c, psi, &mut u);
        }
        u
    }

    /// `Ψᵀ M Ψ`; the identity up to round-off.
    pub fn gram(&self, ops: &FemOperators<T>) -> DMat<T> {
        ops.mass.project(&self.modes, &self.modes)
    }
}

/// `K_kl = (u_k, u_l) / M`.
pub fn build_correlation<T: Scalar>(set: &SnapshotSet<T>, ops: &FemOperators<T>) -> Result<DMat<T>, PodError> {
    set.check_fingerprint(ops.fingerprint)?;
    check_len(set.n_dofs(), &ops.mass)?;
    Ok(correlation(&set.snapshots, &ops.mass))
}

fn correlation<T: Scalar>(snaps: &[Vec<T>], mass: &CsrMatrix<T>) -> DMat<T> {
    let m = snaps.len();
    let inv_m = T::one() / T::from_count(m);
    let mu: Vec<Vec<T>> = snaps.iter().map(|u| mass.matvec(u)).collect();
    let mut k = DMat::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = inv_m * dot(&snaps[i], &mu[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn check_len<T: Scalar>(n: usize, mass: &CsrMatrix<T>) -> Result<(), PodError> {
    if n != mass.nrows() {
        return Err(PodError::Dimension(format!(
            "snapshots have {n} dofs, operators {}",
            mass.nrows()
        )));
    }
    Ok(())
}

/// Number of eigenvalues at or above `RANK_TOL · λ₁` in a descending list.
pub fn numerical_rank<T: Scalar>(values: &[T]) -> usize {
    match values.first() {
        Some(&l1) if l1 > T::zero() => {
            let tol = T::lit(RANK_TOL) * l1;
            values.iter().take_while(|&&v| v >= tol).count()
        }
        _ => 0,
    }
}

/// POD basis of rank `r` from a snapshot ensemble.
pub fn compute_pod_basis<T: Scalar>(
    set: &SnapshotSet<T>,
    ops: &FemOperators<T>,
    r: usize,
    options: PodOptions,
) -> Result<PodBasis<T>, PodError> {
    set.check_fingerprint(ops.fingerprint)?;
    check_len(set.n_dofs(), &ops.mass)?;
    let m = set.len();
    let mean = options.center.then(|| {
        let mut mean = vec![T::zero(); set.n_dofs()];
        for u in &set.snapshots {
            axpy(T::one() / T::from_count(m), u, &mut mean);
        }
        mean
    });
    let centered;
    let snaps = match &mean {
        Some(mu) => {
            centered = set
                .snapshots
                .iter()
                .map(|u| u.iter().zip(mu).map(|(&a, &b)| a - b).collect())
                .collect::<Vec<Vec<T>>>();
            &centered
        }
        None => &set.snapshots,
    };
    let k = correlation(snaps, &ops.mass);
    let eig = SymmetricEigen::new(&k);
    let rank = numerical_rank(&eig.values);
    if r > rank {
        return Err(PodError::RankExceeded { requested: r, rank });
    }
    let tol = T::lit(RANK_TOL) * eig.values[0].max(T::zero());
    if let Some(i) = (0..r).find(|&i| !(eig.values[i] >= tol) || eig.values[i] <= T::zero()) {
        return Err(PodError::EigenvalueBelowTolerance {
            index: i + 1,
            value: eig.values[i].as_f64(),
        });
    }
    let mut modes: Vec<Vec<T>> = (0..rank)
        .map(|l| {
            let scale = T::one() / (T::from_count(m) * eig.values[l]).sqrt();
            let mut psi = vec![T::zero(); set.n_dofs()];
            for (i, u) in snaps.iter().enumerate() {
                axpy(scale * eig.vectors[(i, l)], u, &mut psi);
            }
            psi
        })
        .collect();
    mass_orthonormalize(&mut modes, &ops.mass);
    for psi in &mut modes {
        fix_sign(psi);
    }
    let h1_norms = modes.iter().map(|p| ops.h1_norm_sq(p).max(T::zero()).sqrt()).collect();
    modes.truncate(r);
    Ok(PodBasis {
        fingerprint: set.fingerprint,
        modes,
        eigenvalues: eig.values[..rank].to_vec(),
        h1_norms,
        mean,
    })
}

/// Two passes of modified Gram-Schmidt in the `M` inner product.
pub fn mass_orthonormalize<T: Scalar>(modes: &mut [Vec<T>], mass: &CsrMatrix<T>) {
    for l in 0..modes.len() {
        for _ in 0..2 {
            for j in 0..l {
                let mj = mass.matvec(&modes[j]);
                let c = dot(&modes[l], &mj);
                let (head, tail) = modes.split_at_mut(l);
                axpy(-c, &head[j], &mut tail[0]);
            }
        }
        let n = mass.quad_form(&modes[l]).sqrt();
        for v in &mut modes[l] {
            *v /= n;
        }
    }
}

/// Make the entry of largest magnitude positive (lowest index on ties).
fn fix_sign<T: Scalar>(psi: &mut [T]) {
    let mut best = 0;
    for (i, v) in psi.iter().enumerate() {
        if v.abs() > psi[best].abs() {
            best = i;
        }
    }
    if psi.get(best).is_some_and(|&v| v < T::zero()) {
        for v in psi.iter_mut() {
            *v = -*v;
        }
    }
}

/// Both sides of the POD optimality identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionError<T> {
    /// `(1/M) Σ_k ‖u_k − P_r u_k‖²` evaluated directly.
    pub brute_force: T,
    /// `Σ_{i>r} λ_i` over the retained eigenvalues.
    pub eigen_tail: T,
}

impl<T: Scalar> ProjectionError<T> {
    /// Gap between the two sides relative to `scale`.
    pub fn relative_gap(&self, scale: T) -> T {
        (self.brute_force - self.eigen_tail).abs() / scale
    }
}

fn tail_sum<T: Scalar>(basis: &PodBasis<T>, r: usize, weight: impl Fn(usize) -> T) -> T {
    (r..basis.retained()).fold(T::zero(), |acc, i| acc + basis.eigenvalues[i] * weight(i))
}

fn check_r<T: Scalar>(basis: &PodBasis<T>, r: usize) -> Result<(), PodError> {
    if r > basis.r() {
        return Err(PodError::RankExceeded {
            requested: r,
            rank: basis.r(),
        });
    }
    Ok(())
}

fn mean_projection_residual<T: Scalar>(
    set: &SnapshotSet<T>,
    basis: &PodBasis<T>,
    r: usize,
    mass: &CsrMatrix<T>,
    norm_sq: impl Fn(&[T]) -> T,
) -> T {
    let mut total = T::zero();
    for u in &set.snapshots {
        let mut e: Vec<T> = match &basis.mean {
            Some(mu) => u.iter().zip(mu).map(|(&a, &b)| a - b).collect(),
            None => u.clone(),
        };
        let me = mass.matvec(&e);
        let coeffs: Vec<T> = basis.modes[..r].iter().map(|p| dot(p, &me)).collect();
        for (p, &c) in basis.modes[..r].iter().zip(&coeffs) {
            axpy(-c, p, &mut e);
        }
        total += norm_sq(&e);
    }
    total / T::from_count(set.len())
}

/// Mean squared `L²` projection error of the ensemble onto the first `r`
/// modes next to the eigenvalue tail.
pub fn projection_error<T: Scalar>(
    set: &SnapshotSet<T>,
    basis: &PodBasis<T>,
    r: usize,
    ops: &FemOperators<T>,
) -> Result<ProjectionError<T>, PodError> {
    check_r(basis, r)?;
    basis.check_fingerprint(set.fingerprint)?;
    let brute_force = mean_projection_residual(set, basis, r, &ops.mass, |e| ops.mass.quad_form(e));
    Ok(ProjectionError {
        brute_force,
        eigen_tail: tail_sum(basis, r, |_| T::one()),
    })
}

/// The `H¹` analogue: `(1/M) Σ_k ‖u_k − P_r u_k‖₁²` next to
/// `Σ_{i>r} λ_i ‖ψ_i‖₁²`.
pub fn projection_error_h1<T: Scalar>(
    set: &SnapshotSet<T>,
    basis: &PodBasis<T>,
    r: usize,
    ops: &FemOperators<T>,
) -> Result<ProjectionError<T>, PodError> {
    check_r(basis, r)?;
    basis.check_fingerprint(set.fingerprint)?;
    let brute_force = mean_projection_residual(set, basis, r, &ops.mass, |e| ops.h1_norm_sq(e));
    Ok(ProjectionError {
        brute_force,
        eigen_tail: tail_sum(basis, r, |i| basis.h1_norms[i].powi(2)),
    })
}

/// `S_r = Ψᵀ A Ψ`, `(S_r)_ij = (∇ψ_j, ∇ψ_i)`.
pub fn pod_stiffness<T: Scalar>(basis: &PodBasis<T>, ops: &FemOperators<T>) -> DMat<T> {
    let mut s = ops.stiffness.project(&basis.modes, &basis.modes);
    s.symmetrize();
    s
}

/// Coefficients of the `L²` projection onto the span of the modes,
/// `a = Ψᵀ M u`.
pub fn l2_project<T: Scalar>(field: &[T], basis: &PodBasis<T>, ops: &FemOperators<T>) -> Vec<T> {
    let mu = ops.mass.matvec(field);
    basis.modes.iter().map(|p| dot(p, &mu)).collect()
}

/// `ε = sqrt(Σ_{j>cutoff} ‖ψ_j‖₁² λ_j)` over the retained modes.
pub fn epsilon_tail<T: Scalar>(basis: &PodBasis<T>, cutoff: usize) -> Result<T, PodError> {
    if cutoff > basis.retained() {
        return Err(PodError::CutoffOutOfRange {
            cutoff,
            retained: basis.retained(),
        });
    }
    Ok(tail_sum(basis, cutoff, |j| basis.h1_norms[j].powi(2)).sqrt())
}

pub fn write_basis<T: Scalar>(basis: &PodBasis<T>, path: impl AsRef<Path>) -> Result<(), FormatError> {
    if basis.mean.is_some() {
        return Err(FormatError::Inconsistent(
            "centered bases carry a mean field the basis format does not store".into(),
        ));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&BASIS_MAGIC)?;
    w.write_all(&BASIS_VERSION.to_le_bytes())?;
    w.write_all(&basis.fingerprint.to_le_bytes())?;
    w.write_all(&u32_len(basis.r())?.to_le_bytes())?;
    w.write_all(&u32_len(basis.retained())?.to_le_bytes())?;
    w.write_all(&u32_len(basis.n_dofs())?.to_le_bytes())?;
    for v in basis.eigenvalues.iter().chain(&basis.h1_norms).chain(basis.modes.iter().flatten()) {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_basis<T: Scalar>(path: impl AsRef<Path>, expected: Option<u64>) -> Result<PodBasis<T>, FormatError> {
    let bytes = fs::read(path)?;
    let mut rd = ByteReader::new(&bytes);
    rd.magic(BASIS_MAGIC)?;
    let version = rd.u16()?;
    if version != BASIS_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let fingerprint = rd.u64()?;
    if let Some(e) = expected {
        if e != fingerprint {
            return Err(FormatError::FingerprintMismatch {
                expected: e,
                found: fingerprint,
            });
        }
    }
    let r = rd.u32()? as usize;
    let d = rd.u32()? as usize;
    let n = rd.u32()? as usize;
    if r > d {
        return Err(FormatError::Inconsistent(format!("{r} modes but only {d} retained")));
    }
    if r > 0 && n == 0 {
        return Err(FormatError::Inconsistent("modes with zero dofs".into()));
    }
    rd.expect_remaining((2 * d + r * n) * 8)?;
    let eigenvalues = rd.f64_vec(d)?;
    let h1_norms = rd.f64_vec(d)?;
    let modes = (0..r).map(|_| rd.f64_vec(n)).collect::<Result<_, _>>()?;
    rd.finish()?;
    Ok(PodBasis {
        fingerprint,
        modes,
        eigenvalues,
        h1_norms,
        mean: None,
    })
}
