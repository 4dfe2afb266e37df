//! Decoupled variational multiscale post-processing (step 2).
//!
//! With `L^R = span{∇ψ_1..∇ψ_R}` and `P_R` the `L²` projection onto it, the
//! fluctuation matrix is `D_ij = ((I − P_R)∇ψ_j, (I − P_R)∇ψ_i)`. Step 2
//! solves `(a_w − a_u)/Δt = ν_T D (a_w + a_u)/2`.

use crate::error::{LinalgError, VmsError};
use crate::fem::assembly::{sample_gradients, Tabulation};
use crate::fem::TaylorHoodSpace;
use crate::linalg::dense::{Cholesky, DMat};
use crate::pod::PodBasis;
use crate::rom::{integrate, LedgerEntry, PostProcess, ReducedSystem, RomInitial, RomRunSettings, RomTrajectory};
use crate::scalar::{dot, Scalar};
use crate::time::TimeScheme;

/// Relative tolerance on the pivots of the leading stiffness block.
pub const LEADING_BLOCK_TOL: f64 = 1e-12;

/// Ledger gaps above this relative size abort a run as a solver defect.
pub const LEDGER_DEFECT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Schur,
    BruteForce,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationMatrix<T> {
    pub d: DMat<T>,
    pub cutoff: usize,
    pub provenance: Provenance,
}

fn leading_cholesky<T: Scalar>(g: &DMat<T>) -> Result<Cholesky<T>, VmsError> {
    let tolerance = T::lit(LEADING_BLOCK_TOL) * g.sym_spectral_norm();
    Cholesky::with_pivot_floor(g, tolerance).map_err(|e| match e {
        LinalgError::NotPositiveDefinite { value, .. } => VmsError::SingularLeadingBlock {
            pivot: value,
            tolerance: tolerance.as_f64(),
        },
        other => VmsError::Linalg(other),
    })
}

fn check_cutoff(cutoff: usize, r: usize) -> Result<(), VmsError> {
    if cutoff > r {
        return Err(VmsError::InvalidCutoff { cutoff, r });
    }
    Ok(())
}

/// `D` from the block partition `S = [[S_R, C], [Cᵀ, S₂]]`:
/// `D = [[0, 0], [0, S₂ − Cᵀ S_R⁻¹ C]]`.
pub fn build_fluctuation_matrix<T: Scalar>(s: &DMat<T>, cutoff: usize) -> Result<FluctuationMatrix<T>, VmsError> {
    let r = s.rows();
    check_cutoff(cutoff, r)?;
    let mut d = DMat::zeros(r, r);
    if cutoff == 0 {
        d = s.clone();
    } else if cutoff < r {
        let chol = leading_cholesky(&s.block(0, cutoff, 0, cutoff))?;
        let c = s.block(0, cutoff, cutoff, r);
        let x: Vec<Vec<T>> = (0..r - cutoff).map(|j| chol.solve(&c.column(j))).collect();
        for i in cutoff..r {
            for j in cutoff..r {
                let cx: T = (0..cutoff).map(|a| c[(a, i - cutoff)] * x[j - cutoff][a]).sum();
                d[(i, j)] = s[(i, j)] - cx;
            }
        }
    }
    d.symmetrize();
    Ok(FluctuationMatrix {
        d,
        cutoff,
        provenance: Provenance::Schur,
    })
}

/// Gradient fields sampled at quadrature points, `[point][c][d]`, with
/// weights; the `L²` inner product is the weighted sum.
#[derive(Clone, Debug)]
pub struct GradientSamples<T> {
    pub fields: Vec<Vec<[[T; 2]; 2]>>,
    pub weights: Vec<T>,
}

impl<T: Scalar> GradientSamples<T> {
    pub fn from_basis(space: &TaylorHoodSpace<T>, basis: &PodBasis<T>) -> Self {
        let tab = Tabulation::<T>::standard();
        let mut weights = Vec::new();
        let fields = basis
            .modes
            .iter()
            .map(|psi| {
                let (g, w) = sample_gradients(space, psi, &tab);
                weights = w;
                g
            })
            .collect();
        Self { fields, weights }
    }

    pub fn inner(&self, a: &[[[T; 2]; 2]], b: &[[[T; 2]; 2]]) -> T {
        let mut s = T::zero();
        for ((ga, gb), &w) in a.iter().zip(b).zip(&self.weights) {
            let mut v = T::zero();
            for c in 0..2 {
                for d in 0..2 {
                    v += ga[c][d] * gb[c][d];
                }
            }
            s += w * v;
        }
        s
    }
}

/// `D` by explicit projection: each sampled gradient field is projected onto
/// the span of the first `cutoff` ones through their Gram system, and the
/// residual fields are paired directly.
pub fn fluctuation_matrix_bruteforce<T: Scalar>(
    samples: &GradientSamples<T>,
    cutoff: usize,
) -> Result<FluctuationMatrix<T>, VmsError> {
    let r = samples.fields.len();
    check_cutoff(cutoff, r)?;
    let gram = DMat::from_fn(cutoff, cutoff, |a, b| samples.inner(&samples.fields[a], &samples.fields[b]));
    let chol = if cutoff > 0 { Some(leading_cholesky(&gram)?) } else { None };
    let residuals: Vec<Vec<[[T; 2]; 2]>> = samples
        .fields
        .iter()
        .map(|g| {
            let mut res = g.clone();
            if let Some(chol) = &chol {
                let rhs: Vec<T> = (0..cutoff).map(|a| samples.inner(&samples.fields[a], g)).collect();
                let coeff = chol.solve(&rhs);
                for (a, &ca) in coeff.iter().enumerate() {
                    for (p, ga) in res.iter_mut().zip(&samples.fields[a]) {
                        for c in 0..2 {
                            for d in 0..2 {
                                p[c][d] -= ca * ga[c][d];
                            }
                        }
                    }
                }
            }
            res
        })
        .collect();
    let mut d = DMat::from_fn(r, r, |i, j| samples.inner(&residuals[i], &residuals[j]));
    d.symmetrize();
    Ok(FluctuationMatrix {
        d,
        cutoff,
        provenance: Provenance::BruteForce,
    })
}

fn check_params<T: Scalar>(dt: T, nu_t: T) -> Result<(), VmsError> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(VmsError::InvalidTimeStep);
    }
    if !(nu_t >= T::zero()) || !nu_t.is_finite() {
        return Err(VmsError::NegativeEddyViscosity(nu_t.as_f64()));
    }
    Ok(())
}

/// Step 2 for fixed `(Δt, ν_T, D)`: `(I + cD) a_u = (I − cD) a_w`,
/// `c = ν_T Δt / 2`, with the SPD factor computed once.
#[derive(Clone, Debug)]
pub struct Step2Filter<T> {
    pub dt: T,
    pub nu_t: T,
    c: T,
    d: DMat<T>,
    factor: Cholesky<T>,
    check_ledger: bool,
}

impl<T: Scalar> Step2Filter<T> {
    pub fn new(fluct: &FluctuationMatrix<T>, dt: T, nu_t: T) -> Result<Self, VmsError> {
        check_params(dt, nu_t)?;
        let c = nu_t * dt / T::lit(2.0);
        let n = fluct.d.rows();
        let mut a = DMat::identity(n);
        a.add_scaled(c, &fluct.d);
        let factor = Cholesky::new(&a)?;
        Ok(Self {
            dt,
            nu_t,
            c,
            d: fluct.d.clone(),
            factor,
            check_ledger: true,
        })
    }

    /// Skip the per-step ledger defect check (the ledger is still recorded).
    pub fn without_defect_check(mut self) -> Self {
        self.check_ledger = false;
        self
    }

    pub fn filter(&self, a_w: &[T]) -> Vec<T> {
        let dw = self.d.matvec(a_w);
        let rhs: Vec<T> = a_w.iter().zip(&dw).map(|(&w, &x)| w - self.c * x).collect();
        self.factor.solve(&rhs)
    }

    pub fn ledger(&self, a_w: &[T], a_u: &[T]) -> LedgerEntry<T> {
        dissipation_ledger_with(a_w, a_u, self.dt, self.nu_t, &self.d)
    }
}

impl<T: Scalar> PostProcess<T> for Step2Filter<T> {
    type Error = VmsError;

    fn apply(&self, a_w: &[T], step: usize) -> Result<(Vec<T>, Option<LedgerEntry<T>>), VmsError> {
        let a_u = self.filter(a_w);
        let entry = self.ledger(a_w, &a_u);
        if self.check_ledger && entry.rel_gap.as_f64() > LEDGER_DEFECT_TOL {
            return Err(VmsError::DissipationDefect {
                step,
                gap: entry.rel_gap.as_f64(),
            });
        }
        Ok((a_u, Some(entry)))
    }
}

/// One step-2 solve.
pub fn step2_filter<T: Scalar>(a_w: &[T], dt: T, nu_t: T, fluct: &FluctuationMatrix<T>) -> Result<Vec<T>, VmsError> {
    Ok(Step2Filter::new(fluct, dt, nu_t)?.filter(a_w))
}

fn dissipation_ledger_with<T: Scalar>(a_w: &[T], a_u: &[T], dt: T, nu_t: T, d: &DMat<T>) -> LedgerEntry<T> {
    let q: Vec<T> = a_w.iter().zip(a_u).map(|(&w, &u)| (w + u) / T::lit(2.0)).collect();
    let diss = T::lit(2.0) * nu_t * dt * d.bilinear(&q, &q);
    LedgerEntry::new(dot(a_w, a_w), dot(a_u, a_u), diss)
}

/// `‖a_w‖²`, `‖a_u‖²` and `2 ν_T Δt qᵀ D q` with the identity gap.
pub fn dissipation_ledger<T: Scalar>(
    a_w: &[T],
    a_u: &[T],
    dt: T,
    nu_t: T,
    fluct: &FluctuationMatrix<T>,
) -> LedgerEntry<T> {
    dissipation_ledger_with(a_w, a_u, dt, nu_t, &fluct.d)
}

/// Message recorded for BDF2 runs outside the sufficient stability range.
pub fn bdf2_warning<T: Scalar>(nu: T, nu_t: T) -> Option<String> {
    (nu_t >= T::lit(4.0) * nu).then(|| {
        format!(
            "BDF2 post-processing is only known to be stable for nu_T < 4 nu; nu_T = {} >= 4 nu = {}",
            nu_t.as_f64(),
            4.0 * nu.as_f64()
        )
    })
}

/// Step 1 followed by step 2 at every step, with `D` from the Schur
/// complement of the reduced stiffness.
pub fn run_vms_pod<T: Scalar>(
    sys: &ReducedSystem<T>,
    init: &RomInitial<T>,
    settings: &RomRunSettings<T>,
    cutoff: usize,
    nu_t: T,
) -> Result<RomTrajectory<T>, VmsError> {
    let fluct = build_fluctuation_matrix(&sys.stiffness, cutoff)?;
    run_vms_pod_with(sys, init, settings, &fluct, nu_t)
}

pub fn run_vms_pod_with<T: Scalar>(
    sys: &ReducedSystem<T>,
    init: &RomInitial<T>,
    settings: &RomRunSettings<T>,
    fluct: &FluctuationMatrix<T>,
    nu_t: T,
) -> Result<RomTrajectory<T>, VmsError> {
    check_cutoff(fluct.cutoff, sys.r)?;
    let filter = Step2Filter::new(fluct, settings.dt, nu_t)?;
    let mut traj = integrate(sys, init, settings, &filter)?;
    if settings.scheme == TimeScheme::Bdf2 {
        traj.warnings.extend(bdf2_warning(sys.nu, nu_t));
    }
    Ok(traj)
}

#[cfg(test)]
mod tests;
