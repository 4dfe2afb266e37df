//! Discrete space-time norms, reduced-solution errors, convergence rates,
//! stability audits and parameter studies.

use serde::{Deserialize, Serialize};

use crate::error::DiagnosticsError;
use crate::fem::FemOperators;
use crate::pod::PodBasis;
use crate::rom::RomTrajectory;
use crate::scalar::Scalar;

mod audit;
mod study;

pub use audit::{stability_audit, AuditCheck, AuditReport, AUDIT_REL_TOL};
pub use study::{
    rate_table, read_rate_table, study_varying_dt, study_varying_r, write_rate_table, RateRow, RateTable, StudyInputs,
    StudyKind,
};

/// Space-time norm of a field sequence `v¹..v^N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `max_n ‖vⁿ‖`.
    LinfL2,
    /// `(Δt Σ ‖vⁿ‖²)^{1/2}`.
    L2L2,
    /// `(Δt Σ ‖vⁿ‖²_{H¹})^{1/2}` with the full `M + A` norm.
    L2H1,
    /// `(Δt Σ ‖∇vⁿ‖²)^{1/2}`.
    L2H1Semi,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscreteNormSpec<T> {
    pub kind: NormKind,
    pub dt: T,
}

impl<T: Scalar> DiscreteNormSpec<T> {
    pub fn new(kind: NormKind, dt: T) -> Result<Self, DiagnosticsError> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(DiagnosticsError::NonPositive);
        }
        Ok(Self { kind, dt })
    }
}

fn sq_norm<T: Scalar>(kind: NormKind, v: &[T], ops: &FemOperators<T>) -> T {
    match kind {
        NormKind::LinfL2 | NormKind::L2L2 => ops.mass.quad_form(v),
        NormKind::L2H1 => ops.h1_norm_sq(v),
        NormKind::L2H1Semi => ops.stiffness.quad_form(v),
    }
}

pub fn discrete_norm<T: Scalar, V: AsRef<[T]>>(
    fields: &[V],
    spec: &DiscreteNormSpec<T>,
    ops: &FemOperators<T>,
) -> Result<T, DiagnosticsError> {
    if fields.is_empty() {
        return Err(DiagnosticsError::EmptySequence);
    }
    let n = ops.mass.nrows();
    if let Some(bad) = fields.iter().find(|v| v.as_ref().len() != n) {
        return Err(DiagnosticsError::Dimension(format!(
            "field has {} entries, operators expect {n}",
            bad.as_ref().len()
        )));
    }
    let sq = fields.iter().map(|v| sq_norm(spec.kind, v.as_ref(), ops).max(T::zero()));
    Ok(match spec.kind {
        NormKind::LinfL2 => sq.fold(T::zero(), T::max).sqrt(),
        _ => (spec.dt * sq.sum::<T>()).sqrt(),
    })
}

/// Index maps between two uniform time grids starting at the same time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridMatch {
    /// Rom level `n·rom_stride` pairs with reference level `n·ref_stride`.
    pub rom_stride: usize,
    pub ref_stride: usize,
    pub levels: usize,
}

fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let q = a / b;
    let k = q.round();
    (k >= 1.0 && (q - k).abs() <= 1e-9 * k).then_some(k as usize)
}

/// Coarsest common grid of two uniform grids with `rom_steps` and
/// `ref_steps` steps, when one step is an integer multiple of the other.
pub fn match_grids(
    rom_dt: f64,
    rom_steps: usize,
    ref_dt: f64,
    ref_steps: usize,
) -> Result<GridMatch, DiagnosticsError> {
    let (rom_stride, ref_stride) = if let Some(k) = integer_ratio(rom_dt, ref_dt) {
        (1, k)
    } else if let Some(k) = integer_ratio(ref_dt, rom_dt) {
        (k, 1)
    } else {
        return Err(DiagnosticsError::GridMismatch);
    };
    let levels = (rom_steps / rom_stride).min(ref_steps / ref_stride);
    if levels == 0 {
        return Err(DiagnosticsError::GridMismatch);
    }
    Ok(GridMatch {
        rom_stride,
        ref_stride,
        levels,
    })
}

/// Errors of the reconstructed reduced solution `Ψ a_u` against reference
/// full-order fields on the common grid, over levels `1..=levels`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Step of the common grid.
    pub dt: f64,
    pub levels: usize,
    pub linf_l2: f64,
    pub l2_l2: f64,
    /// Gradient seminorm, `(Δt Σ ‖∇eⁿ‖²)^{1/2}`.
    pub l2_h1: f64,
    pub final_l2: f64,
}

pub fn rom_error<T: Scalar>(
    traj: &RomTrajectory<T>,
    ref_dt: T,
    reference: &[Vec<T>],
    basis: &PodBasis<T>,
    ops: &FemOperators<T>,
) -> Result<ErrorReport, DiagnosticsError> {
    if reference.is_empty() {
        return Err(DiagnosticsError::EmptySequence);
    }
    if traj.r() != basis.r() {
        return Err(DiagnosticsError::Dimension(format!(
            "trajectory has r={}, basis has r={}",
            traj.r(),
            basis.r()
        )));
    }
    if traj.times[0].as_f64().abs() > 1e-12 * traj.dt.as_f64() {
        return Err(DiagnosticsError::GridMismatch);
    }
    let m = match_grids(traj.dt.as_f64(), traj.steps(), ref_dt.as_f64(), reference.len() - 1)?;
    let errors: Vec<Vec<T>> = (1..=m.levels)
        .map(|n| {
            let rom = basis.reconstruct(&traj.a_u[n * m.rom_stride]);
            rom.iter().zip(&reference[n * m.ref_stride]).map(|(a, b)| *a - *b).collect()
        })
        .collect();
    let dt = traj.dt * T::from_count(m.rom_stride);
    let norm = |kind| discrete_norm(&errors, &DiscreteNormSpec::new(kind, dt)?, ops).map(|v| v.as_f64());
    Ok(ErrorReport {
        dt: dt.as_f64(),
        levels: m.levels,
        linf_l2: norm(NormKind::LinfL2)?,
        l2_l2: norm(NormKind::L2L2)?,
        l2_h1: norm(NormKind::L2H1Semi)?,
        final_l2: ops.l2_norm(&errors[m.levels - 1]).as_f64(),
    })
}

/// Observed order `log(e_c/e_f) / log(p_c/p_f)`.
pub fn convergence_rate(e_coarse: f64, e_fine: f64, p_coarse: f64, p_fine: f64) -> Result<f64, DiagnosticsError> {
    let ok = |v: f64| v > 0.0 && v.is_finite();
    if !(ok(e_coarse) && ok(e_fine) && ok(p_coarse) && ok(p_fine)) || p_coarse == p_fine {
        return Err(DiagnosticsError::NonPositive);
    }
    Ok((e_coarse / e_fine).ln() / (p_coarse / p_fine).ln())
}

#[cfg(test)]
mod tests;
