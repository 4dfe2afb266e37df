//! Galerkin reduced-order model: reduced operators and the step-1
//! evolution in POD coordinates.

use std::fmt;
use std::sync::Arc;

use crate::dns::NseProblem;
use crate::error::RomError;
use crate::fem::assembly::{assemble_convection, ElementGeometry, Tabulation};
use crate::fem::{FemOperators, TaylorHoodSpace};
use crate::linalg::dense::{DMat, Lu};
use crate::pod::{pod_stiffness, PodBasis};
use crate::scalar::{dot, max_abs, norm2, Scalar};
use crate::time::TimeScheme;

mod trajectory;

pub use trajectory::{read_trajectory_csv, write_trajectory_csv, LedgerEntry, RomTrajectory, TRAJECTORY_COLUMNS};

/// Reduced forcing `t ↦ f_r(t)`.
pub type ReducedForce<T> = Arc<dyn Fn(T) -> Vec<T> + Send + Sync>;

/// Reduced operators of the POD-Galerkin system
/// `ȧ + ν S a + N(a, a) = f_r(t)` with `N(a, b)_i = Σ_jk a_j b_k T[j][k][i]`.
#[derive(Clone)]
pub struct ReducedSystem<T> {
    pub fingerprint: u64,
    pub r: usize,
    pub nu: T,
    pub stiffness: DMat<T>,
    /// `T[j][k][i] = b(ψ_j, ψ_k, ψ_i)` at flat index `(j r + k) r + i`.
    pub tensor: Vec<T>,
    pub force: Option<ReducedForce<T>>,
}

impl<T: fmt::Debug> fmt::Debug for ReducedSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReducedSystem")
            .field("r", &self.r)
            .field("nu", &self.nu)
            .field("forced", &self.force.is_some())
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> ReducedSystem<T> {
    /// A system from explicit operators; `tensor` must have `r³` entries.
    pub fn from_parts(nu: T, stiffness: DMat<T>, tensor: Vec<T>, force: Option<ReducedForce<T>>) -> Result<Self, RomError> {
        let r = stiffness.rows();
        if !stiffness.is_square() || tensor.len() != r * r * r {
            return Err(RomError::Dimension(format!(
                "stiffness {}x{} and tensor of length {}",
                stiffness.rows(),
                stiffness.cols(),
                tensor.len()
            )));
        }
        Ok(Self {
            fingerprint: 0,
            r,
            nu,
            stiffness,
            tensor,
            force,
        })
    }

    #[inline]
    pub fn t(&self, j: usize, k: usize, i: usize) -> T {
        self.tensor[(j * self.r + k) * self.r + i]
    }

    /// `N(a, b)`.
    pub fn nonlinear(&self, a: &[T], b: &[T]) -> Vec<T> {
        let r = self.r;
        let mut out = vec![T::zero(); r];
        for j in 0..r {
            if a[j] == T::zero() {
                continue;
            }
            for k in 0..r {
                let c = a[j] * b[k];
                let row = &self.tensor[(j * r + k) * r..(j * r + k + 1) * r];
                for (o, &t) in out.iter_mut().zip(row) {
                    *o += c * t;
                }
            }
        }
        out
    }

    /// Jacobian of `a ↦ N(a, a)`: `J_im = Σ_k a_k (T[m][k][i] + T[k][m][i])`.
    pub fn nonlinear_jacobian(&self, a: &[T]) -> DMat<T> {
        let r = self.r;
        let mut jac = DMat::zeros(r, r);
        for m in 0..r {
            for k in 0..r {
                let ak = a[k];
                if ak == T::zero() {
                    continue;
                }
                for i in 0..r {
                    jac[(i, m)] += ak * (self.t(m, k, i) + self.t(k, m, i));
                }
            }
        }
        jac
    }

    pub fn force_at(&self, t: T) -> Vec<T> {
        match &self.force {
            Some(f) => f(t),
            None => vec![T::zero(); self.r],
        }
    }

    /// Largest deviation from `T[j][k][i] = −T[j][i][k]`.
    pub fn skew_defect(&self) -> T {
        let mut worst = T::zero();
        for j in 0..self.r {
            for k in 0..self.r {
                for i in 0..self.r {
                    worst = worst.max((self.t(j, k, i) + self.t(j, i, k)).abs());
                }
            }
        }
        worst
    }

    pub fn tensor_max(&self) -> T {
        max_abs(&self.tensor)
    }
}

/// Reduced operators for `problem` in the span of `basis`.
///
/// The tensor is assembled from the skew-symmetric convection matrices and
/// then antisymmetrized in its last two slots, which removes round-off
/// from the energy cancellation; the forcing is projected with the same
/// quadrature as the full-order load vector.
pub fn build_reduced_system<T: Scalar>(
    basis: &PodBasis<T>,
    space: &TaylorHoodSpace<T>,
    ops: &FemOperators<T>,
    problem: &NseProblem<T>,
) -> Result<ReducedSystem<T>, RomError> {
    let fp = space.fingerprint();
    for found in [basis.fingerprint, ops.fingerprint] {
        if found != fp {
            return Err(RomError::FingerprintMismatch { expected: fp, found });
        }
    }
    if basis.n_dofs() != space.n_velocity() {
        return Err(RomError::Dimension(format!(
            "basis has {} dofs, space {}",
            basis.n_dofs(),
            space.n_velocity()
        )));
    }
    if basis.mean.is_some() {
        return Err(RomError::CenteredBasis);
    }
    let r = basis.r();
    let mut tensor = vec![T::zero(); r * r * r];
    if problem.convection {
        for j in 0..r {
            let n_j = assemble_convection(space, &basis.modes[j]);
            for k in 0..r {
                let y = n_j.matvec(&basis.modes[k]);
                for i in 0..r {
                    tensor[(j * r + k) * r + i] = dot(&basis.modes[i], &y);
                }
            }
        }
        let half = T::lit(0.5);
        for j in 0..r {
            for k in 0..r {
                for i in k..r {
                    let a = (j * r + k) * r + i;
                    let b = (j * r + i) * r + k;
                    let v = half * (tensor[a] - tensor[b]);
                    tensor[a] = v;
                    tensor[b] = -v;
                }
            }
        }
    }
    let force = problem.forcing.as_ref().map(|f| project_forcing(space, basis, f.clone()));
    Ok(ReducedSystem {
        fingerprint: fp,
        r,
        nu: problem.nu,
        stiffness: pod_stiffness(basis, ops),
        tensor,
        force,
    })
}

/// `f_r(t)_i = (f(t), ψ_i)` via the mode values at the quadrature points.
fn project_forcing<T: Scalar>(
    space: &TaylorHoodSpace<T>,
    basis: &PodBasis<T>,
    f: crate::dns::problem::VectorField<T>,
) -> ReducedForce<T> {
    let tab = Tabulation::<T>::standard();
    let r = basis.r();
    let mut points = Vec::new();
    // weighted mode values, [point][mode][component]
    let mut values: Vec<T> = Vec::new();
    for k in 0..space.mesh().n_triangles() {
        let geo = ElementGeometry::new(space, k);
        let nodes = space.element_nodes(k);
        for (q, wt) in tab.rule.weights.iter().enumerate() {
            let wq = *wt * geo.det();
            points.push(geo.map(tab.rule.points[q]));
            for psi in &basis.modes {
                for c in 0..2 {
                    let v: T = (0..6).map(|a| psi[2 * nodes[a] + c] * tab.phi[q][a]).sum();
                    values.push(wq * v);
                }
            }
        }
    }
    Arc::new(move |t| {
        let mut out = vec![T::zero(); r];
        for (p, x) in points.iter().enumerate() {
            let fx = f(t, *x);
            let row = &values[p * 2 * r..(p + 1) * 2 * r];
            for (i, o) in out.iter_mut().enumerate() {
                *o += fx[0] * row[2 * i] + fx[1] * row[2 * i + 1];
            }
        }
        out
    })
}

/// Stopping rule of the reduced Newton iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RomNewtonSettings {
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for RomNewtonSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-11,
            max_iter: 25,
        }
    }
}

/// One implicit step `(α/Δt) a + λ (ν S a + N(a, a)) = h + f`, where `h`
/// collects the history terms; the step proper has `λ = 1`.
struct ImplicitStep<'s, T> {
    sys: &'s ReducedSystem<T>,
    coeff: T,
    rhs: Vec<T>,
    lambda: T,
}

impl<T: Scalar> ImplicitStep<'_, T> {
    fn residual(&self, a: &[T]) -> (Vec<T>, T) {
        let sa = self.sys.stiffness.matvec(a);
        let na = self.sys.nonlinear(a, a);
        let mut scale = norm2(&self.rhs);
        let res = (0..a.len())
            .map(|i| {
                let terms = [self.coeff * a[i], self.lambda * self.sys.nu * sa[i], self.lambda * na[i]];
                for t in terms {
                    scale = scale.max(t.abs());
                }
                terms[0] + terms[1] + terms[2] - self.rhs[i]
            })
            .collect();
        (res, scale)
    }

    fn jacobian(&self, a: &[T]) -> DMat<T> {
        let mut jac = self.sys.nonlinear_jacobian(a);
        jac.add_scaled(self.sys.nu, &self.sys.stiffness);
        jac.scale(self.lambda);
        for i in 0..a.len() {
            jac[(i, i)] += self.coeff;
        }
        jac
    }

    /// Newton from `guess`. If it fails, the step is reached by continuation
    /// in `λ` from the explicit solution `a = rhs Δt/α` at `λ = 0`.
    fn solve(mut self, guess: Vec<T>, settings: &RomNewtonSettings) -> Result<(Vec<T>, usize), RomError> {
        let err = match self.newton(guess, settings) {
            Ok(done) => return Ok(done),
            Err(e @ RomError::NonConvergence { .. }) => e,
            Err(e) => return Err(e),
        };
        let mut a: Vec<T> = self.rhs.iter().map(|&v| v / self.coeff).collect();
        let (mut reached, mut step) = (T::zero(), T::lit(0.25));
        let mut total = settings.max_iter;
        while reached < T::one() {
            if step < T::lit(1e-6) {
                return Err(err);
            }
            self.lambda = (reached + step).min(T::one());
            match self.newton(a.clone(), settings) {
                Ok((next, it)) => {
                    a = next;
                    total += it;
                    reached = self.lambda;
                    step = step * T::lit(2.0);
                }
                Err(RomError::NonConvergence { .. }) => step = step * T::lit(0.5),
                Err(e) => return Err(e),
            }
        }
        Ok((a, total))
    }

    /// Newton with Armijo backtracking; stops at `abs_tol` or, when that lies
    /// below attainable precision, at a few ulps of the largest term.
    fn newton(&self, guess: Vec<T>, settings: &RomNewtonSettings) -> Result<(Vec<T>, usize), RomError> {
        let mut a = guess;
        let floor = T::lit(64.0) * T::epsilon();
        for it in 0..=settings.max_iter {
            let (res, scale) = self.residual(&a);
            let norm = norm2(&res);
            let fail = |residual: f64| RomError::NonConvergence { iterations: it, residual };
            if !norm.is_finite() {
                return Err(fail(f64::NAN));
            }
            if norm.as_f64() <= settings.abs_tol || norm <= floor * scale {
                return Ok((a, it));
            }
            if it == settings.max_iter {
                return Err(fail(norm.as_f64()));
            }
            let delta = Lu::new(&self.jacobian(&a))?.solve(&res);
            a = self.backtrack(&a, &delta, norm).ok_or_else(|| fail(norm.as_f64()))?;
        }
        unreachable!("loop returns")
    }

    /// `a − μ δ` with the largest `μ = 2⁻ᵏ` that decreases the residual.
    fn backtrack(&self, a: &[T], delta: &[T], norm: T) -> Option<Vec<T>> {
        let mut mu = T::one();
        for _ in 0..20 {
            let cand: Vec<T> = a.iter().zip(delta).map(|(&x, &d)| x - mu * d).collect();
            let n = norm2(&self.residual(&cand).0);
            if n.is_finite() && n <= (T::one() - T::lit(1e-4) * mu) * norm {
                return Some(cand);
            }
            mu = mu * T::lit(0.5);
        }
        None
    }
}

fn implicit_step<T: Scalar>(
    sys: &ReducedSystem<T>,
    scheme: TimeScheme,
    dt: T,
    levels: (&[T], Option<&[T]>),
    f_next: &[T],
    settings: &RomNewtonSettings,
) -> Result<(Vec<T>, usize), RomError> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(RomError::InvalidTimeStep);
    }
    let (b0, b1) = scheme.history::<T>();
    let (a_n, a_nm1) = levels;
    let rhs = (0..sys.r)
        .map(|i| {
            let mut h = b0 * a_n[i];
            if let Some(p) = a_nm1 {
                h += b1 * p[i];
            }
            h / dt + f_next[i]
        })
        .collect();
    let step = ImplicitStep {
        sys,
        coeff: scheme.alpha::<T>() / dt,
        rhs,
        lambda: T::one(),
    };
    step.solve(a_n.to_vec(), settings)
}

/// Backward-Euler step 1: `(a_w − a_u^n)/Δt + ν S a_w + N(a_w, a_w) = f_r(t^{n+1})`.
pub fn step1_backward_euler<T: Scalar>(
    a_n: &[T],
    dt: T,
    t_next: T,
    sys: &ReducedSystem<T>,
    settings: &RomNewtonSettings,
) -> Result<(Vec<T>, usize), RomError> {
    let f = sys.force_at(t_next);
    implicit_step(sys, TimeScheme::BackwardEuler, dt, (a_n, None), &f, settings)
}

/// BDF2 step 1: `(3a_w − 4a_u^n + a_u^{n−1})/(2Δt) + ν S a_w + N(a_w, a_w) = f_r(t^{n+1})`.
pub fn step1_bdf2<T: Scalar>(
    a_n: &[T],
    a_nm1: &[T],
    dt: T,
    t_next: T,
    sys: &ReducedSystem<T>,
    settings: &RomNewtonSettings,
) -> Result<(Vec<T>, usize), RomError> {
    let f = sys.force_at(t_next);
    implicit_step(sys, TimeScheme::Bdf2, dt, (a_n, Some(a_nm1)), &f, settings)
}

/// Initial reduced data: `a⁰` and, for BDF2, an optional given second level
/// `a¹` (otherwise synthesized by one backward-Euler step).
#[derive(Clone, Debug, PartialEq)]
pub struct RomInitial<T> {
    pub a0: Vec<T>,
    pub a1: Option<Vec<T>>,
}

impl<T: Scalar> RomInitial<T> {
    pub fn new(a0: Vec<T>) -> Self {
        Self { a0, a1: None }
    }

    /// `L²` projection of the initial field.
    pub fn project(u0: &[T], basis: &PodBasis<T>, ops: &FemOperators<T>) -> Self {
        Self::new(crate::pod::l2_project(u0, basis, ops))
    }
}

/// Time grid and solver settings of a reduced run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RomRunSettings<T> {
    pub scheme: TimeScheme,
    pub dt: T,
    pub steps: usize,
    pub t0: T,
    pub newton: RomNewtonSettings,
}

impl<T: Scalar> RomRunSettings<T> {
    pub fn new(scheme: TimeScheme, dt: T, steps: usize) -> Self {
        Self {
            scheme,
            dt,
            steps,
            t0: T::zero(),
            newton: RomNewtonSettings::default(),
        }
    }
}

/// Post-processing applied after each step-1 solve.
pub trait PostProcess<T> {
    type Error: From<RomError>;

    /// Returns `a_u^{n+1}` and the ledger entry for the step.
    fn apply(&self, a_w: &[T], step: usize) -> Result<(Vec<T>, Option<LedgerEntry<T>>), Self::Error>;
}

/// Step 2 switched off.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl<T: Scalar> PostProcess<T> for Identity {
    type Error = RomError;

    fn apply(&self, a_w: &[T], _step: usize) -> Result<(Vec<T>, Option<LedgerEntry<T>>), RomError> {
        Ok((a_w.to_vec(), None))
    }
}

/// Alternate step 1 with `post` for `settings.steps` steps.
pub fn integrate<T: Scalar, P: PostProcess<T>>(
    sys: &ReducedSystem<T>,
    init: &RomInitial<T>,
    settings: &RomRunSettings<T>,
    post: &P,
) -> Result<RomTrajectory<T>, P::Error> {
    let RomRunSettings {
        scheme, dt, steps, t0, ..
    } = *settings;
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(RomError::InvalidTimeStep.into());
    }
    if init.a0.len() != sys.r || init.a1.as_ref().is_some_and(|a| a.len() != sys.r) {
        return Err(RomError::Dimension(format!("initial data must have {} coefficients", sys.r)).into());
    }
    let mut traj = RomTrajectory::new(scheme, dt, t0, init.a0.clone());
    for n in 0..steps {
        let t_next = t0 + dt * T::from_count(n + 1);
        let a_n = &traj.a_u[n];
        let given = (n == 0 && scheme == TimeScheme::Bdf2).then_some(()).and(init.a1.as_ref());
        let (a_w, iterations) = match (given, scheme, n) {
            (Some(a1), _, _) => (a1.clone(), 0),
            (None, TimeScheme::BackwardEuler, _) | (None, TimeScheme::Bdf2, 0) => {
                step1_backward_euler(a_n, dt, t_next, sys, &settings.newton)?
            }
            (None, TimeScheme::Bdf2, _) => step1_bdf2(a_n, &traj.a_u[n - 1], dt, t_next, sys, &settings.newton)?,
        };
        if a_w.iter().any(|v| !v.is_finite()) {
            return Err(RomError::NonFinite { step: n + 1 }.into());
        }
        let (a_u, entry) = match given {
            None => post.apply(&a_w, n + 1)?,
            Some(_) => (a_w.clone(), None),
        };
        if a_u.iter().any(|v| !v.is_finite()) {
            return Err(RomError::NonFinite { step: n + 1 }.into());
        }
        let viscous = T::lit(2.0) * sys.nu * dt * sys.stiffness.bilinear(&a_w, &a_w);
        traj.push(t_next, a_w, a_u, entry, viscous, iterations);
    }
    Ok(traj)
}

/// Galerkin POD run: step 2 disabled, `a_u^{n+1} = a_w^{n+1}`.
pub fn run_pod_g<T: Scalar>(
    sys: &ReducedSystem<T>,
    init: &RomInitial<T>,
    settings: &RomRunSettings<T>,
) -> Result<RomTrajectory<T>, RomError> {
    integrate(sys, init, settings, &Identity)
}
