//! Newton solver for the implicit Taylor-Hood Navier-Stokes system.
//!
//! Unknowns are velocity `u` and pressure `p`, with a zero-mean multiplier
//! `μ` for the pressure gauge:
//!
//! ```text
//! [ K(u)  −Bᵀ  0 ] [δu]   [−R_u]
//! [ −B     0   m ] [δp] = [−R_p]
//! [  0     mᵀ  0 ] [δμ]   [ −s ]
//! ```
//!
//! with `K(u) = c M + ν A + N(u) + N₁(u)` and `m_q = ∫ q`. Because every
//! boundary node carries Dirichlet data, constant pressures lie in the kernel
//! of the velocity rows of `Bᵀ` and the multiplier decouples: `δμ` follows
//! from the sum of the continuity residual, one pressure dof is pinned, and
//! the pressure is shifted to zero mean afterwards. Linear systems are
//! factored by banded LU in a node-by-node ordering that keeps the
//! bandwidth proportional to one mesh row.

use crate::dns::problem::NseProblem;
use crate::error::{LinalgError, SolverError};
use crate::fem::assembly::{assemble_convection, assemble_load, for_each_convection_jacobian_entry};
use crate::fem::{FemOperators, TaylorHoodSpace};
use crate::linalg::band::{BandLu, BandMatrix};
use crate::scalar::{dot, Scalar};
use crate::time::TimeScheme;

/// Stopping rule for the nonlinear iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSettings {
    /// Relative to the residual of the initial guess.
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl NewtonSettings {
    /// Default tolerances, loosened to the working precision of `T`.
    pub fn for_scalar<T: Scalar>() -> Self {
        let eps = T::epsilon().as_f64();
        Self {
            rel_tol: 1e-10f64.max(1e3 * eps),
            abs_tol: 1e-12f64.max(1e2 * eps),
            max_iter: 25,
        }
    }
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self::for_scalar::<f64>()
    }
}

/// Residual norms of one nonlinear solve, starting with the initial guess.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonLog {
    pub residuals: Vec<f64>,
}

impl NewtonLog {
    /// Newton updates applied.
    pub fn iterations(&self) -> usize {
        self.residuals.len().saturating_sub(1)
    }
}

/// Static operators plus the dof ordering used for factorization.
#[derive(Clone, Debug)]
pub struct SaddleSystem<'a, T> {
    space: &'a TaylorHoodSpace<T>,
    ops: FemOperators<T>,
    perm: Vec<usize>,
    inv: Vec<usize>,
    band: (usize, usize),
    pin: usize,
    weight_sum: T,
}

/// A velocity/pressure pair.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState<T> {
    pub velocity: Vec<T>,
    pub pressure: Vec<T>,
}

/// Time-discrete data of one implicit step: `c M u − h` is the discrete
/// time derivative and `load` the assembled forcing.
pub struct StepData<'d, T> {
    pub mass_coeff: T,
    pub history: &'d [T],
    pub load: &'d [T],
    pub nu: T,
    pub convection: bool,
}

impl<'a, T: Scalar> SaddleSystem<'a, T> {
    pub fn new(space: &'a TaylorHoodSpace<T>) -> Self {
        let ops = FemOperators::assemble(space);
        let nu = space.n_velocity();
        let mut perm = Vec::with_capacity(nu + space.n_pressure());
        for node in 0..space.n_nodes() {
            perm.push(2 * node);
            perm.push(2 * node + 1);
            if let Some(v) = space.node_vertex(node) {
                perm.push(nu + v);
            }
        }
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        // Every coupling lives inside one element: scan element dof sets.
        let (mut kl, mut ku) = (0usize, 0usize);
        for k in 0..space.mesh().n_triangles() {
            let mut dofs: Vec<usize> = space
                .element_nodes(k)
                .iter()
                .flat_map(|&n| [inv[2 * n], inv[2 * n + 1]])
                .collect();
            dofs.extend(space.element_pressure(k).iter().map(|&q| inv[nu + q]));
            let (lo, hi) = (dofs.iter().min().unwrap(), dofs.iter().max().unwrap());
            kl = kl.max(hi - lo);
            ku = ku.max(hi - lo);
        }
        let weight_sum = ops.pressure_weights.iter().copied().sum();
        Self {
            space,
            ops,
            perm,
            inv,
            band: (kl, ku),
            pin: 0,
            weight_sum,
        }
    }

    pub fn space(&self) -> &TaylorHoodSpace<T> {
        self.space
    }

    pub fn operators(&self) -> &FemOperators<T> {
        &self.ops
    }

    /// Momentum and continuity residuals with Dirichlet rows zeroed and the
    /// continuity residual projected off the gauge direction `m`.
    pub fn residual(&self, state: &FlowState<T>, step: &StepData<'_, T>) -> (Vec<T>, Vec<T>) {
        let (u, p) = (&state.velocity, &state.pressure);
        let mu = self.ops.mass.matvec(u);
        let au = self.ops.stiffness.matvec(u);
        let btp = self.ops.divergence.tr_matvec(p);
        let nu_u = if step.convection {
            assemble_convection(self.space, u).matvec(u)
        } else {
            vec![T::zero(); u.len()]
        };
        let mask = self.space.dirichlet_mask();
        let ru: Vec<T> = (0..u.len())
            .map(|i| {
                if mask[i] {
                    T::zero()
                } else {
                    step.mass_coeff * mu[i] - step.history[i] + step.nu * au[i] + nu_u[i]
                        - btp[i]
                        - step.load[i]
                }
            })
            .collect();
        let mut rp: Vec<T> = self.ops.divergence.matvec(u).into_iter().map(|v| -v).collect();
        let mean = rp.iter().copied().sum::<T>() / self.weight_sum;
        for (r, &m) in rp.iter_mut().zip(&self.ops.pressure_weights) {
            *r -= mean * m;
        }
        (ru, rp)
    }

    pub fn residual_norm(ru: &[T], rp: &[T]) -> T {
        (dot(ru, ru) + dot(rp, rp)).sqrt()
    }

    /// Factor the Jacobian at velocity `u`.
    pub fn factor_jacobian(&self, u: &[T], step: &StepData<'_, T>) -> Result<BandLu<T>, LinalgError> {
        let nu = self.space.n_velocity();
        let mask = self.space.dirichlet_mask();
        let inv = &self.inv;
        let mut band = BandMatrix::zeros(self.perm.len(), self.band.0, self.band.1);
        for (i, j, v) in self.ops.mass.iter() {
            if !mask[i] && !mask[j] {
                band.add(inv[i], inv[j], step.mass_coeff * v);
            }
        }
        for (i, j, v) in self.ops.stiffness.iter() {
            if !mask[i] && !mask[j] {
                band.add(inv[i], inv[j], step.nu * v);
            }
        }
        if step.convection {
            for_each_convection_jacobian_entry(self.space, u, |i, j, v| {
                if !mask[i] && !mask[j] {
                    band.add(inv[i], inv[j], v);
                }
            });
        }
        for (q, j, v) in self.ops.divergence.iter() {
            if q != self.pin && !mask[j] {
                band.add(inv[nu + q], inv[j], -v);
                band.add(inv[j], inv[nu + q], -v);
            }
        }
        for (i, &d) in mask.iter().enumerate() {
            if d {
                band.add(inv[i], inv[i], T::one());
            }
        }
        band.add(inv[nu + self.pin], inv[nu + self.pin], T::one());
        band.factor()
    }

    /// Solve for the Newton update given residuals, returning `(δu, δp)`.
    fn newton_update(&self, lu: &BandLu<T>, ru: &[T], rp: &[T]) -> (Vec<T>, Vec<T>) {
        let nu = ru.len();
        let mut rhs = vec![T::zero(); self.perm.len()];
        for (new, &old) in self.perm.iter().enumerate() {
            rhs[new] = if old < nu { -ru[old] } else { -rp[old - nu] };
        }
        rhs[self.inv[nu + self.pin]] = T::zero();
        lu.solve_in_place(&mut rhs);
        let mut du = vec![T::zero(); nu];
        let mut dp = vec![T::zero(); rp.len()];
        for (new, &old) in self.perm.iter().enumerate() {
            if old < nu {
                du[old] = rhs[new];
            } else {
                dp[old - nu] = rhs[new];
            }
        }
        (du, dp)
    }

    /// Shift the pressure to zero mean.
    pub fn normalize_pressure(&self, p: &mut [T]) {
        let mean = dot(&self.ops.pressure_weights, p) / self.weight_sum;
        for v in p.iter_mut() {
            *v -= mean;
        }
    }

    /// Newton iteration from `state`, whose Dirichlet dofs already hold the
    /// boundary data of the new level.
    pub fn newton_solve(
        &self,
        state: &mut FlowState<T>,
        step: &StepData<'_, T>,
        settings: &NewtonSettings,
        step_index: usize,
    ) -> Result<NewtonLog, SolverError> {
        let (mut ru, mut rp) = self.residual(state, step);
        let r0 = Self::residual_norm(&ru, &rp).as_f64();
        let mut log = NewtonLog {
            residuals: vec![r0],
        };
        let converged = |r: f64| r <= settings.abs_tol || r <= settings.rel_tol * r0;
        if !r0.is_finite() {
            return Err(SolverError::NonFinite { step: step_index });
        }
        let mut r = r0;
        while !converged(r) {
            if log.iterations() >= settings.max_iter {
                return Err(SolverError::NonConvergence {
                    step: step_index,
                    iterations: log.iterations(),
                    residual: r,
                });
            }
            let lu = self
                .factor_jacobian(&state.velocity, step)
                .map_err(|source| SolverError::Singular {
                    step: step_index,
                    source,
                })?;
            let (du, dp) = self.newton_update(&lu, &ru, &rp);
            for (x, d) in state.velocity.iter_mut().zip(&du) {
                *x += *d;
            }
            for (x, d) in state.pressure.iter_mut().zip(&dp) {
                *x += *d;
            }
            self.normalize_pressure(&mut state.pressure);
            (ru, rp) = self.residual(state, step);
            r = Self::residual_norm(&ru, &rp).as_f64();
            if !r.is_finite() {
                return Err(SolverError::NonFinite { step: step_index });
            }
            log.residuals.push(r);
        }
        Ok(log)
    }

    /// Discrete L² projection onto discretely divergence-free fields with
    /// the boundary values of `u`: `M v − Bᵀq = M u`, `B v = 0`.
    pub fn project_divergence_free(&self, u: &[T]) -> Result<Vec<T>, SolverError> {
        let history = self.ops.mass.matvec(u);
        let zero = vec![T::zero(); u.len()];
        let data = StepData {
            mass_coeff: T::one(),
            history: &history,
            load: &zero,
            nu: T::zero(),
            convection: false,
        };
        let mut state = FlowState {
            velocity: u.to_vec(),
            pressure: vec![T::zero(); self.space.n_pressure()],
        };
        self.newton_solve(&mut state, &data, &NewtonSettings::for_scalar::<T>(), 0)?;
        Ok(state.velocity)
    }

    /// Overwrite the Dirichlet dofs of `u` with `g(t, ·)`.
    pub fn apply_dirichlet(&self, u: &mut [T], g: impl Fn([T; 2]) -> [T; 2]) {
        let mask = self.space.dirichlet_mask();
        for (node, &x) in self.space.node_coords().iter().enumerate() {
            if mask[2 * node] {
                let v = g(x);
                u[2 * node] = v[0];
                u[2 * node + 1] = v[1];
            }
        }
    }
}

/// Options for a full-order run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DnsOptions {
    pub scheme: TimeScheme,
    pub newton: NewtonSettings,
    /// Replace the interpolated initial state by its discretely
    /// divergence-free L² projection, avoiding an initial layer.
    pub project_initial: bool,
}

impl DnsOptions {
    pub fn new(scheme: TimeScheme) -> Self {
        Self {
            scheme,
            newton: NewtonSettings::default(),
            project_initial: true,
        }
    }
}

/// Full-order trajectory including the initial state at index 0.
#[derive(Clone, Debug)]
pub struct DnsRun<T> {
    pub fingerprint: u64,
    pub scheme: TimeScheme,
    pub dt: T,
    pub times: Vec<T>,
    pub velocity: Vec<Vec<T>>,
    /// Zero-mean pressure; the entry at `t = 0` is not computed and left zero.
    pub pressure: Vec<Vec<T>>,
    /// One log per time step.
    pub newton: Vec<NewtonLog>,
}

impl<T: Scalar> DnsRun<T> {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }
}

/// Time-step the problem from `t = 0` to `t_end`. BDF2 starts with one
/// backward-Euler step.
pub fn solve_nse<T: Scalar>(
    problem: &NseProblem<T>,
    space: &TaylorHoodSpace<T>,
    options: &DnsOptions,
) -> Result<DnsRun<T>, SolverError> {
    if !(problem.nu > T::zero()) {
        return Err(SolverError::InvalidViscosity);
    }
    if !(problem.dt > T::zero() && problem.dt.is_finite()) {
        return Err(SolverError::InvalidTimeStep);
    }
    let (t_end, dt_f) = (problem.t_end.as_f64(), problem.dt.as_f64());
    let steps = crate::time::step_count(t_end, dt_f)
        .ok_or(SolverError::IncompatibleEndTime { t_end, dt: dt_f })?;
    let sys = SaddleSystem::new(space);
    let dt = problem.dt;
    let mut u0 = space.interpolate(|x| (problem.initial)(x));
    sys.apply_dirichlet(&mut u0, |x| (problem.dirichlet)(T::zero(), x));
    if options.project_initial {
        u0 = sys.project_divergence_free(&u0)?;
    }
    let mut run = DnsRun {
        fingerprint: space.fingerprint(),
        scheme: options.scheme,
        dt,
        times: vec![T::zero()],
        velocity: vec![u0],
        pressure: vec![vec![T::zero(); space.n_pressure()]],
        newton: Vec::with_capacity(steps),
    };
    let zero_load = vec![T::zero(); space.n_velocity()];
    for n in 0..steps {
        let t_new = dt * T::from_count(n + 1);
        let scheme = if n == 0 { TimeScheme::BackwardEuler } else { options.scheme };
        let (b0, b1) = scheme.history::<T>();
        let cur = &run.velocity[n];
        let mut hist_field = cur.iter().map(|&v| b0 * v).collect::<Vec<T>>();
        if scheme.levels() == 2 {
            for (h, &v) in hist_field.iter_mut().zip(&run.velocity[n - 1]) {
                *h += b1 * v;
            }
        }
        let history: Vec<T> = sys.ops.mass.matvec(&hist_field).into_iter().map(|v| v / dt).collect();
        let load = match &problem.forcing {
            Some(f) => assemble_load(space, |x| f(t_new, x)),
            None => zero_load.clone(),
        };
        let data = StepData {
            mass_coeff: scheme.alpha::<T>() / dt,
            history: &history,
            load: &load,
            nu: problem.nu,
            convection: problem.convection,
        };
        let mut state = FlowState {
            velocity: cur.clone(),
            pressure: run.pressure[n].clone(),
        };
        sys.apply_dirichlet(&mut state.velocity, |x| (problem.dirichlet)(t_new, x));
        let log = sys.newton_solve(&mut state, &data, &options.newton, n + 1)?;
        run.times.push(t_new);
        run.velocity.push(state.velocity);
        run.pressure.push(state.pressure);
        run.newton.push(log);
    }
    Ok(run)
}

/// Steady Stokes solve `−νΔu + ∇p = f`, `u = g` on the boundary.
pub fn solve_stokes<T: Scalar>(
    space: &TaylorHoodSpace<T>,
    nu: T,
    f: impl Fn([T; 2]) -> [T; 2],
    g: impl Fn([T; 2]) -> [T; 2],
) -> Result<FlowState<T>, SolverError> {
    if !(nu > T::zero()) {
        return Err(SolverError::InvalidViscosity);
    }
    let sys = SaddleSystem::new(space);
    let load = assemble_load(space, f);
    let history = vec![T::zero(); space.n_velocity()];
    let data = StepData {
        mass_coeff: T::zero(),
        history: &history,
        load: &load,
        nu,
        convection: false,
    };
    let mut state = FlowState {
        velocity: vec![T::zero(); space.n_velocity()],
        pressure: vec![T::zero(); space.n_pressure()],
    };
    sys.apply_dirichlet(&mut state.velocity, g);
    sys.newton_solve(&mut state, &data, &NewtonSettings::for_scalar::<T>(), 0)?;
    Ok(state)
}
