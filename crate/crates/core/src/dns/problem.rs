//! Navier-Stokes problem data and the built-in test problems.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fem::mesh::Rect;
use crate::scalar::Scalar;

/// Time-dependent vector field `(t, x) ↦ v`.
pub type VectorField<T> = Arc<dyn Fn(T, [T; 2]) -> [T; 2] + Send + Sync>;
/// Time-dependent velocity gradient `(t, x) ↦ ∂_d u_c` stored as `[c][d]`.
pub type GradientField<T> = Arc<dyn Fn(T, [T; 2]) -> [[T; 2]; 2] + Send + Sync>;
/// Time-dependent scalar field.
pub type ScalarField<T> = Arc<dyn Fn(T, [T; 2]) -> T + Send + Sync>;

/// Analytic solution used by manufactured-solution checks.
#[derive(Clone)]
pub struct ExactSolution<T> {
    pub velocity: VectorField<T>,
    pub gradient: GradientField<T>,
    pub pressure: ScalarField<T>,
}

/// Incompressible Navier-Stokes data on a rectangle with Dirichlet data on
/// the whole boundary.
#[derive(Clone)]
pub struct NseProblem<T> {
    pub name: String,
    pub domain: Rect<T>,
    pub nu: T,
    pub dt: T,
    pub t_end: T,
    /// Body force; `None` is `f = 0` and skips load assembly.
    pub forcing: Option<VectorField<T>>,
    pub dirichlet: VectorField<T>,
    pub initial: Arc<dyn Fn([T; 2]) -> [T; 2] + Send + Sync>,
    pub exact: Option<ExactSolution<T>>,
    /// Disable to obtain the (unsteady) Stokes limit.
    pub convection: bool,
}

impl<T> fmt::Debug for NseProblem<T>
where
    T: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NseProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("nu", &self.nu)
            .field("dt", &self.dt)
            .field("t_end", &self.t_end)
            .field("forced", &self.forcing.is_some())
            .field("exact", &self.exact.is_some())
            .field("convection", &self.convection)
            .finish()
    }
}

impl<T: Scalar> NseProblem<T> {
    /// Homogeneous walls, zero forcing, zero initial state.
    pub fn at_rest(domain: Rect<T>, nu: T, dt: T, t_end: T) -> Self {
        Self {
            name: "rest".into(),
            domain,
            nu,
            dt,
            t_end,
            forcing: None,
            dirichlet: Arc::new(|_, _| [T::zero(); 2]),
            initial: Arc::new(|_| [T::zero(); 2]),
            exact: None,
            convection: true,
        }
    }

    pub fn with_time(mut self, dt: T, t_end: T) -> Self {
        self.dt = dt;
        self.t_end = t_end;
        self
    }

    pub fn with_initial(mut self, u0: impl Fn([T; 2]) -> [T; 2] + Send + Sync + 'static) -> Self {
        self.initial = Arc::new(u0);
        self
    }

    pub fn with_forcing(mut self, f: impl Fn(T, [T; 2]) -> [T; 2] + Send + Sync + 'static) -> Self {
        self.forcing = Some(Arc::new(f));
        self
    }

    pub fn without_convection(mut self) -> Self {
        self.convection = false;
        self
    }
}

/// Built-in problems selectable from configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Decaying Taylor-Green vortex on the unit square with exact Dirichlet data.
    TaylorGreen,
    /// Lid-driven cavity with a regularized lid profile, started from rest.
    LidCavity,
    /// Closed cavity driven by a time-periodic body force.
    ForcedCavity,
    /// Wall-bounded vortex decaying freely from a smooth initial state.
    DecayingVortex,
}

impl ProblemKind {
    pub fn build<T: Scalar>(self, nu: T, dt: T, t_end: T) -> NseProblem<T> {
        match self {
            ProblemKind::TaylorGreen => taylor_green(nu, dt, t_end),
            ProblemKind::LidCavity => lid_cavity(nu, dt, t_end),
            ProblemKind::ForcedCavity => forced_cavity(nu, dt, t_end, ForcedCavityParams::default()),
            ProblemKind::DecayingVortex => decaying_vortex(nu, dt, t_end),
        }
    }
}

/// `u = (sin πx cos πy, −cos πx sin πy) e^{−2π²νt}`,
/// `p = ¼ (cos 2πx + cos 2πy) e^{−4π²νt}` on the unit square.
pub fn taylor_green<T: Scalar>(nu: T, dt: T, t_end: T) -> NseProblem<T> {
    let pi = T::PI();
    let two = T::lit(2.0);
    let vel = move |t: T, x: [T; 2]| {
        let e = (-two * pi * pi * nu * t).exp();
        let (sx, cx) = (pi * x[0]).sin_cos();
        let (sy, cy) = (pi * x[1]).sin_cos();
        [sx * cy * e, -cx * sy * e]
    };
    let grad = move |t: T, x: [T; 2]| {
        let e = (-two * pi * pi * nu * t).exp();
        let (sx, cx) = (pi * x[0]).sin_cos();
        let (sy, cy) = (pi * x[1]).sin_cos();
        [
            [pi * cx * cy * e, -pi * sx * sy * e],
            [pi * sx * sy * e, -pi * cx * cy * e],
        ]
    };
    let pres = move |t: T, x: [T; 2]| {
        let e = (-T::lit(4.0) * pi * pi * nu * t).exp();
        T::lit(0.25) * ((two * pi * x[0]).cos() + (two * pi * x[1]).cos()) * e
    };
    NseProblem {
        name: "taylor_green".into(),
        domain: Rect::unit(),
        nu,
        dt,
        t_end,
        forcing: None,
        dirichlet: Arc::new(vel),
        initial: Arc::new(move |x| vel(T::zero(), x)),
        exact: Some(ExactSolution {
            velocity: Arc::new(vel),
            gradient: Arc::new(grad),
            pressure: Arc::new(pres),
        }),
        convection: true,
    }
}

/// Unit cavity with lid velocity `(16 x² (1 − x)², 0)` on `y = 1`.
pub fn lid_cavity<T: Scalar>(nu: T, dt: T, t_end: T) -> NseProblem<T> {
    let one = T::one();
    let top = one - T::lit(1e-12);
    let g = move |_t: T, x: [T; 2]| {
        if x[1] >= top {
            let s = x[0] * (one - x[0]);
            [T::lit(16.0) * s * s, T::zero()]
        } else {
            [T::zero(); 2]
        }
    };
    NseProblem {
        name: "lid_cavity".into(),
        dirichlet: Arc::new(g),
        ..NseProblem::at_rest(Rect::unit(), nu, dt, t_end)
    }
}

/// Divergence-free wall vortex `curl(sin²πx sin²πy) / π`, vanishing on the
/// boundary of the unit square.
pub fn wall_vortex<T: Scalar>(x: [T; 2]) -> [T; 2] {
    let pi = T::PI();
    let two = T::lit(2.0);
    let sx = (pi * x[0]).sin();
    let sy = (pi * x[1]).sin();
    [sx * sx * (two * pi * x[1]).sin(), -(two * pi * x[0]).sin() * sy * sy]
}

pub fn decaying_vortex<T: Scalar>(nu: T, dt: T, t_end: T) -> NseProblem<T> {
    NseProblem {
        name: "decaying_vortex".into(),
        initial: Arc::new(wall_vortex),
        ..NseProblem::at_rest(Rect::unit(), nu, dt, t_end)
    }
}

/// Parameters of the body-forced cavity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForcedCavityParams {
    pub amplitude: f64,
    /// Angular frequency of the forcing.
    pub omega: f64,
}

impl Default for ForcedCavityParams {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            omega: 2.0 * std::f64::consts::PI,
        }
    }
}

/// Closed unit cavity, homogeneous walls, started from rest and driven by a
/// rotating pair of shear forces
/// `f = A (cos ωt sin 2πy, sin ωt sin 2πx)`.
pub fn forced_cavity<T: Scalar>(nu: T, dt: T, t_end: T, params: ForcedCavityParams) -> NseProblem<T> {
    let a = T::lit(params.amplitude);
    let w = T::lit(params.omega);
    let two_pi = T::lit(2.0) * T::PI();
    NseProblem {
        name: "forced_cavity".into(),
        ..NseProblem::at_rest(Rect::unit(), nu, dt, t_end)
    }
    .with_forcing(move |t, x| {
        let (s, c) = (w * t).sin_cos();
        [a * c * (two_pi * x[1]).sin(), a * s * (two_pi * x[0]).sin()]
    })
}

/// Steady Stokes data with exact solution `u = wall_vortex`,
/// `p = cos πx cos πy`: `f = −νΔu + ∇p`.
pub struct StokesManufactured<T> {
    pub nu: T,
}

impl<T: Scalar> StokesManufactured<T> {
    pub fn velocity(&self, x: [T; 2]) -> [T; 2] {
        wall_vortex(x)
    }

    pub fn gradient(&self, x: [T; 2]) -> [[T; 2]; 2] {
        let pi = T::PI();
        let two = T::lit(2.0);
        let (s1x, s1y) = ((pi * x[0]).sin(), (pi * x[1]).sin());
        let (s2x, c2x) = (two * pi * x[0]).sin_cos();
        let (s2y, c2y) = (two * pi * x[1]).sin_cos();
        [
            [pi * s2x * s2y, two * pi * s1x * s1x * c2y],
            [-two * pi * c2x * s1y * s1y, -pi * s2x * s2y],
        ]
    }

    pub fn pressure(&self, x: [T; 2]) -> T {
        let pi = T::PI();
        (pi * x[0]).cos() * (pi * x[1]).cos()
    }

    pub fn forcing(&self, x: [T; 2]) -> [T; 2] {
        let pi = T::PI();
        let two = T::lit(2.0);
        let k = two * pi * pi;
        let (s2x, c2x) = (two * pi * x[0]).sin_cos();
        let (s2y, c2y) = (two * pi * x[1]).sin_cos();
        let lap = [k * s2y * (two * c2x - T::one()), -k * s2x * (two * c2y - T::one())];
        let (sx, cx) = (pi * x[0]).sin_cos();
        let (sy, cy) = (pi * x[1]).sin_cos();
        let gp = [-pi * sx * cy, -pi * cx * sy];
        [-self.nu * lap[0] + gp[0], -self.nu * lap[1] + gp[1]]
    }
}
