//! Configuration-driven stages: mesh → full-order run → snapshots → POD →
//! reduced system → VMS-POD run → studies and audits.

use crate::config::RunConfig;
use crate::diagnostics::{study_varying_dt, study_varying_r, RateTable, StudyInputs, StudyKind};
use crate::dns::{
    decaying_vortex, forced_cavity, lid_cavity, solve_nse, taylor_green, DnsOptions, DnsRun, NseProblem, ProblemKind,
    SaddleSystem, SnapshotSet,
};
use crate::error::{ConfigError, Error};
use crate::fem::{build_rect_mesh, FemOperators, Rect, TaylorHoodSpace};
use crate::pod::{compute_pod_basis, PodBasis, PodOptions};
use crate::rom::{build_reduced_system, ReducedSystem, RomInitial, RomRunSettings, RomTrajectory};
use crate::vms::run_vms_pod;

/// Mesh, space and operators for a configuration.
pub struct Discretization {
    pub space: TaylorHoodSpace<f64>,
    pub ops: FemOperators<f64>,
}

impl Discretization {
    pub fn new(cfg: &RunConfig) -> Result<Self, Error> {
        let [x0, x1, y0, y1] = cfg.mesh.bounds;
        let mesh = build_rect_mesh(cfg.mesh.nx, cfg.mesh.ny, Rect::new(x0, x1, y0, y1))?;
        let space = TaylorHoodSpace::new(mesh);
        let ops = FemOperators::assemble(&space);
        Ok(Self { space, ops })
    }

    pub fn fingerprint(&self) -> u64 {
        self.space.fingerprint()
    }
}

/// The configured problem with time step `dt`.
pub fn problem(cfg: &RunConfig, dt: f64) -> NseProblem<f64> {
    let (nu, t) = (cfg.nu, cfg.t_end);
    match cfg.problem {
        ProblemKind::TaylorGreen => taylor_green(nu, dt, t),
        ProblemKind::LidCavity => lid_cavity(nu, dt, t),
        ProblemKind::ForcedCavity => forced_cavity(nu, dt, t, cfg.forcing),
        ProblemKind::DecayingVortex => decaying_vortex(nu, dt, t),
    }
}

fn validated(cfg: &RunConfig) -> Result<(), Error> {
    cfg.validate().map_err(Error::from)
}

pub fn run_dns(cfg: &RunConfig, disc: &Discretization) -> Result<DnsRun<f64>, Error> {
    validated(cfg)?;
    let p = problem(cfg, cfg.dns_dt());
    Ok(solve_nse(&p, &disc.space, &DnsOptions::new(cfg.dns_scheme()))?)
}

pub fn snapshots(cfg: &RunConfig, run: &DnsRun<f64>) -> Result<SnapshotSet<f64>, Error> {
    Ok(SnapshotSet::from_trajectory(
        run.fingerprint,
        cfg.dns_dt(),
        &run.velocity,
        cfg.snapshot_first,
        cfg.snapshot_stride,
    )?)
}

pub fn pod_basis(cfg: &RunConfig, set: &SnapshotSet<f64>, disc: &Discretization) -> Result<PodBasis<f64>, Error> {
    validated(cfg)?;
    Ok(compute_pod_basis(set, &disc.ops, cfg.r, PodOptions::default())?)
}

/// Reduced operators for the ROM time step; the basis must have exactly
/// `cfg.r` modes.
pub fn reduced_system(cfg: &RunConfig, basis: &PodBasis<f64>, disc: &Discretization) -> Result<ReducedSystem<f64>, Error> {
    validated(cfg)?;
    if basis.r() != cfg.r {
        return Err(ConfigError::Invalid(format!(
            "basis has r={} modes but the configuration asks for r={}",
            basis.r(),
            cfg.r
        ))
        .into());
    }
    Ok(build_reduced_system(basis, &disc.space, &disc.ops, &problem(cfg, cfg.dt))?)
}

/// The full-order initial state exactly as the full-order solver builds it.
pub fn initial_velocity(cfg: &RunConfig, disc: &Discretization) -> Result<Vec<f64>, Error> {
    let p = problem(cfg, cfg.dns_dt());
    let sys = SaddleSystem::new(&disc.space);
    let mut u0 = disc.space.interpolate(|x| (p.initial)(x));
    sys.apply_dirichlet(&mut u0, |x| (p.dirichlet)(0.0, x));
    if DnsOptions::new(cfg.dns_scheme()).project_initial {
        u0 = sys.project_divergence_free(&u0)?;
    }
    Ok(u0)
}

/// `a⁰ = Ψᵀ M u⁰`.
pub fn rom_initial(cfg: &RunConfig, basis: &PodBasis<f64>, disc: &Discretization) -> Result<RomInitial<f64>, Error> {
    let u0 = initial_velocity(cfg, disc)?;
    Ok(RomInitial::project(&u0, basis, &disc.ops))
}

/// VMS-POD run with the configured `(Δt, R, ν_T)`; `ν_T = 0` or `R = r`
/// gives the Galerkin run.
pub fn run_rom(cfg: &RunConfig, sys: &ReducedSystem<f64>, init: &RomInitial<f64>) -> Result<RomTrajectory<f64>, Error> {
    validated(cfg)?;
    let settings = RomRunSettings::new(cfg.scheme, cfg.dt, cfg.rom_steps()?);
    Ok(run_vms_pod(sys, init, &settings, cfg.cutoff, cfg.nu_t)?)
}

/// Everything a study needs, computed once.
pub struct StudySetup {
    pub disc: Discretization,
    pub run: DnsRun<f64>,
    pub basis: PodBasis<f64>,
    pub sys: ReducedSystem<f64>,
    pub init: RomInitial<f64>,
}

impl StudySetup {
    pub fn new(cfg: &RunConfig) -> Result<Self, Error> {
        validated(cfg)?;
        let disc = Discretization::new(cfg)?;
        let run = run_dns(cfg, &disc)?;
        let basis = pod_basis(cfg, &snapshots(cfg, &run)?, &disc)?;
        let sys = reduced_system(cfg, &basis, &disc)?;
        let init = RomInitial::project(&run.velocity[0], &basis, &disc.ops);
        Ok(Self {
            disc,
            run,
            basis,
            sys,
            init,
        })
    }

    pub fn inputs<'a>(&'a self, cfg: &RunConfig) -> StudyInputs<'a, f64> {
        StudyInputs {
            sys: &self.sys,
            basis: &self.basis,
            ops: &self.disc.ops,
            reference: &self.run.velocity,
            ref_dt: cfg.dns_dt(),
            initial: &self.init,
            scheme: cfg.scheme,
            t_end: cfg.t_end,
            dt: cfg.dt,
            cutoff: cfg.cutoff,
            nu_t: cfg.nu_t,
        }
    }

    /// The configured study; empty parameter lists fall back to the base
    /// value (a single-row table).
    pub fn study(&self, cfg: &RunConfig) -> Result<RateTable, Error> {
        let inputs = self.inputs(cfg);
        match cfg.study.kind {
            StudyKind::Dt => {
                let dts = if cfg.study.dt_values.is_empty() { vec![cfg.dt] } else { cfg.study.dt_values.clone() };
                study_varying_dt(&inputs, &dts)
            }
            StudyKind::Cutoff => {
                let cuts = if cfg.study.cutoffs.is_empty() { vec![cfg.cutoff] } else { cfg.study.cutoffs.clone() };
                study_varying_r(&inputs, &cuts)
            }
        }
    }
}
