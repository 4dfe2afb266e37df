use super::*;
use crate::dns::{decaying_vortex, forced_cavity, solve_nse, DnsOptions, ForcedCavityParams, SnapshotSet};
use crate::fem::{build_rect_mesh, Rect, TaylorHoodSpace};
use crate::linalg::dense::DMat;
use crate::pod::{compute_pod_basis, PodOptions};
use crate::rom::{build_reduced_system, run_pod_g, ReducedForce, ReducedSystem, RomInitial, RomRunSettings};
use crate::time::TimeScheme;
use crate::vms::{build_fluctuation_matrix, run_vms_pod};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn small_ops() -> (TaylorHoodSpace<f64>, FemOperators<f64>) {
    let space = TaylorHoodSpace::new(build_rect_mesh(3, 3, Rect::unit()).unwrap());
    let ops = FemOperators::assemble(&space);
    (space, ops)
}

fn random_field(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn norms_of_trivial_sequences() {
    let (_, ops) = small_ops();
    let n = ops.mass.nrows();
    let c = random_field(n, 1);
    let spec = DiscreteNormSpec::new(NormKind::LinfL2, 0.1).unwrap();
    let v = discrete_norm(&[c.clone(), c.clone(), c.clone()], &spec, &ops).unwrap();
    assert!((v - ops.l2_norm(&c)).abs() < 1e-14);
    for kind in [NormKind::LinfL2, NormKind::L2L2, NormKind::L2H1, NormKind::L2H1Semi] {
        let spec = DiscreteNormSpec::new(kind, 0.1).unwrap();
        assert_eq!(discrete_norm(&[vec![0.0; n], vec![0.0; n]], &spec, &ops).unwrap(), 0.0);
    }
}

/// Two-level sequence against the formulas evaluated term by term.
#[test]
fn two_step_sequence_by_hand() {
    let (_, ops) = small_ops();
    let n = ops.mass.nrows();
    let (a, b) = (random_field(n, 2), random_field(n, 3));
    let dt = 0.25;
    let m = |v: &[f64]| ops.mass.quad_form(v);
    let s = |v: &[f64]| ops.stiffness.quad_form(v);
    let seq = [a.clone(), b.clone()];
    let get = |k| discrete_norm(&seq, &DiscreteNormSpec::new(k, dt).unwrap(), &ops).unwrap();
    assert!((get(NormKind::LinfL2) - m(&a).max(m(&b)).sqrt()).abs() < 1e-14);
    assert!((get(NormKind::L2L2) - (dt * (m(&a) + m(&b))).sqrt()).abs() < 1e-14);
    assert!((get(NormKind::L2H1Semi) - (dt * (s(&a) + s(&b))).sqrt()).abs() < 1e-13);
    let full = (dt * (m(&a) + s(&a) + m(&b) + s(&b))).sqrt();
    assert!((get(NormKind::L2H1) - full).abs() < 1e-13);
}

#[test]
fn norm_errors() {
    let (_, ops) = small_ops();
    let spec = DiscreteNormSpec::new(NormKind::L2L2, 0.1).unwrap();
    let empty: [Vec<f64>; 0] = [];
    assert_eq!(discrete_norm(&empty, &spec, &ops), Err(DiagnosticsError::EmptySequence));
    assert!(matches!(discrete_norm(&[vec![0.0; 3]], &spec, &ops), Err(DiagnosticsError::Dimension(_))));
    assert!(DiscreteNormSpec::<f64>::new(NormKind::L2L2, 0.0).is_err());
}

#[test]
fn rates_from_error_pairs() {
    let r = convergence_rate(0.4, 0.1, 0.2, 0.1).unwrap();
    assert!((r - 2.0).abs() < 1e-14, "{r}");
    let r = convergence_rate(1.0, 0.5, 9.0, 3.0).unwrap();
    assert!((r - 2f64.ln() / 3f64.ln()).abs() < 1e-14, "{r}");
    assert_eq!(convergence_rate(0.3, 0.3, 0.1, 0.05).unwrap(), 0.0);
    assert!(convergence_rate(0.0, 0.3, 0.1, 0.05).is_err());
    assert!(convergence_rate(0.1, 0.3, -0.1, 0.05).is_err());
    assert!(convergence_rate(0.1, 0.3, 0.1, 0.1).is_err());
}

#[test]
fn grid_matching() {
    assert_eq!(
        match_grids(0.1, 10, 0.025, 40).unwrap(),
        GridMatch { rom_stride: 1, ref_stride: 4, levels: 10 }
    );
    assert_eq!(
        match_grids(0.025, 40, 0.1, 10).unwrap(),
        GridMatch { rom_stride: 4, ref_stride: 1, levels: 10 }
    );
    assert_eq!(match_grids(0.1, 10, 0.03, 40), Err(DiagnosticsError::GridMismatch));
    assert_eq!(match_grids(0.1, 10, 0.025, 3), Err(DiagnosticsError::GridMismatch));
}

struct Twin {
    basis: PodBasis<f64>,
    ops: FemOperators<f64>,
    sys: ReducedSystem<f64>,
    reference: Vec<Vec<f64>>,
}

fn vortex_twin(scheme: TimeScheme) -> Twin {
    let space = TaylorHoodSpace::new(build_rect_mesh(4, 4, Rect::unit()).unwrap());
    let ops = FemOperators::assemble(&space);
    let problem = decaying_vortex(0.05, 0.05, 0.5);
    let run = solve_nse(&problem, &space, &DnsOptions::new(scheme)).unwrap();
    let set = SnapshotSet::from_trajectory(ops.fingerprint, 0.05, &run.velocity, 0, 1).unwrap();
    let probe = compute_pod_basis(&set, &ops, 1, PodOptions::default()).unwrap();
    let basis = compute_pod_basis(&set, &ops, probe.retained(), PodOptions::default()).unwrap();
    let sys = build_reduced_system(&basis, &space, &ops, &problem).unwrap();
    Twin {
        basis,
        ops,
        sys,
        reference: run.velocity,
    }
}

#[test]
fn trajectory_against_itself_is_zero() {
    let t = vortex_twin(TimeScheme::BackwardEuler);
    let init = RomInitial::project(&t.reference[0], &t.basis, &t.ops);
    let traj = run_pod_g(&t.sys, &init, &RomRunSettings::new(TimeScheme::BackwardEuler, 0.05, 10)).unwrap();
    let own: Vec<Vec<f64>> = traj.a_u.iter().map(|a| t.basis.reconstruct(a)).collect();
    let e = rom_error(&traj, 0.05, &own, &t.basis, &t.ops).unwrap();
    assert_eq!((e.linf_l2, e.l2_h1, e.l2_l2, e.final_l2), (0.0, 0.0, 0.0, 0.0));
}

/// Full-rank basis on the twin run: the error is the accumulated projection
/// defect only. Modes below the rank tolerance are dropped, so the bound is
/// on the squared error `‖u − u_r‖²`.
#[test]
fn full_rank_twin_error_is_small() {
    for scheme in [TimeScheme::BackwardEuler, TimeScheme::Bdf2] {
        let t = vortex_twin(scheme);
        let init = RomInitial::project(&t.reference[0], &t.basis, &t.ops);
        let traj = run_pod_g(&t.sys, &init, &RomRunSettings::new(scheme, 0.05, 10)).unwrap();
        let e = rom_error(&traj, 0.05, &t.reference, &t.basis, &t.ops).unwrap();
        let scale = t.ops.l2_norm(&t.reference[0]).powi(2);
        assert!(e.linf_l2.powi(2) < 1e-8 * scale, "{scheme}: {e:?}");
        assert_eq!(e.levels, 10);
    }
}

#[test]
fn rom_error_rejects_incommensurate_grids() {
    let t = vortex_twin(TimeScheme::BackwardEuler);
    let init = RomInitial::project(&t.reference[0], &t.basis, &t.ops);
    let traj = run_pod_g(&t.sys, &init, &RomRunSettings::new(TimeScheme::BackwardEuler, 0.03, 5)).unwrap();
    assert_eq!(
        rom_error(&traj, 0.05, &t.reference, &t.basis, &t.ops),
        Err(DiagnosticsError::GridMismatch)
    );
}

fn random_system(r: usize, nu: f64, seed: u64, forced: bool) -> ReducedSystem<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMat::from_fn(r, r, |_, _| rng.gen_range(-1.0..1.0));
    let mut s = g.transpose().matmul(&g);
    for i in 0..r {
        s[(i, i)] += 1.0;
    }
    let mut t = vec![0.0; r * r * r];
    for j in 0..r {
        for k in 0..r {
            for i in k + 1..r {
                let v = rng.gen_range(-2.0..2.0);
                t[(j * r + k) * r + i] = v;
                t[(j * r + i) * r + k] = -v;
            }
        }
    }
    let force: Option<ReducedForce<f64>> = forced.then(|| {
        let dir: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Arc::new(move |t: f64| dir.iter().map(|d| d * (3.0 * t).sin()).collect()) as ReducedForce<f64>
    });
    ReducedSystem::from_parts(nu, s, t, force).unwrap()
}

#[test]
fn unforced_backward_euler_audit_passes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..20 {
        let r = 2 + seed as usize % 6;
        let sys = random_system(r, 0.01, seed, false);
        let a0: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nu_t = [0.0, 1e-3, 1.0][seed as usize % 3];
        let cutoff = seed as usize % (r + 1);
        let traj = run_vms_pod(&sys, &RomInitial::new(a0), &RomRunSettings::new(TimeScheme::BackwardEuler, 0.1, 20), cutoff, nu_t).unwrap();
        let fl = build_fluctuation_matrix(&sys.stiffness, cutoff).unwrap();
        let rep = stability_audit(&traj, &sys, nu_t, Some(&fl)).unwrap();
        assert!(rep.passed(), "{}", rep.to_text());
    }
}

#[test]
fn forced_backward_euler_audit_passes() {
    for seed in 0..5 {
        let sys = random_system(5, 0.05, seed, true);
        let traj = run_vms_pod(&sys, &RomInitial::new(vec![0.2; 5]), &RomRunSettings::new(TimeScheme::BackwardEuler, 0.05, 40), 2, 0.1).unwrap();
        let rep = stability_audit(&traj, &sys, 0.1, None).unwrap();
        assert!(rep.passed(), "{}", rep.to_text());
        let c = rep.check("stability_u").unwrap();
        assert!(c.lhs > 0.0 && c.rhs > sys.stiffness.max_abs() * 0.0);
    }
}

/// Without step 2 the backward-Euler law is the unstabilized energy law.
#[test]
fn zero_eddy_viscosity_audit_is_unstabilized_law() {
    let sys = random_system(4, 0.1, 3, false);
    let a0 = vec![0.5, -0.4, 0.3, 0.1];
    let settings = RomRunSettings::new(TimeScheme::BackwardEuler, 0.1, 10);
    let traj = run_pod_g(&sys, &RomInitial::new(a0.clone()), &settings).unwrap();
    let rep = stability_audit(&traj, &sys, 0.0, None).unwrap();
    assert!(rep.passed());
    let expected: f64 = dot_sq(&traj.a_u[10])
        + (0..10)
            .map(|k| {
                let d: Vec<f64> = traj.a_w[k + 1].iter().zip(&traj.a_u[k]).map(|(a, b)| a - b).collect();
                dot_sq(&d) + 0.1 * 0.1 * sys.stiffness.bilinear(&traj.a_w[k + 1], &traj.a_w[k + 1])
            })
            .sum::<f64>();
    let c = rep.check("stability_u").unwrap();
    assert!((c.lhs - expected).abs() < 1e-14 * expected.max(1.0));
    assert!((c.rhs - dot_sq(&a0)).abs() < 1e-15);
}

fn dot_sq(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

#[test]
fn bdf2_audit_reports_condition_and_identity() {
    let sys = random_system(5, 0.02, 7, false);
    let init = RomInitial::new(vec![0.3, -0.2, 0.6, 0.1, -0.5]);
    let settings = RomRunSettings::new(TimeScheme::Bdf2, 0.05, 30);
    let stable = run_vms_pod(&sys, &init, &settings, 2, 0.05).unwrap();
    let rep = stability_audit(&stable, &sys, 0.05, None).unwrap();
    assert!(rep.passed(), "{}", rep.to_text());
    assert!(rep.check("eddy_viscosity_condition").unwrap().pass);
    let bound = rep.check("stability_bdf2").unwrap();
    assert!(!bound.asserted);

    let hot = run_vms_pod(&sys, &init, &settings, 2, 0.5).unwrap();
    let rep = stability_audit(&hot, &sys, 0.5, None).unwrap();
    assert!(!rep.check("eddy_viscosity_condition").unwrap().pass);
    assert!(rep.passed(), "identities still hold: {}", rep.to_text());
}

#[test]
fn audit_detects_tampered_states() {
    let sys = random_system(3, 0.1, 5, false);
    let mut traj = run_vms_pod(&sys, &RomInitial::new(vec![1.0, 0.0, 0.5]), &RomRunSettings::new(TimeScheme::BackwardEuler, 0.1, 5), 1, 0.2).unwrap();
    traj.a_w[3][0] += 0.1;
    let rep = stability_audit(&traj, &sys, 0.2, None).unwrap();
    assert!(!rep.passed());
    traj.ledger[2] = None;
    assert_eq!(stability_audit(&traj, &sys, 0.2, None), Err(DiagnosticsError::MissingLedger));
}

#[test]
fn rate_table_single_point_and_rates() {
    let rep = |e: f64| ErrorReport {
        dt: 0.1,
        levels: 1,
        linf_l2: e,
        l2_l2: e,
        l2_h1: 2.0 * e,
        final_l2: e,
    };
    let one = rate_table(StudyKind::Dt, &[(0.1, 0.1, rep(1.0))]);
    assert_eq!(one.rows.len(), 1);
    assert!(one.rows[0].linf_l2_rate.is_none());
    let t = rate_table(StudyKind::Dt, &[(0.1, 0.1, rep(4.0)), (0.05, 0.05, rep(1.0)), (0.025, 0.025, rep(0.25))]);
    for row in &t.rows[1..] {
        assert!((row.linf_l2_rate.unwrap() - 2.0).abs() < 1e-12);
        assert!((row.l2_h1_rate.unwrap() - 2.0).abs() < 1e-12);
    }
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("rates.csv");
    write_rate_table(&t, &p, &[("config_hash".into(), "abc".into())]).unwrap();
    let (back, meta) = read_rate_table(&p).unwrap();
    assert_eq!(back, t);
    assert_eq!(meta["config_hash"], "abc");
    assert_eq!(meta["abscissa"], "dt");
}

#[test]
fn cutoff_study_runs_and_orders_rows() {
    let space = TaylorHoodSpace::new(build_rect_mesh(4, 4, Rect::unit()).unwrap());
    let ops = FemOperators::assemble(&space);
    let problem = forced_cavity(0.01, 0.05, 1.0, ForcedCavityParams::default());
    let run = solve_nse(&problem, &space, &DnsOptions::new(TimeScheme::BackwardEuler)).unwrap();
    let set = SnapshotSet::from_trajectory(ops.fingerprint, 0.05, &run.velocity, 0, 1).unwrap();
    let basis = compute_pod_basis(&set, &ops, 5, PodOptions::default()).unwrap();
    let sys = build_reduced_system(&basis, &space, &ops, &problem).unwrap();
    let init = RomInitial::project(&run.velocity[0], &basis, &ops);
    let inputs = StudyInputs {
        sys: &sys,
        basis: &basis,
        ops: &ops,
        reference: &run.velocity,
        ref_dt: 0.05,
        initial: &init,
        scheme: TimeScheme::BackwardEuler,
        t_end: 1.0,
        dt: 0.05,
        cutoff: 1,
        nu_t: 0.01,
    };
    let t = study_varying_r(&inputs, &[0, 1, 2, 5]).unwrap();
    assert_eq!(t.rows.iter().map(|r| r.parameter).collect::<Vec<_>>(), vec![0.0, 1.0, 2.0, 5.0]);
    let eps: Vec<f64> = [0, 1, 2, 5].iter().map(|&c| crate::pod::epsilon_tail(&basis, c).unwrap()).collect();
    assert_eq!(t.rows.iter().map(|r| r.abscissa).collect::<Vec<_>>(), eps);
    assert!(eps.windows(2).all(|w| w[1] <= w[0]));
    let d = study_varying_dt(&inputs, &[0.1, 0.05]).unwrap();
    assert_eq!(d.rows.len(), 2);
    assert!(d.rows[1].linf_l2_rate.is_some());
}

proptest! {
    #[test]
    fn rate_is_scale_invariant(e1 in 1e-6f64..1.0, e2 in 1e-6f64..1.0, p in 0.01f64..1.0, q in 1.1f64..4.0, c in 1e-3f64..1e3, d in 1e-3f64..1e3) {
        let base = convergence_rate(e1, e2, p * q, p).unwrap();
        let scaled = convergence_rate(c * e1, c * e2, d * p * q, d * p).unwrap();
        prop_assert!((base - scaled).abs() < 1e-9 * base.abs().max(1.0));
    }
}

