use super::*;
use crate::dns::{forced_cavity, solve_nse, DnsOptions, ForcedCavityParams, SnapshotSet};
use crate::fem::{build_rect_mesh, FemOperators, Rect};
use crate::pod::{compute_pod_basis, PodOptions};
use crate::rom::{build_reduced_system, run_pod_g, ReducedSystem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spd(r: usize, seed: u64) -> DMat<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMat::from_fn(r, r, |_, _| rng.gen_range(-1.0..1.0));
    let mut s = g.transpose().matmul(&g);
    for i in 0..r {
        s[(i, i)] += 0.5;
    }
    s
}

fn random_vec(r: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn diff(a: &DMat<f64>, b: &DMat<f64>) -> f64 {
    let mut c = a.clone();
    c.add_scaled(-1.0, b);
    c.max_abs()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn cavity(n: usize, r: usize) -> (TaylorHoodSpace<f64>, PodBasis<f64>, ReducedSystem<f64>, Vec<f64>) {
    let space = TaylorHoodSpace::new(build_rect_mesh(n, n, Rect::unit()).unwrap());
    let ops = FemOperators::assemble(&space);
    let problem = forced_cavity(0.01, 0.05, 1.0, ForcedCavityParams::default());
    let run = solve_nse(&problem, &space, &DnsOptions::new(TimeScheme::BackwardEuler)).unwrap();
    let set = SnapshotSet::from_trajectory(ops.fingerprint, 0.05, &run.velocity, 1, 1).unwrap();
    let basis = compute_pod_basis(&set, &ops, r, PodOptions::default()).unwrap();
    let sys = build_reduced_system(&basis, &space, &ops, &problem).unwrap();
    let a0 = crate::pod::l2_project(&run.velocity[0], &basis, &ops);
    (space, basis, sys, a0)
}

#[test]
fn zero_cutoff_gives_full_stiffness() {
    let s = spd(5, 1);
    let f = build_fluctuation_matrix(&s, 0).unwrap();
    assert!(diff(&f.d, &s) < 1e-14);
}

#[test]
fn full_cutoff_gives_zero() {
    let s = spd(5, 2);
    let f = build_fluctuation_matrix(&s, 5).unwrap();
    assert_eq!(f.d.max_abs(), 0.0);
}

#[test]
fn cutoff_above_rank_is_rejected() {
    let s = spd(3, 3);
    assert!(matches!(
        build_fluctuation_matrix(&s, 4),
        Err(VmsError::InvalidCutoff { cutoff: 4, r: 3 })
    ));
}

#[test]
fn singular_leading_block_is_reported() {
    let mut s = DMat::zeros(3, 3);
    s[(0, 0)] = 1.0;
    s[(0, 1)] = 1.0;
    s[(1, 0)] = 1.0;
    s[(1, 1)] = 1.0;
    s[(2, 2)] = 1.0;
    assert!(matches!(
        build_fluctuation_matrix(&s, 2),
        Err(VmsError::SingularLeadingBlock { .. })
    ));
}

/// Scalar closed form: for `r = 2`, `R = 1`,
/// `D_22 = S_22 − S_12²/S_11`.
#[test]
fn two_by_two_schur_closed_form() {
    let s: DMat<f64> = DMat::from_row_major(2, 2, vec![4.0, 1.5, 1.5, 3.0]);
    let f = build_fluctuation_matrix(&s, 1).unwrap();
    assert_eq!(f.d[(0, 0)], 0.0);
    assert_eq!(f.d[(0, 1)], 0.0);
    assert!((f.d[(1, 1)] - (3.0 - 1.5 * 1.5 / 4.0)).abs() < 1e-15);
}

#[test]
fn schur_form_matches_bruteforce_projection() {
    let (space, basis, sys, _) = cavity(4, 6);
    let samples = GradientSamples::from_basis(&space, &basis);
    for cutoff in 0..=6 {
        let schur = build_fluctuation_matrix(&sys.stiffness, cutoff).unwrap();
        let brute = fluctuation_matrix_bruteforce(&samples, cutoff).unwrap();
        assert_eq!(brute.provenance, Provenance::BruteForce);
        let scale = sys.stiffness.max_abs();
        let diff = diff(&schur.d, &brute.d);
        assert!(diff < 1e-9 * scale, "cutoff {cutoff}: {diff:e}");
    }
}

#[test]
fn fluctuation_matrix_is_psd_and_annihilates_resolved_modes() {
    let s = spd(7, 4);
    for cutoff in 0..=7 {
        let f = build_fluctuation_matrix(&s, cutoff).unwrap();
        let eig = crate::linalg::dense::SymmetricEigen::new(&f.d);
        assert!(eig.values.iter().all(|&l| l > -1e-12 * s.max_abs()));
        for i in 0..cutoff {
            assert!(f.d.row(i).iter().all(|v| *v == 0.0));
        }
    }
}

#[test]
fn filter_closed_form_for_scalar_system() {
    let d = DMat::from_row_major(1, 1, vec![2.0]);
    let f = FluctuationMatrix {
        d,
        cutoff: 0,
        provenance: Provenance::Schur,
    };
    let (dt, nu_t) = (0.1, 0.3);
    let c: f64 = nu_t * dt / 2.0;
    let a_u = step2_filter(&[1.7], dt, nu_t, &f).unwrap();
    let expected = 1.7 * (1.0 - 2.0 * c) / (1.0 + 2.0 * c);
    assert!((a_u[0] - expected).abs() < 1e-15);
}

#[test]
fn filter_is_non_expansive_and_keeps_resolved_modes() {
    let s = spd(6, 5);
    for cutoff in [0, 2, 4, 6] {
        let f = build_fluctuation_matrix(&s, cutoff).unwrap();
        for seed in 0..10 {
            let a_w = random_vec(6, seed);
            let nu_t = 0.01 * (seed + 1) as f64;
            let filt = Step2Filter::new(&f, 0.05, nu_t).unwrap();
            let a_u = filt.filter(&a_w);
            assert!(norm(&a_u) <= norm(&a_w) * (1.0 + 1e-14));
            let e = filt.ledger(&a_w, &a_u);
            assert!(e.rel_gap < 1e-12, "{e:?}");
            // Modes orthogonal to the range of D pass through.
            if cutoff == 6 {
                assert!(a_u.iter().zip(&a_w).all(|(u, w)| (u - w).abs() < 1e-15));
            }
        }
    }
}

#[test]
fn resolved_only_input_is_unchanged() {
    let s = spd(5, 6);
    let f = build_fluctuation_matrix(&s, 3).unwrap();
    // The kernel of D contains S_R⁻¹C-corrected vectors; build one from
    // D x = 0 with x_tail = 0 and arbitrary x_head.
    let a_w = vec![0.3, -1.2, 0.8, 0.0, 0.0];
    let a_u = step2_filter(&a_w, 0.1, 0.5, &f).unwrap();
    assert!(a_u.iter().zip(&a_w).all(|(u, w)| (u - w).abs() < 1e-14));
}

#[test]
fn zero_eddy_viscosity_reproduces_galerkin_run() {
    let (_, _, sys, a0) = cavity(4, 5);
    for scheme in [TimeScheme::BackwardEuler, TimeScheme::Bdf2] {
        let settings = RomRunSettings::new(scheme, 0.05, 8);
        let init = RomInitial::new(a0.clone());
        let g = run_pod_g(&sys, &init, &settings).unwrap();
        let v = run_vms_pod(&sys, &init, &settings, 2, 0.0).unwrap();
        assert_eq!(g.a_u, v.a_u);
        assert!(v.ledger[1..].iter().all(|e| e.is_some()));
        assert!(v.warnings.is_empty());
    }
}

#[test]
fn more_eddy_viscosity_removes_more_energy() {
    let s = spd(6, 7);
    let f = build_fluctuation_matrix(&s, 2).unwrap();
    let a_w = random_vec(6, 8);
    let mut last = f64::INFINITY;
    for k in 0..8 {
        let nu_t = 0.05 * k as f64;
        let e = norm(&step2_filter(&a_w, 0.1, nu_t, &f).unwrap());
        assert!(e <= last * (1.0 + 1e-14));
        last = e;
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let f = build_fluctuation_matrix(&spd(3, 9), 1).unwrap();
    assert!(matches!(Step2Filter::new(&f, 0.1, -1.0), Err(VmsError::NegativeEddyViscosity(_))));
    assert!(matches!(Step2Filter::new(&f, 0.0, 1.0), Err(VmsError::InvalidTimeStep)));
    assert!(matches!(Step2Filter::new(&f, f64::NAN, 1.0), Err(VmsError::InvalidTimeStep)));
}

#[test]
fn bdf2_warning_threshold() {
    assert!(bdf2_warning(0.01, 0.039).is_none());
    assert!(bdf2_warning(0.01, 0.04).is_some());
    let (_, _, sys, a0) = cavity(4, 4);
    let init = RomInitial::new(a0);
    let nu = sys.nu;
    let traj = run_vms_pod(&sys, &init, &RomRunSettings::new(TimeScheme::Bdf2, 0.05, 3), 1, 5.0 * nu).unwrap();
    assert_eq!(traj.warnings.len(), 1);
    let be = run_vms_pod(&sys, &init, &RomRunSettings::new(TimeScheme::BackwardEuler, 0.05, 3), 1, 5.0 * nu).unwrap();
    assert!(be.warnings.is_empty());
}

#[test]
fn ledger_is_recorded_every_step() {
    let (_, _, sys, a0) = cavity(4, 5);
    let traj = run_vms_pod(&sys, &RomInitial::new(a0), &RomRunSettings::new(TimeScheme::BackwardEuler, 0.05, 10), 2, 0.1).unwrap();
    assert!(traj.ledger[0].is_none());
    assert!(traj.max_ledger_gap() < 1e-12);
    for (n, e) in traj.ledger.iter().enumerate().skip(1) {
        let e = e.unwrap();
        assert!(e.dissipation >= 0.0);
        assert!((e.energy_u - dot(&traj.a_u[n], &traj.a_u[n])).abs() < 1e-14);
    }
}

#[test]
fn f32_filter_works() {
    let s: DMat<f32> = DMat::from_row_major(2, 2, vec![2.0, 0.5, 0.5, 1.0]);
    let f = build_fluctuation_matrix(&s, 1).unwrap();
    let a_u = step2_filter(&[1.0f32, 1.0], 0.1, 0.2, &f).unwrap();
    assert!(a_u[0] == 1.0 && a_u[1] < 1.0);
}

proptest! {
    #[test]
    fn dissipation_identity_holds(seed in 0u64..10_000, r in 1usize..8, cut in 0usize..8, nu_t in 0.0f64..2.0, dt in 1e-3f64..0.5) {
        let cutoff = cut.min(r);
        let f = build_fluctuation_matrix(&spd(r, seed), cutoff).unwrap();
        let a_w = random_vec(r, seed + 1);
        let a_u = step2_filter(&a_w, dt, nu_t, &f).unwrap();
        let e = dissipation_ledger(&a_w, &a_u, dt, nu_t, &f);
        prop_assert!(e.rel_gap < 1e-11);
        prop_assert!(e.energy_u <= e.energy_w * (1.0 + 1e-13));
    }
}
