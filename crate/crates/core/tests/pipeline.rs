use vmspod::diagnostics::{read_rate_table, stability_audit, write_rate_table, StudyKind};
use vmspod::dns::{read_snapshots, write_snapshots, ProblemKind};
use vmspod::error::FormatError;
use vmspod::pipeline::{self, Discretization, StudySetup};
use vmspod::pod::{read_basis, write_basis};
use vmspod::rom::{read_trajectory_csv, write_trajectory_csv};
use vmspod::vms::build_fluctuation_matrix;
use vmspod::{RunConfig, TimeScheme};

fn small(scheme: TimeScheme) -> RunConfig {
    let cfg = RunConfig::from_json(&format!(
        r#"{{ "problem": "forced_cavity", "mesh": {{ "nx": 6, "ny": 6 }},
             "nu": 0.01, "dt": 0.05, "t_end": 1.0, "scheme": "{scheme}",
             "r": 5, "R": 2, "nu_t": 0.05 }}"#
    ))
    .unwrap();
    cfg.validate().unwrap();
    cfg
}

#[test]
fn config_round_trips_through_json_with_stable_hash() {
    let cfg = small(TimeScheme::Bdf2);
    let back = RunConfig::from_json(&cfg.to_json()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());

    let mut moved = cfg.clone();
    moved.out = "elsewhere".into();
    assert_eq!(moved.hash(), cfg.hash());
    moved.nu_t = 0.06;
    assert_ne!(moved.hash(), cfg.hash());
}

#[test]
fn unknown_keys_and_bad_values_are_rejected() {
    assert!(RunConfig::from_json(r#"{ "viscosity": 1.0 }"#).is_err());
    let mut cfg = small(TimeScheme::BackwardEuler);
    cfg.cutoff = cfg.r + 1;
    assert!(cfg.validate().is_err());
    let mut cfg = small(TimeScheme::BackwardEuler);
    cfg.dt = 0.3;
    assert!(cfg.validate().is_err());
}

#[test]
fn artifacts_round_trip_and_reproduce_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(TimeScheme::BackwardEuler);
    let disc = Discretization::new(&cfg).unwrap();
    let fp = disc.fingerprint();

    let run = pipeline::run_dns(&cfg, &disc).unwrap();
    let set = pipeline::snapshots(&cfg, &run).unwrap();
    let snap_path = dir.path().join("snapshots.bin");
    write_snapshots(&set, &snap_path).unwrap();
    let set_back = read_snapshots::<f64>(&snap_path, Some(fp)).unwrap();
    assert_eq!(set_back, set);
    assert!(matches!(
        read_snapshots::<f64>(&snap_path, Some(fp ^ 1)),
        Err(FormatError::FingerprintMismatch { .. })
    ));

    let basis = pipeline::pod_basis(&cfg, &set_back, &disc).unwrap();
    assert_eq!(basis.r(), cfg.r);
    let basis_path = dir.path().join("basis.bin");
    write_basis(&basis, &basis_path).unwrap();
    let basis_back = read_basis::<f64>(&basis_path, Some(fp)).unwrap();
    assert_eq!(basis_back, basis);

    let sys = pipeline::reduced_system(&cfg, &basis_back, &disc).unwrap();
    let init = pipeline::rom_initial(&cfg, &basis_back, &disc).unwrap();
    let traj = pipeline::run_rom(&cfg, &sys, &init).unwrap();
    assert_eq!(traj.steps(), cfg.rom_steps().unwrap());
    assert!(traj.a_u.iter().flatten().all(|v| v.is_finite()));

    let csv_path = dir.path().join("rom.csv");
    let meta = vec![("config_hash".to_string(), cfg.hash_hex())];
    write_trajectory_csv(&traj, &csv_path, &meta).unwrap();
    let (traj_back, meta_back) = read_trajectory_csv::<f64>(&csv_path).unwrap();
    assert_eq!(meta_back.get("config_hash"), Some(&cfg.hash_hex()));
    assert_eq!(traj_back.steps(), traj.steps());
    for (a, b) in traj_back.a_u.iter().flatten().zip(traj.a_u.iter().flatten()) {
        assert_eq!(a, b);
    }

    let fluct = build_fluctuation_matrix(&sys.stiffness, cfg.cutoff).unwrap();
    let report = stability_audit(&traj_back, &sys, cfg.nu_t, Some(&fluct)).unwrap();
    assert!(report.passed(), "{}", report.to_text());

    let again = pipeline::run_rom(&cfg, &sys, &init).unwrap();
    assert_eq!(again.a_u, traj.a_u);
}

#[test]
fn galerkin_limits_agree() {
    let cfg = small(TimeScheme::Bdf2);
    let setup = StudySetup::new(&cfg).unwrap();
    let mut off = cfg.clone();
    off.nu_t = 0.0;
    let mut full = cfg.clone();
    full.cutoff = cfg.r;
    let a = pipeline::run_rom(&off, &setup.sys, &setup.init).unwrap();
    let b = pipeline::run_rom(&full, &setup.sys, &setup.init).unwrap();
    assert_eq!(a.a_u, b.a_u);
    assert_eq!(a.a_u, a.a_w);
}

#[test]
fn studies_produce_tables_that_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(TimeScheme::BackwardEuler);
    cfg.problem = ProblemKind::DecayingVortex;
    cfg.dns_dt = Some(0.0125);
    cfg.study.dt_values = vec![0.1, 0.05, 0.025];
    let setup = StudySetup::new(&cfg).unwrap();

    let table = setup.study(&cfg).unwrap();
    assert_eq!(table.kind, StudyKind::Dt);
    assert_eq!(table.rows.len(), 3);
    assert!(table.rows[0].linf_l2_rate.is_none());
    assert!(table.rows[1..].iter().all(|r| r.linf_l2_rate.is_some()));
    assert!(table.rows.windows(2).all(|w| w[1].linf_l2 < w[0].linf_l2));

    let path = dir.path().join("study.csv");
    write_rate_table(&table, &path, &[]).unwrap();
    let (back, _) = read_rate_table(&path).unwrap();
    assert_eq!(back.rows.len(), table.rows.len());
    for (a, b) in back.rows.iter().zip(&table.rows) {
        assert_eq!(a.parameter, b.parameter);
        assert!((a.linf_l2 - b.linf_l2).abs() <= 1e-15 * b.linf_l2);
    }

    cfg.study.kind = StudyKind::Cutoff;
    cfg.study.cutoffs = vec![1, 3, 5];
    let table = setup.study(&cfg).unwrap();
    assert_eq!(table.kind, StudyKind::Cutoff);
    assert!(table.rows.windows(2).all(|w| w[1].abscissa <= w[0].abscissa));
}
