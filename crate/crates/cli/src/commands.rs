use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;
use vmspod::diagnostics::{stability_audit, write_rate_table};
use vmspod::dns::{read_snapshots, write_snapshots};
use vmspod::error::{ConfigError, DiagnosticsError};
use vmspod::pipeline::{self, Discretization, StudySetup};
use vmspod::pod::{epsilon_tail, read_basis, write_basis};
use vmspod::rom::{read_trajectory_csv, write_trajectory_csv};
use vmspod::vms::build_fluctuation_matrix;
use vmspod::{Error, RunConfig};

use crate::output::{csv_err, hex, metadata, write_manifest};

fn or_default(path: Option<PathBuf>, cfg: &RunConfig, name: &str) -> PathBuf {
    path.unwrap_or_else(|| cfg.out.join(name))
}

fn write_csv_with_header(path: &Path, meta: &[(String, String)], header: &[&str], rows: Vec<Vec<String>>) -> Result<(), Error> {
    let mut text = String::new();
    for (k, v) in meta {
        text.push_str(&format!("# {k}={v}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    fs::write(path, text)?;
    Ok(())
}

pub fn dns(cfg: &RunConfig) -> Result<(), Error> {
    let disc = Discretization::new(cfg)?;
    let run = pipeline::run_dns(cfg, &disc)?;
    let set = pipeline::snapshots(cfg, &run)?;
    let snap_path = cfg.out.join("snapshots.vps");
    write_snapshots(&set, &snap_path)?;

    let rows = (0..=run.steps())
        .map(|n| {
            let u = &run.velocity[n];
            vec![
                n.to_string(),
                format!("{:.16e}", run.times[n]),
                format!("{:.16e}", disc.ops.mass.quad_form(u)),
                format!("{:.16e}", disc.ops.stiffness.quad_form(u)),
                run.newton.get(n.wrapping_sub(1)).map_or(0, |l| l.iterations()).to_string(),
            ]
        })
        .collect();
    let mut meta = metadata(cfg, "dns", run.fingerprint);
    meta.push(("scheme".into(), cfg.dns_scheme().name().into()));
    meta.push(("dt".into(), cfg.dns_dt().to_string()));
    let csv_path = cfg.out.join("dns_trajectory.csv");
    write_csv_with_header(
        &csv_path,
        &meta,
        &["step", "time", "energy", "grad_energy", "newton_iterations"],
        rows,
    )?;
    write_manifest(
        cfg,
        "dns",
        run.fingerprint,
        json!({}),
        &[&snap_path, &csv_path],
    )?;
    println!(
        "dns: {} steps, {} snapshots -> {}",
        run.steps(),
        set.len(),
        snap_path.display()
    );
    Ok(())
}

pub fn pod(cfg: &RunConfig, snapshots: Option<PathBuf>) -> Result<(), Error> {
    let disc = Discretization::new(cfg)?;
    let snap_path = or_default(snapshots, cfg, "snapshots.vps");
    let set = read_snapshots::<f64>(&snap_path, Some(disc.fingerprint()))?;
    let basis = pipeline::pod_basis(cfg, &set, &disc)?;
    let basis_path = cfg.out.join("basis.vpb");
    write_basis(&basis, &basis_path)?;

    let total: f64 = basis.eigenvalues.iter().sum();
    let mut cumulative = 0.0;
    let mut rows = Vec::with_capacity(basis.retained());
    for (i, &lambda) in basis.eigenvalues.iter().enumerate() {
        cumulative += lambda;
        rows.push(vec![
            (i + 1).to_string(),
            format!("{lambda:.16e}"),
            format!("{:.16e}", cumulative / total),
            format!("{:.16e}", basis.h1_norms[i]),
            format!("{:.16e}", epsilon_tail(&basis, i + 1)?),
        ]);
    }
    let mut meta = metadata(cfg, "pod", basis.fingerprint);
    meta.push(("r".into(), basis.r().to_string()));
    meta.push(("retained".into(), basis.retained().to_string()));
    let eig_path = cfg.out.join("eigenvalues.csv");
    write_csv_with_header(
        &eig_path,
        &meta,
        &["mode", "eigenvalue", "energy_fraction", "h1_norm", "epsilon_tail"],
        rows,
    )?;
    write_manifest(
        cfg,
        "pod",
        basis.fingerprint,
        json!({ "snapshots": snap_path.display().to_string(), "snapshot_count": set.len() }),
        &[&basis_path, &eig_path],
    )?;
    println!(
        "pod: r={} of {} retained modes, captured energy {:.6}",
        basis.r(),
        basis.retained(),
        basis.eigenvalues[..basis.r()].iter().sum::<f64>() / total
    );
    Ok(())
}

/// Basis from file, truncated to the configured `r`.
fn load_basis(cfg: &RunConfig, disc: &Discretization, path: &Path) -> Result<vmspod::PodBasis, Error> {
    let basis = read_basis::<f64>(path, Some(disc.fingerprint()))?;
    if cfg.r > basis.r() {
        return Err(ConfigError::Invalid(format!(
            "r={} exceeds the {} modes stored in {}",
            cfg.r,
            basis.r(),
            path.display()
        ))
        .into());
    }
    Ok(basis.truncated(cfg.r)?)
}

pub fn rom(cfg: &RunConfig, basis: Option<PathBuf>) -> Result<(), Error> {
    let disc = Discretization::new(cfg)?;
    let basis_path = or_default(basis, cfg, "basis.vpb");
    let basis = load_basis(cfg, &disc, &basis_path)?;
    let sys = pipeline::reduced_system(cfg, &basis, &disc)?;
    let init = pipeline::rom_initial(cfg, &basis, &disc)?;
    let traj = pipeline::run_rom(cfg, &sys, &init)?;
    for w in &traj.warnings {
        eprintln!("warning: {w}");
    }
    let mut meta = metadata(cfg, "rom", basis.fingerprint);
    meta.push(("basis".into(), basis_path.display().to_string()));
    let path = cfg.out.join("rom_trajectory.csv");
    write_trajectory_csv(&traj, &path, &meta)?;
    let e = traj.energy_u();
    println!(
        "rom: {} steps, energy {:.6e} -> {:.6e}, max ledger gap {:.3e}",
        traj.steps(),
        e[0],
        e[traj.steps()],
        traj.max_ledger_gap()
    );
    Ok(())
}

pub fn study(cfg: &RunConfig) -> Result<(), Error> {
    let setup = StudySetup::new(cfg)?;
    let table = setup.study(cfg)?;
    let mut meta = metadata(cfg, "study", setup.disc.fingerprint());
    meta.push(("r".into(), cfg.r.to_string()));
    meta.push(("scheme".into(), cfg.scheme.name().into()));
    meta.push(("dt".into(), cfg.dt.to_string()));
    meta.push(("dns_dt".into(), cfg.dns_dt().to_string()));
    let path = cfg.out.join(format!("study_{}.csv", table.kind.name()));
    write_rate_table(&table, &path, &meta)?;
    let rate = |r: Option<f64>| r.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!("{:>12} {:>12} {:>12} {:>7} {:>12} {:>7}", table.kind.name(), table.kind.abscissa(), "linf_l2", "rate", "l2_h1", "rate");
    for r in &table.rows {
        println!(
            "{:>12} {:>12.4e} {:>12.4e} {:>7} {:>12.4e} {:>7}",
            r.parameter,
            r.abscissa,
            r.linf_l2,
            rate(r.linf_l2_rate),
            r.l2_h1,
            rate(r.l2_h1_rate)
        );
    }
    Ok(())
}

fn check_meta(meta: &std::collections::BTreeMap<String, String>, key: &str, expected: f64) -> Result<(), Error> {
    let found = meta.get(key).and_then(|v| v.parse::<f64>().ok());
    match found {
        Some(v) if v == expected => Ok(()),
        _ => Err(ConfigError::Invalid(format!(
            "trajectory was produced with {key}={} but the configuration has {key}={expected}",
            meta.get(key).map_or("<missing>", String::as_str)
        ))
        .into()),
    }
}

pub fn audit(cfg: &RunConfig, trajectory: Option<PathBuf>, basis: Option<PathBuf>) -> Result<(), Error> {
    let disc = Discretization::new(cfg)?;
    let traj_path = or_default(trajectory, cfg, "rom_trajectory.csv");
    let (traj, meta) = read_trajectory_csv::<f64>(&traj_path)?;
    if meta.get("space_fingerprint") != Some(&hex(disc.fingerprint())) {
        return Err(ConfigError::Invalid("trajectory was produced on a different mesh".into()).into());
    }
    check_meta(&meta, "nu", cfg.nu)?;
    check_meta(&meta, "nu_t", cfg.nu_t)?;
    check_meta(&meta, "R", cfg.cutoff as f64)?;
    check_meta(&meta, "dt", cfg.dt)?;
    let basis_path = or_default(basis, cfg, "basis.vpb");
    let basis = load_basis(cfg, &disc, &basis_path)?;
    let sys = pipeline::reduced_system(cfg, &basis, &disc)?;
    let fluct = build_fluctuation_matrix(&sys.stiffness, cfg.cutoff)?;
    let report = stability_audit(&traj, &sys, cfg.nu_t, Some(&fluct))?;
    let mut text = format!(
        "# config_hash={}\n# space_fingerprint={}\n# trajectory={}\n",
        cfg.hash_hex(),
        hex(disc.fingerprint()),
        traj_path.display()
    );
    text.push_str(&report.to_text());
    fs::write(cfg.out.join("audit.txt"), &text)?;
    let json = json!({
        "config_hash": cfg.hash_hex(),
        "space_fingerprint": hex(disc.fingerprint()),
        "trajectory": traj_path.display().to_string(),
        "passed": report.passed(),
        "report": serde_json::to_value(&report).expect("report serializes"),
    });
    fs::write(cfg.out.join("audit.json"), serde_json::to_string_pretty(&json).expect("json") + "\n")?;
    print!("{}", report.to_text());
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| c.asserted && !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        Err(DiagnosticsError::AuditFailed(failed.join(", ")).into())
    }
}
