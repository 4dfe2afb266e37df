//! Reduced trajectories and their CSV form.
//!
//! One row per time level `n = 0..N`:
//! `step,time,energy_w,energy_u,dissipation,a_u_1..a_u_r,diss_step2,lhs_numdis,rhs_numdis,rel_gap,a_w_1..a_w_r`,
//! preceded by `# key=value` metadata lines. Energies are squared `L²`
//! norms; `dissipation` is the step-1 viscous term `2νΔt a_wᵀ S a_w`.
//! Ledger fields are empty on levels without a step-2 solve.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::FormatError;
use crate::scalar::{dot, Scalar};
use crate::time::TimeScheme;

pub const TRAJECTORY_COLUMNS: [&str; 5] = ["step", "time", "energy_w", "energy_u", "dissipation"];
const LEDGER_COLUMNS: [&str; 4] = ["diss_step2", "lhs_numdis", "rhs_numdis", "rel_gap"];

/// Energy balance of one step-2 solve:
/// `‖a_w‖² = ‖a_u‖² + 2 ν_T Δt qᵀ D q`, `q = (a_w + a_u)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerEntry<T> {
    pub energy_w: T,
    pub energy_u: T,
    pub dissipation: T,
    pub lhs: T,
    pub rhs: T,
    pub rel_gap: T,
}

impl<T: Scalar> LedgerEntry<T> {
    pub fn new(energy_w: T, energy_u: T, dissipation: T) -> Self {
        let lhs = energy_w;
        let rhs = energy_u + dissipation;
        let rel_gap = if lhs > T::zero() {
            (lhs - rhs).abs() / lhs
        } else {
            (lhs - rhs).abs()
        };
        Self {
            energy_w,
            energy_u,
            dissipation,
            lhs,
            rhs,
            rel_gap,
        }
    }
}

/// States `a_w^n`, `a_u^n` for `n = 0..N` (with `a_w⁰ = a_u⁰`) and the
/// per-step records.
#[derive(Clone, Debug, PartialEq)]
pub struct RomTrajectory<T> {
    pub scheme: TimeScheme,
    pub dt: T,
    pub times: Vec<T>,
    pub a_w: Vec<Vec<T>>,
    pub a_u: Vec<Vec<T>>,
    /// Step-2 ledger per level; `None` at `n = 0` and when step 2 is off.
    pub ledger: Vec<Option<LedgerEntry<T>>>,
    /// `2νΔt a_wᵀ S a_w` per level (zero at `n = 0`).
    pub viscous: Vec<T>,
    pub newton_iterations: Vec<usize>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> RomTrajectory<T> {
    pub fn new(scheme: TimeScheme, dt: T, t0: T, a0: Vec<T>) -> Self {
        Self {
            scheme,
            dt,
            times: vec![t0],
            a_w: vec![a0.clone()],
            a_u: vec![a0],
            ledger: vec![None],
            viscous: vec![T::zero()],
            newton_iterations: vec![0],
            warnings: Vec::new(),
        }
    }

    pub(crate) fn push(
        &mut self,
        t: T,
        a_w: Vec<T>,
        a_u: Vec<T>,
        entry: Option<LedgerEntry<T>>,
        viscous: T,
        iterations: usize,
    ) {
        self.times.push(t);
        self.a_w.push(a_w);
        self.a_u.push(a_u);
        self.ledger.push(entry);
        self.viscous.push(viscous);
        self.newton_iterations.push(iterations);
    }

    pub fn steps(&self) -> usize {
        self.a_u.len() - 1
    }

    pub fn r(&self) -> usize {
        self.a_u[0].len()
    }

    /// `‖a_u^n‖²` per level (the `L²` energy, since `Ψᵀ M Ψ = I`).
    pub fn energy_u(&self) -> Vec<T> {
        self.a_u.iter().map(|a| dot(a, a)).collect()
    }

    pub fn energy_w(&self) -> Vec<T> {
        self.a_w.iter().map(|a| dot(a, a)).collect()
    }

    /// Largest relative gap of the dissipation identity over the run.
    pub fn max_ledger_gap(&self) -> T {
        self.ledger
            .iter()
            .flatten()
            .fold(T::zero(), |m, e| m.max(e.rel_gap))
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write `traj` with `metadata` lines; `scheme`, `dt` and `r` are always
/// recorded.
pub fn write_trajectory_csv<T: Scalar>(
    traj: &RomTrajectory<T>,
    path: impl AsRef<Path>,
    metadata: &[(String, String)],
) -> Result<(), FormatError> {
    let mut file = fs::File::create(path)?;
    let mut meta = vec![
        ("scheme".to_string(), traj.scheme.name().to_string()),
        ("dt".to_string(), fmt_f64(traj.dt.as_f64())),
        ("r".to_string(), traj.r().to_string()),
    ];
    meta.extend(metadata.iter().cloned());
    for (k, v) in &meta {
        writeln!(file, "# {k}={v}")?;
    }
    for w in &traj.warnings {
        writeln!(file, "# warning={w}")?;
    }
    let r = traj.r();
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<String> = TRAJECTORY_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=r).map(|i| format!("a_u_{i}")));
    header.extend(LEDGER_COLUMNS.iter().map(|s| s.to_string()));
    header.extend((1..=r).map(|i| format!("a_w_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    let (ew, eu) = (traj.energy_w(), traj.energy_u());
    for n in 0..=traj.steps() {
        let mut row = vec![
            n.to_string(),
            fmt_f64(traj.times[n].as_f64()),
            fmt_f64(ew[n].as_f64()),
            fmt_f64(eu[n].as_f64()),
            fmt_f64(traj.viscous[n].as_f64()),
        ];
        row.extend(traj.a_u[n].iter().map(|v| fmt_f64(v.as_f64())));
        match &traj.ledger[n] {
            Some(e) => row.extend([e.dissipation, e.lhs, e.rhs, e.rel_gap].map(|v| fmt_f64(v.as_f64()))),
            None => row.extend(std::iter::repeat(String::new()).take(4)),
        }
        row.extend(traj.a_w[n].iter().map(|v| fmt_f64(v.as_f64())));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> FormatError {
    FormatError::Inconsistent(format!("csv: {e}"))
}

/// Parse a trajectory written by [`write_trajectory_csv`]; returns it with
/// the metadata map.
pub fn read_trajectory_csv<T: Scalar>(
    path: impl AsRef<Path>,
) -> Result<(RomTrajectory<T>, BTreeMap<String, String>), FormatError> {
    let text = fs::read_to_string(path)?;
    let mut meta = BTreeMap::new();
    let mut warnings = Vec::new();
    for line in text.lines() {
        let Some(rest) = line.strip_prefix("# ") else { break };
        if let Some((k, v)) = rest.split_once('=') {
            if k == "warning" {
                warnings.push(v.to_string());
            } else {
                meta.insert(k.to_string(), v.to_string());
            }
        }
    }
    let get = |k: &str| {
        meta.get(k)
            .ok_or_else(|| FormatError::Inconsistent(format!("missing metadata key {k}")))
    };
    let scheme: TimeScheme = get("scheme")?.parse().map_err(FormatError::Inconsistent)?;
    let dt: f64 = parse(get("dt")?)?;
    let r: usize = get("r")?
        .parse()
        .map_err(|_| FormatError::Inconsistent("bad r".into()))?;
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rd.headers().map_err(csv_err)?.clone();
    let expected_cols = TRAJECTORY_COLUMNS.len() + 2 * r + LEDGER_COLUMNS.len();
    if headers.len() != expected_cols || headers.get(0) != Some("step") {
        return Err(FormatError::Inconsistent(format!(
            "expected {expected_cols} columns for r={r}, found {}",
            headers.len()
        )));
    }
    let mut traj: Option<RomTrajectory<T>> = None;
    for (n, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let f = |i: usize| parse(&rec[i]).map(T::lit);
        let step: usize = rec[0]
            .parse()
            .map_err(|_| FormatError::Inconsistent(format!("bad step index in row {n}")))?;
        if step != n {
            return Err(FormatError::Inconsistent(format!("row {n} has step {step}")));
        }
        let base = TRAJECTORY_COLUMNS.len();
        let a_u = (0..r).map(|i| f(base + i)).collect::<Result<Vec<T>, _>>()?;
        let lb = base + r;
        let ledger = if rec[lb].is_empty() {
            None
        } else {
            let e = LedgerEntry {
                dissipation: f(lb)?,
                lhs: f(lb + 1)?,
                rhs: f(lb + 2)?,
                rel_gap: f(lb + 3)?,
                energy_w: f(2)?,
                energy_u: f(3)?,
            };
            Some(e)
        };
        let a_w = (0..r).map(|i| f(lb + 4 + i)).collect::<Result<Vec<T>, _>>()?;
        let t = f(1)?;
        match traj.as_mut() {
            None => traj = Some(RomTrajectory::new(scheme, T::lit(dt), t, a_u)),
            Some(tr) => tr.push(t, a_w, a_u, ledger, f(4)?, 0),
        }
    }
    let mut traj = traj.ok_or_else(|| FormatError::Inconsistent("trajectory has no rows".into()))?;
    traj.warnings = warnings;
    Ok((traj, meta))
}

fn parse(s: &str) -> Result<f64, FormatError> {
    s.trim()
        .parse()
        .map_err(|_| FormatError::Inconsistent(format!("bad number {s:?}")))
}
