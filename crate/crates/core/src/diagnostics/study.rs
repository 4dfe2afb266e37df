//! Parameter sweeps of the reduced model against a full-order reference.
//!
//! Points are independent and run on scoped threads; rows are assembled in
//! parameter order, so the table does not depend on scheduling.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::thread;

use serde::{Deserialize, Serialize};

use super::{convergence_rate, rom_error, ErrorReport};
use crate::error::{Error, FormatError};
use crate::fem::FemOperators;
use crate::pod::{epsilon_tail, PodBasis};
use crate::rom::{ReducedSystem, RomInitial, RomRunSettings};
use crate::scalar::Scalar;
use crate::time::{step_count, TimeScheme};
use crate::vms::run_vms_pod;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StudyKind {
    #[serde(rename = "dt")]
    Dt,
    #[serde(rename = "R")]
    Cutoff,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Dt => "dt",
            StudyKind::Cutoff => "R",
        }
    }

    /// Quantity the rates are taken against.
    pub fn abscissa(self) -> &'static str {
        match self {
            StudyKind::Dt => "dt",
            StudyKind::Cutoff => "epsilon",
        }
    }
}

impl std::str::FromStr for StudyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dt" => Ok(StudyKind::Dt),
            "R" | "r" | "cutoff" => Ok(StudyKind::Cutoff),
            other => Err(format!("unknown study kind '{other}' (expected dt or R)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    /// `Δt` or `R`.
    pub parameter: f64,
    /// `Δt` or the tail `ε` at `R`.
    pub abscissa: f64,
    pub linf_l2: f64,
    pub linf_l2_rate: Option<f64>,
    /// `L²(H¹)` error in the gradient seminorm.
    pub l2_h1: f64,
    pub l2_h1_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub kind: StudyKind,
    pub rows: Vec<RateRow>,
}

/// Rows from `(parameter, abscissa, errors)` in order, with rates between
/// consecutive rows; a rate is absent when it is undefined.
pub fn rate_table(kind: StudyKind, points: &[(f64, f64, ErrorReport)]) -> RateTable {
    let mut rows: Vec<RateRow> = Vec::with_capacity(points.len());
    for (i, &(parameter, abscissa, e)) in points.iter().enumerate() {
        let rate = |pick: fn(&ErrorReport) -> f64| {
            let (_, pa, prev) = points.get(i.wrapping_sub(1))?;
            convergence_rate(pick(prev), pick(&e), *pa, abscissa).ok()
        };
        rows.push(RateRow {
            parameter,
            abscissa,
            linf_l2: e.linf_l2,
            linf_l2_rate: rate(|e| e.linf_l2),
            l2_h1: e.l2_h1,
            l2_h1_rate: rate(|e| e.l2_h1),
        });
    }
    RateTable { kind, rows }
}

/// Fixed inputs of a sweep: the reduced system, the basis it came from, the
/// full-order reference and the base parameters.
pub struct StudyInputs<'a, T> {
    pub sys: &'a ReducedSystem<T>,
    pub basis: &'a PodBasis<T>,
    pub ops: &'a FemOperators<T>,
    pub reference: &'a [Vec<T>],
    pub ref_dt: T,
    pub initial: &'a RomInitial<T>,
    pub scheme: TimeScheme,
    pub t_end: T,
    pub dt: T,
    pub cutoff: usize,
    pub nu_t: T,
}

impl<T: Scalar> StudyInputs<'_, T> {
    fn run_point(&self, dt: T, cutoff: usize) -> Result<ErrorReport, Error> {
        let (t_end, dtf) = (self.t_end.as_f64(), dt.as_f64());
        let steps = step_count(t_end, dtf).ok_or(crate::error::SolverError::IncompatibleEndTime { t_end, dt: dtf })?;
        let settings = RomRunSettings::new(self.scheme, dt, steps);
        let traj = run_vms_pod(self.sys, self.initial, &settings, cutoff, self.nu_t)?;
        Ok(rom_error(&traj, self.ref_dt, self.reference, self.basis, self.ops)?)
    }
}

fn sweep<T: Scalar, P: Copy + Send + Sync>(
    points: &[P],
    f: impl Fn(P) -> Result<ErrorReport, Error> + Sync,
) -> Result<Vec<ErrorReport>, Error> {
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = points.iter().map(|&p| s.spawn(move || f(p))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
            .collect()
    })
}

/// Fixed `(r, R, ν_T)`; one row per `Δt`, ordered as given.
pub fn study_varying_dt<T: Scalar>(inputs: &StudyInputs<'_, T>, dts: &[T]) -> Result<RateTable, Error> {
    let reports = sweep::<T, T>(dts, |dt| inputs.run_point(dt, inputs.cutoff))?;
    let points: Vec<_> = dts
        .iter()
        .zip(reports)
        .map(|(dt, e)| (dt.as_f64(), dt.as_f64(), e))
        .collect();
    Ok(rate_table(StudyKind::Dt, &points))
}

/// Fixed `(r, Δt, ν_T)`; one row per cutoff `R`, rates against `ε(R)`.
pub fn study_varying_r<T: Scalar>(inputs: &StudyInputs<'_, T>, cutoffs: &[usize]) -> Result<RateTable, Error> {
    let eps = cutoffs
        .iter()
        .map(|&c| epsilon_tail(inputs.basis, c).map(|e| e.as_f64()))
        .collect::<Result<Vec<_>, _>>()?;
    let reports = sweep::<T, usize>(cutoffs, |c| inputs.run_point(inputs.dt, c))?;
    let points: Vec<_> = cutoffs
        .iter()
        .zip(eps)
        .zip(reports)
        .map(|((&c, e), rep)| (c as f64, e, rep))
        .collect();
    Ok(rate_table(StudyKind::Cutoff, &points))
}

const RATE_COLUMNS: [&str; 6] = ["parameter", "abscissa", "linf_l2", "rate_linf_l2", "l2_h1", "rate_l2_h1"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// CSV with `# key=value` metadata; `kind`, `parameter` and `abscissa` are
/// always recorded.
pub fn write_rate_table(
    table: &RateTable,
    path: impl AsRef<Path>,
    metadata: &[(String, String)],
) -> Result<(), FormatError> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "# kind={}", table.kind.name())?;
    writeln!(file, "# parameter={}", table.kind.name())?;
    writeln!(file, "# abscissa={}", table.kind.abscissa())?;
    for (k, v) in metadata {
        writeln!(file, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    let err = |e: csv::Error| FormatError::Inconsistent(format!("csv: {e}"));
    w.write_record(RATE_COLUMNS).map_err(err)?;
    for r in &table.rows {
        w.write_record([
            format!("{}", r.parameter),
            format!("{:.16e}", r.abscissa),
            format!("{:.16e}", r.linf_l2),
            opt(r.linf_l2_rate),
            format!("{:.16e}", r.l2_h1),
            opt(r.l2_h1_rate),
        ])
        .map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rate_table(path: impl AsRef<Path>) -> Result<(RateTable, BTreeMap<String, String>), FormatError> {
    let text = fs::read_to_string(path)?;
    let meta: BTreeMap<String, String> = text
        .lines()
        .map_while(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let kind: StudyKind = meta
        .get("kind")
        .ok_or_else(|| FormatError::Inconsistent("missing metadata key kind".into()))?
        .parse()
        .map_err(FormatError::Inconsistent)?;
    let err = |e: csv::Error| FormatError::Inconsistent(format!("csv: {e}"));
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    if rd.headers().map_err(err)?.iter().ne(RATE_COLUMNS) {
        return Err(FormatError::Inconsistent("unexpected rate-table columns".into()));
    }
    let num = |s: &str| -> Result<f64, FormatError> {
        s.parse()
            .map_err(|_| FormatError::Inconsistent(format!("bad number {s:?}")))
    };
    let maybe = |s: &str| (!s.is_empty()).then(|| num(s)).transpose();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(err)?;
        rows.push(RateRow {
            parameter: num(&rec[0])?,
            abscissa: num(&rec[1])?,
            linf_l2: num(&rec[2])?,
            linf_l2_rate: maybe(&rec[3])?,
            l2_h1: num(&rec[4])?,
            l2_h1_rate: maybe(&rec[5])?,
        });
    }
    Ok((RateTable { kind, rows }, meta))
}
