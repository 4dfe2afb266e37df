//! Run configuration: one JSON document shared by every pipeline stage.
//!
//! ```json
//! {
//!   "problem": "forced_cavity",
//!   "mesh": { "nx": 8, "ny": 8 },
//!   "nu": 0.01, "dt": 0.01, "t_end": 1.0, "scheme": "bdf2",
//!   "r": 6, "R": 2, "nu_t": 0.005
//! }
//! ```
//!
//! Omitted keys take their defaults; unknown keys are rejected.

use std::fmt::Write as _;
use std::hash::Hasher;
use std::path::{Path, PathBuf};

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::diagnostics::StudyKind;
use crate::dns::{ForcedCavityParams, ProblemKind};
use crate::error::ConfigError;
use crate::time::{step_count, TimeScheme};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
    /// `[x0, x1, y0, y1]`.
    pub bounds: [f64; 4],
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            nx: 8,
            ny: 8,
            bounds: [0.0, 1.0, 0.0, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub kind: StudyKind,
    /// Reduced time steps of a `dt` study, coarse to fine.
    pub dt_values: Vec<f64>,
    /// Cutoffs of an `R` study, ascending.
    pub cutoffs: Vec<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            kind: StudyKind::Dt,
            dt_values: Vec::new(),
            cutoffs: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    /// Forcing of `forced_cavity`; ignored by the other problems.
    pub forcing: ForcedCavityParams,
    pub mesh: MeshConfig,
    pub nu: f64,
    /// Reduced-model time step.
    pub dt: f64,
    /// Full-order time step; defaults to `dt`.
    pub dns_dt: Option<f64>,
    pub t_end: f64,
    pub scheme: TimeScheme,
    /// Full-order scheme; defaults to `scheme`.
    pub dns_scheme: Option<TimeScheme>,
    pub r: usize,
    #[serde(rename = "R")]
    pub cutoff: usize,
    pub nu_t: f64,
    /// First full-order level taken as a snapshot (0 includes the initial state).
    pub snapshot_first: usize,
    pub snapshot_stride: usize,
    pub out: PathBuf,
    pub seed: u64,
    pub study: StudyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::ForcedCavity,
            forcing: ForcedCavityParams::default(),
            mesh: MeshConfig::default(),
            nu: 0.01,
            dt: 0.01,
            dns_dt: None,
            t_end: 1.0,
            scheme: TimeScheme::Bdf2,
            dns_scheme: None,
            r: 6,
            cutoff: 2,
            nu_t: 0.0,
            snapshot_first: 0,
            snapshot_stride: 1,
            out: PathBuf::from("out"),
            seed: 0,
            study: StudyConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| invalid(format!("cannot parse configuration: {e}")))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read configuration {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn dns_dt(&self) -> f64 {
        self.dns_dt.unwrap_or(self.dt)
    }

    pub fn dns_scheme(&self) -> TimeScheme {
        self.dns_scheme.unwrap_or(self.scheme)
    }

    pub fn rom_steps(&self) -> Result<usize, ConfigError> {
        steps_for(self.t_end, self.dt, "dt")
    }

    pub fn dns_steps(&self) -> Result<usize, ConfigError> {
        steps_for(self.t_end, self.dns_dt(), "dns_dt")
    }

    /// Check every invariant; nothing is computed from an unvalidated config.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive and finite (got {v})")))
            }
        };
        positive(self.nu, "nu")?;
        positive(self.dt, "dt")?;
        positive(self.dns_dt(), "dns_dt")?;
        positive(self.t_end, "t_end")?;
        if !(self.nu_t >= 0.0 && self.nu_t.is_finite()) {
            return Err(invalid(format!("nu_t must be non-negative (got {})", self.nu_t)));
        }
        if self.r == 0 {
            return Err(invalid("r must be at least 1"));
        }
        if self.cutoff > self.r {
            return Err(invalid(format!(
                "R={} exceeds r={}; the cutoff must satisfy 0 <= R <= r",
                self.cutoff, self.r
            )));
        }
        if self.mesh.nx < 2 || self.mesh.ny < 2 {
            return Err(invalid(format!(
                "mesh needs nx, ny >= 2 (got {}x{})",
                self.mesh.nx, self.mesh.ny
            )));
        }
        let [x0, x1, y0, y1] = self.mesh.bounds;
        if !(x1 > x0 && y1 > y0 && self.mesh.bounds.iter().all(|v| v.is_finite())) {
            return Err(invalid("mesh bounds must satisfy x0 < x1 and y0 < y1"));
        }
        if self.problem != ProblemKind::TaylorGreen && self.mesh.bounds != [0.0, 1.0, 0.0, 1.0] {
            return Err(invalid(format!(
                "problem {:?} is defined on the unit square; only taylor_green accepts other bounds",
                self.problem
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(invalid("snapshot_stride must be at least 1"));
        }
        self.rom_steps()?;
        let dns_steps = self.dns_steps()?;
        if self.snapshot_first > dns_steps {
            return Err(invalid(format!(
                "snapshot_first={} is past the last full-order level {dns_steps}",
                self.snapshot_first
            )));
        }
        let ratio = self.dt / self.dns_dt();
        if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio.round() < 1.0 {
            return Err(invalid(format!(
                "dt={} must be an integer multiple of dns_dt={} so errors can be compared on a common grid",
                self.dt,
                self.dns_dt()
            )));
        }
        for &dt in &self.study.dt_values {
            positive(dt, "study.dt_values entry")?;
            steps_for(self.t_end, dt, "study.dt_values entry")?;
        }
        if let Some(&c) = self.study.cutoffs.iter().find(|&&c| c > self.r) {
            return Err(invalid(format!("study cutoff R={c} exceeds r={}", self.r)));
        }
        Ok(())
    }

    /// FNV-1a hash of the canonical JSON form, excluding the output
    /// directory; printed as 16 hex digits in every artifact.
    pub fn hash(&self) -> u64 {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("configuration serializes");
        let mut h = FnvHasher::default();
        h.write(json.as_bytes());
        h.finish()
    }

    pub fn hash_hex(&self) -> String {
        let mut s = String::new();
        write!(s, "{:016x}", self.hash()).unwrap();
        s
    }
}

fn steps_for(t_end: f64, dt: f64, name: &str) -> Result<usize, ConfigError> {
    step_count(t_end, dt).ok_or_else(|| invalid(format!("t_end={t_end} is not an integer multiple of {name}={dt}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn partial_documents_use_defaults() {
        let c = RunConfig::from_json(r#"{"problem": "taylor_green", "R": 3, "nu_t": 0.1}"#).unwrap();
        assert_eq!(c.problem, ProblemKind::TaylorGreen);
        assert_eq!(c.cutoff, 3);
        assert_eq!(c.r, RunConfig::default().r);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"viscosity": 1.0}"#).is_err());
    }

    #[test]
    fn invariants_are_enforced() {
        let bad = [
            r#"{"R": 7, "r": 6}"#,
            r#"{"nu_t": -1.0}"#,
            r#"{"nu": 0.0}"#,
            r#"{"dt": 0.0}"#,
            r#"{"dt": 0.3, "t_end": 1.0}"#,
            r#"{"dt": 0.01, "dns_dt": 0.003}"#,
            r#"{"mesh": {"nx": 1}}"#,
            r#"{"mesh": {"bounds": [0.0, 2.0, 0.0, 1.0]}}"#,
            r#"{"snapshot_stride": 0}"#,
            r#"{"study": {"cutoffs": [9]}}"#,
        ];
        for doc in bad {
            let c = RunConfig::from_json(doc).unwrap();
            assert!(c.validate().is_err(), "{doc} should be rejected");
        }
        let tg = RunConfig::from_json(r#"{"problem": "taylor_green", "mesh": {"bounds": [0.0, 2.0, 0.0, 1.0]}}"#).unwrap();
        tg.validate().unwrap();
    }

    #[test]
    fn hash_ignores_output_directory_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.nu_t = 1e-3;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash_hex().len(), 16);
    }
}
