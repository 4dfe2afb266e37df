//! Implicit time-stepping schemes shared by the full-order and reduced solvers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    BackwardEuler,
    Bdf2,
}

impl TimeScheme {
    /// Coefficient of the new level: `α` in `(α uⁿ⁺¹ − Σ βₖ uⁿ⁻ᵏ) / Δt`.
    pub fn alpha<T: Scalar>(self) -> T {
        match self {
            TimeScheme::BackwardEuler => T::one(),
            TimeScheme::Bdf2 => T::lit(1.5),
        }
    }

    /// History weights `(β₀, β₁)` applied to `uⁿ` and `uⁿ⁻¹`.
    pub fn history<T: Scalar>(self) -> (T, T) {
        match self {
            TimeScheme::BackwardEuler => (T::one(), T::zero()),
            TimeScheme::Bdf2 => (T::lit(2.0), T::lit(-0.5)),
        }
    }

    /// Number of history levels the scheme reads.
    pub fn levels(self) -> usize {
        match self {
            TimeScheme::BackwardEuler => 1,
            TimeScheme::Bdf2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TimeScheme::BackwardEuler => "backward_euler",
            TimeScheme::Bdf2 => "bdf2",
        }
    }
}

impl fmt::Display for TimeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TimeScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "be" | "backward_euler" | "euler" => Ok(TimeScheme::BackwardEuler),
            "bdf2" => Ok(TimeScheme::Bdf2),
            other => Err(format!("unknown time scheme '{other}' (expected backward_euler or bdf2)")),
        }
    }
}

/// Number of steps `T / Δt` when it is an integer up to round-off.
pub fn step_count(t_end: f64, dt: f64) -> Option<usize> {
    if !(dt > 0.0 && dt.is_finite() && t_end > 0.0 && t_end.is_finite()) {
        return None;
    }
    let m = t_end / dt;
    let rounded = m.round();
    if rounded >= 1.0 && (m - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        Some(rounded as usize)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bdf2_is_exact_on_linear_data() {
        // (α t₁ − β₀ t₀ − β₁ t₋₁) / Δt = 1 for t = (1, 0, −1)
        let a: f64 = TimeScheme::Bdf2.alpha();
        let (b0, b1): (f64, f64) = TimeScheme::Bdf2.history();
        assert_eq!(a - b0 - b1, 0.0);
        assert_eq!(a * 1.0 - b1 * -1.0, 1.0);
    }

    #[test]
    fn parse_names() {
        assert_eq!("bdf2".parse::<TimeScheme>().unwrap(), TimeScheme::Bdf2);
        assert_eq!("backward-euler".parse::<TimeScheme>().unwrap(), TimeScheme::BackwardEuler);
        assert!("rk4".parse::<TimeScheme>().is_err());
    }

    #[test]
    fn step_counts() {
        assert_eq!(step_count(1.0, 0.1), Some(10));
        assert_eq!(step_count(0.5, 1.0 / 320.0), Some(160));
        assert_eq!(step_count(1.0, 0.3), None);
        assert_eq!(step_count(1.0, 0.0), None);
    }
}
