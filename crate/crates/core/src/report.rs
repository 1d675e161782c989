//! Versioned JSON envelope shared by every report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA: &str = "annular-dyn/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    HypothesisFailed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub schema: &'static str,
    pub command: &'a str,
    pub status: Status,
    pub data: T,
}

impl<'a, T: Serialize> Report<'a, T> {
    pub fn new(command: &'a str, status: Status, data: T) -> Self {
        Self {
            schema: SCHEMA,
            command,
            status,
            data,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

/// True for errors that mean a hypothesis did not hold rather than a fault.
pub fn is_hypothesis_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::HypothesisFailed(_)
            | Error::NeitherCovered
            | Error::CeilingViolated(_)
            | Error::NoFeasibleR(_)
            | Error::RateViolation(_)
            | Error::InsufficientBranching { .. }
            | Error::Unrealizable(_)
            | Error::DegenerateInnerAnnulus(_)
            | Error::RealizationFailed { .. }
            | Error::InvalidR { .. }
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_carries_schema() {
        let r = Report::new("moduli", Status::Ok, vec![1, 2]);
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["schema"], "annular-dyn/1");
        assert_eq!(v["status"], "ok");
        assert_eq!(v["data"][1], 2);
        assert!(is_hypothesis_failure(&Error::NeitherCovered));
        assert!(!is_hypothesis_failure(&Error::Parse("x".into())));
    }
}
