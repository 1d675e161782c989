//! Hypothesis profiles: the thresholds every analysis checks before it runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    /// `M(r) > r^g` before a Harnack covering.
    pub harnack_growth: f64,
    /// `M(r) > r^g` along an absorbing chain.
    pub absorb_growth: f64,
    /// `M(r) > r^g` at a chain seed.
    pub seed_growth: f64,
    /// Lower bound on `sqrt(log r)`.
    pub sqrt_log_min: f64,
    /// Seed width: `k = 1 + seed_coeff·δ`.
    pub seed_coeff: f64,
    /// Gap to the far splice candidate: `log T = (1 + t_coeff·δ(S))·log S`.
    pub t_coeff: f64,
}

impl Profile {
    pub fn paper_strict() -> Self {
        Self {
            name: "paper-strict".into(),
            harnack_growth: 9.0,
            absorb_growth: 16.0,
            seed_growth: 10000.0,
            sqrt_log_min: 80.0,
            seed_coeff: 20.0,
            t_coeff: 40.0,
        }
    }

    /// Scaled-down thresholds that admit radii reachable at desk precision.
    pub fn desk_relaxed() -> Self {
        Self {
            name: "desk-relaxed".into(),
            harnack_growth: 3.0,
            absorb_growth: 3.0,
            seed_growth: 3.0,
            sqrt_log_min: 1.4,
            seed_coeff: 3.0,
            t_coeff: 3.5,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "paper-strict" => Ok(Self::paper_strict()),
            "desk-relaxed" => Ok(Self::desk_relaxed()),
            other => Err(Error::Parse(format!("unknown profile {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.harnack_growth,
            self.absorb_growth,
            self.seed_growth,
            self.sqrt_log_min,
            self.seed_coeff,
            self.t_coeff,
        ];
        if vals.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Precondition(format!("profile {} has non-positive thresholds", self.name)))
        }
    }
}

impl Default for Profile {
    fn default() -> Self {
        Self::desk_relaxed()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_profiles() {
        assert_eq!(Profile::by_name("paper-strict").unwrap().sqrt_log_min, 80.0);
        assert_eq!(Profile::by_name("desk-relaxed").unwrap().seed_coeff, 3.0);
        assert!(Profile::by_name("loose").is_err());
        let mut p = Profile::desk_relaxed();
        assert!(p.validate().is_ok());
        p.t_coeff = 0.0;
        assert!(p.validate().is_err());
    }
}
