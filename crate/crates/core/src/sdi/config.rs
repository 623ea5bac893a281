use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffusion::ScheduleKind;
use crate::error::{Error, Result};
use crate::poisson::SolverOptions;

/// How stage 2 feeds the blended estimate back into both chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendMode {
    /// Each chain takes a DDIM step from its own latent around the blend.
    #[default]
    DdimConsistent,
    /// Both chains are overwritten with the blended estimate itself.
    Literal,
}

impl fmt::Display for BlendMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlendMode::DdimConsistent => "ddim_consistent",
            BlendMode::Literal => "literal",
        })
    }
}

impl FromStr for BlendMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddim_consistent" | "ddim-consistent" => Ok(BlendMode::DdimConsistent),
            "literal" => Ok(BlendMode::Literal),
            _ => Err(Error::InvalidArgument(format!(
                "unknown blend mode `{s}` (expected ddim_consistent or literal)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdiConfig {
    /// Sampling steps `S`.
    pub steps: usize,
    /// Length of the training noise grid the sampling steps are taken from.
    pub train_steps: usize,
    pub schedule: ScheduleKind,
    /// Stage 1 ends at `τ₂ = round(alpha · S)`.
    pub alpha: f64,
    /// Stage 2 ends at `τ₁ = round(beta · S)`.
    pub beta: f64,
    pub blend_mode: BlendMode,
    pub seed: u64,
    pub poisson_tol: f64,
    pub poisson_max_iter: usize,
}

impl Default for SdiConfig {
    fn default() -> Self {
        SdiConfig {
            steps: 20,
            train_steps: 1000,
            schedule: ScheduleKind::Cosine,
            alpha: 0.9,
            beta: 0.6,
            blend_mode: BlendMode::DdimConsistent,
            seed: 0,
            poisson_tol: crate::poisson::DEFAULT_TOL,
            poisson_max_iter: crate::poisson::DEFAULT_MAX_ITER,
        }
    }
}

impl SdiConfig {
    pub fn tau2(&self) -> usize {
        (self.alpha * self.steps as f64).round() as usize
    }

    pub fn tau1(&self) -> usize {
        (self.beta * self.steps as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.steps == 0 || self.steps > self.train_steps {
            return bad(format!(
                "steps must be in 1..={} (got {})",
                self.train_steps, self.steps
            ));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must be in (0, 1] (got {})", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta must be in (0, 1) (got {})", self.beta));
        }
        if self.alpha <= self.beta {
            return bad(format!("alpha ({}) must exceed beta ({})", self.alpha, self.beta));
        }
        let (t2, t1) = (self.tau2(), self.tau1());
        if t2 <= t1 || t1 < 1 {
            return bad(format!(
                "thresholds need tau2 > tau1 >= 1 on a {}-step grid (got tau2={t2}, tau1={t1})",
                self.steps
            ));
        }
        if !(self.poisson_tol > 0.0) || self.poisson_max_iter == 0 {
            return bad("poisson solver needs a positive tolerance and iteration limit".into());
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.poisson_tol,
            max_iter: self.poisson_max_iter,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_thresholds() {
        let c = SdiConfig::default();
        c.validate().unwrap();
        assert_eq!((c.tau2(), c.tau1()), (18, 12));
    }

    #[test]
    fn invalid_thresholds() {
        let with = |alpha: f64, beta: f64, steps: usize| SdiConfig {
            alpha,
            beta,
            steps,
            ..SdiConfig::default()
        };
        assert!(with(0.6, 0.6, 20).validate().is_err());
        assert!(with(0.5, 0.7, 20).validate().is_err());
        // distinct fractions that round to the same step
        assert!(with(0.62, 0.6, 20).validate().is_err());
        // tau1 rounds to 0
        assert!(with(0.9, 0.01, 20).validate().is_err());
        assert!(with(1.0, 0.5, 4).validate().is_ok());
    }

    #[test]
    fn blend_mode_names() {
        assert_eq!("literal".parse::<BlendMode>().unwrap(), BlendMode::Literal);
        assert_eq!("ddim-consistent".parse::<BlendMode>().unwrap(), BlendMode::DdimConsistent);
        assert_eq!(BlendMode::DdimConsistent.to_string(), "ddim_consistent");
        assert!("x".parse::<BlendMode>().is_err());
    }
}
