use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    #[default]
    Cosine,
    Linear,
}

impl FromStr for ScheduleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(ScheduleKind::Cosine),
            "linear" => Ok(ScheduleKind::Linear),
            _ => Err(Error::InvalidArgument(format!(
                "unknown schedule `{s}` (expected cosine or linear)"
            ))),
        }
    }
}

/// Variance-preserving noise levels; index 0 is clean data.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub alpha: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Training-grid timestep of each index.
    pub timesteps: Vec<usize>,
}

impl NoiseSchedule {
    /// Number of noisy steps `T`; valid indices are `0..=T`.
    pub fn steps(&self) -> usize {
        self.alpha.len() - 1
    }

    #[inline]
    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    #[inline]
    pub fn sigma(&self, t: usize) -> f64 {
        self.sigma[t]
    }

    /// `steps + 1` evenly spaced levels of this schedule, endpoints included.
    pub fn subsample(&self, steps: usize) -> Result<NoiseSchedule> {
        let t = self.steps();
        if steps == 0 || steps > t {
            return Err(Error::InvalidArgument(format!(
                "cannot take {steps} sampling steps from a {t}-step schedule"
            )));
        }
        let idx: Vec<usize> = (0..=steps)
            .map(|k| ((k * t) as f64 / steps as f64).round() as usize)
            .collect();
        Ok(NoiseSchedule {
            alpha: idx.iter().map(|&i| self.alpha[i]).collect(),
            sigma: idx.iter().map(|&i| self.sigma[i]).collect(),
            timesteps: idx.iter().map(|&i| self.timesteps[i]).collect(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,alpha,sigma\n");
        for (i, t) in self.timesteps.iter().enumerate() {
            let _ = writeln!(s, "{t},{:?},{:?}", self.alpha[i], self.sigma[i]);
        }
        s
    }
}

pub fn make_schedule(kind: ScheduleKind, t: usize) -> Result<NoiseSchedule> {
    if t == 0 {
        return Err(Error::InvalidArgument("schedule needs at least one step".into()));
    }
    let alpha: Vec<f64> = match kind {
        ScheduleKind::Cosine => (0..=t)
            .map(|i| (i as f64 / t as f64 * FRAC_PI_2).cos().clamp(1e-4, 1.0))
            .collect(),
        ScheduleKind::Linear => {
            // DDPM betas, rescaled so the total noise is independent of T
            let scale = 1000.0 / t as f64;
            let (b0, b1) = (1e-4 * scale, 0.02 * scale);
            let mut abar = 1.0;
            let mut out = vec![1.0];
            for i in 1..=t {
                let beta = if t == 1 {
                    b1
                } else {
                    b0 + (b1 - b0) * (i - 1) as f64 / (t - 1) as f64
                };
                abar *= 1.0 - beta.min(0.999);
                out.push(abar.sqrt());
            }
            out
        }
    };
    let sigma = alpha.iter().map(|a| (1.0 - a * a).max(0.0).sqrt()).collect();
    Ok(NoiseSchedule {
        alpha,
        sigma,
        timesteps: (0..=t).collect(),
    })
}
