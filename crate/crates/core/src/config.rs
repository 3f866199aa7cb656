//! Problem configuration and library-wide constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest corruption fraction the estimators accept by default. The
/// guarantees hold for any small enough constant; 0.1 keeps every
/// constant-factor argument comfortable at the instance sizes this crate
/// targets. Callers may loosen it through [`ProblemConfig::with_max_eps`].
pub const DEFAULT_MAX_EPS: f64 = 0.1;

/// Largest covariance-proximity parameter accepted by the
/// approximately-known-covariance mean estimator.
pub const TAU_MAX: f64 = 2.0;

/// Parameters of one estimation problem: dimension, sample count,
/// corruption fraction, and the RNG seed that makes runs reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub d: usize,
    pub n: usize,
    pub eps: f64,
    pub seed: u64,
    #[serde(default = "default_max_eps")]
    pub max_eps: f64,
}

fn default_max_eps() -> f64 {
    DEFAULT_MAX_EPS
}

impl ProblemConfig {
    pub fn new(d: usize, n: usize, eps: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            d,
            n,
            eps,
            seed,
            max_eps: DEFAULT_MAX_EPS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overrides the corruption-fraction ceiling (the default is
    /// [`DEFAULT_MAX_EPS`]).
    pub fn with_max_eps(mut self, max_eps: f64) -> Result<Self> {
        self.max_eps = max_eps;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if self.n < 2 * self.d {
            return Err(Error::InvalidParameter(format!(
                "need N >= 2d for nondegenerate moments (d={}, N={})",
                self.d, self.n
            )));
        }
        if !(self.eps > 0.0 && self.eps <= self.max_eps) {
            return Err(Error::EpsOutOfRange {
                eps: self.eps,
                max: self.max_eps,
            });
        }
        Ok(())
    }

    /// Number of columns the adversary replaces.
    pub fn corrupted_count(&self) -> usize {
        (self.eps * self.n as f64).floor() as usize
    }
}
