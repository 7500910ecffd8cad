//! Stationary reset-Markov-chain generator.
//!
//! The latent mean follows
//!
//! ```text
//! mu_{t+1} = mu_t + 1   with probability q (1 - rho)
//!            mu_t - 1   with probability (1 - q)(1 - rho)
//!            0          with probability rho
//! ```
//!
//! started from its stationary law `mu_1 = 2B - N`, `N ~ Geometric(rho)` on
//! `{0, 1, 2, ...}`, `B ~ Binomial(N, q)`. Observations are
//! `X_t = mu_t + sigma Z_t` with independent standard normal `Z_t`.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Geometric, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::series::{MixingProfile, MixingProvenance, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    /// Reset probability, in `(0, 1]`.
    pub rho: f64,
    /// Upward drift probability, in `(0, 1)`.
    pub q: f64,
    /// Noise standard deviation, positive.
    pub sigma: f64,
    /// Stream length `T`.
    pub len: usize,
}

impl GeneratorParams {
    pub fn new(rho: f64, q: f64, sigma: f64, len: usize) -> Result<Self> {
        let p = Self { rho, q, sigma, len };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidParameter(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidParameter(format!("q must lie in (0, 1), got {}", self.q)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.len == 0 {
            return Err(Error::InvalidParameter("length must be positive".into()));
        }
        Ok(())
    }
}

/// One draw from the stationary law of the mean chain.
pub fn sample_initial_mu(rho: f64, q: f64, rng: &mut SimRng) -> Result<i64> {
    let geometric = Geometric::new(rho)
        .map_err(|e| Error::InvalidParameter(format!("geometric({rho}): {e}")))?;
    let n = geometric.sample(rng);
    if n == 0 {
        return Ok(0);
    }
    let b = Binomial::new(n, q)
        .map_err(|e| Error::InvalidParameter(format!("binomial({n}, {q}): {e}")))?
        .sample(rng);
    Ok(2 * b as i64 - n as i64)
}

/// Latent mean path and, for each transition `t -> t+1`, whether it was a reset.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanPath {
    pub mu: Vec<i64>,
    pub resets: Vec<bool>,
}

pub fn sample_mean_path(params: &GeneratorParams, rng: &mut SimRng) -> Result<MeanPath> {
    params.validate()?;
    let mut mu = Vec::with_capacity(params.len);
    let mut resets = Vec::with_capacity(params.len.saturating_sub(1));
    let mut current = sample_initial_mu(params.rho, params.q, rng)?;
    mu.push(current);
    let up = params.rho + params.q * (1.0 - params.rho);
    for _ in 1..params.len {
        let u: f64 = rng.random();
        let reset = u < params.rho;
        current = if reset {
            0
        } else if u < up {
            current + 1
        } else {
            current - 1
        };
        mu.push(current);
        resets.push(reset);
    }
    Ok(MeanPath { mu, resets })
}

/// A length-`T` stream: the mean path is drawn first, then the noise.
pub fn sample_stream(params: &GeneratorParams, rng: &mut SimRng) -> Result<TimeSeries> {
    let path = sample_mean_path(params, rng)?;
    let values = path
        .mu
        .iter()
        .map(|&m| {
            let z: f64 = rng.sample(StandardNormal);
            m as f64 + params.sigma * z
        })
        .collect();
    TimeSeries::new(values)
}

/// Mixing-rate expression `(1 - rho)^(tau + 1)` with unit constant.
pub fn beta_mixing_rate(rho: f64, tau: usize) -> f64 {
    (1.0 - rho).powi(tau as i32 + 1)
}

/// Analytic mixing profile on lags `0..=tau_max`, optionally scaled by a constant.
pub fn mixing_profile(rho: f64, tau_max: usize, scale: f64) -> Result<MixingProfile> {
    MixingProfile::from_fn(tau_max, MixingProvenance::AnalyticRate, |tau| {
        (scale * beta_mixing_rate(rho, tau)).min(1.0)
    })
}
