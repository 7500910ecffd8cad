//! Domain types shared by every analysis path, plus the two primitive
//! stream transformations: forward windows and circular (wrap-around) shifts.
//!
//! All public indices are 1-based. A stream of length `T` has positions
//! `1..=T`, a window starting at `t` with half-width `delta` covers
//! `t..=t+delta`, and `circular_shift(x, i)` moves `x_i` into position 1.

use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};

/// An ordered, finite, nonempty vector of real measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyStream);
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                position: i + 1,
                value: v,
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Stream length `T`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at 1-based position `t`.
    pub fn at(&self, t: usize) -> Option<f64> {
        t.checked_sub(1).and_then(|i| self.values.get(i)).copied()
    }

    /// True when every entry is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        is_binary(&self.values)
    }
}

impl Deref for TimeSeries {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

impl TryFrom<Vec<f64>> for TimeSeries {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

pub(crate) fn is_binary(values: &[f64]) -> bool {
    values.iter().all(|&v| v == 0.0 || v == 1.0)
}

/// Window half-specification: a window starting at `t` is `{t, ..., t + delta}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WindowSpec {
    pub delta: usize,
}

impl WindowSpec {
    pub fn new(delta: usize) -> Self {
        Self { delta }
    }

    /// Number of samples in each window.
    pub fn width(&self) -> usize {
        self.delta + 1
    }

    /// Number of admissible window starts `T - delta` for a stream of length `len`.
    pub fn positions(&self, len: usize) -> Result<usize> {
        if self.delta >= len {
            return Err(Error::WindowOutOfRange {
                t: 1,
                delta: self.delta,
                len,
            });
        }
        Ok(len - self.delta)
    }
}

/// Returns `(x_i, ..., x_T, x_1, ..., x_{i-1})`.
pub fn circular_shift(x: &TimeSeries, i: usize) -> Result<TimeSeries> {
    let len = x.len();
    if i == 0 || i > len {
        return Err(Error::ShiftOutOfBounds { index: i, len });
    }
    let mut values = x.values.clone();
    values.rotate_left(i - 1);
    Ok(TimeSeries { values })
}

/// Writes the wrap-around version of `src` starting at 0-based offset `start` into `dst`.
pub(crate) fn rotate_into(src: &[f64], start: usize, dst: &mut [f64]) {
    let n = src.len();
    dst[..n - start].copy_from_slice(&src[start..]);
    dst[n - start..].copy_from_slice(&src[..start]);
}

/// Returns the window `(x_t, ..., x_{t+delta})`.
pub fn window(x: &[f64], t: usize, delta: usize) -> Result<&[f64]> {
    let len = x.len();
    if t == 0 || t + delta > len {
        return Err(Error::WindowOutOfRange { t, delta, len });
    }
    Ok(&x[t - 1..t + delta])
}

/// Which computation produced a p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    EventNaive,
    EventAdditiveFast,
    SyncNaive,
    SyncShiftFast,
    SyncSpectral,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::EventNaive => "event-naive",
            Method::EventAdditiveFast => "event-additive-fast",
            Method::SyncNaive => "sync-naive",
            Method::SyncShiftFast => "sync-shift-fast",
            Method::SyncSpectral => "sync-spectral",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A time-shifted p-value together with the counts it was computed from.
///
/// `p` is always `exceed_count / control_count`, and the aligned pair is a
/// member of its own control group, so `exceed_count >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueReport {
    pub p: f64,
    /// Number of controls at or above the threshold.
    pub exceed_count: u64,
    /// Number of `(i, j)` pairs compared.
    pub control_count: u64,
    /// Observed evidence `Psi`.
    pub statistic_value: f64,
    /// Number of controls exactly equal to `Psi`.
    pub ties: u64,
    pub method: Method,
    /// Inflation added to every control (synchronicity only, 0 otherwise).
    pub epsilon: f64,
}

impl PValueReport {
    pub(crate) fn from_counts(
        exceed_count: u64,
        control_count: u64,
        statistic_value: f64,
        ties: u64,
        method: Method,
        epsilon: f64,
    ) -> Self {
        debug_assert!(exceed_count >= 1 && exceed_count <= control_count);
        Self {
            p: exceed_count as f64 / control_count as f64,
            exceed_count,
            control_count,
            statistic_value,
            ties,
            method,
            epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityProvenance {
    Analytic,
    Empirical,
}

/// Per-lag stability coefficients `gamma(tau)`, indexed from lag 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityProfile {
    gamma: Vec<f64>,
    provenance: StabilityProvenance,
}

impl StabilityProfile {
    pub fn new(gamma: Vec<f64>, provenance: StabilityProvenance) -> Result<Self> {
        match gamma.first() {
            None => return Err(Error::InvalidProfile("empty stability profile".into())),
            Some(&g0) if g0 != 0.0 => {
                return Err(Error::InvalidProfile(format!("gamma(0) must be 0, got {g0}")))
            }
            _ => {}
        }
        if gamma.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::InvalidProfile(
                "gamma must be finite and nonnegative".into(),
            ));
        }
        if gamma.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidProfile("gamma must be nondecreasing".into()));
        }
        Ok(Self { gamma, provenance })
    }

    /// `gamma == 0` on lags `0..=tau_max`.
    pub fn zero(tau_max: usize) -> Self {
        Self {
            gamma: vec![0.0; tau_max + 1],
            provenance: StabilityProvenance::Analytic,
        }
    }

    pub fn get(&self, tau: usize) -> Option<f64> {
        self.gamma.get(tau).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.gamma
    }

    pub fn max_lag(&self) -> usize {
        self.gamma.len() - 1
    }

    pub fn provenance(&self) -> StabilityProvenance {
        self.provenance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingProvenance {
    AnalyticRate,
    UserSupplied,
}

/// Per-lag beta-mixing coefficients `beta(tau)`, indexed from lag 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingProfile {
    beta: Vec<f64>,
    provenance: MixingProvenance,
}

impl MixingProfile {
    pub fn new(beta: Vec<f64>, provenance: MixingProvenance) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::InvalidProfile("empty mixing profile".into()));
        }
        if beta.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::InvalidProfile("beta must lie in [0, 1]".into()));
        }
        if beta.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidProfile("beta must be nonincreasing".into()));
        }
        Ok(Self { beta, provenance })
    }

    pub fn from_fn(
        tau_max: usize,
        provenance: MixingProvenance,
        f: impl Fn(usize) -> f64,
    ) -> Result<Self> {
        Self::new((0..=tau_max).map(f).collect(), provenance)
    }

    /// `beta == 0` on lags `0..=tau_max` (independent observations).
    pub fn zero(tau_max: usize) -> Self {
        Self {
            beta: vec![0.0; tau_max + 1],
            provenance: MixingProvenance::UserSupplied,
        }
    }

    pub fn get(&self, tau: usize) -> Option<f64> {
        self.beta.get(tau).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.beta
    }

    pub fn max_lag(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn provenance(&self) -> MixingProvenance {
        self.provenance
    }
}
