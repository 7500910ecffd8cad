//! Built-in measures of evidence `psi`.
//!
//! Windowed statistics take the two aligned windows `(x_t..x_{t+delta})`,
//! `(y_t..y_{t+delta})`; full-stream statistics take the complete streams.
//! Larger values always mean more evidence of a coincidence.
//!
//! Each [`EvidenceStatistic`] declares two structural flags that unlock fast
//! paths elsewhere in the crate:
//!
//! - `additive`: windowed with `delta = 0` and `psi(x, y) = f(x) + g(y)`.
//! - `shift_equivariant`: full-stream and `psi(x_[s], y_[s]) = psi(x, y)` for
//!   every common rotation `s`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::series::{is_binary, window, StabilityProfile, TimeSeries};

/// `psi(x, y) = x + y` on single-sample windows.
pub fn sum_stat(x_window: &[f64], y_window: &[f64]) -> Result<f64> {
    check_window_len("sum", x_window, y_window, 1)?;
    Ok(x_window[0] + y_window[0])
}

fn check_window_len(stat: &str, x: &[f64], y: &[f64], expected: usize) -> Result<()> {
    for w in [x, y] {
        if w.len() != expected {
            return Err(Error::WindowLength {
                stat: stat.to_string(),
                expected,
                found: w.len(),
            });
        }
    }
    Ok(())
}

fn check_same_len(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    Ok(())
}

fn check_binary(x: &[f64], y: &[f64]) -> Result<()> {
    if !is_binary(x) || !is_binary(y) {
        return Err(Error::NonBinary);
    }
    Ok(())
}

/// Normalized count of spike pairs within `delta` of each other:
/// `(1 / (N_X N_Y)) * #{(i, j) : x_i = y_j = 1, |i - j| <= delta}`.
///
/// Returns 0 when either stream has no events.
pub fn cross_correlation(x: &[f64], y: &[f64], delta: usize) -> Result<f64> {
    check_same_len(x, y)?;
    check_binary(x, y)?;
    let xs: Vec<usize> = event_positions(x).collect();
    let ys: Vec<usize> = event_positions(y).collect();
    if xs.is_empty() || ys.is_empty() {
        return Ok(0.0);
    }
    // Both position lists are sorted, so a sliding window over `ys` counts
    // the partners of each x-event in O(N_X + N_Y).
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut pairs = 0u64;
    for &i in &xs {
        while lo < ys.len() && ys[lo] + delta < i {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < ys.len() && ys[hi] <= i + delta {
            hi += 1;
        }
        pairs += (hi - lo) as u64;
    }
    Ok(pairs as f64 / (xs.len() as f64 * ys.len() as f64))
}

fn event_positions(x: &[f64]) -> impl Iterator<Item = usize> + '_ {
    x.iter()
        .enumerate()
        .filter(|(_, &v)| v == 1.0)
        .map(|(i, _)| i)
}

/// Unitary-event count on a pair of aligned windows:
/// `sum_i sum_j x_i y_j = (sum x) (sum y)`.
pub fn unitary_event_window(x_window: &[f64], y_window: &[f64]) -> Result<f64> {
    if x_window.len() != y_window.len() || x_window.is_empty() {
        return Err(Error::WindowLength {
            stat: "unitary".into(),
            expected: x_window.len().max(1),
            found: y_window.len(),
        });
    }
    check_binary(x_window, y_window)?;
    let sx: f64 = x_window.iter().sum();
    let sy: f64 = y_window.iter().sum();
    Ok(sx * sy)
}

/// Unitary-event count `sum_{i=t}^{t+delta} sum_{j=t}^{t+delta} x_i y_j`.
pub fn unitary_event_count(x: &TimeSeries, y: &TimeSeries, t: usize, delta: usize) -> Result<f64> {
    check_same_len(x, y)?;
    unitary_event_window(window(x, t, delta)?, window(y, t, delta)?)
}

/// Number of x-events followed by a y-event in `[i + a, i + b]`, with the
/// window truncated at the end of the stream.
pub fn offset_event_count(x: &[f64], y: &[f64], a: usize, b: usize) -> Result<f64> {
    if a == 0 || a >= b {
        return Err(Error::InvalidParameter(format!(
            "offset window needs 0 < a < b, got a={a}, b={b}"
        )));
    }
    check_same_len(x, y)?;
    check_binary(x, y)?;
    let len = y.len();
    // prefix[k] = number of y-events among the first k samples
    let mut prefix = vec![0u32; len + 1];
    for (k, &v) in y.iter().enumerate() {
        prefix[k + 1] = prefix[k] + u32::from(v == 1.0);
    }
    let count = event_positions(x)
        .filter(|&i| {
            let lo = i + a;
            if lo >= len {
                return false;
            }
            let hi = (i + b).min(len - 1);
            prefix[hi + 1] > prefix[lo]
        })
        .count();
    Ok(count as f64)
}

/// Joint SNR evidence: `max_i sqrt(x_1^2 + y_i^2)` with the x-channel pinned
/// at the window's first sample (the candidate time).
pub fn quadrature_snr(x_window: &[f64], y_window: &[f64]) -> Result<f64> {
    if x_window.is_empty() || x_window.len() != y_window.len() {
        return Err(Error::WindowLength {
            stat: "quadrature".into(),
            expected: x_window.len().max(1),
            found: y_window.len(),
        });
    }
    let x0 = x_window[0];
    Ok(y_window
        .iter()
        .map(|&y| x0.hypot(y))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Negated time gap between the single x-event and the nearest y-event.
pub fn neg_min_time_gap(x: &[f64], y: &[f64]) -> Result<f64> {
    check_same_len(x, y)?;
    check_binary(x, y)?;
    let mut events = event_positions(x);
    let t = match (events.next(), events.next()) {
        (Some(t), None) => t,
        _ => {
            return Err(Error::NotSingleEvent {
                found: event_positions(x).count(),
            })
        }
    };
    event_positions(y)
        .map(|i| i.abs_diff(t))
        .min()
        .map(|gap| -(gap as f64))
        .ok_or(Error::NoEvents)
}

/// `(1/w) [ (x_T + sum_{t=1}^{w-1} (-1)^t x_t)^2 + (same for y)^2 ]`.
pub fn alternating_window_stat(x: &[f64], y: &[f64], w: usize) -> Result<f64> {
    check_same_len(x, y)?;
    let len = x.len();
    if w == 0 || w > len {
        return Err(Error::InvalidParameter(format!(
            "alternating window needs 1 <= w <= T, got w={w}, T={len}"
        )));
    }
    let arm = |v: &[f64]| {
        let mut s = v[len - 1];
        for (t, &vt) in v[..w - 1].iter().enumerate() {
            // 1-based index t+1, even indices add, odd subtract
            if (t + 1) % 2 == 0 {
                s += vt;
            } else {
                s -= vt;
            }
        }
        s
    };
    let (a, b) = (arm(x), arm(y));
    Ok((a * a + b * b) / w as f64)
}

/// Pearson correlation with a flag for zero-variance input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub value: f64,
    /// Set when either stream is constant; `value` is then 0.
    pub degenerate: bool,
}

pub fn sample_correlation_checked(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_same_len(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Correlation {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Correlation {
        value: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Pearson sample correlation; 0 for a constant stream.
pub fn sample_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    sample_correlation_checked(x, y).map(|c| c.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatisticMode {
    Windowed,
    FullStream,
}

impl StatisticMode {
    pub fn name(&self) -> &'static str {
        match self {
            StatisticMode::Windowed => "windowed",
            StatisticMode::FullStream => "full-stream",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StructuralFlags {
    pub additive: bool,
    pub shift_equivariant: bool,
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type PairFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Componentwise parts of an additive statistic, `psi(x, y) = f(x) + g(y)`.
#[derive(Clone)]
pub struct AdditiveSplit {
    pub f: ScalarFn,
    pub g: ScalarFn,
}

impl AdditiveSplit {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.f)(x) + (self.g)(y)
    }
}

#[derive(Clone)]
enum Kind {
    Sum,
    UnitaryEvent,
    QuadratureSnr,
    CrossCorrelation { delta: usize },
    OffsetEventCount { a: usize, b: usize },
    NegMinTimeGap,
    AlternatingWindow { w: usize },
    SampleCorrelation,
    CustomAdditive(AdditiveSplit),
    Custom {
        mode: StatisticMode,
        shift_equivariant: bool,
        func: PairFn,
    },
}

/// A named measure of evidence together with its structural flags.
#[derive(Clone)]
pub struct EvidenceStatistic {
    name: String,
    kind: Kind,
    gamma: Option<StabilityProfile>,
}

impl fmt::Debug for EvidenceStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvidenceStatistic")
            .field("name", &self.name)
            .field("mode", &self.mode())
            .field("flags", &self.flags())
            .field("params", &self.params())
            .finish()
    }
}

/// Optional parameters used when a statistic is selected by name.
#[derive(Debug, Clone, Copy, Default)]
pub struct StatisticParams {
    pub w: Option<usize>,
    pub a: Option<usize>,
    pub b: Option<usize>,
    /// Coincidence tolerance for `crosscorr`.
    pub lag: Option<usize>,
}

impl EvidenceStatistic {
    fn builtin(name: &str, kind: Kind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            gamma: None,
        }
    }

    pub fn sum() -> Self {
        Self::builtin("sum", Kind::Sum)
    }

    pub fn unitary_event() -> Self {
        Self::builtin("unitary", Kind::UnitaryEvent)
    }

    pub fn quadrature_snr() -> Self {
        Self::builtin("quadrature", Kind::QuadratureSnr)
    }

    pub fn cross_correlation(delta: usize) -> Self {
        Self::builtin("crosscorr", Kind::CrossCorrelation { delta })
    }

    pub fn offset_event_count(a: usize, b: usize) -> Result<Self> {
        if a == 0 || a >= b {
            return Err(Error::InvalidParameter(format!(
                "offset window needs 0 < a < b, got a={a}, b={b}"
            )));
        }
        Ok(Self::builtin("offset", Kind::OffsetEventCount { a, b }))
    }

    pub fn neg_min_time_gap() -> Self {
        Self::builtin("gap", Kind::NegMinTimeGap)
    }

    pub fn alternating_window(w: usize) -> Result<Self> {
        if w == 0 {
            return Err(Error::InvalidParameter("w must be positive".into()));
        }
        Ok(Self::builtin("altwindow", Kind::AlternatingWindow { w }))
    }

    pub fn sample_correlation() -> Self {
        Self::builtin("correlation", Kind::SampleCorrelation)
    }

    /// Windowed statistic `f(x) + g(y)` on single-sample windows.
    pub fn custom_additive(
        name: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::builtin(
            name,
            Kind::CustomAdditive(AdditiveSplit {
                f: Arc::new(f),
                g: Arc::new(g),
            }),
        )
    }

    pub fn custom_windowed(
        name: &str,
        func: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::builtin(
            name,
            Kind::Custom {
                mode: StatisticMode::Windowed,
                shift_equivariant: false,
                func: Arc::new(func),
            },
        )
    }

    /// Full-stream statistic. Declaring `shift_equivariant` is a promise that
    /// `psi(x_[s], y_[s]) == psi(x, y)`; see [`shift_equivariance_gap`].
    pub fn custom_stream(
        name: &str,
        shift_equivariant: bool,
        func: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::builtin(
            name,
            Kind::Custom {
                mode: StatisticMode::FullStream,
                shift_equivariant,
                func: Arc::new(func),
            },
        )
    }

    /// Attach a stability profile.
    pub fn with_gamma(mut self, gamma: StabilityProfile) -> Self {
        self.gamma = Some(gamma);
        self
    }

    /// Select a built-in statistic by its CLI name.
    pub fn from_name(name: &str, params: &StatisticParams) -> Result<Self> {
        let need = |v: Option<usize>, flag: &str| {
            v.ok_or_else(|| Error::InvalidParameter(format!("statistic {name} requires --{flag}")))
        };
        match name {
            "sum" => Ok(Self::sum()),
            "crosscorr" => Ok(Self::cross_correlation(params.lag.unwrap_or(0))),
            "unitary" => Ok(Self::unitary_event()),
            "offset" => Self::offset_event_count(need(params.a, "a")?, need(params.b, "b")?),
            "quadrature" => Ok(Self::quadrature_snr()),
            "gap" => Ok(Self::neg_min_time_gap()),
            "altwindow" => Self::alternating_window(need(params.w, "w")?),
            "correlation" => Ok(Self::sample_correlation()),
            other => Err(Error::InvalidParameter(format!("unknown statistic {other}"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mode(&self) -> StatisticMode {
        match &self.kind {
            Kind::Sum | Kind::UnitaryEvent | Kind::QuadratureSnr | Kind::CustomAdditive(_) => {
                StatisticMode::Windowed
            }
            Kind::CrossCorrelation { .. }
            | Kind::OffsetEventCount { .. }
            | Kind::NegMinTimeGap
            | Kind::AlternatingWindow { .. }
            | Kind::SampleCorrelation => StatisticMode::FullStream,
            Kind::Custom { mode, .. } => *mode,
        }
    }

    pub fn flags(&self) -> StructuralFlags {
        match &self.kind {
            Kind::Sum | Kind::CustomAdditive(_) => StructuralFlags {
                additive: true,
                shift_equivariant: false,
            },
            Kind::SampleCorrelation => StructuralFlags {
                additive: false,
                shift_equivariant: true,
            },
            Kind::Custom {
                shift_equivariant, ..
            } => StructuralFlags {
                additive: false,
                shift_equivariant: *shift_equivariant,
            },
            _ => StructuralFlags::default(),
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match &self.kind {
            Kind::CrossCorrelation { delta } => vec![("delta", *delta as f64)],
            Kind::OffsetEventCount { a, b } => vec![("a", *a as f64), ("b", *b as f64)],
            Kind::AlternatingWindow { w } => vec![("w", *w as f64)],
            _ => Vec::new(),
        }
    }

    pub fn gamma(&self) -> Option<&StabilityProfile> {
        self.gamma.as_ref()
    }

    pub fn additive_split(&self) -> Option<AdditiveSplit> {
        match &self.kind {
            Kind::Sum => Some(AdditiveSplit {
                f: Arc::new(|x| x),
                g: Arc::new(|y| y),
            }),
            Kind::CustomAdditive(split) => Some(split.clone()),
            _ => None,
        }
    }

    pub(crate) fn is_sample_correlation(&self) -> bool {
        matches!(self.kind, Kind::SampleCorrelation)
    }

    /// Evaluate on a pair of windows (windowed mode) or full streams.
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match &self.kind {
            Kind::Sum => sum_stat(x, y),
            Kind::UnitaryEvent => unitary_event_window(x, y),
            Kind::QuadratureSnr => quadrature_snr(x, y),
            Kind::CrossCorrelation { delta } => cross_correlation(x, y, *delta),
            Kind::OffsetEventCount { a, b } => offset_event_count(x, y, *a, *b),
            Kind::NegMinTimeGap => neg_min_time_gap(x, y),
            Kind::AlternatingWindow { w } => alternating_window_stat(x, y, *w),
            Kind::SampleCorrelation => sample_correlation(x, y),
            Kind::CustomAdditive(split) => {
                check_window_len(&self.name, x, y, 1)?;
                Ok(split.eval(x[0], y[0]))
            }
            Kind::Custom { func, .. } => {
                check_same_len(x, y)?;
                Ok(func(x, y))
            }
        }
    }

    pub(crate) fn require_mode(&self, expected: StatisticMode) -> Result<()> {
        let found = self.mode();
        if found != expected {
            return Err(Error::ModeMismatch {
                stat: self.name.clone(),
                expected: expected.name(),
                found: found.name(),
            });
        }
        Ok(())
    }
}

/// Largest `|psi(x_[s], y_[s]) - psi(x, y)|` over all common rotations `s`.
///
/// Zero (or rounding-sized) for a shift-equivariant statistic.
pub fn shift_equivariance_gap(stat: &EvidenceStatistic, x: &[f64], y: &[f64]) -> Result<f64> {
    check_same_len(x, y)?;
    let base = stat.evaluate(x, y)?;
    let (mut xs, mut ys) = (x.to_vec(), y.to_vec());
    let mut gap = 0.0f64;
    for _ in 1..x.len() {
        xs.rotate_left(1);
        ys.rotate_left(1);
        gap = gap.max((stat.evaluate(&xs, &ys)? - base).abs());
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new(v.to_vec()).unwrap()
    }

    /// Cross-correlation by enumerating every (i, j) pair.
    fn cross_correlation_enumerated(x: &[f64], y: &[f64], delta: usize) -> f64 {
        let nx = x.iter().filter(|&&v| v == 1.0).count();
        let ny = y.iter().filter(|&&v| v == 1.0).count();
        if nx == 0 || ny == 0 {
            return 0.0;
        }
        let mut pairs = 0;
        for (i, &xi) in x.iter().enumerate() {
            for (j, &yj) in y.iter().enumerate() {
                if xi == 1.0 && yj == 1.0 && i.abs_diff(j) <= delta {
                    pairs += 1;
                }
            }
        }
        pairs as f64 / (nx * ny) as f64
    }

    #[test]
    fn sum_examples() {
        assert_eq!(sum_stat(&[3.0], &[2.0]).unwrap(), 5.0);
        assert_eq!(sum_stat(&[0.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(sum_stat(&[-1.5], &[0.5]).unwrap(), -1.0);
        assert!(sum_stat(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cross_correlation_examples() {
        let (x, y) = ([1.0, 0.0, 1.0], [0.0, 1.0, 1.0]);
        assert_eq!(cross_correlation_enumerated(&x, &y, 1), 0.75);
        assert_eq!(cross_correlation(&x, &y, 1).unwrap(), 0.75);
        assert_eq!(cross_correlation(&[0.0; 3], &y, 1).unwrap(), 0.0);
        assert_eq!(cross_correlation(&[1.0; 7], &[1.0; 7], 6).unwrap(), 1.0);
        let err = cross_correlation(&[0.5, 0.0], &[0.0, 1.0], 0).unwrap_err();
        assert_eq!(err.to_string(), "binary stream required");
    }

    #[test]
    fn unitary_examples() {
        let x = ts(&[1.0, 1.0, 0.0]);
        let y = ts(&[0.0, 1.0, 1.0]);
        // direct double sum over the window {1, 2}
        let direct: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| x[i] * y[j]).sum();
        assert_eq!(direct, 2.0);
        assert_eq!(unitary_event_count(&x, &y, 1, 1).unwrap(), 2.0);
        assert_eq!(unitary_event_count(&ts(&[0.0, 0.0, 1.0]), &y, 1, 1).unwrap(), 0.0);
        assert_eq!(unitary_event_count(&ts(&[1.0; 3]), &ts(&[1.0; 3]), 2, 1).unwrap(), 4.0);
        assert!(unitary_event_count(&x, &y, 3, 1).is_err());
        assert!(unitary_event_count(&ts(&[2.0, 0.0, 0.0]), &y, 1, 1).is_err());
    }

    #[test]
    fn offset_examples() {
        let x = [1.0, 0.0, 0.0, 0.0];
        assert_eq!(offset_event_count(&x, &[0.0, 0.0, 1.0, 0.0], 1, 2).unwrap(), 1.0);
        assert_eq!(offset_event_count(&x, &[0.0; 4], 1, 2).unwrap(), 0.0);
        assert_eq!(offset_event_count(&[1.0, 0.0], &[0.0, 1.0], 1, 3).unwrap(), 1.0);
        assert!(offset_event_count(&x, &x, 2, 2).is_err());
        assert!(offset_event_count(&x, &x, 3, 2).is_err());
    }

    #[test]
    fn quadrature_examples() {
        assert_eq!(quadrature_snr(&[3.0], &[4.0]).unwrap(), 5.0);
        assert_eq!(quadrature_snr(&[0.0, 0.0], &[0.0, 7.0]).unwrap(), 7.0);
        let v = quadrature_snr(&[1.0, 9.0], &[2.0, 2.0]).unwrap();
        assert!((v - 5f64.sqrt()).abs() < 1e-15);
        assert!(quadrature_snr(&[], &[]).is_err());
    }

    #[test]
    fn gap_examples() {
        assert_eq!(neg_min_time_gap(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(neg_min_time_gap(&[0.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]).unwrap(), -1.0);
        assert_eq!(
            neg_min_time_gap(&[1.0, 0.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 0.0, 1.0]).unwrap(),
            -4.0
        );
        let err = neg_min_time_gap(&[1.0, 1.0], &[0.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("single-event stream required"));
        assert!(matches!(neg_min_time_gap(&[1.0, 0.0], &[0.0, 0.0]), Err(Error::NoEvents)));
    }

    #[test]
    fn alternating_window_examples() {
        assert_eq!(alternating_window_stat(&[7.0, 2.0], &[-1.0, 3.0], 1).unwrap(), 13.0);
        assert_eq!(alternating_window_stat(&[1.0, 3.0], &[0.0, 2.0], 2).unwrap(), 4.0);
        assert_eq!(alternating_window_stat(&[1.0, 1.0, 0.0], &[0.0; 3], 3).unwrap(), 0.0);
        assert!(alternating_window_stat(&[1.0, 1.0], &[1.0, 1.0], 3).is_err());
    }

    #[test]
    fn correlation_examples() {
        assert!((sample_correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((sample_correlation(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(sample_correlation(&[1.0, 0.0, 1.0, 0.0], &[1.0, 0.0, 0.0, 1.0]).unwrap(), 0.0);
        let c = sample_correlation_checked(&[2.0; 4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(c, Correlation { value: 0.0, degenerate: true });
    }

    #[test]
    fn flags_and_modes() {
        assert!(EvidenceStatistic::sum().flags().additive);
        assert_eq!(EvidenceStatistic::sum().mode(), StatisticMode::Windowed);
        let corr = EvidenceStatistic::sample_correlation();
        assert!(corr.flags().shift_equivariant);
        assert_eq!(corr.mode(), StatisticMode::FullStream);
        let alt = EvidenceStatistic::alternating_window(4).unwrap();
        assert!(!alt.flags().shift_equivariant);
        assert_eq!(alt.params(), vec![("w", 4.0)]);
        assert!(EvidenceStatistic::from_name("altwindow", &StatisticParams::default()).is_err());
        assert!(EvidenceStatistic::from_name("nope", &StatisticParams::default()).is_err());
        let off = EvidenceStatistic::from_name(
            "offset",
            &StatisticParams { a: Some(1), b: Some(3), ..Default::default() },
        )
        .unwrap();
        assert_eq!(off.name(), "offset");
    }

    #[test]
    fn altwindow_is_not_shift_equivariant() {
        let alt = EvidenceStatistic::alternating_window(2).unwrap();
        let gap = shift_equivariance_gap(&alt, &[1.0, 5.0, 2.0], &[0.0, 1.0, 3.0]).unwrap();
        assert!(gap > 0.0);
    }

    fn binary_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..=32).prop_flat_map(|n| {
            let bit = prop_oneof![Just(0.0), Just(1.0)];
            (
                proptest::collection::vec(bit.clone(), n),
                proptest::collection::vec(bit, n),
            )
        })
    }

    fn real_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..=32).prop_flat_map(|n| {
            (
                proptest::collection::vec(-10.0f64..10.0, n),
                proptest::collection::vec(-10.0f64..10.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn cross_correlation_matches_enumeration((x, y) in binary_pair(), delta in 0usize..6) {
            let v = cross_correlation(&x, &y, delta).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, cross_correlation_enumerated(&x, &y, delta));
        }

        #[test]
        fn correlation_is_shift_equivariant((x, y) in real_pair()) {
            let stat = EvidenceStatistic::sample_correlation();
            let base = stat.evaluate(&x, &y).unwrap().abs().max(1.0);
            prop_assert!(shift_equivariance_gap(&stat, &x, &y).unwrap() <= 1e-12 * base);
        }

        #[test]
        fn dot_product_count_is_exactly_shift_equivariant((x, y) in binary_pair()) {
            let dot = EvidenceStatistic::custom_stream("dot", true, |a, b| a.iter().zip(b).map(|(p, q)| p * q).sum());
            prop_assert_eq!(shift_equivariance_gap(&dot, &x, &y).unwrap(), 0.0);
        }

        #[test]
        fn alternating_window_nonnegative((x, y) in real_pair(), w_frac in 0.0f64..1.0) {
            let w = 1 + ((x.len() - 1) as f64 * w_frac) as usize;
            prop_assert!(alternating_window_stat(&x, &y, w).unwrap() >= 0.0);
        }
    }
}
