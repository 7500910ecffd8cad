//! Synchronicity detection through circular shifts of whole streams.
//!
//! The control group is `Psi_ij = psi(x_[i], y_[j])` over all `T^2` pairs of
//! wrap-around shifts. The inflated p-value gives every control a head start
//! `epsilon`: `p = #{(i, j) : Psi_ij + epsilon >= Psi} / T^2`.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::event::BoundReport;
use crate::evidence::{sample_correlation_checked, EvidenceStatistic, StatisticMode};
use crate::rng::{substream, SimRng};
use crate::series::{
    rotate_into, Method, MixingProfile, PValueReport, StabilityProfile, StabilityProvenance,
};
use crate::simgen::{sample_stream, GeneratorParams};

/// Rows handled in parallel once `T` reaches this size.
const PARALLEL_MIN_LEN: usize = 128;

fn check_inputs(x: &[f64], y: &[f64], epsilon: f64) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyStream);
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be finite and nonnegative, got {epsilon}"
        )));
    }
    Ok(())
}

fn observed(stat: &EvidenceStatistic, x: &[f64], y: &[f64]) -> Result<f64> {
    let psi = stat.evaluate(x, y)?;
    if psi.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "statistic {} produced NaN",
            stat.name()
        )));
    }
    Ok(psi)
}

/// Evaluates one row `i` of the control grid, handing each `Psi_ij` to `visit`.
fn control_row(
    stat: &EvidenceStatistic,
    x: &[f64],
    y: &[f64],
    i: usize,
    mut visit: impl FnMut(f64),
) -> Result<()> {
    let n = x.len();
    let mut xs = vec![0.0; n];
    let mut ys = vec![0.0; n];
    rotate_into(x, i, &mut xs);
    for j in 0..n {
        rotate_into(y, j, &mut ys);
        visit(stat.evaluate(&xs, &ys)?);
    }
    Ok(())
}

/// All `T^2` control values, row-major in `(i, j)`.
pub fn sync_control_values(x: &[f64], y: &[f64], stat: &EvidenceStatistic) -> Result<Vec<f64>> {
    stat.require_mode(StatisticMode::FullStream)?;
    check_inputs(x, y, 0.0)?;
    let mut out = Vec::with_capacity(x.len() * x.len());
    for i in 0..x.len() {
        control_row(stat, x, y, i, |v| out.push(v))?;
    }
    Ok(out)
}

/// Wrap-around p-value by direct evaluation of every shifted pair.
pub fn sync_pvalue(
    x: &[f64],
    y: &[f64],
    stat: &EvidenceStatistic,
    epsilon: f64,
) -> Result<PValueReport> {
    stat.require_mode(StatisticMode::FullStream)?;
    check_inputs(x, y, epsilon)?;
    let psi = observed(stat, x, y)?;
    let n = x.len();
    let row = |i: usize| -> Result<(u64, u64)> {
        let (mut ge, mut eq) = (0u64, 0u64);
        control_row(stat, x, y, i, |v| {
            ge += u64::from(v + epsilon >= psi);
            eq += u64::from(v == psi);
        })?;
        Ok((ge, eq))
    };
    let add = |a: (u64, u64), b: (u64, u64)| (a.0 + b.0, a.1 + b.1);
    let (ge, eq) = if n >= PARALLEL_MIN_LEN {
        (0..n)
            .into_par_iter()
            .map(row)
            .try_reduce(|| (0, 0), |a, b| Ok(add(a, b)))?
    } else {
        (0..n).map(row).try_fold((0, 0), |acc, r| r.map(|r| add(acc, r)))?
    };
    Ok(PValueReport::from_counts(
        ge,
        (n * n) as u64,
        psi,
        eq,
        Method::SyncNaive,
        epsilon,
    ))
}

/// Builds the report from the `T` relative-shift values, each standing for
/// `T` grid cells. `lags[0]` must be the observed `Psi`.
fn report_from_lags(lags: &[f64], psi: f64, epsilon: f64, method: Method) -> PValueReport {
    let n = lags.len() as u64;
    let ge = lags.iter().filter(|&&v| v + epsilon >= psi).count() as u64;
    let eq = lags.iter().filter(|&&v| v == psi).count() as u64;
    PValueReport::from_counts(ge * n, n * n, psi, eq * n, method, epsilon)
}

/// Wrap-around p-value for shift-equivariant statistics.
///
/// `Psi_ij` then depends only on `d = (j - i) mod T`, so the grid collapses to
/// `T` values `psi(x, y_[d])`. Sample correlation uses centered cross
/// products per lag (`O(T^2)` total); other statistics are evaluated once per
/// lag. Summation order differs from [`sync_pvalue`], so near-ties can
/// resolve differently at rounding scale.
pub fn sync_pvalue_shift_fast(
    x: &[f64],
    y: &[f64],
    stat: &EvidenceStatistic,
    epsilon: f64,
) -> Result<PValueReport> {
    if !stat.flags().shift_equivariant {
        return Err(Error::NotShiftEquivariant);
    }
    stat.require_mode(StatisticMode::FullStream)?;
    check_inputs(x, y, epsilon)?;
    let psi = observed(stat, x, y)?;
    let n = x.len();
    let mut lags = vec![psi; n];
    if stat.is_sample_correlation() {
        correlation_lags_direct(x, y, &mut lags);
    } else {
        let mut ys = vec![0.0; n];
        for (d, slot) in lags.iter_mut().enumerate().skip(1) {
            rotate_into(y, d, &mut ys);
            *slot = stat.evaluate(x, &ys)?;
        }
    }
    lags[0] = psi;
    Ok(report_from_lags(&lags, psi, epsilon, Method::SyncShiftFast))
}

/// Writes `corr(x, y_[d])` for `d >= 1` into `lags[d]`; leaves them 0 when
/// either stream is constant.
fn correlation_lags_direct(x: &[f64], y: &[f64], lags: &mut [f64]) {
    let Some((cx, cy, scale)) = centered(x, y) else {
        lags[1..].fill(0.0);
        return;
    };
    let n = x.len();
    for (d, slot) in lags.iter_mut().enumerate().skip(1) {
        let mut s = 0.0;
        for t in 0..n {
            s += cx[t] * cy[(t + d) % n];
        }
        *slot = (s / scale).clamp(-1.0, 1.0);
    }
}

/// Centered copies of both streams and `sqrt(Sxx Syy)`, or `None` if degenerate.
fn centered(x: &[f64], y: &[f64]) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cx: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let cy: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sxx: f64 = cx.iter().map(|v| v * v).sum();
    let syy: f64 = cy.iter().map(|v| v * v).sum();
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((cx, cy, (sxx * syy).sqrt()))
}

/// Circular cross-correlation `c[d] = sum_t a[t] b[(t + d) mod n]` for every lag, via FFT.
pub fn circular_cross_correlation(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    assert_eq!(n, b.len(), "circular cross-correlation needs equal lengths");
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&v| Complex::new(v, 0.0)).collect();
    forward.process(&mut fa);
    forward.process(&mut fb);
    let mut prod: Vec<Complex<f64>> = fa.iter().zip(&fb).map(|(p, q)| p.conj() * q).collect();
    inverse.process(&mut prod);
    prod.iter().map(|c| c.re / n as f64).collect()
}

/// Sample-correlation p-value with all circular lags from one FFT pass.
pub fn sync_pvalue_spectral(
    x: &[f64],
    y: &[f64],
    stat: &EvidenceStatistic,
    epsilon: f64,
) -> Result<PValueReport> {
    if !stat.is_sample_correlation() {
        return Err(Error::InvalidParameter(format!(
            "spectral path supports sample correlation only, got {}",
            stat.name()
        )));
    }
    check_inputs(x, y, epsilon)?;
    let psi = sample_correlation_checked(x, y)?.value;
    let n = x.len();
    let mut lags = vec![0.0; n];
    if let Some((cx, cy, scale)) = centered(x, y) {
        for (slot, c) in lags.iter_mut().zip(circular_cross_correlation(&cx, &cy)) {
            *slot = (c / scale).clamp(-1.0, 1.0);
        }
    }
    lags[0] = psi;
    Ok(report_from_lags(&lags, psi, epsilon, Method::SyncSpectral))
}

/// Uses the shift-equivariant fast path when the statistic allows it.
pub fn sync_pvalue_auto(
    x: &[f64],
    y: &[f64],
    stat: &EvidenceStatistic,
    epsilon: f64,
) -> Result<PValueReport> {
    if stat.flags().shift_equivariant {
        sync_pvalue_shift_fast(x, y, stat, epsilon)
    } else {
        sync_pvalue(x, y, stat, epsilon)
    }
}

/// Where `estimate_gamma` gets its base streams and replacement values.
pub trait PairSource: Sync {
    /// Base pair `(x, y)` for one trial.
    fn observed(&self, rng: &mut SimRng) -> Result<(Vec<f64>, Vec<f64>)>;
    /// Values used to overwrite a perturbed block, same length as the base pair.
    fn replacement(&self, rng: &mut SimRng) -> Result<(Vec<f64>, Vec<f64>)>;
}

/// Fresh independent draws from the generator for both base and replacement.
#[derive(Debug, Clone)]
pub struct GeneratorSource {
    pub x: GeneratorParams,
    pub y: GeneratorParams,
}

impl PairSource for GeneratorSource {
    fn observed(&self, rng: &mut SimRng) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((
            sample_stream(&self.x, rng)?.into_values(),
            sample_stream(&self.y, rng)?.into_values(),
        ))
    }

    fn replacement(&self, rng: &mut SimRng) -> Result<(Vec<f64>, Vec<f64>)> {
        self.observed(rng)
    }
}

/// A fixed observed pair; replacements are random permutations of its values.
#[derive(Debug, Clone)]
pub struct ObservedSource {
    pub x: Arc<[f64]>,
    pub y: Arc<[f64]>,
}

impl PairSource for ObservedSource {
    fn observed(&self, _rng: &mut SimRng) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.x.to_vec(), self.y.to_vec()))
    }

    fn replacement(&self, rng: &mut SimRng) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mut x, mut y) = (self.x.to_vec(), self.y.to_vec());
        x.shuffle(rng);
        y.shuffle(rng);
        Ok((x, y))
    }
}

/// One perturbation draw shared across all lags of a trial.
struct Trial {
    x: Vec<f64>,
    y: Vec<f64>,
    fresh_x: Vec<f64>,
    fresh_y: Vec<f64>,
    start_x: usize,
    start_y: usize,
    base: f64,
}

fn draw_trial<S: PairSource>(
    stat: &EvidenceStatistic,
    source: &S,
    seed: u64,
    index: usize,
) -> Result<Trial> {
    let mut rng = substream(seed, index as u64);
    let (x, y) = source.observed(&mut rng)?;
    let (fresh_x, fresh_y) = source.replacement(&mut rng)?;
    if x.len() != y.len() || fresh_x.len() != x.len() || fresh_y.len() != y.len() {
        return Err(Error::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let n = x.len();
    let start_x = rng.random_range(0..n);
    let start_y = rng.random_range(0..n);
    let base = stat.evaluate(&x, &y)?;
    Ok(Trial {
        x,
        y,
        fresh_x,
        fresh_y,
        start_x,
        start_y,
        base,
    })
}

/// Overwrites the circular block of `tau` entries beginning at `start`.
///
/// These blocks are exactly the complements of the index sets `I_{k,tau}`:
/// an interior run `k+1..=k+tau`, or a suffix plus prefix that wraps.
fn perturb(base: &[f64], fresh: &[f64], start: usize, tau: usize) -> Vec<f64> {
    let n = base.len();
    let mut out = base.to_vec();
    for r in 0..tau {
        let pos = (start + r) % n;
        out[pos] = fresh[pos];
    }
    out
}

fn perturbation_gap(stat: &EvidenceStatistic, trial: &Trial, tau: usize) -> Result<f64> {
    if tau == 0 {
        return Ok(0.0);
    }
    let xp = perturb(&trial.x, &trial.fresh_x, trial.start_x, tau);
    let yp = perturb(&trial.y, &trial.fresh_y, trial.start_y, tau);
    Ok((trial.base - stat.evaluate(&xp, &yp)?).abs())
}

fn check_gamma_args(len: usize, tau: usize, n_trials: usize) -> Result<()> {
    if tau >= len {
        return Err(Error::InvalidParameter(format!(
            "perturbation length tau={tau} must be below T={len}"
        )));
    }
    if n_trials == 0 {
        return Err(Error::InvalidParameter("n_trials must be positive".into()));
    }
    Ok(())
}

/// Empirical stability at lag `tau`: the largest `|psi(x, y) - psi(x', y')|`
/// seen when a random block of `tau` consecutive (circularly wrapping)
/// entries of each stream is replaced.
///
/// This is a lower bound on the worst-case coefficient, never a certificate.
pub fn estimate_gamma<S: PairSource>(
    stat: &EvidenceStatistic,
    source: &S,
    tau: usize,
    n_trials: usize,
    seed: u64,
) -> Result<f64> {
    let first = draw_trial(stat, source, seed, 0)?;
    check_gamma_args(first.x.len(), tau, n_trials)?;
    let mut best = perturbation_gap(stat, &first, tau)?;
    for index in 1..n_trials {
        let trial = draw_trial(stat, source, seed, index)?;
        best = best.max(perturbation_gap(stat, &trial, tau)?);
    }
    Ok(best)
}

/// Empirical profile on lags `0..=tau_max`.
///
/// All lags reuse the same trial draws, and the profile is the running
/// maximum over lags, so it is nondecreasing with `gamma(0) = 0`.
pub fn estimate_gamma_profile<S: PairSource>(
    stat: &EvidenceStatistic,
    source: &S,
    tau_max: usize,
    n_trials: usize,
    seed: u64,
) -> Result<StabilityProfile> {
    let first = draw_trial(stat, source, seed, 0)?;
    check_gamma_args(first.x.len(), tau_max, n_trials)?;
    let per_trial: Vec<Vec<f64>> = (0..n_trials)
        .into_par_iter()
        .map(|index| {
            let trial = if index == 0 {
                None
            } else {
                Some(draw_trial(stat, source, seed, index)?)
            };
            let trial = trial.as_ref().unwrap_or(&first);
            (0..=tau_max)
                .map(|tau| perturbation_gap(stat, trial, tau))
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut gamma = vec![0.0f64; tau_max + 1];
    for gaps in &per_trial {
        for (g, &v) in gamma.iter_mut().zip(gaps) {
            *g = g.max(v);
        }
    }
    for tau in 1..=tau_max {
        gamma[tau] = gamma[tau].max(gamma[tau - 1]);
    }
    StabilityProfile::new(gamma, StabilityProvenance::Empirical)
}

/// Bound on `P(p^{+eps} <= alpha)`:
/// `alpha + min { 2 beta_X(tau) + 2 beta_Y(tau) : 4 gamma(tau) <= eps }`,
/// minimized over the lag grid (default: every lag all three profiles cover).
///
/// An empirical `gamma` is rejected unless `allow_empirical_gamma` is set.
/// When no lag is feasible the trivial bound 1 is returned with `vacuous`.
#[allow(clippy::too_many_arguments)]
pub fn thm3_bound(
    alpha: f64,
    epsilon: f64,
    beta_x: &MixingProfile,
    beta_y: &MixingProfile,
    gamma: &StabilityProfile,
    tau_grid: Option<&[usize]>,
    allow_empirical_gamma: bool,
) -> Result<BoundReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be nonnegative, got {epsilon}"
        )));
    }
    if gamma.provenance() == StabilityProvenance::Empirical && !allow_empirical_gamma {
        return Err(Error::EmpiricalGamma);
    }
    let default_grid: Vec<usize>;
    let grid = match tau_grid {
        Some([]) => {
            return Err(Error::InvalidParameter("lag grid must be nonempty".into()))
        }
        Some(g) => g,
        None => {
            let top = beta_x.max_lag().min(beta_y.max_lag()).min(gamma.max_lag());
            default_grid = (0..=top).collect();
            &default_grid
        }
    };
    let mut best: Option<(f64, usize)> = None;
    for &tau in grid {
        let g = gamma.get(tau).ok_or(Error::StabilityProfileIncomplete(tau))?;
        let bx = beta_x.get(tau).ok_or(Error::MixingProfileIncomplete(tau))?;
        let by = beta_y.get(tau).ok_or(Error::MixingProfileIncomplete(tau))?;
        if 4.0 * g > epsilon {
            continue;
        }
        let term = 2.0 * bx + 2.0 * by;
        if best.is_none_or(|(b, _)| term < b) {
            best = Some((term, tau));
        }
    }
    Ok(match best {
        Some((term, tau)) => {
            let raw = alpha + term;
            BoundReport {
                value: raw.clamp(0.0, 1.0),
                raw,
                tau: Some(tau),
                vacuous: false,
                grid_capped: false,
            }
        }
        None => BoundReport {
            value: 1.0,
            raw: 1.0,
            tau: None,
            vacuous: true,
            grid_capped: false,
        },
    })
}
