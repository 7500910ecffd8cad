//! Monte Carlo calibration runs: generate many independent pairs, compute a
//! p-value for each, and summarize by the empirical CDF.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::event::{event_pvalue, event_pvalue_additive_fast, event_pvalues_bonferroni};
use crate::evidence::EvidenceStatistic;
use crate::ingest::{subsample_pair, SubsampleMode};
use crate::rng::{substream, SimRng};
use crate::series::TimeSeries;
use crate::simgen::{sample_stream, GeneratorParams};
use crate::sync::sync_pvalue_auto;

/// Trial count used unless a run asks for more.
pub const DESK_TRIALS: usize = 1000;
/// Trial count of the full-scale protocol.
pub const FULL_SCALE_TRIALS: usize = 10_000;

/// Where each trial's pair comes from.
#[derive(Debug, Clone)]
pub enum Source {
    /// Independent generator draws for `X` and `Y`.
    Simulated { x: GeneratorParams, y: GeneratorParams },
    /// `X` from the generator and `Y = X + noise_sigma * Z` (a true coincidence).
    Coupled { x: GeneratorParams, noise_sigma: f64 },
    /// Length-`len` windows cut from two long observed streams.
    Ingested {
        a: Arc<TimeSeries>,
        b: Arc<TimeSeries>,
        len: usize,
        mode: SubsampleMode,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// Event test at a single time (`times.len() == 1`) or a Bonferroni family.
    Event { times: Vec<usize>, delta: usize },
    Sync { epsilon: f64 },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: Source,
    pub mode: Mode,
    pub statistic: EvidenceStatistic,
    pub n_trials: usize,
    pub master_seed: u64,
    pub alpha_grid: Vec<f64>,
}

/// `{0.01, 0.02, ..., 1.00}`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=100).map(|k| f64::from(k) / 100.0).collect()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::InvalidParameter("n_trials must be positive".into()));
        }
        validate_grid(&self.alpha_grid)?;
        match &self.mode {
            Mode::Event { times, .. } if times.is_empty() => return Err(Error::EmptyTimeSet),
            Mode::Sync { epsilon } if epsilon.is_nan() || *epsilon < 0.0 => {
                return Err(Error::InvalidParameter(format!(
                    "epsilon must be nonnegative, got {epsilon}"
                )))
            }
            _ => {}
        }
        match &self.source {
            Source::Simulated { x, y } => {
                x.validate()?;
                y.validate()?;
                if x.len != y.len {
                    return Err(Error::LengthMismatch { x: x.len, y: y.len });
                }
            }
            Source::Coupled { x, noise_sigma } => {
                x.validate()?;
                if !(*noise_sigma >= 0.0 && noise_sigma.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "coupling noise must be nonnegative, got {noise_sigma}"
                    )));
                }
            }
            Source::Ingested { a, b, len, .. } => {
                if *len == 0 || *len > a.len() || *len > b.len() {
                    return Err(Error::InvalidParameter(format!(
                        "window length {len} does not fit streams of length {} and {}",
                        a.len(),
                        b.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("alpha grid must be nonempty".into()));
    }
    if grid.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
        return Err(Error::InvalidParameter("alpha grid values must lie in (0, 1]".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("alpha grid must be strictly increasing".into()));
    }
    Ok(())
}

fn draw_pair(source: &Source, rng: &mut SimRng) -> Result<(TimeSeries, TimeSeries)> {
    match source {
        Source::Simulated { x, y } => Ok((sample_stream(x, rng)?, sample_stream(y, rng)?)),
        Source::Coupled { x, noise_sigma } => {
            let xs = sample_stream(x, rng)?;
            let noise = Normal::new(0.0, *noise_sigma)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let ys = xs.iter().map(|v| v + noise.sample(rng)).collect();
            Ok((xs, TimeSeries::new(ys)?))
        }
        Source::Ingested { a, b, len, mode } => {
            let s = subsample_pair(a, b, *len, *mode, rng)?;
            Ok((s.x, s.y))
        }
    }
}

/// P-value of trial `index`, drawn from substream `index` of the master seed.
///
/// A family of event times reports the Bonferroni-adjusted value
/// `min(1, |T| min_t p_t)`, so `F(alpha)` is the family-wise rejection rate.
pub fn run_trial(config: &ExperimentConfig, index: usize) -> Result<f64> {
    let mut rng = substream(config.master_seed, index as u64);
    let (x, y) = draw_pair(&config.source, &mut rng)?;
    let stat = &config.statistic;
    match &config.mode {
        Mode::Event { times, delta } if times.len() == 1 => {
            let report = if *delta == 0 && stat.flags().additive {
                event_pvalue_additive_fast(&x, &y, stat, times[0])?
            } else {
                event_pvalue(&x, &y, stat, *delta, times[0])?
            };
            Ok(report.p)
        }
        Mode::Event { times, delta } => {
            let family = event_pvalues_bonferroni(&x, &y, stat, *delta, times, 0.05)?;
            let min_p = family
                .reports
                .iter()
                .map(|(_, r)| r.p)
                .fold(1.0, f64::min);
            Ok((min_p * times.len() as f64).min(1.0))
        }
        Mode::Sync { epsilon } => Ok(sync_pvalue_auto(&x, &y, stat, *epsilon)?.p),
    }
}

fn tag(index: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Trial {
        trial: index,
        source: Box::new(e),
    }
}

/// All trials in parallel; the output is in trial order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<f64>> {
    config.validate()?;
    (0..config.n_trials)
        .into_par_iter()
        .map(|i| run_trial(config, i).map_err(tag(i)))
        .collect()
}

/// Same as [`run_experiment`] on the calling thread.
pub fn run_experiment_serial(config: &ExperimentConfig) -> Result<Vec<f64>> {
    config.validate()?;
    (0..config.n_trials)
        .map(|i| run_trial(config, i).map_err(tag(i)))
        .collect()
}

/// One row of an empirical CDF table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfPoint {
    pub alpha: f64,
    pub fraction: f64,
}

/// `F(alpha) = #{p_i <= alpha} / N` on each grid point.
pub fn empirical_cdf(pvalues: &[f64], alpha_grid: &[f64]) -> Result<Vec<CdfPoint>> {
    if pvalues.is_empty() {
        return Err(Error::InvalidParameter("no p-values to summarize".into()));
    }
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(alpha_grid
        .iter()
        .map(|&alpha| CdfPoint {
            alpha,
            fraction: sorted.partition_point(|&p| p <= alpha) as f64 / n,
        })
        .collect())
}

/// `F(alpha)` at a single level.
pub fn fraction_at_most(pvalues: &[f64], alpha: f64) -> f64 {
    pvalues.iter().filter(|&&p| p <= alpha).count() as f64 / pvalues.len() as f64
}

/// Upper edge of the Monte Carlo band for a level-`alpha` rejection rate.
pub fn calibration_band(alpha: f64, n_trials: usize) -> f64 {
    alpha + 3.0 * (alpha * (1.0 - alpha) / n_trials as f64).sqrt()
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter("KS test needs two nonempty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    Ok((d, kolmogorov_survival(lambda)))
}

/// `P(K > lambda)` for the Kolmogorov distribution.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = f64::from(k);
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Output locations for [`emit_results`]; `None` skips that artifact.
#[derive(Debug, Clone, Default)]
pub struct OutputPaths {
    pub cdf: Option<PathBuf>,
    pub raw: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

pub fn cdf_csv(cdf: &[CdfPoint], n_trials: usize) -> String {
    let mut out = String::from("alpha,empirical_cdf,n_trials\n");
    for point in cdf {
        let _ = writeln!(out, "{},{},{}", point.alpha, point.fraction, n_trials);
    }
    out
}

pub fn raw_csv(pvalues: &[f64]) -> String {
    let mut out = String::from("trial,p_value\n");
    for (i, p) in pvalues.iter().enumerate() {
        let _ = writeln!(out, "{i},{p}");
    }
    out
}

/// A standalone SVG with the empirical CDF as a step curve and the
/// diagonal `F(alpha) = alpha` for reference.
pub fn cdf_svg(cdf: &[CdfPoint]) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 40.0;
    let px = |a: f64| PAD + a * SIZE;
    let py = |f: f64| PAD + (1.0 - f) * SIZE;
    let mut points = format!("{:.2},{:.2}", px(0.0), py(0.0));
    let mut level = 0.0;
    for point in cdf {
        let _ = write!(points, " {:.2},{:.2}", px(point.alpha), py(level));
        level = point.fraction;
        let _ = write!(points, " {:.2},{:.2}", px(point.alpha), py(level));
    }
    let total = SIZE + 2.0 * PAD;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="white" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r##"<polyline points="{:.2},{:.2} {:.2},{:.2}" fill="none" stroke="#888888" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    let _ = writeln!(
        svg,
        r##"<polyline points="{points}" fill="none" stroke="#1f4e9c" stroke-width="2"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">alpha</text>"#,
        PAD + SIZE / 2.0,
        total - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="12" y="{}" font-size="14" transform="rotate(-90 12 {})">empirical CDF</text>"#,
        PAD + SIZE / 2.0,
        PAD + SIZE / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    File::create(path)
        .and_then(|mut f| f.write_all(body.as_bytes()))
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub fn emit_results(cdf: &[CdfPoint], pvalues: &[f64], paths: &OutputPaths) -> Result<()> {
    if let Some(p) = &paths.cdf {
        write_file(p, &cdf_csv(cdf, pvalues.len()))?;
    }
    if let Some(p) = &paths.raw {
        write_file(p, &raw_csv(pvalues))?;
    }
    if let Some(p) = &paths.svg {
        write_file(p, &cdf_svg(cdf))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sim(rho: f64, len: usize) -> Source {
        let p = GeneratorParams::new(rho, 0.75, 1.0, len).unwrap();
        Source::Simulated { x: p, y: p }
    }

    fn config(source: Source, mode: Mode, statistic: EvidenceStatistic, n: usize) -> ExperimentConfig {
        ExperimentConfig {
            source,
            mode,
            statistic,
            n_trials: n,
            master_seed: 99,
            alpha_grid: default_alpha_grid(),
        }
    }

    #[test]
    fn cdf_examples() {
        let p = [0.1, 0.5, 0.9];
        let cdf = empirical_cdf(&p, &[0.05, 0.5, 1.0]).unwrap();
        assert_eq!(cdf[0].fraction, 0.0);
        assert_eq!(cdf[1].fraction, 2.0 / 3.0);
        assert_eq!(cdf[2].fraction, 1.0);
        assert!(empirical_cdf(&[], &[0.5]).is_err());
        assert_eq!(default_alpha_grid().len(), 100);
        assert_eq!(default_alpha_grid()[4], 0.05);
    }

    #[test]
    fn single_trial_range_and_determinism() {
        let c = config(
            sim(1.0, 100),
            Mode::Event { times: vec![50], delta: 0 },
            EvidenceStatistic::sum(),
            1,
        );
        let p = run_experiment(&c).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p[0] >= 1.0 / 10_000.0 && p[0] <= 1.0);
        let c = ExperimentConfig { n_trials: 40, ..c };
        assert_eq!(run_experiment(&c).unwrap(), run_experiment(&c).unwrap());
        assert_eq!(run_experiment(&c).unwrap(), run_experiment_serial(&c).unwrap());
    }

    #[test]
    fn epsilon_only_raises_sync_pvalues() {
        let stat = EvidenceStatistic::alternating_window(8).unwrap();
        let base = config(sim(0.5, 60), Mode::Sync { epsilon: 0.0 }, stat, 30);
        let inflated = ExperimentConfig {
            mode: Mode::Sync { epsilon: 0.1 },
            ..base.clone()
        };
        let (a, b) = (run_experiment(&base).unwrap(), run_experiment(&inflated).unwrap());
        assert!(a.iter().zip(&b).all(|(p, q)| q >= p));
    }

    #[test]
    fn trial_errors_carry_index() {
        let c = config(
            sim(0.5, 10),
            Mode::Event { times: vec![10], delta: 3 },
            EvidenceStatistic::sum(),
            3,
        );
        match run_experiment(&c) {
            Err(Error::Trial { trial, .. }) => assert_eq!(trial, 0),
            other => panic!("unexpected {other:?}"),
        }
        let bad_grid = ExperimentConfig {
            alpha_grid: vec![0.2, 0.1],
            ..c
        };
        assert!(run_experiment(&bad_grid).is_err());
    }

    #[test]
    fn bonferroni_family_trials() {
        let c = config(
            sim(0.5, 50),
            Mode::Event { times: vec![10, 25, 40], delta: 0 },
            EvidenceStatistic::sum(),
            20,
        );
        let p = run_experiment(&c).unwrap();
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn outputs() {
        let dir = tempfile::tempdir().unwrap();
        let paths = OutputPaths {
            cdf: Some(dir.path().join("cdf.csv")),
            raw: Some(dir.path().join("raw.csv")),
            svg: Some(dir.path().join("cdf.svg")),
        };
        let p = [0.2, 0.4, 0.9];
        let cdf = empirical_cdf(&p, &[0.5, 1.0]).unwrap();
        emit_results(&cdf, &p, &paths).unwrap();
        let read = |p: &Option<PathBuf>| std::fs::read_to_string(p.as_ref().unwrap()).unwrap();
        let cdf_text = read(&paths.cdf);
        assert_eq!(cdf_text, "alpha,empirical_cdf,n_trials\n0.5,0.6666666666666666,3\n1,1,3\n");
        let raw_text = read(&paths.raw);
        assert_eq!(raw_text.lines().count(), 4);
        assert!(raw_text.starts_with("trial,p_value\n0,0.2\n"));
        let svg = read(&paths.svg);
        assert_eq!(svg.matches("<polyline").count(), 2);
        emit_results(&cdf, &p, &paths).unwrap();
        assert_eq!(read(&paths.cdf), cdf_text);
        assert_eq!(read(&paths.raw), raw_text);
        let missing = OutputPaths {
            cdf: Some(dir.path().join("no/such/dir.csv")),
            ..Default::default()
        };
        assert!(emit_results(&cdf, &p, &missing).unwrap_err().to_string().contains("no/such"));
    }

    #[test]
    fn ks_detects_shift_and_accepts_same_law() {
        let mut rng = crate::rng::seeded(5);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let a: Vec<f64> = (0..2000).map(|_| normal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..2000).map(|_| normal.sample(&mut rng)).collect();
        let c: Vec<f64> = b.iter().map(|v| v + 0.3).collect();
        assert!(ks_two_sample(&a, &b).unwrap().1 > 0.01);
        assert!(ks_two_sample(&a, &c).unwrap().1 < 1e-6);
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn cdf_nondecreasing_and_complete(p in proptest::collection::vec(0.0f64..=1.0, 1..50)) {
            let cdf = empirical_cdf(&p, &default_alpha_grid()).unwrap();
            prop_assert!(cdf.windows(2).all(|w| w[0].fraction <= w[1].fraction));
            prop_assert_eq!(cdf.last().unwrap().fraction, 1.0);
        }
    }
}
