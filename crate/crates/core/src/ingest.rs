//! CSV series I/O, price transforms and window subsampling.
//!
//! The file format is UTF-8 CSV with a `value` header and one observation
//! per row in time order. An optional leading `index` column is accepted
//! and ignored.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::series::TimeSeries;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn malformed(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn read_series_csv(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .clone();
    let column = match headers.iter().collect::<Vec<_>>().as_slice() {
        [] | [""] => return Err(Error::EmptySeries(path.to_path_buf())),
        ["value"] => 0,
        ["index", "value"] => 1,
        other => {
            return Err(malformed(
                path,
                1,
                format!("expected header `value` or `index,value`, found `{}`", other.join(",")),
            ))
        }
    };
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| {
            let line = source.position().map_or(0, |p| p.line());
            malformed(path, line, source.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(malformed(
                path,
                line,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        let field = &record[column];
        let value: f64 = field
            .parse()
            .map_err(|_| malformed(path, line, format!("not a number: `{field}`")))?;
        if !value.is_finite() {
            return Err(malformed(path, line, format!("non-finite value `{field}`")));
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(Error::EmptySeries(path.to_path_buf()));
    }
    TimeSeries::new(values)
}

/// Writes `index,value` rows with 1-based indices. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_series_csv(path: impl AsRef<Path>, series: &TimeSeries) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(series.len() * 24 + 12);
    out.push_str("index,value\n");
    for (i, v) in series.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, v));
    }
    File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(io_err(path))
}

/// Simple returns `R_t = (P_t - P_{t-1}) / P_{t-1}`, length `T - 1`.
pub fn to_returns(prices: &TimeSeries) -> Result<TimeSeries> {
    if prices.len() < 2 {
        return Err(Error::InvalidParameter(
            "returns need at least two prices".into(),
        ));
    }
    if let Some((i, &p)) = prices.iter().enumerate().find(|(_, p)| **p <= 0.0) {
        return Err(Error::InvalidPrice {
            position: i + 1,
            value: p,
        });
    }
    TimeSeries::new(prices.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect())
}

/// Volatility `V_t = R_t^2`.
pub fn to_volatility(returns: &TimeSeries) -> TimeSeries {
    TimeSeries::new(returns.iter().map(|r| r * r).collect())
        .expect("squares of finite values are finite")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsampleMode {
    /// Independent start offsets for the two streams.
    Null,
    /// One shared start offset.
    Alternative,
}

/// Windows cut from two long streams, with their 0-based start offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsample {
    pub x: TimeSeries,
    pub y: TimeSeries,
    pub t0: usize,
    pub t1: usize,
}

/// Cuts `X = A[t0+1 ..= t0+T]` and `Y = B[t1+1 ..= t1+T]`.
///
/// Offsets are uniform on `0..=len - T`; in alternative mode `t1 = t0` and
/// the shared offset ranges over the shorter stream.
pub fn subsample_pair(
    a: &TimeSeries,
    b: &TimeSeries,
    len: usize,
    mode: SubsampleMode,
    rng: &mut SimRng,
) -> Result<Subsample> {
    if len == 0 {
        return Err(Error::InvalidParameter("window length must be positive".into()));
    }
    for s in [a, b] {
        if len > s.len() {
            return Err(Error::InvalidParameter(format!(
                "window length {len} exceeds stream length {}",
                s.len()
            )));
        }
    }
    let (t0, t1) = match mode {
        SubsampleMode::Null => (
            rng.random_range(0..=a.len() - len),
            rng.random_range(0..=b.len() - len),
        ),
        SubsampleMode::Alternative => {
            let t = rng.random_range(0..=a.len().min(b.len()) - len);
            (t, t)
        }
    };
    Ok(Subsample {
        x: TimeSeries::new(a[t0..t0 + len].to_vec())?,
        y: TimeSeries::new(b[t1..t1 + len].to_vec())?,
        t0,
        t1,
    })
}

/// Synthetic prices `P_1 = p0`, `P_t = P_{t-1} exp(sigma Z_t)`.
pub fn geometric_random_walk(len: usize, p0: f64, sigma: f64, rng: &mut SimRng) -> Result<TimeSeries> {
    if len == 0 || p0.is_nan() || p0 <= 0.0 || sigma.is_nan() || sigma < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "random walk needs len > 0, p0 > 0, sigma >= 0 (got {len}, {p0}, {sigma})"
        )));
    }
    let mut price = p0;
    let mut values = Vec::with_capacity(len);
    values.push(price);
    for _ in 1..len {
        let z: f64 = rng.sample(StandardNormal);
        price *= (sigma * z).exp();
        values.push(price);
    }
    TimeSeries::new(values)
}
