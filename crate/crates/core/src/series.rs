//! Frequency recordings, descriptive statistics and histogram densities.
//!
//! Series are stored as deviations from the nominal frequency (Hz). Absolute
//! values only exist at the ingestion boundary.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on sample spacing before a record is rejected.
pub const UNIFORM_RTOL: f64 = 1e-6;
pub const DEFAULT_BINS_1D: usize = 100;
pub const DEFAULT_BINS_2D: usize = 50;

/// A uniformly sampled record of frequency deviations from nominal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySeries {
    /// Absolute start time, epoch seconds.
    pub t0: f64,
    /// Sampling interval, seconds.
    pub dt: f64,
    /// Nominal frequency, Hz.
    pub nominal: f64,
    /// Deviations from nominal, Hz.
    pub values: Vec<f64>,
}

impl FrequencySeries {
    pub fn new(t0: f64, dt: f64, nominal: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
        }
        if values.is_empty() {
            return Err(Error::InvalidArgument("series is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invariant {
                index: i,
                msg: "non-finite sample".into(),
            });
        }
        Ok(Self {
            t0,
            dt,
            nominal,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Absolute frequency of sample `i`, Hz.
    pub fn absolute(&self, i: usize) -> f64 {
        self.nominal + self.values[i]
    }

    /// Angular frequency deviations, rad/s.
    pub fn angular(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| 2.0 * std::f64::consts::PI * v)
            .collect()
    }

    pub fn moments(&self) -> Result<MomentSummary> {
        moments(&self.values)
    }

    /// Copy with a constant added to each deviation.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + c).collect(),
            ..self.clone()
        }
    }

    /// Copy with each deviation multiplied by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * a).collect(),
            ..self.clone()
        }
    }

    /// Writes `time,frequency` rows with absolute frequencies.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io {
            path: "<csv>".into(),
            source: std::io::Error::other(e),
        };
        wr.write_record(["time", "frequency"]).map_err(io)?;
        for (i, v) in self.values.iter().enumerate() {
            let t = self.t0 + i as f64 * self.dt;
            wr.write_record([format!("{t}"), format!("{}", self.nominal + v)])
                .map_err(io)?;
        }
        wr.flush().map_err(|e| Error::Io {
            path: "<csv>".into(),
            source: e,
        })
    }
}

/// A per-block value alongside the block's minimal and maximal deviation.
///
/// The per-block value is treated as opaque: it may be a block mean or a spot
/// sample, the analyses only require `fmin <= value <= fmax`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremaSeries {
    pub base: FrequencySeries,
    pub fmin: Vec<f64>,
    pub fmax: Vec<f64>,
}

impl ExtremaSeries {
    pub fn new(base: FrequencySeries, fmin: Vec<f64>, fmax: Vec<f64>) -> Result<Self> {
        let n = base.len();
        if fmin.len() != n || fmax.len() != n {
            return Err(Error::InvalidArgument(format!(
                "length mismatch: base {n}, fmin {}, fmax {}",
                fmin.len(),
                fmax.len()
            )));
        }
        for (i, ((&lo, &hi), &f)) in fmin.iter().zip(&fmax).zip(&base.values).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::Invariant {
                    index: i,
                    msg: "non-finite extremum".into(),
                });
            }
            if !(lo <= f && f <= hi) {
                return Err(Error::Invariant {
                    index: i,
                    msg: format!("f = {f} outside [f_min, f_max] = [{lo}, {hi}]"),
                });
            }
        }
        Ok(Self { base, fmin, fmax })
    }

    pub fn len(&self) -> usize {
        self.fmin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fmin.is_empty()
    }
}

/// Population moments of a sample. Kurtosis is the raw fourth standardized
/// moment (a Gaussian gives 3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub count: usize,
}

/// Mean, variance, skewness and kurtosis with population (divide-by-N)
/// estimators.
pub fn moments(values: &[f64]) -> Result<MomentSummary> {
    let n = values.len();
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "moments need at least 4 samples, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    // Relative to the data scale, so that a constant series with rounding
    // noise in the mean is still flagged.
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m2 <= (f64::EPSILON * scale).powi(2) * 16.0 {
        return Err(Error::Degenerate("variance is zero".into()));
    }
    Ok(MomentSummary {
        mean,
        variance: m2,
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
        count: n,
    })
}

/// Equal-width binning over `[lo, lo + width * bins]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub width: f64,
    pub bins: usize,
}

impl Axis {
    /// Bins spanning `[min, max]`. A zero-width range gets a unit-wide axis
    /// with the value at the centre of the middle bin.
    pub fn spanning(min: f64, max: f64, bins: usize) -> Self {
        if max > min {
            Self {
                lo: min,
                width: (max - min) / bins as f64,
                bins,
            }
        } else {
            let width = 1.0 / bins as f64;
            Self {
                lo: min - ((bins / 2) as f64 + 0.5) * width,
                width,
                bins,
            }
        }
    }

    fn of(values: impl Iterator<Item = f64> + Clone, bins: usize) -> Self {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        Self::spanning(lo, hi, bins)
    }

    pub fn index(&self, v: f64) -> usize {
        let k = ((v - self.lo) / self.width).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.bins - 1)
        }
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.width
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins).map(|k| self.center(k)).collect()
    }
}

/// Histogram density normalized so that `sum(mass) * width == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density1D {
    pub axis: Axis,
    pub mass: Vec<f64>,
}

impl Density1D {
    pub fn centers(&self) -> Vec<f64> {
        self.axis.centers()
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum::<f64>() * self.axis.width
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(w);
        let res = (|| {
            writeln!(out, "bin_center,mass")?;
            for (k, m) in self.mass.iter().enumerate() {
                writeln!(out, "{},{}", self.axis.center(k), m)?;
            }
            out.flush()
        })();
        res.map_err(|e| Error::Io {
            path: "<csv>".into(),
            source: e,
        })
    }
}

/// Two-dimensional histogram density, row-major in `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density2D {
    pub x: Axis,
    pub y: Axis,
    pub mass: Vec<f64>,
}

impl Density2D {
    fn from_pairs(x: Axis, pairs: impl Iterator<Item = (f64, f64)> + Clone, ybins: usize) -> Self {
        let y = Axis::of(pairs.clone().map(|p| p.1), ybins);
        let mut counts = vec![0usize; x.bins * y.bins];
        let mut n = 0usize;
        for (a, b) in pairs {
            counts[x.index(a) * y.bins + y.index(b)] += 1;
            n += 1;
        }
        let norm = 1.0 / (n as f64 * x.width * y.width);
        Self {
            x,
            y,
            mass: counts.into_iter().map(|c| c as f64 * norm).collect(),
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.y.bins + j]
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum::<f64>() * self.x.width * self.y.width
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(w);
        let res = (|| {
            writeln!(out, "x,y,mass")?;
            for i in 0..self.x.bins {
                for j in 0..self.y.bins {
                    writeln!(
                        out,
                        "{},{},{}",
                        self.x.center(i),
                        self.y.center(j),
                        self.at(i, j)
                    )?;
                }
            }
            out.flush()
        })();
        res.map_err(|e| Error::Io {
            path: "<csv>".into(),
            source: e,
        })
    }
}

/// Equal-width histogram over `[min, max]` of the sample.
pub fn density1d(values: &[f64], bins: usize) -> Result<Density1D> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "bins must be >= 2, got {bins}"
        )));
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let axis = Axis::of(values.iter().copied(), bins);
    let mut counts = vec![0usize; bins];
    for &v in values {
        counts[axis.index(v)] += 1;
    }
    let norm = 1.0 / (values.len() as f64 * axis.width);
    Ok(Density1D {
        axis,
        mass: counts.into_iter().map(|c| c as f64 * norm).collect(),
    })
}

/// Mean block range `f_max - f_min` conditional on `|f|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeProfile {
    /// Centres of the `|f|` bins, Hz.
    pub abs_f: Vec<f64>,
    pub mean_range: Vec<f64>,
    pub count: Vec<usize>,
    /// Least-squares slope of range against `|f|` over all samples.
    pub slope: f64,
}

impl RangeProfile {
    pub fn narrows_away_from_nominal(&self) -> bool {
        self.slope < 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremaJoint {
    pub f_fmax: Density2D,
    pub f_fmin: Density2D,
    pub f_range: Density2D,
    pub profile: RangeProfile,
}

const PROFILE_BINS: usize = 10;

/// Joint densities of the per-block value with its maximum, minimum and
/// range, on a shared `f` axis.
pub fn extrema_joint(e: &ExtremaSeries, bins: usize) -> Result<ExtremaJoint> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "bins must be >= 2, got {bins}"
        )));
    }
    // Re-validate: the fields are public and may have been edited.
    let e = ExtremaSeries::new(e.base.clone(), e.fmin.clone(), e.fmax.clone())?;
    let f = &e.base.values;
    let x = Axis::of(f.iter().copied(), bins);
    let ranges: Vec<f64> = e.fmax.iter().zip(&e.fmin).map(|(hi, lo)| hi - lo).collect();

    let pairs =
        |ys: &[f64]| -> Vec<(f64, f64)> { f.iter().copied().zip(ys.iter().copied()).collect() };
    let hi = pairs(&e.fmax);
    let lo = pairs(&e.fmin);
    let rg = pairs(&ranges);

    Ok(ExtremaJoint {
        f_fmax: Density2D::from_pairs(x, hi.iter().copied(), bins),
        f_fmin: Density2D::from_pairs(x, lo.iter().copied(), bins),
        f_range: Density2D::from_pairs(x, rg.iter().copied(), bins),
        profile: range_profile(f, &ranges),
    })
}

fn range_profile(f: &[f64], ranges: &[f64]) -> RangeProfile {
    let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    let axis = Axis::of(abs.iter().copied(), PROFILE_BINS);
    let mut sum = [0.0; PROFILE_BINS];
    let mut count = vec![0usize; PROFILE_BINS];
    for (&a, &r) in abs.iter().zip(ranges) {
        let k = axis.index(a);
        sum[k] += r;
        count[k] += 1;
    }
    let mean_range = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
        .collect();

    let n = abs.len() as f64;
    let ma = abs.iter().sum::<f64>() / n;
    let mr = ranges.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&a, &r) in abs.iter().zip(ranges) {
        sxy += (a - ma) * (r - mr);
        sxx += (a - ma) * (a - ma);
    }
    RangeProfile {
        abs_f: axis.centers(),
        mean_range,
        count,
        slope: if sxx > 0.0 { sxy / sxx } else { 0.0 },
    }
}

/// Column layout of a recording file.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFormat {
    pub time_col: usize,
    pub freq_col: usize,
    /// Subtracted from every frequency to obtain deviations.
    pub nominal: f64,
}

impl Default for SeriesFormat {
    fn default() -> Self {
        Self {
            time_col: 0,
            freq_col: 1,
            nominal: 50.0,
        }
    }
}

/// Epoch seconds, or an ISO-8601 / RFC 3339 timestamp (naive times are UTC).
pub fn parse_time(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_micros() as f64 * 1e-6);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp_micros() as f64 * 1e-6);
        }
    }
    None
}

struct Table {
    times: Vec<f64>,
    cols: Vec<Vec<f64>>,
}

/// Parses a CSV with a time column and numeric columns. A first row whose
/// fields do not parse is taken as a header.
fn read_table<R: Read>(r: R, time_col: usize, value_cols: &[usize]) -> Result<Table> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut times = Vec::new();
    let mut cols = vec![Vec::new(); value_cols.len()];
    for (i, rec) in rd.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            msg: e.to_string(),
        })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let field = |c: usize| {
            rec.get(c).ok_or_else(|| Error::Parse {
                row,
                msg: format!("missing column {c}"),
            })
        };
        let t = parse_time(field(time_col)?);
        let vals: Vec<Option<f64>> = value_cols
            .iter()
            .map(|&c| field(c).map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite())))
            .collect::<Result<_>>()?;
        if i == 0 && t.is_none() && vals.iter().all(Option::is_none) {
            continue;
        }
        let t = t.ok_or_else(|| Error::Parse {
            row,
            msg: format!("bad timestamp {:?}", field(time_col).unwrap_or_default()),
        })?;
        times.push(t);
        for (k, v) in vals.into_iter().enumerate() {
            let v = v.ok_or_else(|| Error::Parse {
                row,
                msg: format!("non-numeric value in column {}", value_cols[k]),
            })?;
            cols[k].push(v);
        }
    }
    if times.is_empty() {
        return Err(Error::Parse {
            row: 0,
            msg: "no data rows".into(),
        });
    }
    Ok(Table { times, cols })
}

/// Sampling interval as the lower median of successive differences. Any step
/// off that interval by more than [`UNIFORM_RTOL`] is reported by the index
/// of the later sample.
fn uniform_dt(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two samples to infer dt".into(),
        ));
    }
    let diffs: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let mut sorted = diffs.clone();
    sorted.sort_by(f64::total_cmp);
    let dt = sorted[(sorted.len() - 1) / 2];
    let bad: Vec<usize> = diffs
        .iter()
        .enumerate()
        .filter(|(_, &d)| !(d > 0.0) || (d - dt).abs() > UNIFORM_RTOL * dt.abs())
        .map(|(i, _)| i + 1)
        .collect();
    if !bad.is_empty() || !(dt > 0.0) {
        return Err(Error::Gap { indices: bad });
    }
    Ok(dt)
}

pub fn read_series<R: Read>(r: R, format: &SeriesFormat) -> Result<FrequencySeries> {
    let table = read_table(r, format.time_col, &[format.freq_col])?;
    let dt = uniform_dt(&table.times)?;
    let values = table.cols[0].iter().map(|f| f - format.nominal).collect();
    FrequencySeries::new(table.times[0], dt, format.nominal, values)
}

pub fn load_series(path: &Path, format: &SeriesFormat) -> Result<FrequencySeries> {
    read_series(open(path)?, format)
}

/// Reads `time,frequency,f_min,f_max` rows.
pub fn read_extrema<R: Read>(r: R, nominal: f64) -> Result<ExtremaSeries> {
    let table = read_table(r, 0, &[1, 2, 3])?;
    let dt = uniform_dt(&table.times)?;
    let dev = |k: usize| -> Vec<f64> { table.cols[k].iter().map(|f| f - nominal).collect() };
    let base = FrequencySeries::new(table.times[0], dt, nominal, dev(0))?;
    ExtremaSeries::new(base, dev(1), dev(2))
}

pub fn load_extrema(path: &Path, nominal: f64) -> Result<ExtremaSeries> {
    read_extrema(open(path)?, nominal)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}
