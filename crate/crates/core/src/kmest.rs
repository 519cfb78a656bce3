//! Kramers–Moyal drift and diffusion from a sampled path.
//!
//! The conditional moments of the increments are estimated by
//! Nadaraya–Watson regression with an Epanechnikov kernel:
//!
//! ```text
//! D_m(x) = 1/m! * 1/dt * sum_i K_h(x - x_i) (x_{i+1} - x_i)^m / sum_i K_h(x - x_i)
//! ```
//!
//! Normalising by the kernel mass (rather than by the sample count) is what
//! turns the sum into a conditional moment.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::FrequencySeries;

/// Default reliability threshold, in effective samples per grid point.
pub const DEFAULT_MIN_MASS: f64 = 50.0;
pub const DEFAULT_GRID_POINTS: usize = 101;
/// Half-width of the default evaluation grid, in sample standard deviations.
pub const DEFAULT_GRID_SIGMAS: f64 = 4.0;

/// Epanechnikov kernel `3/4 (1 - u^2)` on `|u| < 1`.
#[inline]
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() < 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Epanechnikov kernel with bandwidth `h`, `K_h(x) = K(x / h) / h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be > 0, got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth })
    }

    #[inline]
    pub fn weight(&self, x: f64) -> f64 {
        epanechnikov(x / self.bandwidth) / self.bandwidth
    }
}

/// Silverman-type rule `1.06 * sigma * N^(-1/5)`.
pub fn default_bandwidth(s: &FrequencySeries) -> Result<f64> {
    let n = s.len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!(
            "bandwidth rule needs at least 10 samples, got {n}"
        )));
    }
    let m = s.moments()?;
    Ok(1.06 * m.variance.sqrt() * (n as f64).powf(-0.2))
}

/// `points` equally spaced values over mean +/- `sigmas` standard deviations.
pub fn default_grid(s: &FrequencySeries, points: usize, sigmas: f64) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::InvalidArgument(
            "grid needs at least 2 points".into(),
        ));
    }
    let m = s.moments()?;
    let half = sigmas * m.variance.sqrt();
    let lo = m.mean - half;
    let step = 2.0 * half / (points - 1) as f64;
    Ok((0..points).map(|k| lo + k as f64 * step).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmOptions {
    /// Grid points whose kernel mass is below this are masked.
    pub min_mass: f64,
}

impl Default for KmOptions {
    fn default() -> Self {
        Self {
            min_mass: DEFAULT_MIN_MASS,
        }
    }
}

/// One Kramers–Moyal coefficient on an evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCoefficient {
    pub order: u32,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Effective samples per grid point: each sample contributes
    /// `K(u) / K(0)`, between 0 and 1.
    pub mass: Vec<f64>,
    pub masked: Vec<bool>,
    pub dt: f64,
    pub bandwidth: f64,
    pub min_mass: f64,
}

/// Drift and diffusion on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMEstimate {
    pub grid: Vec<f64>,
    /// Drift, units of the series per second.
    pub d1: Vec<f64>,
    /// Diffusion, squared units of the series per second.
    pub d2: Vec<f64>,
    pub mass: Vec<f64>,
    pub masked: Vec<bool>,
    /// Points where a negative corrected diffusion was clamped to zero.
    pub clamped: Vec<bool>,
    pub dt: f64,
    pub bandwidth: f64,
    pub min_mass: f64,
    pub corrected: bool,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("evaluation grid is empty".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "evaluation grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Conditional-moment sums for every grid point, sharing one sorted pass over
/// the samples.
struct Sums {
    mass: Vec<f64>,
    moment: [Vec<f64>; 2],
}

fn kernel_sums(s: &FrequencySeries, grid: &[f64], kernel: &KernelSpec) -> Sums {
    let mut pairs: Vec<(f64, f64)> = s.values.windows(2).map(|w| (w[0], w[1] - w[0])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let h = kernel.bandwidth;
    let k0 = epanechnikov(0.0);

    let mut mass = vec![0.0; grid.len()];
    let mut m1 = vec![0.0; grid.len()];
    let mut m2 = vec![0.0; grid.len()];
    for (g, &x) in grid.iter().enumerate() {
        let start = pairs.partition_point(|p| p.0 <= x - h);
        let (mut w_sum, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &(xi, dx) in pairs[start..].iter().take_while(|p| p.0 < x + h) {
            let w = epanechnikov((x - xi) / h);
            w_sum += w;
            s1 += w * dx;
            s2 += w * dx * dx;
        }
        mass[g] = w_sum / k0;
        m1[g] = s1;
        m2[g] = s2;
        // Normalise in place; the kernel's 1/h cancels in the ratio.
        if w_sum > 0.0 {
            m1[g] /= w_sum;
            m2[g] /= w_sum;
        } else {
            m1[g] = f64::NAN;
            m2[g] = f64::NAN;
        }
    }
    Sums {
        mass,
        moment: [m1, m2],
    }
}

/// Estimates the Kramers–Moyal coefficient of the given order (1 or 2).
pub fn estimate_km(
    s: &FrequencySeries,
    order: u32,
    grid: &[f64],
    kernel: &KernelSpec,
    opts: &KmOptions,
) -> Result<KmCoefficient> {
    if !(order == 1 || order == 2) {
        return Err(Error::InvalidArgument(format!(
            "order must be 1 or 2, got {order}"
        )));
    }
    let [d1, d2] = coefficients(s, grid, kernel, opts)?;
    Ok(if order == 1 { d1 } else { d2 })
}

fn coefficients(
    s: &FrequencySeries,
    grid: &[f64],
    kernel: &KernelSpec,
    opts: &KmOptions,
) -> Result<[KmCoefficient; 2]> {
    if s.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    check_grid(grid)?;
    let Sums {
        mass,
        moment: [m1, m2],
    } = kernel_sums(s, grid, kernel);
    let masked: Vec<bool> = mass.iter().map(|&m| !(m >= opts.min_mass)).collect();
    if masked.iter().all(|&m| m) {
        return Err(Error::EmptyEstimate);
    }
    let make = |order: u32, raw: Vec<f64>| {
        let factor = if order == 1 { 1.0 } else { 0.5 } / s.dt;
        KmCoefficient {
            order,
            grid: grid.to_vec(),
            values: raw.into_iter().map(|m| m * factor).collect(),
            mass: mass.clone(),
            masked: masked.clone(),
            dt: s.dt,
            bandwidth: kernel.bandwidth,
            min_mass: opts.min_mass,
        }
    };
    Ok([make(1, m1), make(2, m2)])
}

/// Drift and raw (uncorrected) diffusion on the same grid.
pub fn estimate(
    s: &FrequencySeries,
    grid: &[f64],
    kernel: &KernelSpec,
    opts: &KmOptions,
) -> Result<KMEstimate> {
    let [d1, d2] = coefficients(s, grid, kernel, opts)?;
    Ok(combine(d1, d2))
}

fn combine(d1: KmCoefficient, d2: KmCoefficient) -> KMEstimate {
    let n = d1.grid.len();
    KMEstimate {
        grid: d1.grid,
        d1: d1.values,
        d2: d2.values,
        mass: d1.mass,
        masked: d1.masked,
        clamped: vec![false; n],
        dt: d1.dt,
        bandwidth: d1.bandwidth,
        min_mass: d1.min_mass,
        corrected: false,
    }
}

/// Removes the leading finite-sampling bias of the second conditional moment:
/// `D2 <- max(D2 - dt/2 * D1^2, 0)`.
pub fn finite_time_correction(
    drift: &KmCoefficient,
    diffusion: &KmCoefficient,
) -> Result<KMEstimate> {
    if drift.order != 1 || diffusion.order != 2 {
        return Err(Error::InvalidArgument(format!(
            "expected orders (1, 2), got ({}, {})",
            drift.order, diffusion.order
        )));
    }
    if drift.grid != diffusion.grid {
        return Err(Error::GridMismatch(format!(
            "{} vs {} points",
            drift.grid.len(),
            diffusion.grid.len()
        )));
    }
    if drift.dt != diffusion.dt {
        return Err(Error::GridMismatch(format!(
            "sampling interval {} vs {}",
            drift.dt, diffusion.dt
        )));
    }
    let mut est = combine(drift.clone(), diffusion.clone());
    est.masked = drift
        .masked
        .iter()
        .zip(&diffusion.masked)
        .map(|(a, b)| *a || *b)
        .collect();
    est.correct_in_place();
    Ok(est)
}

impl KMEstimate {
    /// Applies the finite-time correction. A no-op if already corrected.
    pub fn corrected(mut self) -> Self {
        self.correct_in_place();
        self
    }

    fn correct_in_place(&mut self) {
        if self.corrected {
            return;
        }
        let half_dt = 0.5 * self.dt;
        for i in 0..self.grid.len() {
            let v = self.d2[i] - half_dt * self.d1[i] * self.d1[i];
            if v < 0.0 {
                self.d2[i] = 0.0;
                self.clamped[i] = true;
            } else {
                self.d2[i] = v;
            }
        }
        self.corrected = true;
    }

    /// The grid points in `[lo, hi]`.
    pub fn restricted(&self, lo: f64, hi: f64) -> Self {
        let keep: Vec<usize> = (0..self.grid.len())
            .filter(|&i| self.grid[i] >= lo && self.grid[i] <= hi)
            .collect();
        let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let pick_b = |v: &[bool]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            grid: pick(&self.grid),
            d1: pick(&self.d1),
            d2: pick(&self.d2),
            mass: pick(&self.mass),
            masked: pick_b(&self.masked),
            clamped: pick_b(&self.clamped),
            ..self.clone()
        }
    }

    /// Kernel-mass weighted mean of `D2` over the reliable points.
    pub fn mean_diffusion(&self) -> Option<f64> {
        let (mut s, mut w) = (0.0, 0.0);
        for i in self.reliable() {
            s += self.mass[i] * self.d2[i];
            w += self.mass[i];
        }
        (w > 0.0).then(|| s / w)
    }

    /// Indices of grid points with usable values.
    pub fn reliable(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.len())
            .filter(|&i| !self.masked[i] && self.d1[i].is_finite() && self.d2[i].is_finite())
    }

    /// Writes `x,d1,d2,mass,masked` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(w);
        let res = (|| {
            writeln!(out, "x,d1,d2,mass,masked")?;
            for i in 0..self.grid.len() {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    self.grid[i], self.d1[i], self.d2[i], self.mass[i], self.masked[i] as u8
                )?;
            }
            out.flush()
        })();
        res.map_err(|e| Error::Io {
            path: "<csv>".into(),
            source: e,
        })
    }

    /// Reads the CSV written by [`KMEstimate::write_csv`]. Metadata that the
    /// CSV does not carry (dt, bandwidth, correction flag) comes from `meta`.
    pub fn read_csv<R: Read>(r: R, meta: &KmMeta) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let (mut grid, mut d1, mut d2, mut mass, mut masked) =
            (vec![], vec![], vec![], vec![], vec![]);
        for (i, rec) in rd.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                row,
                msg: e.to_string(),
            })?;
            let num = |c: usize| -> Result<f64> {
                rec.get(c)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse {
                        row,
                        msg: format!("column {c} is not numeric"),
                    })
            };
            grid.push(num(0)?);
            d1.push(num(1)?);
            d2.push(num(2)?);
            mass.push(num(3)?);
            masked.push(match rec.get(4) {
                Some("1") | Some("true") => true,
                Some("0") | Some("false") => false,
                other => {
                    return Err(Error::Parse {
                        row,
                        msg: format!("bad mask flag {other:?}"),
                    })
                }
            });
        }
        check_grid(&grid)?;
        let n = grid.len();
        Ok(Self {
            grid,
            d1,
            d2,
            mass,
            masked,
            clamped: vec![false; n],
            dt: meta.dt,
            bandwidth: meta.bandwidth,
            min_mass: meta.min_mass,
            corrected: meta.corrected,
        })
    }

    pub fn meta(&self) -> KmMeta {
        KmMeta {
            bandwidth: self.bandwidth,
            dt: self.dt,
            min_mass: self.min_mass,
            corrected: self.corrected,
            points: self.grid.len(),
            masked_points: self.masked.iter().filter(|m| **m).count(),
        }
    }
}

/// JSON sidecar of an estimate CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmMeta {
    pub bandwidth: f64,
    pub dt: f64,
    pub min_mass: f64,
    pub corrected: bool,
    #[serde(default)]
    pub points: usize,
    #[serde(default)]
    pub masked_points: usize,
}
