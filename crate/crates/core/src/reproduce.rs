//! End-to-end checks against known values: the Ornstein–Uhlenbeck estimator
//! recovery and the load-shedding kurtosis ensemble.

use std::io::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::fpan::fit_params;
use crate::grid::GridModel;
use crate::kmest::{default_bandwidth, default_grid, estimate, KernelSpec, KmOptions};
use crate::series::{ExtremaSeries, FrequencySeries};
use crate::sim::langevin::ou_series;
use crate::sim::{generate_scenario, node_stats, simulate, Scenario, ScenarioOptions, SimConfig};

pub const OU_RATE: f64 = 1.0;
pub const OU_DIFFUSION: f64 = 0.5;
pub const OU_DT: f64 = 1e-3;
pub const OU_SAMPLES: usize = 1_000_000;
pub const OU_SEED: u64 = 42;
/// The fit uses grid points within this many standard deviations of the mean.
pub const CENTRAL_SIGMAS: f64 = 2.0;

#[derive(Debug, Clone, Serialize)]
pub struct OuRecovery {
    pub seed: u64,
    /// Fitted `-dD1/dx`.
    pub slope: f64,
    /// Mass-weighted mean of the corrected `D2`.
    pub diffusion: f64,
    pub slope_rel_err: f64,
    pub diffusion_rel_err: f64,
    pub bandwidth: f64,
    pub points: usize,
}

/// Estimates drift and corrected diffusion of a synthetic OU path and fits
/// them on the central part of the default grid.
pub fn ou_recovery(seed: u64, dt: f64, samples: usize) -> Result<OuRecovery> {
    let s = ou_series(OU_RATE, OU_DIFFUSION, dt, samples, seed);
    let m = s.moments()?;
    let h = default_bandwidth(&s)?;
    let grid = default_grid(
        &s,
        crate::kmest::DEFAULT_GRID_POINTS,
        crate::kmest::DEFAULT_GRID_SIGMAS,
    )?;
    let est = estimate(&s, &grid, &KernelSpec::new(h)?, &KmOptions::default())?.corrected();
    let half = CENTRAL_SIGMAS * m.variance.sqrt();
    let central = est.restricted(m.mean - half, m.mean + half);
    let fit = fit_params(&central)?;
    let diffusion = central
        .mean_diffusion()
        .ok_or(crate::error::Error::EmptyEstimate)?;
    Ok(OuRecovery {
        seed,
        slope: fit.d_over_m,
        diffusion,
        slope_rel_err: (fit.d_over_m - OU_RATE).abs() / OU_RATE,
        diffusion_rel_err: (diffusion - OU_DIFFUSION).abs() / OU_DIFFUSION,
        bandwidth: h,
        points: fit.residuals.points,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SheddingRun {
    pub seed: u64,
    pub events: usize,
    pub realized_fraction: f64,
    pub kurtosis: f64,
    /// Kurtosis after discarding samples beyond 6 standard deviations.
    pub kurtosis_truncated: f64,
    pub baseline_kurtosis: f64,
    pub std_rad_s: f64,
    pub baseline_std_rad_s: f64,
    pub warnings: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SheddingEnsemble {
    pub node: String,
    pub hours: f64,
    pub target_fraction: f64,
    pub noise_b: f64,
    pub runs: Vec<SheddingRun>,
    pub median_kurtosis: f64,
    pub median_baseline_kurtosis: f64,
    pub median_realized_fraction: f64,
}

/// For each seed, simulates `hours` with a generated shedding scenario and
/// the same run without events, and records the kurtosis at `node`.
///
/// `g` must already be balanced. Members run in parallel.
pub fn shedding_ensemble(
    g: &GridModel,
    node: usize,
    seeds: &[u64],
    hours: f64,
    target_fraction: f64,
    base: &SimConfig,
) -> Result<SheddingEnsemble> {
    let horizon = hours * 3600.0;
    let runs: Vec<SheddingRun> = seeds
        .par_iter()
        .map(|&seed| -> Result<SheddingRun> {
            let cfg = SimConfig {
                duration: horizon,
                seed,
                record: Some(vec![node]),
                ..base.clone()
            };
            let sc = generate_scenario(
                g,
                target_fraction,
                &ScenarioOptions::default(),
                horizon,
                seed,
            )?;
            let shed = simulate(g, &cfg, &sc)?;
            let calm = simulate(g, &cfg, &Scenario::empty(horizon))?;
            let k = node_stats(&shed, node, None)?;
            let kt = node_stats(&shed, node, Some(6.0))?;
            let k0 = node_stats(&calm, node, None)?;
            Ok(SheddingRun {
                seed,
                events: sc.events.len(),
                realized_fraction: shed.shed_fraction,
                kurtosis: k.kurtosis,
                kurtosis_truncated: kt.kurtosis,
                baseline_kurtosis: k0.kurtosis,
                std_rad_s: k.variance.sqrt(),
                baseline_std_rad_s: k0.variance.sqrt(),
                warnings: shed.warnings.len(),
            })
        })
        .collect::<Result<_>>()?;
    let med = |f: fn(&SheddingRun) -> f64| median(runs.iter().map(f).collect());
    Ok(SheddingEnsemble {
        node: g.nodes()[node].id.clone(),
        hours,
        target_fraction,
        noise_b: base.noise_b,
        median_kurtosis: med(|r| r.kurtosis),
        median_baseline_kurtosis: med(|r| r.baseline_kurtosis),
        median_realized_fraction: med(|r| r.realized_fraction),
        runs,
    })
}

/// Median, averaging the two middle values for an even count (NaN if empty).
pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Gamma shape of the synthetic recording; its standardized law has
/// skewness `2 / sqrt(k)` and kurtosis `3 + 6 / k`.
pub const SYNTHETIC_SHAPE: f64 = 4.0;
/// Standard deviation of the synthetic frequency deviation (Hz).
pub const SYNTHETIC_STD_HZ: f64 = 0.02;
pub const SYNTHETIC_DT: f64 = 900.0;
/// One year at the synthetic sampling interval.
pub const SYNTHETIC_SAMPLES: usize = 35_040;
pub const SYNTHETIC_SEED: u64 = 2021;
/// 2021-01-01T00:00:00Z.
pub const SYNTHETIC_T0: f64 = 1_609_459_200.0;

pub fn synthetic_skewness() -> f64 {
    2.0 / SYNTHETIC_SHAPE.sqrt()
}

pub fn synthetic_kurtosis() -> f64 {
    3.0 + 6.0 / SYNTHETIC_SHAPE
}

/// Independent standardized-gamma deviations scaled to
/// [`SYNTHETIC_STD_HZ`], with block extrema `f + r U1` and `f - r U2` whose
/// width `r = 0.04 exp(-|f| / 0.03)` shrinks away from nominal.
pub fn synthetic_extrema(seed: u64, samples: usize) -> ExtremaSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(SYNTHETIC_SHAPE, 1.0).expect("valid gamma");
    let sd = SYNTHETIC_SHAPE.sqrt();
    let mut f = Vec::with_capacity(samples);
    let mut lo = Vec::with_capacity(samples);
    let mut hi = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = (gamma.sample(&mut rng) - SYNTHETIC_SHAPE) / sd * SYNTHETIC_STD_HZ;
        let r = 0.04 * (-x.abs() / 0.03).exp();
        let (u1, u2): (f64, f64) = (rng.random(), rng.random());
        f.push(x);
        hi.push(x + r * u1);
        lo.push(x - r * u2);
    }
    let base = FrequencySeries::new(SYNTHETIC_T0, SYNTHETIC_DT, 50.0, f).expect("finite");
    ExtremaSeries::new(base, lo, hi).expect("ordered by construction")
}

/// Writes `time,frequency,f_min,f_max` with RFC 3339 timestamps and absolute
/// frequencies.
pub fn write_extrema_csv<W: std::io::Write>(e: &ExtremaSeries, w: W) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(w);
    writeln!(out, "time,frequency,f_min,f_max")?;
    let nominal = e.base.nominal;
    for i in 0..e.len() {
        let t = e.base.t0 + i as f64 * e.base.dt;
        let stamp = chrono::DateTime::from_timestamp(t.round() as i64, 0)
            .expect("timestamp in range")
            .to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        writeln!(
            out,
            "{stamp},{:.9},{:.9},{:.9}",
            nominal + e.base.values[i],
            nominal + e.fmin[i],
            nominal + e.fmax[i]
        )?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }

    #[test]
    fn small_ou_recovery_is_close() {
        let r = ou_recovery(7, 1e-3, 200_000).unwrap();
        assert!(r.slope_rel_err < 0.2, "{r:?}");
        assert!(r.diffusion_rel_err < 0.05, "{r:?}");
    }
}
