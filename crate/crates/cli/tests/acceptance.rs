//! Acceptance criteria, one line each. Run with
//! `cargo test -p gridfreq-cli --test acceptance`.
//!
//! Criteria listed in `KNOWN_RED` are reported as FAIL but do not fail the
//! run; if one of them starts passing the run fails so the list gets updated.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use gridfreq::fpan::{self, FPParams};
use gridfreq::grid::{GridEdge, GridModel, GridNode, ZA_2021_MEAN_DEMAND_MW};
use gridfreq::kmest::{epanechnikov, KernelSpec};
use gridfreq::quad::Composite;
use gridfreq::reproduce::{self, OU_DIFFUSION, OU_DT, OU_RATE, OU_SAMPLES, OU_SEED};
use gridfreq::series::{self, ExtremaSeries, FrequencySeries};
use gridfreq::sim::langevin::multiplicative_samples;
use gridfreq::sim::{self, generate_scenario, Scenario, ScenarioOptions, SimConfig};

/// Approximate-density kurtosis: the formula as implemented gives 3.330.
const KNOWN_RED: &[u32] = &[1];

// Pinned tolerances.
const APPROX_KURTOSIS: f64 = 3.2140;
const APPROX_TOL: f64 = 0.02;
const EXACT_KURTOSIS: f64 = 3.2326;
const EXACT_TOL: f64 = 1e-3;
const MC_SAMPLES: usize = 10_000_000;
const MC_DT: f64 = 0.01;
const MC_STRIDE: usize = 10;
const MC_SEED: u64 = 11;
const MC_BATCHES: usize = 100;
const MC_SIGMAS: f64 = 3.0;
const OU_REL_TOL: f64 = 0.05;
const SINGLE_B: f64 = 0.5;
const SINGLE_SAMPLES: usize = 1_000_000;
const SINGLE_VAR_REL_TOL: f64 = 0.03;
const SINGLE_KURTOSIS: (f64, f64) = (2.9, 3.1);
const SHED_SEEDS: u64 = 10;
const SHED_HOURS: f64 = 48.0;
const SHED_FRACTION: f64 = 0.13;
const SHED_FRACTION_TOL: f64 = 0.01;
const SHED_MEDIAN_MIN: f64 = 3.2;
const BASELINE_RANGE: (f64, f64) = (2.8, 3.2);
const ARCSIN_TOL: f64 = 1e-10;
const RESIDUAL_REL_TOL: f64 = 1e-9;
const EQUILIBRIUM_TOL: f64 = 1e-6;
const IMBALANCE_TOL: f64 = 1e-9;
const SYNTHETIC_REPLICATES: u64 = 200;
const SYNTHETIC_SIGMAS: f64 = 3.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> gridfreq::Result<Outcome> {
    Ok(Outcome { pass, detail })
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> gridfreq::Result<Outcome>,
}

fn c1_approx_kurtosis() -> gridfreq::Result<Outcome> {
    let k = fpan::approx_multiplicative(&FPParams::south_africa_2021())?.kurtosis()?;
    outcome(
        (k - APPROX_KURTOSIS).abs() <= APPROX_TOL,
        format!("kurtosis {k:.5}, want {APPROX_KURTOSIS} +/- {APPROX_TOL}"),
    )
}

/// Kurtosis of `x` with a batch-means standard error.
fn kurtosis_with_se(x: &[f64], batches: usize) -> gridfreq::Result<(f64, f64)> {
    let k = series::moments(x)?.kurtosis;
    let size = x.len() / batches;
    let ks: Vec<f64> = x
        .chunks_exact(size)
        .map(|c| series::moments(c).map(|m| m.kurtosis))
        .collect::<gridfreq::Result<_>>()?;
    let mean = ks.iter().sum::<f64>() / ks.len() as f64;
    let var = ks.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ks.len() - 1) as f64;
    Ok((k, (var / ks.len() as f64).sqrt()))
}

fn c2_exact_kurtosis() -> gridfreq::Result<Outcome> {
    let p = FPParams::south_africa_2021();
    let quad = fpan::exact_multiplicative(&p)?.kurtosis()?;
    let closed = fpan::exact_kurtosis_closed_form(&p)?;
    let x = multiplicative_samples(&p, MC_DT, MC_SAMPLES, MC_STRIDE, MC_SEED);
    let (mc, se) = kurtosis_with_se(&x, MC_BATCHES)?;
    let pass = (quad - EXACT_KURTOSIS).abs() <= EXACT_TOL
        && (closed - EXACT_KURTOSIS).abs() <= EXACT_TOL
        && (quad - closed).abs() <= EXACT_TOL
        && (mc - closed).abs() <= MC_SIGMAS * se;
    outcome(
        pass,
        format!(
            "quadrature {quad:.5}, closed form {closed:.5}, Monte Carlo {mc:.4} +/- {se:.4} ({} samples)",
            x.len()
        ),
    )
}

fn c3_ou_recovery() -> gridfreq::Result<Outcome> {
    let r = reproduce::ou_recovery(OU_SEED, OU_DT, OU_SAMPLES)?;
    outcome(
        r.slope_rel_err <= OU_REL_TOL && r.diffusion_rel_err <= OU_REL_TOL,
        format!(
            "slope {:.4} (want {OU_RATE}, err {:.2}%), diffusion {:.4} (want {OU_DIFFUSION}, err {:.2}%)",
            r.slope,
            100.0 * r.slope_rel_err,
            r.diffusion,
            100.0 * r.diffusion_rel_err
        ),
    )
}

fn c4_single_node() -> gridfreq::Result<Outcome> {
    let (m, d) = (1.0, 1.0);
    let g = GridModel::new(vec![GridNode::new("solo", m, d)], vec![])?;
    let cfg = SimConfig {
        dt: 0.01,
        output_stride: 10,
        duration: SINGLE_SAMPLES as f64 * 10.0 * 0.01,
        noise_b: SINGLE_B,
        seed: 4,
        omega_bound: 100.0,
        ..SimConfig::default()
    };
    let r = sim::simulate(&g, &cfg, &Scenario::empty(cfg.duration))?;
    let s = sim::node_stats(&r, 0, None)?;
    let want = SINGLE_B / (m * d);
    let rel = (s.variance - want).abs() / want;
    outcome(
        rel <= SINGLE_VAR_REL_TOL
            && s.kurtosis >= SINGLE_KURTOSIS.0
            && s.kurtosis <= SINGLE_KURTOSIS.1,
        format!(
            "variance {:.5} vs {want} ({:.2}%), kurtosis {:.4}, {} samples",
            s.variance,
            100.0 * rel,
            s.kurtosis,
            s.count
        ),
    )
}

fn c5_shedding() -> gridfreq::Result<Outcome> {
    let g = GridModel::bundled().balance_power(ZA_2021_MEAN_DEMAND_MW)?;
    let node = g.find("Bloemfontein").expect("bundled central node");
    let seeds: Vec<u64> = (0..SHED_SEEDS).collect();
    let e = reproduce::shedding_ensemble(
        &g,
        node,
        &seeds,
        SHED_HOURS,
        SHED_FRACTION,
        &SimConfig::default(),
    )?;
    let pass = e.median_kurtosis > SHED_MEDIAN_MIN
        && e.median_baseline_kurtosis >= BASELINE_RANGE.0
        && e.median_baseline_kurtosis <= BASELINE_RANGE.1
        && (e.median_realized_fraction - SHED_FRACTION).abs() <= SHED_FRACTION_TOL;
    outcome(
        pass,
        format!(
            "median kurtosis {:.3} (> {SHED_MEDIAN_MIN}), baseline {:.3}, shed fraction {:.4}",
            e.median_kurtosis, e.median_baseline_kurtosis, e.median_realized_fraction
        ),
    )
}

fn c6_power_flow() -> gridfreq::Result<Outcome> {
    let (p, b) = (300.0, 400.0);
    let mut gen = GridNode::new("g", 1.0, 1.0);
    gen.gen_capacity = p;
    gen.load_weight = 0.0;
    let pair = GridModel::new(
        vec![gen, GridNode::new("l", 1.0, 1.0)],
        vec![GridEdge {
            a: 0,
            b: 1,
            susceptance: b,
        }],
    )?
    .balance_power(p)?;
    let fp = pair.fixed_point()?;
    let arcsin_err = ((fp.theta[0] - fp.theta[1]) - (p / b).asin()).abs();

    let g = GridModel::bundled().balance_power(ZA_2021_MEAN_DEMAND_MW)?;
    let fp = g.fixed_point()?;
    let pmax = g.p_mech().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rel_residual = fp.residual / pmax;

    let cfg = SimConfig {
        duration: 3600.0,
        noise_b: 0.0,
        ..SimConfig::default()
    };
    let r = sim::simulate(&g, &cfg, &Scenario::empty(cfg.duration))?;
    let peak = r.omega.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    outcome(
        arcsin_err <= ARCSIN_TOL && rel_residual <= RESIDUAL_REL_TOL && peak <= EQUILIBRIUM_TOL,
        format!("arcsin error {arcsin_err:.1e}, bundled residual {rel_residual:.1e}, 1 h peak |omega| {peak:.1e}"),
    )
}

fn c7_invariants() -> gridfreq::Result<Outcome> {
    let mut failures = Vec::new();

    let unit = Composite::new(vec![-1.0, 0.0, 1.0], 8).integrate(epanechnikov);
    let h = KernelSpec::new(0.3)?;
    let scaled = Composite::new(vec![-0.3, 0.0, 0.3], 8).integrate(|x| h.weight(x));
    if (unit - 1.0).abs() > 1e-12 || (scaled - 1.0).abs() > 1e-12 {
        failures.push(format!("kernel mass {unit}, {scaled}"));
    }

    let base = FPParams::south_africa_2021();
    for b in [base.b / 10.0, base.b * 10.0] {
        let q = FPParams { b, ..base };
        let da = fpan::approx_multiplicative(&q)?.kurtosis()?
            - fpan::approx_multiplicative(&base)?.kurtosis()?;
        let de = fpan::exact_multiplicative(&q)?.kurtosis()?
            - fpan::exact_multiplicative(&base)?.kurtosis()?;
        if da.abs() > 1e-9 || de.abs() > 1e-9 {
            failures.push(format!("kurtosis changes with b = {b}: {da:.1e}, {de:.1e}"));
        }
    }

    let g = GridModel::bundled().balance_power(ZA_2021_MEAN_DEMAND_MW)?;
    let horizon = 6.0 * 3600.0;
    let sc = generate_scenario(&g, 0.2, &ScenarioOptions::default(), horizon, 3)?;
    let r = sim::simulate(
        &g,
        &SimConfig {
            duration: horizon,
            ..SimConfig::default()
        },
        &sc,
    )?;
    if r.max_imbalance > IMBALANCE_TOL {
        failures.push(format!("imbalance {:.1e}", r.max_imbalance));
    }

    let f = FrequencySeries::new(0.0, 1.0, 50.0, vec![0.0, 0.01, -0.01, 0.02])?;
    let bad = ExtremaSeries::new(
        f,
        vec![-0.01, 0.02, -0.02, 0.0],
        vec![0.01, 0.03, 0.0, 0.03],
    );
    if bad.is_ok() {
        failures.push("extrema with f_min > f accepted".into());
    }

    for seed in 0..5 {
        let sc = generate_scenario(
            &g,
            SHED_FRACTION,
            &ScenarioOptions::default(),
            SHED_HOURS * 3600.0,
            seed,
        )?;
        let got = sc.realized_fraction(SHED_HOURS * 3600.0);
        if (got - SHED_FRACTION).abs() > 1e-9 {
            failures.push(format!("scenario seed {seed} sheds {got}"));
        }
    }

    let pass = failures.is_empty();
    let detail = if pass {
        "kernel mass, b invariance, power balance, extrema ordering, scenario fraction".to_string()
    } else {
        failures.join("; ")
    };
    outcome(pass, detail)
}

fn c8_synthetic_recording() -> gridfreq::Result<Outcome> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/synthetic_2021_900s.csv");
    let e = series::load_extrema(&path, 50.0)?;
    let m = e.base.moments()?;
    let (mut sk, mut ku) = (Vec::new(), Vec::new());
    for seed in 1..=SYNTHETIC_REPLICATES {
        let r = reproduce::synthetic_extrema(reproduce::SYNTHETIC_SEED + seed, e.len());
        let rm = r.base.moments()?;
        sk.push(rm.skewness);
        ku.push(rm.kurtosis);
    }
    let sd = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let (s_sd, k_sd) = (sd(&sk), sd(&ku));
    let (s_want, k_want) = (
        reproduce::synthetic_skewness(),
        reproduce::synthetic_kurtosis(),
    );
    let profile = series::extrema_joint(&e, series::DEFAULT_BINS_2D)?.profile;
    let pass = (m.skewness - s_want).abs() <= SYNTHETIC_SIGMAS * s_sd
        && (m.kurtosis - k_want).abs() <= SYNTHETIC_SIGMAS * k_sd
        && e.len() == reproduce::SYNTHETIC_SAMPLES
        && profile.narrows_away_from_nominal();
    outcome(
        pass,
        format!(
            "skewness {:.3} (want {s_want} +/- {:.3}), kurtosis {:.3} (want {k_want} +/- {:.3}), {} rows",
            m.skewness,
            SYNTHETIC_SIGMAS * s_sd,
            m.kurtosis,
            SYNTHETIC_SIGMAS * k_sd,
            e.len()
        ),
    )
}

fn main() -> ExitCode {
    // cargo passes harness flags such as --nocapture; a bare word filters by
    // criterion number.
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria = [
        Criterion {
            id: 1,
            name: "approximate density kurtosis",
            limit: Some(Duration::from_secs(1)),
            run: c1_approx_kurtosis,
        },
        Criterion {
            id: 2,
            name: "exact density kurtosis",
            limit: Some(Duration::from_secs(120)),
            run: c2_exact_kurtosis,
        },
        Criterion {
            id: 3,
            name: "OU drift and diffusion recovery",
            limit: Some(Duration::from_secs(30)),
            run: c3_ou_recovery,
        },
        Criterion {
            id: 4,
            name: "single-node variance",
            limit: None,
            run: c4_single_node,
        },
        Criterion {
            id: 5,
            name: "load shedding raises kurtosis",
            limit: Some(Duration::from_secs(600)),
            run: c5_shedding,
        },
        Criterion {
            id: 6,
            name: "power flow and equilibrium",
            limit: None,
            run: c6_power_flow,
        },
        Criterion {
            id: 7,
            name: "invariants",
            limit: None,
            run: c7_invariants,
        },
        Criterion {
            id: 8,
            name: "synthetic recording moments",
            limit: None,
            run: c8_synthetic_recording,
        },
    ];
    let mut unexpected = 0;
    for c in criteria
        .iter()
        .filter(|c| filter.is_empty() || filter.contains(&c.id))
    {
        let start = Instant::now();
        let res = (c.run)();
        let elapsed = start.elapsed();
        let (mut pass, mut detail) = match res {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("{}: {e}", e.name())),
        };
        if let Some(limit) = c.limit {
            if elapsed > limit {
                pass = false;
                detail.push_str(&format!("; over time limit {:.0?}", limit));
            }
        }
        let known = KNOWN_RED.contains(&c.id);
        let status = match (pass, known) {
            (true, false) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (known)",
            (true, true) => "PASS (expected FAIL)",
        };
        if pass == known {
            unexpected += 1;
        }
        println!("[{}] {status} {}: {detail} [{:.1?}]", c.id, c.name, elapsed);
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected result(s)");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
