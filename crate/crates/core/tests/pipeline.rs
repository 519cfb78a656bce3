use std::path::Path;

use gridfreq::fpan::{self, FPParams};
use gridfreq::grid::{GridModel, ZA_2021_MEAN_DEMAND_MW};
use gridfreq::kmest::{self, KernelSpec, KmOptions};
use gridfreq::reproduce;
use gridfreq::series::{self, SeriesFormat};
use gridfreq::sim::{self, langevin, Scenario, ScenarioOptions, SimConfig};

fn fixture() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_2021_900s.csv")
}

#[test]
fn bundled_recording_matches_its_generator() {
    let e = reproduce::synthetic_extrema(reproduce::SYNTHETIC_SEED, reproduce::SYNTHETIC_SAMPLES);
    let mut buf = Vec::new();
    reproduce::write_extrema_csv(&e, &mut buf).unwrap();
    let on_disk = std::fs::read(fixture()).unwrap();
    assert!(
        buf == on_disk,
        "regenerate with `cargo run -p gridfreq --example make_fixtures`"
    );
}

#[test]
fn recording_loads_as_series_and_extrema() {
    let s = series::load_series(&fixture(), &SeriesFormat::default()).unwrap();
    assert_eq!(s.len(), reproduce::SYNTHETIC_SAMPLES);
    assert_eq!(s.dt, reproduce::SYNTHETIC_DT);
    assert_eq!(s.t0, reproduce::SYNTHETIC_T0);
    let e = series::load_extrema(&fixture(), 50.0).unwrap();
    for i in 0..e.len() {
        assert!(e.fmin[i] <= e.base.values[i] && e.base.values[i] <= e.fmax[i]);
        assert!((e.base.values[i] - s.values[i]).abs() < 1e-12);
    }
    let d = series::density1d(&s.values, series::DEFAULT_BINS_1D).unwrap();
    assert!((d.total() - 1.0).abs() < 1e-12);
}

#[test]
fn csv_round_trip_of_estimate_then_fit() {
    let s = langevin::ou_series(1.0, 0.5, 1e-3, 200_000, 3);
    let h = kmest::default_bandwidth(&s).unwrap();
    let grid = kmest::default_grid(&s, 41, 3.0).unwrap();
    let est = kmest::estimate(
        &s,
        &grid,
        &KernelSpec::new(h).unwrap(),
        &KmOptions::default(),
    )
    .unwrap()
    .corrected();
    let mut buf = Vec::new();
    est.write_csv(&mut buf).unwrap();
    let back = kmest::KMEstimate::read_csv(buf.as_slice(), &est.meta()).unwrap();
    let a = fpan::fit_params(&est).unwrap();
    let b = fpan::fit_params(&back).unwrap();
    assert!((a.d_over_m - b.d_over_m).abs() < 1e-9 * a.d_over_m);
    assert!((a.b - b.b).abs() < 1e-9 * a.b);
    // The fitted parameters give a valid density.
    let p = FPParams::new(a.d_over_m, a.b, a.c).unwrap();
    let k = fpan::stationary(fpan::DensityKind::ExactMultiplicative, &p)
        .unwrap()
        .kurtosis()
        .unwrap();
    assert!((3.0..3.5).contains(&k), "{k}");
}

#[test]
fn scenario_json_round_trip_simulates_identically() {
    let g = GridModel::bundled()
        .balance_power(ZA_2021_MEAN_DEMAND_MW)
        .unwrap();
    let horizon = 4.0 * 3600.0;
    let sc = sim::generate_scenario(&g, 0.25, &ScenarioOptions::default(), horizon, 8).unwrap();
    let back: Scenario = serde_json::from_str(&serde_json::to_string(&sc).unwrap()).unwrap();
    assert_eq!(sc, back);
    let cfg = SimConfig {
        duration: horizon,
        record: Some(vec![0]),
        ..SimConfig::default()
    };
    let a = sim::simulate(&g, &cfg, &sc).unwrap();
    let b = sim::simulate(&g, &cfg, &back).unwrap();
    assert_eq!(a.omega, b.omega);
    assert!((a.shed_fraction - 0.25).abs() < 1e-9);
}
