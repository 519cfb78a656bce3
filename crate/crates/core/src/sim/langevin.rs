//! One-dimensional Itô Euler–Maruyama paths, used as synthetic fixtures with
//! known drift and diffusion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::fpan::FPParams;
use crate::series::FrequencySeries;

/// Integrates `dX = drift(X) dt + amplitude(X) dW` and records every
/// `stride`-th state, `samples` in total, after `burn_in` discarded steps.
#[allow(clippy::too_many_arguments)]
pub fn euler_maruyama<R, F, G>(
    drift: F,
    amplitude: G,
    x0: f64,
    dt: f64,
    samples: usize,
    stride: usize,
    burn_in: usize,
    rng: &mut R,
) -> Vec<f64>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    assert!(dt > 0.0 && stride >= 1);
    let sdt = dt.sqrt();
    let mut x = x0;
    let step = |x: &mut f64, rng: &mut R| {
        let z: f64 = rng.sample(StandardNormal);
        *x += drift(*x) * dt + amplitude(*x) * sdt * z;
    };
    for _ in 0..burn_in {
        step(&mut x, rng);
    }
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        for _ in 0..stride {
            step(&mut x, rng);
        }
        out.push(x);
    }
    out
}

/// Ornstein–Uhlenbeck path `dX = -rate X dt + sqrt(2 d2) dW` sampled at `dt`,
/// started from the stationary law. Its Kramers–Moyal coefficients are
/// `D1 = -rate x` and `D2 = d2`.
pub fn ou_series(rate: f64, d2: f64, dt: f64, n: usize, seed: u64) -> FrequencySeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: f64 = rng.sample(StandardNormal);
    let x0 = z * (d2 / rate).sqrt();
    let amp = (2.0 * d2).sqrt();
    let mut values = Vec::with_capacity(n);
    values.push(x0);
    values.extend(euler_maruyama(
        |x| -rate * x,
        |_| amp,
        x0,
        dt,
        n - 1,
        1,
        0,
        &mut rng,
    ));
    FrequencySeries::new(0.0, dt, 0.0, values).expect("finite OU path")
}

/// Samples of `dX = -(d/m) X dt + sqrt(b + c X^2) dW`, whose stationary law is
/// the exact multiplicative density `(b + c x^2)^-(1 + (d/m)/c)`.
pub fn multiplicative_samples(
    p: &FPParams,
    dt: f64,
    samples: usize,
    stride: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = p.d_over_m;
    let burn_in = (20.0 / (a * dt)).ceil() as usize;
    euler_maruyama(
        |x| -a * x,
        |x| (p.b + p.c * x * x).sqrt(),
        0.0,
        dt,
        samples,
        stride,
        burn_in,
        &mut rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_is_deterministic_and_has_stationary_variance() {
        let a = ou_series(1.0, 0.5, 1e-2, 200_000, 3);
        let b = ou_series(1.0, 0.5, 1e-2, 200_000, 3);
        assert_eq!(a, b);
        let m = a.moments().unwrap();
        // Stationary variance d2 / rate = 0.5; T = 2000 s gives ~5% noise.
        assert!((m.variance - 0.5).abs() < 0.1, "{}", m.variance);
    }
}
