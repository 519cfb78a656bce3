//! Stationary Fokker–Planck densities for linear drift `D1 = -(d/m) w` and
//! diffusion `D2 = b + c w^2`.
//!
//! Three densities are available:
//!
//! * `Gaussian`: `exp(-(d/m) w^2 / (2 b))`, the additive-noise law (`c = 0`),
//!   variance `b / (d/m)`.
//! * `ApproxMultiplicative`: the small-`c` closed form
//!   `exp(-(d/m) w^2/(2b)) exp(-c w^2/(4b)) cosh(sqrt((d/m) c / 2) w^2 / b)`.
//! * `ExactMultiplicative`: `(b + c w^2)^-(1 + (d/m)/c)`, the zero-flux
//!   solution of `d_t eta = d_w((d/m) w eta) + 1/2 d_w^2 (D2 eta)`. This is a
//!   scaled Student-t with `nu = 1 + 2 (d/m) / c` degrees of freedom.
//!
//! All densities are normalised numerically on `[-L, L]`, where `L` is the
//! smallest half-width whose analytic tail bound leaves less than `1e-12` of
//! the mass and of the second and fourth moments outside the support.
//! Moments are computed by composite Gauss–Legendre quadrature and checked by
//! halving every panel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmest::KMEstimate;
use crate::quad::Composite;

/// Relative tail mass left outside the support.
pub const TAIL_TOLERANCE: f64 = 1e-12;
/// Gauss–Legendre points per panel.
const PANEL_POINTS: usize = 20;
/// Uniform panels on each side of the origin within the core region.
const CORE_PANELS: usize = 64;
/// Half-width of the core region in units of the core standard deviation.
const CORE_SIGMAS: f64 = 8.0;
const TAIL_RATIO: f64 = 1.25;
/// Highest moment order the support is sized for.
const SUPPORT_ORDER: u32 = 4;

/// Reduced Fokker–Planck parameters.
///
/// `d_over_m` is the linear restoring rate, `b` the additive diffusion level
/// and `c` the multiplicative coefficient of `D2(w) = b + c w^2`. Inertia and
/// damping only ever enter as their ratio here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FPParams {
    pub d_over_m: f64,
    pub b: f64,
    pub c: f64,
}

impl FPParams {
    pub fn new(d_over_m: f64, b: f64, c: f64) -> Result<Self> {
        let p = Self { d_over_m, b, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_over_m > 0.0 && self.d_over_m.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "d_over_m must be > 0, got {}",
                self.d_over_m
            )));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "b must be > 0, got {}",
                self.b
            )));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "c must be >= 0, got {}",
                self.c
            )));
        }
        Ok(())
    }

    /// Shape parameter `c / (d/m)`.
    pub fn epsilon(&self) -> f64 {
        self.c / self.d_over_m
    }

    /// Student-t degrees of freedom of the exact density; infinite for `c = 0`.
    pub fn nu(&self) -> f64 {
        if self.c == 0.0 {
            f64::INFINITY
        } else {
            1.0 + 2.0 * self.d_over_m / self.c
        }
    }

    /// Operating point fitted to the South African 2021 recording.
    pub fn south_africa_2021() -> Self {
        Self {
            d_over_m: 0.6723,
            b: 0.0023,
            c: 0.0467,
        }
    }
}

/// Closed-form kurtosis `3 (nu - 2) / (nu - 4)` of the exact density.
pub fn exact_kurtosis_closed_form(p: &FPParams) -> Result<f64> {
    let nu = p.nu();
    if nu.is_infinite() {
        return Ok(3.0);
    }
    if nu <= 4.0 {
        return Err(Error::MomentDivergence { order: 4, nu });
    }
    Ok(3.0 * (nu - 2.0) / (nu - 4.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResiduals {
    /// Mass-weighted RMS residual of the drift fit.
    pub drift_rms: f64,
    /// Mass-weighted RMS residual of the diffusion fit.
    pub diffusion_rms: f64,
    pub points: usize,
    /// Whether `c` came out negative and was clamped to zero.
    pub c_clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub d_over_m: f64,
    pub b: f64,
    pub c: f64,
    pub residuals: FitResiduals,
}

impl FitResult {
    pub fn params(&self) -> FPParams {
        FPParams {
            d_over_m: self.d_over_m,
            b: self.b,
            c: self.c,
        }
    }
}

/// Minimum number of reliable grid points for a fit.
pub const MIN_FIT_POINTS: usize = 5;

/// Fits `D1 = -(d/m) x` through the origin and `D2 = b + c x^2`, both by least
/// squares weighted with the kernel mass. Masked points are ignored.
pub fn fit_params(est: &KMEstimate) -> Result<FitResult> {
    let pts: Vec<(f64, f64, f64, f64)> = est
        .reliable()
        .map(|i| (est.grid[i], est.d1[i], est.d2[i], est.mass[i]))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::DegenerateFit(format!(
            "{} reliable points, need {MIN_FIT_POINTS}",
            pts.len()
        )));
    }

    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, d1, _, w) in &pts {
        sxy += w * x * d1;
        sxx += w * x * x;
    }
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit(
            "all reliable points at the origin".into(),
        ));
    }
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return Err(Error::UnstableFit { slope });
    }

    // Normal equations for d2 ~ b + c u with u = x^2.
    let (mut sw, mut su, mut suu, mut sy, mut suy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, _, d2, w) in &pts {
        let u = x * x;
        sw += w;
        su += w * u;
        suu += w * u * u;
        sy += w * d2;
        suy += w * u * d2;
    }
    let det = sw * suu - su * su;
    let (mut b, mut c) = if det.abs() > 1e-300 && det > 1e-14 * sw * suu {
        ((suu * sy - su * suy) / det, (sw * suy - su * sy) / det)
    } else {
        (sy / sw, 0.0)
    };
    let mut c_clamped = false;
    if c < 0.0 {
        c = 0.0;
        b = sy / sw;
        c_clamped = true;
    }
    if !(b > 0.0) {
        return Err(Error::DegenerateFit(format!(
            "fitted b = {b} is not positive"
        )));
    }

    let (mut r1, mut r2) = (0.0, 0.0);
    for &(x, d1, d2, w) in &pts {
        r1 += w * (d1 - slope * x).powi(2);
        r2 += w * (d2 - b - c * x * x).powi(2);
    }
    Ok(FitResult {
        d_over_m: -slope,
        b,
        c,
        residuals: FitResiduals {
            drift_rms: (r1 / sw).sqrt(),
            diffusion_rms: (r2 / sw).sqrt(),
            points: pts.len(),
            c_clamped,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    Gaussian,
    ApproxMultiplicative,
    ExactMultiplicative,
}

impl std::str::FromStr for DensityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "approx" | "approx_multiplicative" => Ok(Self::ApproxMultiplicative),
            "exact" | "exact_multiplicative" => Ok(Self::ExactMultiplicative),
            other => Err(Error::InvalidArgument(format!(
                "unknown density kind {other:?}"
            ))),
        }
    }
}

/// A normalised, symmetric stationary density on `[-support, support]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDensity {
    pub kind: DensityKind,
    pub params: FPParams,
    /// Integral of the unnormalised density over the support.
    pub normalization: f64,
    /// Truncation half-width `L`.
    pub support: f64,
}

/// A moment together with its node-doubling check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentValue {
    pub order: u32,
    pub value: f64,
    /// `|I(2N) - I(N)| / |I(2N)|`, zero for odd orders.
    pub doubling_change: f64,
    pub nodes: usize,
    pub support: f64,
}

/// Curvature `alpha0` with `f(w) >= exp(-alpha0 w^2)` near the origin, and the
/// tail law that bounds `f` from above.
#[derive(Debug, Clone, Copy)]
enum Shape {
    /// `f(w) <= exp(-alpha w^2)`.
    GaussianTail { core: f64, alpha: f64 },
    /// `f(w) = (1 + s w^2)^-p <= (s w^2)^-p`.
    PowerTail { core: f64, s: f64, p: f64 },
}

impl Shape {
    fn core(&self) -> f64 {
        match *self {
            Shape::GaussianTail { core, .. } | Shape::PowerTail { core, .. } => core,
        }
    }

    /// Log of a lower bound on `int_{-inf}^{inf} |w|^n f(w) dw`.
    fn ln_reference(&self, n: u32) -> f64 {
        let a = (n as f64 + 1.0) / 2.0;
        gamma(a).ln() - a * self.core().ln()
    }

    /// Log of an upper bound on `int_{|w| > L} |w|^n f(w) dw`.
    fn ln_tail(&self, n: u32, l: f64) -> Option<f64> {
        let nf = n as f64;
        match *self {
            Shape::GaussianTail { alpha, .. } => {
                let denom = 1.0 - (nf - 1.0).max(0.0) / (2.0 * alpha * l * l);
                if denom <= 0.0 {
                    return None;
                }
                Some((nf - 1.0) * l.ln() - alpha * l * l - (alpha * denom).ln())
            }
            Shape::PowerTail { s, p, .. } => {
                let e = 2.0 * p - nf - 1.0;
                if e <= 0.0 || s * l * l <= 1.0 {
                    return None;
                }
                Some(std::f64::consts::LN_2 - p * s.ln() - e * l.ln() - e.ln())
            }
        }
    }

    /// Whether moments of order `n` are finite.
    fn has_moment(&self, n: u32) -> bool {
        match *self {
            Shape::GaussianTail { .. } => true,
            Shape::PowerTail { p, .. } => 2.0 * p > n as f64 + 1.0,
        }
    }

    /// Smallest `L` (on a geometric ladder) meeting the tail tolerance for
    /// every order in `orders`.
    fn support(&self, orders: &[u32]) -> Option<f64> {
        let sigma = (0.5 / self.core()).sqrt();
        let mut l = sigma;
        for _ in 0..2000 {
            let ok = orders.iter().all(|&n| {
                matches!(self.ln_tail(n, l), Some(t) if t < TAIL_TOLERANCE.ln() + self.ln_reference(n))
            });
            if ok {
                return Some(l);
            }
            l *= 1.05;
        }
        None
    }
}

impl StationaryDensity {
    fn build(kind: DensityKind, params: FPParams) -> Result<Self> {
        let shape = shape_of(kind, &params);
        let support = shape.support(&[0]).ok_or_else(|| {
            Error::DivergentDensity("no finite support meets the tail tolerance".into())
        })?;
        let mut d = Self {
            kind,
            params,
            normalization: 1.0,
            support,
        };
        let orders: Vec<u32> = [0, 2, SUPPORT_ORDER]
            .into_iter()
            .filter(|&n| shape.has_moment(n))
            .collect();
        d.support = shape.support(&orders).unwrap_or(support);
        d.normalization = d.rule(d.support).integrate(|w| d.unnormalized(w)) * 2.0;
        Ok(d)
    }

    fn shape(&self) -> Shape {
        shape_of(self.kind, &self.params)
    }

    /// Unnormalised density, equal to 1 at the origin.
    pub fn unnormalized(&self, w: f64) -> f64 {
        self.log_unnormalized(w).exp()
    }

    pub fn log_unnormalized(&self, w: f64) -> f64 {
        let FPParams { d_over_m: a, b, c } = self.params;
        let w2 = w * w;
        match self.kind {
            DensityKind::Gaussian => -a * w2 / (2.0 * b),
            DensityKind::ApproxMultiplicative => {
                let k = (a * c / 2.0).sqrt() / b;
                -(a / 2.0 + c / 4.0) * w2 / b + log_cosh(k * w2)
            }
            DensityKind::ExactMultiplicative => -(1.0 + a / c) * (c * w2 / b).ln_1p(),
        }
    }

    pub fn pdf(&self, w: f64) -> f64 {
        if w.abs() > self.support {
            return 0.0;
        }
        self.unnormalized(w) / self.normalization
    }

    /// Half-line panels on `[0, l]`: uniform in the core, geometric beyond.
    fn rule(&self, l: f64) -> Composite {
        let sigma = (0.5 / self.shape().core()).sqrt();
        let core = (CORE_SIGMAS * sigma).min(l);
        let mut edges: Vec<f64> = (0..=CORE_PANELS)
            .map(|k| core * k as f64 / CORE_PANELS as f64)
            .collect();
        let mut x = core;
        while x < l {
            x = (x * TAIL_RATIO).min(l);
            edges.push(x);
        }
        Composite::new(edges, PANEL_POINTS)
    }

    /// Stationary moment `E[w^n]` by quadrature.
    pub fn moment(&self, n: u32) -> Result<MomentValue> {
        if n == 0 {
            return Err(Error::InvalidArgument("moment order must be >= 1".into()));
        }
        if self.kind == DensityKind::ExactMultiplicative {
            let nu = self.params.nu();
            if !((n as f64) < nu - 1.0) {
                return Err(Error::MomentDivergence { order: n, nu });
            }
        }
        let shape = self.shape();
        let l = if n <= SUPPORT_ORDER {
            self.support
        } else {
            shape
                .support(&[n])
                .ok_or(Error::MomentDivergence {
                    order: n,
                    nu: self.params.nu(),
                })?
                .max(self.support)
        };
        let rule = self.rule(l);
        let nodes = 2 * rule.node_count();
        if n % 2 == 1 {
            // f(-w) = f(w) exactly, so odd moments cancel pairwise.
            return Ok(MomentValue {
                order: n,
                value: 0.0,
                doubling_change: 0.0,
                nodes,
                support: l,
            });
        }
        let integrand = |w: f64| w.powi(n as i32) * self.unnormalized(w);
        let coarse = 2.0 * rule.integrate(integrand) / self.normalization;
        let fine_rule = rule.refined();
        let fine_norm = 2.0 * fine_rule.integrate(|w| self.unnormalized(w));
        let fine = 2.0 * fine_rule.integrate(integrand) / fine_norm;
        Ok(MomentValue {
            order: n,
            value: fine,
            doubling_change: ((fine - coarse) / fine).abs(),
            nodes,
            support: l,
        })
    }

    /// `mu_4 / mu_2^2` (the mean is zero by symmetry).
    pub fn kurtosis(&self) -> Result<f64> {
        let m2 = self.moment(2)?.value;
        let m4 = self.moment(4)?.value;
        Ok(m4 / (m2 * m2))
    }

    pub fn variance(&self) -> Result<f64> {
        Ok(self.moment(2)?.value)
    }

    pub fn report(&self) -> Result<KurtosisReport> {
        Ok(KurtosisReport {
            kind: self.kind,
            kurtosis: self.kurtosis()?,
            nu: self.params.nu(),
            normalization: self.normalization,
            l: self.support,
            variance: self.variance()?,
        })
    }
}

/// Output of the kurtosis command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KurtosisReport {
    pub kind: DensityKind,
    pub kurtosis: f64,
    pub nu: f64,
    pub normalization: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub variance: f64,
}

fn shape_of(kind: DensityKind, p: &FPParams) -> Shape {
    let FPParams { d_over_m: a, b, c } = *p;
    match kind {
        DensityKind::Gaussian => Shape::GaussianTail {
            core: a / (2.0 * b),
            alpha: a / (2.0 * b),
        },
        DensityKind::ApproxMultiplicative => {
            // cosh >= 1 below, cosh(y) <= e^y above.
            let core = (a / 2.0 + c / 4.0) / b;
            let k = (a * c / 2.0).sqrt() / b;
            Shape::GaussianTail {
                core,
                alpha: core - k,
            }
        }
        DensityKind::ExactMultiplicative => {
            // (1 + y)^-p >= exp(-p y) below.
            let pexp = 1.0 + a / c;
            Shape::PowerTail {
                core: pexp * c / b,
                s: c / b,
                p: pexp,
            }
        }
    }
}

/// `ln cosh(x)` without overflow.
fn log_cosh(x: f64) -> f64 {
    let x = x.abs();
    x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2
}

/// Gamma function for the half-integer and integer arguments used by the
/// tail bounds (Lanczos, g = 7).
fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Additive-noise Gaussian law; requires `c = 0`.
pub fn gaussian_stationary(p: &FPParams) -> Result<StationaryDensity> {
    p.validate()?;
    if p.c != 0.0 {
        return Err(Error::WrongKind(format!(
            "gaussian density needs c = 0, got c = {}",
            p.c
        )));
    }
    StationaryDensity::build(DensityKind::Gaussian, *p)
}

/// Small-`c` cosh closed form. Normalisable iff
/// `d/m / 2 + c / 4 > sqrt(c d/m / 2)`.
pub fn approx_multiplicative(p: &FPParams) -> Result<StationaryDensity> {
    p.validate()?;
    if p.c == 0.0 {
        return Err(Error::WrongKind(
            "multiplicative density needs c > 0".into(),
        ));
    }
    let a = p.d_over_m;
    if !(a / 2.0 + p.c / 4.0 > (p.c * a / 2.0).sqrt()) {
        return Err(Error::DivergentDensity(format!(
            "d_over_m / 2 + c / 4 <= sqrt(c d_over_m / 2) at d_over_m = {a}, c = {}",
            p.c
        )));
    }
    StationaryDensity::build(DensityKind::ApproxMultiplicative, *p)
}

/// Exact stationary law `(b + c w^2)^-(1 + (d/m)/c)`.
pub fn exact_multiplicative(p: &FPParams) -> Result<StationaryDensity> {
    p.validate()?;
    if p.c == 0.0 {
        return Err(Error::WrongKind(
            "multiplicative density needs c > 0".into(),
        ));
    }
    StationaryDensity::build(DensityKind::ExactMultiplicative, *p)
}

pub fn stationary(kind: DensityKind, p: &FPParams) -> Result<StationaryDensity> {
    match kind {
        DensityKind::Gaussian => gaussian_stationary(p),
        DensityKind::ApproxMultiplicative => approx_multiplicative(p),
        DensityKind::ExactMultiplicative => exact_multiplicative(p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ZA: FPParams = FPParams {
        d_over_m: 0.6723,
        b: 0.0023,
        c: 0.0467,
    };

    fn est_from(grid: &[f64], d1: impl Fn(f64) -> f64, d2: impl Fn(f64) -> f64) -> KMEstimate {
        let n = grid.len();
        KMEstimate {
            grid: grid.to_vec(),
            d1: grid.iter().map(|&x| d1(x)).collect(),
            d2: grid.iter().map(|&x| d2(x)).collect(),
            mass: grid.iter().map(|x| 1000.0 * (-x * x).exp()).collect(),
            masked: vec![false; n],
            clamped: vec![false; n],
            dt: 1.0,
            bandwidth: 0.1,
            min_mass: 50.0,
            corrected: true,
        }
    }

    fn grid() -> Vec<f64> {
        (0..41).map(|k| -0.2 + 0.01 * k as f64).collect()
    }

    #[test]
    fn fit_recovers_exact_coefficients() {
        let e = est_from(&grid(), |x| -0.6723 * x, |x| 0.0023 + 0.0467 * x * x);
        let f = fit_params(&e).unwrap();
        assert!((f.d_over_m - 0.6723).abs() < 1e-12);
        assert!((f.b - 0.0023).abs() < 1e-14);
        assert!((f.c - 0.0467).abs() < 1e-10);
        assert!(f.residuals.drift_rms < 1e-14);
        assert!(f.residuals.diffusion_rms < 1e-14);
    }

    #[test]
    fn fit_constant_diffusion_and_errors() {
        let e = est_from(&grid(), |x| -2.0 * x, |_| 0.3);
        let f = fit_params(&e).unwrap();
        assert!(f.c.abs() < 1e-12);
        assert!((f.b - 0.3).abs() < 1e-12);

        let bad = est_from(&grid(), |x| 0.5 * x, |_| 0.3);
        assert!(matches!(fit_params(&bad), Err(Error::UnstableFit { .. })));

        let neg = est_from(&grid(), |x| -x, |_| -0.1);
        assert!(matches!(fit_params(&neg), Err(Error::DegenerateFit(_))));

        let mut few = est_from(&grid(), |x| -x, |_| 0.1);
        few.masked.iter_mut().skip(4).for_each(|m| *m = true);
        assert!(matches!(fit_params(&few), Err(Error::DegenerateFit(_))));

        // Negative curvature clamps c.
        let curved = est_from(&grid(), |x| -x, |x| 0.3 - x * x);
        let f = fit_params(&curved).unwrap();
        assert_eq!(f.c, 0.0);
        assert!(f.residuals.c_clamped);
    }

    #[test]
    fn masked_points_do_not_enter_the_fit() {
        let mut e = est_from(&grid(), |x| -x, |x| 0.1 + 0.2 * x * x);
        e.d1[3] = 1e6;
        e.d2[7] = f64::NAN;
        e.masked[3] = true;
        e.masked[7] = true;
        let f = fit_params(&e).unwrap();
        assert!((f.d_over_m - 1.0).abs() < 1e-12);
        assert!((f.c - 0.2).abs() < 1e-9);
    }

    #[test]
    fn gaussian_variance_and_moments() {
        let g = gaussian_stationary(&FPParams::new(1.0, 1.0, 0.0).unwrap()).unwrap();
        assert!((g.variance().unwrap() - 1.0).abs() < 1e-10);
        assert!((g.moment(4).unwrap().value - 3.0).abs() < 3e-8);
        assert!((g.kurtosis().unwrap() - 3.0).abs() < 1e-6);
        assert!(g.moment(3).unwrap().value.abs() < 1e-10);

        let p = FPParams { c: 0.0, ..ZA };
        let g = gaussian_stationary(&p).unwrap();
        let var = g.variance().unwrap();
        assert!((var - 0.0023 / 0.6723).abs() < 1e-12);
        assert!((var - 3.421e-3).abs() < 1e-6);
        let sigma = var.sqrt();
        let m4 = g.moment(4).unwrap();
        assert!((m4.value - 3.0 * var * var).abs() < 1e-8 * 3.0 * var * var);
        assert!(m4.nodes >= 2000);
        assert!(m4.doubling_change < 1e-8);
        assert!(g.support > 6.0 * sigma);
        assert!(matches!(gaussian_stationary(&ZA), Err(Error::WrongKind(_))));
    }

    #[test]
    fn densities_integrate_to_one_and_are_symmetric() {
        let cases = [
            gaussian_stationary(&FPParams { c: 0.0, ..ZA }).unwrap(),
            approx_multiplicative(&ZA).unwrap(),
            exact_multiplicative(&ZA).unwrap(),
        ];
        for d in &cases {
            let rule = d.rule(d.support).refined();
            let total = 2.0 * rule.integrate(|w| d.pdf(w));
            assert!((total - 1.0).abs() < 1e-9, "{:?}: {total}", d.kind);
            for w in [0.01, 0.1, 0.3] {
                assert_eq!(d.pdf(w), d.pdf(-w));
            }
            assert!(d.normalization.is_finite() && d.normalization > 0.0);
        }
    }

    #[test]
    fn approx_small_c_matches_gaussian() {
        let g = gaussian_stationary(&FPParams::new(0.6723, 0.0023, 0.0).unwrap()).unwrap();
        let a = approx_multiplicative(&FPParams::new(0.6723, 0.0023, 1e-12).unwrap()).unwrap();
        let sigma = g.variance().unwrap().sqrt();
        for k in 0..=40 {
            let w = -4.0 * sigma + k as f64 * 0.2 * sigma;
            let (pg, pa) = (g.pdf(w), a.pdf(w));
            assert!(((pa - pg) / pg).abs() < 1e-6, "w={w}: {pa} vs {pg}");
        }
    }

    #[test]
    fn approx_integrability_boundary() {
        // AM-GM equality at c = 2 d/m.
        assert!(matches!(
            approx_multiplicative(&FPParams::new(1.0, 1.0, 2.0).unwrap()),
            Err(Error::DivergentDensity(_))
        ));
        assert!(approx_multiplicative(&FPParams::new(1.0, 1.0, 1.9).unwrap()).is_ok());
        assert!(matches!(
            approx_multiplicative(&FPParams::new(1.0, 1.0, 0.0).unwrap()),
            Err(Error::WrongKind(_))
        ));
    }

    #[test]
    fn approx_kurtosis_closed_form_oracle() {
        // e^{-A w^2} cosh(K w^2) is a two-Gaussian mixture; its kurtosis is
        // 3 S(5/2) S(1/2) / S(3/2)^2 with S(q) = (1 - r)^-q + (1 + r)^-q, r = K/A.
        for p in [
            ZA,
            FPParams::new(1.0, 0.5, 0.3).unwrap(),
            FPParams::new(2.0, 1.0, 0.01).unwrap(),
        ] {
            let a = p.d_over_m;
            let r = (a * p.c / 2.0).sqrt() / (a / 2.0 + p.c / 4.0);
            let s = |q: f64| (1.0 - r).powf(-q) + (1.0 + r).powf(-q);
            let oracle = 3.0 * s(2.5) * s(0.5) / (s(1.5) * s(1.5));
            let k = approx_multiplicative(&p).unwrap().kurtosis().unwrap();
            assert!((k - oracle).abs() < 1e-9, "{k} vs {oracle}");
        }
    }

    #[test]
    fn exact_kurtosis_matches_student_t() {
        let d = exact_multiplicative(&ZA).unwrap();
        let nu = ZA.nu();
        assert!((nu - 29.792_291).abs() < 1e-5);
        let closed = exact_kurtosis_closed_form(&ZA).unwrap();
        assert!((closed - 3.2326).abs() < 1e-4);
        let k = d.kurtosis().unwrap();
        assert!((k - closed).abs() < 1e-8, "{k} vs {closed}");
        let m4 = d.moment(4).unwrap();
        assert!(m4.doubling_change < 1e-8);

        // Heavier tails still resolve with graded panels.
        let heavy = FPParams::new(1.0, 1.0, 0.25).unwrap(); // nu = 9
        let k = exact_multiplicative(&heavy).unwrap().kurtosis().unwrap();
        assert!((k - exact_kurtosis_closed_form(&heavy).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn exact_gaussian_limit_and_divergence() {
        let near = FPParams::new(1.0, 1.0, 1e-6).unwrap();
        let k = exact_multiplicative(&near).unwrap().kurtosis().unwrap();
        assert!((k - 3.0).abs() < 1e-4);

        let d = exact_multiplicative(&FPParams::new(1.0, 1.0, 1.0).unwrap()).unwrap();
        assert!(matches!(
            d.moment(4),
            Err(Error::MomentDivergence { order: 4, .. })
        ));
        assert!(matches!(d.kurtosis(), Err(Error::MomentDivergence { .. })));
        assert!(matches!(
            exact_kurtosis_closed_form(&FPParams::new(1.0, 1.0, 1.0).unwrap()),
            Err(Error::MomentDivergence { .. })
        ));
    }

    #[test]
    fn kurtosis_independent_of_b() {
        for kind in [
            DensityKind::ApproxMultiplicative,
            DensityKind::ExactMultiplicative,
        ] {
            let base = stationary(kind, &ZA).unwrap().kurtosis().unwrap();
            for b in [2.3e-5, 2.3e-4, 2.3e-3, 2.3e-2] {
                let p = FPParams { b, ..ZA };
                let k = stationary(kind, &p).unwrap().kurtosis().unwrap();
                assert!((k - base).abs() < 1e-6, "{kind:?} b={b}: {k} vs {base}");
            }
        }
    }

    #[test]
    fn node_doubling_is_stable() {
        for d in [
            approx_multiplicative(&ZA).unwrap(),
            exact_multiplicative(&ZA).unwrap(),
        ] {
            for n in [2, 4, 6] {
                let m = d.moment(n).unwrap();
                assert!(
                    m.doubling_change < 1e-8,
                    "{:?} n={n}: {}",
                    d.kind,
                    m.doubling_change
                );
            }
        }
    }

    #[test]
    #[ignore = "unattainable with the stated closed forms: k_approx ~ 3 + 6 eps and \
                k_exact ~ 3 + 3 eps for small eps, while the bound allows 0.71 eps"]
    fn approx_and_exact_converge() {
        for eps in [0.001, 0.01, 0.03, 0.07] {
            let p = FPParams::new(1.0, 1.0, eps).unwrap();
            let ka = approx_multiplicative(&p).unwrap().kurtosis().unwrap();
            let ke = exact_multiplicative(&p).unwrap().kurtosis().unwrap();
            assert!(
                (ka - ke).abs() <= 0.05 * eps / 0.07,
                "eps={eps}: {ka} vs {ke}"
            );
        }
    }

    #[test]
    fn both_kurtoses_tend_to_three() {
        let mut last = (f64::INFINITY, f64::INFINITY);
        for eps in [0.07, 0.03, 0.01, 0.001] {
            let p = FPParams::new(1.0, 1.0, eps).unwrap();
            let ka = approx_multiplicative(&p).unwrap().kurtosis().unwrap();
            let ke = exact_multiplicative(&p).unwrap().kurtosis().unwrap();
            assert!(ka > 3.0 && ke > 3.0);
            assert!(ka - 3.0 < last.0 && ke - 3.0 < last.1);
            last = (ka - 3.0, ke - 3.0);
        }
        assert!(last.0 < 0.01 && last.1 < 0.01);
    }

    #[test]
    fn gamma_values() {
        assert!((gamma(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!((gamma(2.5) - 0.75 * std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!((gamma(5.0) - 24.0).abs() < 1e-11);
    }
}
