//! Noisy swing-equation network
//!
//! ```text
//! dθ_j = ω_j dt
//! M_j dω_j = (−D_j ω_j + P_j − Σ_ℓ E_j E_ℓ B_jℓ sin(θ_j − θ_ℓ)) dt + sqrt(2 B) dW_j
//! ```
//!
//! integrated from the power-flow fixed point, with load-shedding events
//! switching the injections `P_j`.

pub mod langevin;
pub mod scenario;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridModel;
use crate::series::{moments, MomentSummary};

pub use scenario::{
    apply_event, generate_scenario, split_shed, EventOutcome, Scenario, ScenarioOptions,
    SheddingEvent, MW_PER_STAGE, ZA_2021_STAGE_WEIGHTS,
};

/// Default noise level `B` (MW²/s).
///
/// On the bundled grid this puts the frequency jitter at the central node
/// near 0.0034 rad/s. The network stays in its linear regime, so runs
/// without events have Gaussian statistics.
pub const DEFAULT_NOISE_B: f64 = 25.0;

/// Default bound on `|ω|` (rad/s) before a run is declared divergent.
pub const DEFAULT_OMEGA_BOUND: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Explicit Euler–Maruyama in both θ and ω.
    #[default]
    EulerMaruyama,
    /// Damping taken implicitly and θ advanced with the updated ω.
    SemiImplicit,
}

impl std::str::FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler-maruyama" | "euler_maruyama" | "em" => Ok(Self::EulerMaruyama),
            "semi-implicit" | "semi_implicit" => Ok(Self::SemiImplicit),
            other => Err(Error::Config(format!("unknown integrator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Simulated time (s).
    pub duration: f64,
    pub noise_b: f64,
    pub seed: u64,
    /// Steps between recorded samples.
    pub output_stride: usize,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "default_bound")]
    pub omega_bound: f64,
    /// Node indices to record; all nodes when absent.
    #[serde(default)]
    pub record: Option<Vec<usize>>,
    #[serde(default)]
    pub record_theta: bool,
}

fn default_bound() -> f64 {
    DEFAULT_OMEGA_BOUND
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            duration: 48.0 * 3600.0,
            noise_b: DEFAULT_NOISE_B,
            seed: 0,
            output_stride: 100,
            integrator: Integrator::EulerMaruyama,
            omega_bound: DEFAULT_OMEGA_BOUND,
            record: None,
            record_theta: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.duration >= self.dt) {
            return Err(Error::Config(format!(
                "duration {} is shorter than one step",
                self.duration
            )));
        }
        if !(self.noise_b >= 0.0 && self.noise_b.is_finite()) {
            return Err(Error::Config(format!(
                "noise_b must be >= 0, got {}",
                self.noise_b
            )));
        }
        if self.output_stride == 0 {
            return Err(Error::Config("output_stride must be >= 1".into()));
        }
        if !(self.omega_bound > 0.0) {
            return Err(Error::Config("omega_bound must be positive".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub times: Vec<f64>,
    /// Recorded node indices.
    pub nodes: Vec<usize>,
    pub node_ids: Vec<String>,
    /// `omega[k]` is the trace of `nodes[k]`.
    pub omega: Vec<Vec<f64>>,
    pub theta: Option<Vec<Vec<f64>>>,
    /// Moments of each recorded trace; `None` for a constant trace.
    pub summary: Vec<Option<MomentSummary>>,
    /// Largest relative injection imbalance `|Σ P| / Σ |P|` over all steps.
    pub max_imbalance: f64,
    /// Fraction of steps spent inside an event window.
    pub shed_fraction: f64,
    pub steps: usize,
    pub warnings: Vec<String>,
}

impl SimResult {
    /// Trace of node index `node`, if recorded.
    pub fn trace(&self, node: usize) -> Option<&[f64]> {
        self.nodes
            .iter()
            .position(|&n| n == node)
            .map(|k| self.omega[k].as_slice())
    }

    /// Long-format CSV `time_s,node_id,omega_rad_s`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io {
            path: "<csv>".into(),
            source: std::io::Error::other(e.to_string()),
        };
        wr.write_record(["time_s", "node_id", "omega_rad_s"])
            .map_err(io)?;
        for (t_idx, t) in self.times.iter().enumerate() {
            for (k, id) in self.node_ids.iter().enumerate() {
                wr.write_record([t.to_string(), id.clone(), self.omega[k][t_idx].to_string()])
                    .map_err(io)?;
            }
        }
        wr.flush().map_err(|source| Error::Io {
            path: "<csv>".into(),
            source,
        })
    }
}

/// Moments of a recorded trace; with `truncate_sigmas = Some(k)` samples
/// further than `k` standard deviations from the mean are dropped once and
/// the moments recomputed.
pub fn node_stats(
    r: &SimResult,
    node: usize,
    truncate_sigmas: Option<f64>,
) -> Result<MomentSummary> {
    let trace = r
        .trace(node)
        .ok_or_else(|| Error::InvalidArgument(format!("node {node} was not recorded")))?;
    trace_stats(trace, truncate_sigmas)
}

pub fn trace_stats(trace: &[f64], truncate_sigmas: Option<f64>) -> Result<MomentSummary> {
    if trace.is_empty() {
        return Err(Error::Degenerate("empty trace".into()));
    }
    let m = moments(trace)?;
    match truncate_sigmas {
        None => Ok(m),
        Some(k) => {
            let sd = m.variance.sqrt();
            let kept: Vec<f64> = trace
                .iter()
                .copied()
                .filter(|x| (x - m.mean).abs() <= k * sd)
                .collect();
            moments(&kept)
        }
    }
}

/// Injections in force over `[start, end)` steps.
struct Phase {
    start: usize,
    end: usize,
    p: Vec<f64>,
}

/// Flattened network used by the inner loop.
struct Network {
    a: Vec<usize>,
    b: Vec<usize>,
    w: Vec<f64>,
    inv_m: Vec<f64>,
    gamma: Vec<f64>,
    kick: Vec<f64>,
}

impl Network {
    fn new(g: &GridModel, noise_b: f64, dt: f64) -> Self {
        let n = g.nodes();
        Self {
            a: g.edges().iter().map(|e| e.a).collect(),
            b: g.edges().iter().map(|e| e.b).collect(),
            w: g.edges()
                .iter()
                .map(|e| n[e.a].voltage * n[e.b].voltage * e.susceptance)
                .collect(),
            inv_m: n.iter().map(|x| 1.0 / x.inertia).collect(),
            gamma: n.iter().map(|x| x.damping / x.inertia).collect(),
            kick: n
                .iter()
                .map(|x| (2.0 * noise_b * dt).sqrt() / x.inertia)
                .collect(),
        }
    }

    fn injection(&self, theta: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..self.w.len() {
            let (a, b) = (self.a[k], self.b[k]);
            let f = self.w[k] * (theta[a] - theta[b]).sin();
            out[a] += f;
            out[b] -= f;
        }
    }
}

/// Integrates the network from its fixed point under `sc`.
pub fn simulate(g: &GridModel, cfg: &SimConfig, sc: &Scenario) -> Result<SimResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    run(g, cfg, sc, |z: &mut [f64]| {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    })
}

/// As [`simulate`], with standard normal draws supplied by `noise`, one call
/// per step filling one value per node.
pub fn run<F: FnMut(&mut [f64])>(
    g: &GridModel,
    cfg: &SimConfig,
    sc: &Scenario,
    mut noise: F,
) -> Result<SimResult> {
    cfg.validate()?;
    let steps = cfg.steps();
    let horizon = steps as f64 * cfg.dt;
    sc.validate(g, horizon.max(cfg.duration))?;
    let n = g.len();
    let recorded: Vec<usize> = match &cfg.record {
        Some(v) => {
            if let Some(&bad) = v.iter().find(|&&i| i >= n) {
                return Err(Error::Config(format!("recorded node {bad} out of range")));
            }
            v.clone()
        }
        None => (0..n).collect(),
    };

    let fp = g.fixed_point()?;
    let mut warnings = Vec::new();
    let mut max_imbalance = g.power_imbalance();
    let mut phases = Vec::new();
    let mut shed_steps = 0usize;
    for e in &sc.events {
        let out = apply_event(g, e)?;
        warnings.extend(out.warnings);
        max_imbalance = max_imbalance.max(out.model.power_imbalance());
        let start = ((e.start / cfg.dt).round() as usize).min(steps);
        let end = ((e.end() / cfg.dt).round() as usize).min(steps);
        if end > start {
            shed_steps += end - start;
            phases.push(Phase {
                start,
                end,
                p: out.model.p_mech(),
            });
        }
    }
    // Injections must be balanced at every instant for the network to keep
    // a fixed point to return to.
    if max_imbalance > 1e-9 {
        return Err(Error::Config(format!(
            "injections are unbalanced (relative imbalance {max_imbalance:.2e})"
        )));
    }

    let net = Network::new(g, cfg.noise_b, cfg.dt);
    let base = g.p_mech();
    let dt = cfg.dt;
    let mut theta = fp.theta.clone();
    let mut omega = vec![0.0; n];
    let mut inj = vec![0.0; n];
    let mut z = vec![0.0; n];

    let records = steps / cfg.output_stride;
    let mut times = Vec::with_capacity(records);
    let mut om_out: Vec<Vec<f64>> = recorded
        .iter()
        .map(|_| Vec::with_capacity(records))
        .collect();
    let mut th_out: Option<Vec<Vec<f64>>> = cfg.record_theta.then(|| {
        recorded
            .iter()
            .map(|_| Vec::with_capacity(records))
            .collect()
    });

    let mut next_phase = 0usize;
    let mut active: Option<usize> = None;
    for step in 0..steps {
        if let Some(k) = active {
            if step >= phases[k].end {
                active = None;
            }
        }
        if active.is_none() && next_phase < phases.len() && step >= phases[next_phase].start {
            active = Some(next_phase);
            next_phase += 1;
        }
        let p = match active {
            Some(k) => &phases[k].p,
            None => &base,
        };

        net.injection(&theta, &mut inj);
        noise(&mut z);
        let t = (step + 1) as f64 * dt;
        match cfg.integrator {
            Integrator::EulerMaruyama => {
                for i in 0..n {
                    let w = omega[i];
                    let acc = (p[i] - inj[i]) * net.inv_m[i] - net.gamma[i] * w;
                    omega[i] = w + dt * acc + net.kick[i] * z[i];
                    theta[i] += dt * w;
                }
            }
            Integrator::SemiImplicit => {
                for i in 0..n {
                    let w = omega[i] + dt * (p[i] - inj[i]) * net.inv_m[i] + net.kick[i] * z[i];
                    omega[i] = w / (1.0 + dt * net.gamma[i]);
                    theta[i] += dt * omega[i];
                }
            }
        }
        let peak = omega.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !peak.is_finite() || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(t));
        }
        if peak > cfg.omega_bound {
            return Err(Error::Divergence {
                time: t,
                omega: peak,
            });
        }
        if (step + 1) % cfg.output_stride == 0 {
            times.push(t);
            for (k, &i) in recorded.iter().enumerate() {
                om_out[k].push(omega[i]);
            }
            if let Some(th) = th_out.as_mut() {
                for (k, &i) in recorded.iter().enumerate() {
                    th[k].push(theta[i]);
                }
            }
        }
    }

    let summary = om_out.iter().map(|tr| moments(tr).ok()).collect();
    Ok(SimResult {
        times,
        node_ids: recorded.iter().map(|&i| g.nodes()[i].id.clone()).collect(),
        nodes: recorded,
        omega: om_out,
        theta: th_out,
        summary,
        max_imbalance,
        shed_fraction: if steps > 0 {
            shed_steps as f64 / steps as f64
        } else {
            0.0
        },
        steps,
        warnings,
    })
}
