//! Load-shedding events: generation of timed scenarios and their effect on
//! nodal loads.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridModel;

/// MW shed per stage.
pub const MW_PER_STAGE: f64 = 1000.0;

/// Shed-energy weights of stages 1 to 4 for South Africa in 2021.
pub const ZA_2021_STAGE_WEIGHTS: [f64; 4] = [79.0, 1848.0, 210.0, 384.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheddingEvent {
    #[serde(rename = "start_s")]
    pub start: f64,
    #[serde(rename = "duration_s")]
    pub duration: f64,
    pub stage: u8,
    pub epicenter: String,
    #[serde(default)]
    pub neighbors: Vec<String>,
}

impl SheddingEvent {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn magnitude(&self) -> f64 {
        self.stage as f64 * MW_PER_STAGE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub target_fraction: f64,
    /// Horizon the events were laid out over, when known.
    #[serde(
        default,
        rename = "duration_s",
        skip_serializing_if = "Option::is_none"
    )]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub events: Vec<SheddingEvent>,
}

impl Scenario {
    pub fn empty(horizon: f64) -> Self {
        Self {
            target_fraction: 0.0,
            horizon: Some(horizon),
            events: Vec::new(),
        }
    }

    pub fn shed_time(&self) -> f64 {
        self.events.iter().map(|e| e.duration).sum()
    }

    /// Shed time over `horizon`.
    pub fn realized_fraction(&self, horizon: f64) -> f64 {
        self.shed_time() / horizon
    }

    /// Checks ordering, stage range, non-overlap, `[0, horizon]` bounds and
    /// that every referenced node exists.
    pub fn validate(&self, g: &GridModel, horizon: f64) -> Result<()> {
        let mut prev_end = 0.0;
        for (k, e) in self.events.iter().enumerate() {
            if !(e.duration > 0.0) || !e.start.is_finite() {
                return Err(Error::Config(format!(
                    "event {k}: duration must be positive"
                )));
            }
            if !(1..=6).contains(&e.stage) {
                return Err(Error::Config(format!(
                    "event {k}: stage {} outside 1..=6",
                    e.stage
                )));
            }
            if e.start < prev_end {
                return Err(Error::Config(format!(
                    "event {k} starts at {} s before the previous one ends at {prev_end} s",
                    e.start
                )));
            }
            if e.end() > horizon * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "event {k} ends at {} s, after the horizon {horizon} s",
                    e.end()
                )));
            }
            for id in std::iter::once(&e.epicenter).chain(&e.neighbors) {
                if g.find(id).is_none() {
                    return Err(Error::Config(format!("event {k}: unknown node {id:?}")));
                }
            }
            prev_end = e.end();
        }
        Ok(())
    }
}

/// Event law used by [`generate_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOptions {
    /// Relative frequency of stages 1, 2, ...
    pub stage_weights: Vec<f64>,
    /// Mean of the exponential duration law (s).
    pub mean_duration: f64,
    pub min_duration: f64,
    pub max_duration: f64,
    /// Probability that each neighbor of the epicenter is also shed.
    pub neighbor_probability: f64,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            stage_weights: ZA_2021_STAGE_WEIGHTS.to_vec(),
            mean_duration: 2.0 * 3600.0,
            min_duration: 0.5 * 3600.0,
            max_duration: 6.0 * 3600.0,
            neighbor_probability: 0.5,
        }
    }
}

/// Draws non-overlapping events over `horizon` seconds whose total length is
/// `target_fraction · horizon`.
///
/// Durations are exponential, truncated by rejection to
/// `[min_duration, max_duration]`; the final event is shortened to land on
/// the target. The free time is split into uniformly random gaps.
pub fn generate_scenario(
    g: &GridModel,
    target_fraction: f64,
    opts: &ScenarioOptions,
    horizon: f64,
    seed: u64,
) -> Result<Scenario> {
    if !(0.0..0.5).contains(&target_fraction) {
        return Err(Error::Config(format!(
            "target fraction must lie in [0, 0.5), got {target_fraction}"
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Config(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !(opts.mean_duration > 0.0
        && opts.min_duration > 0.0
        && opts.min_duration <= opts.max_duration)
    {
        return Err(Error::Config("invalid event duration law".into()));
    }
    if !(0.0..=1.0).contains(&opts.neighbor_probability) {
        return Err(Error::Config("neighbor probability outside [0, 1]".into()));
    }
    if opts.stage_weights.is_empty() || opts.stage_weights.len() > 6 {
        return Err(Error::Config(
            "between one and six stage weights are required".into(),
        ));
    }
    let stages = WeightedIndex::new(&opts.stage_weights)
        .map_err(|e| Error::Config(format!("stage weights: {e}")))?;
    let exp = Exp::new(1.0 / opts.mean_duration).expect("positive rate");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let target = target_fraction * horizon;
    let mut durations: Vec<f64> = Vec::new();
    let mut total = 0.0;
    while total < target {
        let d = loop {
            let d = exp.sample(&mut rng);
            if (opts.min_duration..=opts.max_duration).contains(&d) {
                break d;
            }
        };
        let d = d.min(target - total);
        durations.push(d);
        total += d;
    }
    // A trimmed remnant shorter than the minimum is folded into its
    // predecessor when that stays within the maximum.
    if durations.len() >= 2 {
        let n = durations.len();
        if durations[n - 1] < opts.min_duration
            && durations[n - 2] + durations[n - 1] <= opts.max_duration
        {
            let last = durations.pop().unwrap();
            *durations.last_mut().unwrap() += last;
        }
    }

    let free = horizon - target;
    let mut cuts: Vec<f64> = (0..durations.len())
        .map(|_| rng.random::<f64>() * free)
        .collect();
    cuts.sort_by(f64::total_cmp);

    let mut events = Vec::with_capacity(durations.len());
    let mut shed_so_far = 0.0;
    for (d, cut) in durations.iter().zip(&cuts) {
        let start = cut + shed_so_far;
        shed_so_far += d;
        let stage = (stages.sample(&mut rng) + 1) as u8;
        let epi = rng.random_range(0..g.len());
        let neighbors = g
            .neighbors(epi)
            .into_iter()
            .filter(|_| rng.random_bool(opts.neighbor_probability))
            .map(|i| g.nodes()[i].id.clone())
            .collect();
        events.push(SheddingEvent {
            start,
            duration: *d,
            stage,
            epicenter: g.nodes()[epi].id.clone(),
            neighbors,
        });
    }
    Ok(Scenario {
        target_fraction,
        horizon: Some(horizon),
        events,
    })
}

/// Result of shedding one event's load.
#[derive(Debug, Clone)]
pub struct EventOutcome {
    pub model: GridModel,
    /// Node indices of the affected set with their load reductions (MW).
    pub reductions: Vec<(usize, f64)>,
    /// MW actually shed.
    pub shed: f64,
    pub warnings: Vec<String>,
}

/// Splits the event's magnitude evenly over the epicenter and its selected
/// neighbors, clamping at each node's load and handing the excess to the
/// others, then redispatches generation so the injections balance.
pub fn apply_event(g: &GridModel, e: &SheddingEvent) -> Result<EventOutcome> {
    let mut affected = Vec::new();
    for id in std::iter::once(&e.epicenter).chain(&e.neighbors) {
        let i = g
            .find(id)
            .ok_or_else(|| Error::Config(format!("unknown node {id:?}")))?;
        if !affected.contains(&i) {
            affected.push(i);
        }
    }
    let loads: Vec<f64> = affected.iter().map(|&i| g.nodes()[i].load).collect();
    let cut = split_shed(e.magnitude(), &loads);
    let shed: f64 = cut.iter().sum();
    let mut warnings = Vec::new();
    if shed < e.magnitude() * (1.0 - 1e-12) {
        warnings.push(format!(
            "event at {} s: affected load {:.1} MW is below the stage {} magnitude {:.0} MW; shed clamped",
            e.start,
            loads.iter().sum::<f64>(),
            e.stage,
            e.magnitude()
        ));
    }
    let mut new_loads: Vec<f64> = g.nodes().iter().map(|n| n.load).collect();
    for (&i, &c) in affected.iter().zip(&cut) {
        new_loads[i] = (new_loads[i] - c).max(0.0);
    }
    let model = g.with_loads(&new_loads)?;
    Ok(EventOutcome {
        model,
        reductions: affected.into_iter().zip(cut).collect(),
        shed,
        warnings,
    })
}

/// Even split of `total` over nodes with the given loads, clamped at each
/// load with the excess redistributed over the unclamped nodes.
pub fn split_shed(total: f64, loads: &[f64]) -> Vec<f64> {
    let mut cut = vec![0.0; loads.len()];
    let mut open: Vec<usize> = (0..loads.len()).filter(|&i| loads[i] > 0.0).collect();
    let mut remaining = total;
    while !open.is_empty() && remaining > 0.0 {
        let share = remaining / open.len() as f64;
        let (full, partial): (Vec<usize>, Vec<usize>) =
            open.iter().partition(|&&i| loads[i] - cut[i] <= share);
        if full.is_empty() {
            for &i in &partial {
                cut[i] += share;
            }
            break;
        }
        for &i in &full {
            remaining -= loads[i] - cut[i];
            cut[i] = loads[i];
        }
        open = partial;
    }
    cut
}
